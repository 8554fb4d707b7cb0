#include "dsseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dsseg/io.hpp"
#include "dsseg/pseudolabel.hpp"

namespace dsseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* selection_mode_name(SelectionMode m) {
    switch (m) {
        case SelectionMode::entropy: return "entropy";
        case SelectionMode::fixed_1: return "fixed_1";
        case SelectionMode::fixed_2: return "fixed_2";
        case SelectionMode::average: return "average";
    }
    return "entropy";
}

SelectionMode parse_selection_mode(const std::string& s) {
    if (s == "entropy") return SelectionMode::entropy;
    if (s == "fixed_1") return SelectionMode::fixed_1;
    if (s == "fixed_2") return SelectionMode::fixed_2;
    if (s == "average") return SelectionMode::average;
    throw ValidationError("unknown selection_mode '" + s + "'");
}

void scale_in_place(NdArray<double>& a, double s) {
    for (auto& v : a) v *= s;
}

void add_scaled(NdArray<double>& acc, const NdArray<double>& g, double s) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += s * g[i];
}

Sample augmented(const Sample& s, const TrainConfig& cfg, std::uint64_t seed) {
    return augment(s, cfg.crop_shape, seed, cfg.flip_axes);
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw FormatError("bad number '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        throw FormatError("bad number '" + s + "'");
    }
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

void write_loss_csv(const fs::path& path, const std::vector<double>& losses) {
    std::ostringstream os;
    os << "t,loss\n";
    for (std::size_t t = 0; t < losses.size(); ++t) os << t << ',' << fmt17(losses[t]) << '\n';
    io::write_text(path, os.str());
}

fs::path pretrain_dir(const TrainConfig& cfg) { return cfg.output_dir / "pretrain"; }

}  // namespace

void TrainConfig::validate() const {
    if (pretrain_iters < 0 || selftrain_iters < 0) throw ValidationError("TrainConfig: iteration counts must be >= 0");
    if (labeled_per_batch < 1 || unlabeled_per_batch < 1) {
        throw ValidationError("TrainConfig: batch counts must be >= 1");
    }
    if (eval_every < 1) throw ValidationError("TrainConfig: eval_every must be >= 1");
    if (crop_shape.size() != static_cast<std::size_t>(net.dims)) {
        throw ValidationError("TrainConfig: crop_shape rank must equal net.dims");
    }
    for (auto d : crop_shape) {
        if (d == 0 || d % net.size_multiple() != 0) {
            throw ValidationError("TrainConfig: crop dims must be positive multiples of " +
                                  std::to_string(net.size_multiple()));
        }
    }
    for (auto a : flip_axes) {
        if (a >= crop_shape.size()) throw ValidationError("TrainConfig: flip axis out of range");
    }
    if (!dual_student && selection_mode != SelectionMode::fixed_1) {
        throw ValidationError("TrainConfig: a single student requires selection_mode fixed_1");
    }
    optimizer.validate();
    loss_weights.validate();
    mix.validate();
    laema.validate();
    net.validate();
}

json to_json(const TrainConfig& c) {
    return {{"dataset_dir", c.dataset_dir.string()},
            {"output_dir", c.output_dir.string()},
            {"init_checkpoint", c.init_checkpoint.string()},
            {"pretrain_iters", c.pretrain_iters},
            {"selftrain_iters", c.selftrain_iters},
            {"labeled_per_batch", c.labeled_per_batch},
            {"unlabeled_per_batch", c.unlabeled_per_batch},
            {"crop_shape", c.crop_shape},
            {"flip_axes", c.flip_axes},
            {"optimizer", to_json(c.optimizer)},
            {"eval_every", c.eval_every},
            {"loss_weights", {{"alpha", c.loss_weights.alpha}, {"beta", c.loss_weights.beta}}},
            {"mix", {{"zero_ratio", c.mix.zero_ratio}, {"per_student_masks", c.mix.per_student_masks}}},
            {"laema",
             {{"w_max", c.laema.w_max},
              {"lambda", c.laema.lambda},
              {"mode", c.laema.mode == EmaMode::standard_ema ? "standard_ema" : "la_ema"}}},
            {"net", to_json(c.net)},
            {"seed", c.seed},
            {"dual_student", c.dual_student},
            {"selection_mode", selection_mode_name(c.selection_mode)},
            {"score", c.score == ScoreKind::shannon ? "shannon" : "self_cross_entropy"},
            {"mse_reduction", c.mse_reduction == MseReduction::global_mean ? "global_mean" : "masked_mean"},
            {"pseudo_label_adjacency", c.pseudo_label_adjacency == Adjacency::full ? "full" : "face"},
            {"write_outputs", c.write_outputs}};
}

TrainConfig train_config_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("train config must be a JSON object");
    TrainConfig c;
    try {
        if (j.contains("dataset_dir")) c.dataset_dir = j.at("dataset_dir").get<std::string>();
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("init_checkpoint")) c.init_checkpoint = j.at("init_checkpoint").get<std::string>();
        c.pretrain_iters = j.value("pretrain_iters", c.pretrain_iters);
        c.selftrain_iters = j.value("selftrain_iters", c.selftrain_iters);
        c.labeled_per_batch = j.value("labeled_per_batch", c.labeled_per_batch);
        c.unlabeled_per_batch = j.value("unlabeled_per_batch", c.unlabeled_per_batch);
        if (j.contains("net")) c.net = net_config_from_json(j.at("net"));
        if (j.contains("crop_shape")) {
            c.crop_shape = j.at("crop_shape").get<Shape>();
        } else if (c.net.dims == 3) {
            c.crop_shape = {32, 32, 32};
        }
        if (j.contains("flip_axes")) {
            c.flip_axes = j.at("flip_axes").get<std::vector<std::size_t>>();
        } else if (c.net.dims == 3) {
            c.flip_axes = {0, 1, 2};
        }
        if (j.contains("optimizer")) {
            c.optimizer = optimizer_config_from_json(j.at("optimizer"));
        } else if (c.net.dims == 3) {
            c.optimizer = OptimizerConfig::sgd();
        }
        c.eval_every = j.value("eval_every", c.eval_every);
        if (j.contains("loss_weights")) {
            const auto& w = j.at("loss_weights");
            c.loss_weights.alpha = w.value("alpha", c.loss_weights.alpha);
            c.loss_weights.beta = w.value("beta", c.loss_weights.beta);
        }
        if (j.contains("mix")) {
            const auto& m = j.at("mix");
            if (m.contains("zero_ratio")) {
                const auto& r = m.at("zero_ratio");
                c.mix.zero_ratio = r.is_array() ? r.get<std::vector<double>>() : std::vector<double>{r.get<double>()};
            }
            c.mix.per_student_masks = m.value("per_student_masks", c.mix.per_student_masks);
        }
        if (j.contains("laema")) {
            const auto& l = j.at("laema");
            c.laema.w_max = l.value("w_max", c.laema.w_max);
            c.laema.lambda = l.value("lambda", c.laema.lambda);
            const std::string mode = l.value("mode", std::string("la_ema"));
            if (mode == "standard_ema") {
                c.laema.mode = EmaMode::standard_ema;
            } else if (mode != "la_ema") {
                throw ValidationError("unknown laema.mode '" + mode + "'");
            }
        }
        c.seed = j.value("seed", c.seed);
        c.dual_student = j.value("dual_student", c.dual_student);
        if (j.contains("selection_mode")) c.selection_mode = parse_selection_mode(j.at("selection_mode"));
        const std::string score = j.value("score", std::string("self_cross_entropy"));
        if (score == "shannon") {
            c.score = ScoreKind::shannon;
        } else if (score != "self_cross_entropy") {
            throw ValidationError("unknown score '" + score + "'");
        }
        const std::string red = j.value("mse_reduction", std::string("masked_mean"));
        if (red == "global_mean") {
            c.mse_reduction = MseReduction::global_mean;
        } else if (red != "masked_mean") {
            throw ValidationError("unknown mse_reduction '" + red + "'");
        }
        const std::string adj = j.value("pseudo_label_adjacency", std::string("face"));
        if (adj == "full") {
            c.pseudo_label_adjacency = Adjacency::full;
        } else if (adj != "face") {
            throw ValidationError("unknown pseudo_label_adjacency '" + adj + "'");
        }
        c.write_outputs = j.value("write_outputs", c.write_outputs);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

TrainConfig load_train_config(const fs::path& path) {
    TrainConfig c = train_config_from_json(io::read_json(path));
    // Relative paths in a config file are taken relative to the file.
    const fs::path base = path.parent_path();
    auto resolve = [&](fs::path& p) {
        if (!p.empty() && p.is_relative()) p = base / p;
    };
    resolve(c.dataset_dir);
    resolve(c.output_dir);
    resolve(c.init_checkpoint);
    return c;
}

void write_train_log_csv(std::ostream& os, const std::vector<TrainLogRow>& rows) {
    os << "t,L_1,L_2,chosen_student,E_1,E_2,w_global,w_decay,w_t,fallback_used,val_dice\n";
    for (const auto& r : rows) {
        os << r.t << ',' << fmt17(r.loss1) << ',' << fmt17(r.loss2) << ',' << r.chosen_student << ','
           << fmt17(r.score1) << ',' << fmt17(r.score2) << ',' << fmt17(r.w_global) << ',' << fmt17(r.w_decay) << ','
           << fmt17(r.w) << ',' << (r.fallback_used ? 1 : 0) << ',' << (r.val_dice ? fmt17(*r.val_dice) : "")
           << '\n';
    }
}

std::vector<TrainLogRow> read_train_log_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("training log is empty");
    const auto header = split_csv(line);
    auto col = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw FormatError("training log lacks column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ct = col("t"), cl1 = col("L_1"), cl2 = col("L_2"), cc = col("chosen_student"),
                      ce1 = col("E_1"), ce2 = col("E_2"), cg = col("w_global"), cd = col("w_decay"), cw = col("w_t"),
                      cf = col("fallback_used"), cv = col("val_dice");
    std::vector<TrainLogRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size()) throw FormatError("training log row has wrong column count: " + line);
        TrainLogRow r;
        r.t = static_cast<long long>(parse_double(cells[ct]));
        r.loss1 = parse_double(cells[cl1]);
        r.loss2 = parse_double(cells[cl2]);
        r.chosen_student = static_cast<int>(parse_double(cells[cc]));
        r.score1 = parse_double(cells[ce1]);
        r.score2 = parse_double(cells[ce2]);
        r.w_global = parse_double(cells[cg]);
        r.w_decay = parse_double(cells[cd]);
        r.w = parse_double(cells[cw]);
        r.fallback_used = parse_double(cells[cf]) != 0.0;
        if (!cells[cv].empty()) r.val_dice = parse_double(cells[cv]);
        rows.push_back(r);
    }
    return rows;
}

CyclicSampler::CyclicSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    if (n == 0) throw ValidationError("CyclicSampler: empty index set");
    reshuffle();
}

void CyclicSampler::reshuffle() {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
    pos_ = 0;
}

std::size_t CyclicSampler::next() {
    if (pos_ == order_.size()) reshuffle();
    return order_[pos_++];
}

TrainingData load_training_data(const fs::path& dataset_dir) {
    TrainingData d;
    d.manifest = load_manifest(dataset_dir);
    for (const auto& id : d.manifest.labeled_ids) {
        Sample s = load_sample(dataset_dir / id, LabelPolicy::load);
        if (!s.label) throw ValidationError("labeled sample '" + id + "' has no label");
        d.labeled.push_back(std::move(s));
    }
    for (const auto& id : d.manifest.unlabeled_ids) d.unlabeled.push_back(load_sample(dataset_dir / id, LabelPolicy::skip));
    for (const auto& id : d.manifest.val_ids) {
        Sample s = load_sample(dataset_dir / id, LabelPolicy::load);
        if (!s.label) throw ValidationError("validation sample '" + id + "' has no label");
        d.val.push_back(std::move(s));
    }
    return d;
}

PretrainResult pretrain(const TrainConfig& cfg) { return pretrain(cfg, load_training_data(cfg.dataset_dir)); }

PretrainResult pretrain(const TrainConfig& cfg, const TrainingData& data) {
    cfg.validate();
    if (data.labeled.empty()) throw ValidationError("pretrain: the labeled set is empty");

    UNet net(cfg.net);
    ParameterTree params = net.parameters();
    Optimizer opt(cfg.optimizer);
    CyclicSampler sampler(data.labeled.size(), derive_seed(cfg.seed, {streams::kPretrainOrder}));
    const auto B = static_cast<std::size_t>(cfg.labeled_per_batch);

    PretrainResult out;
    for (long long t = 0; t < cfg.pretrain_iters; ++t) {
        ParameterTree grads = params.zeros_like();
        double loss = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            const Sample s = augmented(data.labeled[sampler.next()], cfg,
                                       streams::augment_seed(cfg.seed, streams::kPretrainPhase, t, b));
            auto tape = make_tape();
            const auto logits =
                net.forward(s.image, true, streams::dropout_seed(cfg.seed, streams::kPretrainPhase, 0, t, b), *tape);
            const ProbMap p = softmax(logits);
            LossGrad lg = combined_seg_loss_grad(p, *s.label);
            loss += lg.value / static_cast<double>(B);
            NdArray<double> gz = softmax_backward(p, lg.grad);
            scale_in_place(gz, 1.0 / static_cast<double>(B));
            net.backward(*tape, gz, grads);
        }
        opt.step(params, grads);
        net.set_parameters(params);
        out.losses.push_back(loss);
    }
    out.checkpoint = Checkpoint{cfg.pretrain_iters, cfg.net, params};

    if (cfg.write_outputs) {
        io::ensure_dir(cfg.output_dir);
        save_checkpoint(out.checkpoint, pretrain_dir(cfg));
        write_loss_csv(cfg.output_dir / "pretrain_loss.csv", out.losses);
    }
    return out;
}

LabelMap predict_labels(const UNet& net, const Volume& x) { return softmax(net.forward(x)).argmax_labels(); }

CaseMetrics evaluate(const UNet& net, const std::vector<Sample>& samples) {
    CaseMetrics out;
    for (const auto& s : samples) {
        if (!s.label) throw ValidationError("evaluate: sample '" + s.id + "' has no label");
        out.emplace_back(s.id, evaluate_case(predict_labels(net, s.image), *s.label, s.image.spacing()));
    }
    return out;
}

CaseMetrics evaluate(const Checkpoint& ckpt, const fs::path& dataset_dir, const std::string& split) {
    const DatasetManifest m = load_manifest(dataset_dir);
    std::vector<std::string> ids;
    if (split == "labeled") {
        ids = m.labeled_ids;
    } else if (split == "unlabeled") {
        ids = m.unlabeled_ids;
    } else if (split == "val") {
        ids = m.val_ids;
    } else if (split == "all") {
        ids = m.ids;
        ids.insert(ids.end(), m.val_ids.begin(), m.val_ids.end());
    } else {
        throw ValidationError("evaluate: unknown split '" + split + "' (labeled, unlabeled, val, all)");
    }
    if (ids.empty()) throw ValidationError("evaluate: split '" + split + "' is empty");
    std::vector<Sample> samples;
    for (const auto& id : ids) samples.push_back(load_sample(dataset_dir / id, LabelPolicy::load));
    const UNet net(ckpt.net, ckpt.params);
    return evaluate(net, samples);
}

SelfTrainResult self_train(const TrainConfig& cfg, const Checkpoint& init, const SelfTrainHooks& hooks) {
    return self_train(cfg, init, load_training_data(cfg.dataset_dir), hooks);
}

SelfTrainResult self_train(const TrainConfig& cfg, const Checkpoint& init, const TrainingData& data,
                           const SelfTrainHooks& hooks) {
    cfg.validate();
    if (data.labeled.empty()) throw ValidationError("self_train: the labeled set is empty");
    if (data.unlabeled.empty()) throw ValidationError("self_train: the unlabeled set is empty");
    if (to_json(init.net) != to_json(cfg.net)) {
        throw CongruenceError("self_train: checkpoint network config differs from the training config");
    }

    const int n_students = cfg.dual_student ? 2 : 1;
    const UNet teacher_net(cfg.net, init.params);
    ParameterTree teacher = init.params;
    std::vector<ParameterTree> student(n_students, init.params);
    std::vector<UNet> student_net(n_students, teacher_net);
    std::vector<Optimizer> opt(n_students, Optimizer(cfg.optimizer));
    UNet teacher_view = teacher_net;
    LossAwareEma ema(cfg.laema);

    CyclicSampler lab_sampler(data.labeled.size(), derive_seed(cfg.seed, {streams::kLabeledOrder}));
    CyclicSampler unl_sampler(data.unlabeled.size(), derive_seed(cfg.seed, {streams::kUnlabeledOrder}));
    const auto Lb = static_cast<std::size_t>(cfg.labeled_per_batch);
    const auto Ub = static_cast<std::size_t>(cfg.unlabeled_per_batch);
    const std::size_t P = std::max(Lb, Ub);
    const double inv_p = 1.0 / static_cast<double>(P);
    const auto ratios = cfg.mix.ratios_for(cfg.crop_shape.size());
    const auto& w = cfg.loss_weights;

    SelfTrainResult res;
    res.best_teacher = Checkpoint{0, cfg.net, teacher};
    if (cfg.write_outputs) io::ensure_dir(cfg.output_dir);

    for (long long t = 0; t < cfg.selftrain_iters; ++t) {
        // (1) batch
        std::vector<Sample> xl, xu;
        for (std::size_t b = 0; b < Lb; ++b) {
            xl.push_back(augmented(data.labeled[lab_sampler.next()], cfg,
                                   streams::augment_seed(cfg.seed, streams::kSelfTrainPhase, t, b)));
        }
        for (std::size_t b = 0; b < Ub; ++b) {
            xu.push_back(augmented(data.unlabeled[unl_sampler.next()], cfg,
                                   streams::augment_seed(cfg.seed, streams::kSelfTrainPhase, t, Lb + b)));
        }

        // (2) filtered teacher pseudo-labels
        std::vector<LabelMap> yu;
        for (const auto& s : xu) {
            const ProbMap p = predict([&](const Volume& v) { return teacher_view.forward(v); }, s.image);
            yu.push_back(largest_component_filter(p.argmax_labels(), cfg.pseudo_label_adjacency));
            ++res.pseudo_labels_filtered;
        }
        ++res.pseudo_label_batches;

        // (3)-(4) mixed inputs, student forwards, losses
        struct Fwd {
            CutMixPair mixed;
            ForwardTapePtr tape_u2l, tape_l2u;
            ProbMap p_u2l, p_l2u;
        };
        std::vector<std::vector<Fwd>> fwd(n_students);
        for (std::size_t k = 0; k < P; ++k) {
            const Sample& sl = xl[k % Lb];
            const std::size_t ku = k % Ub;
            const BinaryMask shared = make_zero_centered_mask(cfg.crop_shape, ratios, streams::mask_seed(cfg.seed, t, k, 0));
            for (int s = 0; s < n_students; ++s) {
                const BinaryMask mask = cfg.mix.per_student_masks
                                            ? make_zero_centered_mask(cfg.crop_shape, ratios,
                                                                      streams::mask_seed(cfg.seed, t, k, s + 1))
                                            : shared;
                Fwd f;
                f.mixed = cutmix_pair(sl.image, xu[ku].image, *sl.label, yu[ku], mask);
                f.tape_u2l = make_tape();
                f.tape_l2u = make_tape();
                const auto sid = static_cast<std::size_t>(s + 1);
                f.p_u2l = softmax(student_net[s].forward(
                    f.mixed.x_u2l, true, streams::dropout_seed(cfg.seed, streams::kSelfTrainPhase, sid, t, 2 * k),
                    *f.tape_u2l));
                f.p_l2u = softmax(student_net[s].forward(
                    f.mixed.x_l2u, true, streams::dropout_seed(cfg.seed, streams::kSelfTrainPhase, sid, t, 2 * k + 1),
                    *f.tape_l2u));
                fwd[s].push_back(std::move(f));
            }
        }

        std::vector<double> loss(n_students, 0.0);
        for (int s = 0; s < n_students; ++s) {
            ParameterTree grads = student[s].zeros_like();
            for (std::size_t k = 0; k < P; ++k) {
                Fwd& f = fwd[s][k];
                LossGrad seg_u2l = combined_seg_loss_grad(f.p_u2l, f.mixed.y_u2l);
                LossGrad seg_l2u = combined_seg_loss_grad(f.p_l2u, f.mixed.y_l2u);
                const double cm = seg_u2l.value + seg_l2u.value;
                double mse = 0.0;
                NdArray<double> g_u2l = seg_u2l.grad, g_l2u = seg_l2u.grad;
                scale_in_place(g_u2l, w.alpha);
                scale_in_place(g_l2u, w.alpha);
                if (cfg.dual_student) {
                    const Fwd& o = fwd[1 - s][k];
                    const BinaryMask m_u2l = disagreement_mask(f.p_u2l, o.p_u2l);
                    const BinaryMask m_l2u = disagreement_mask(f.p_l2u, o.p_l2u);
                    LossGrad mu = masked_mse_grad(f.p_u2l, f.mixed.y_u2l, m_u2l, cfg.mse_reduction);
                    LossGrad ml = masked_mse_grad(f.p_l2u, f.mixed.y_l2u, m_l2u, cfg.mse_reduction);
                    mse = mu.value + ml.value;
                    add_scaled(g_u2l, mu.grad, w.beta);
                    add_scaled(g_l2u, ml.grad, w.beta);
                }
                loss[s] += total_student_loss(cm, mse, w) * inv_p;
                NdArray<double> gz_u2l = softmax_backward(f.p_u2l, g_u2l);
                NdArray<double> gz_l2u = softmax_backward(f.p_l2u, g_l2u);
                scale_in_place(gz_u2l, inv_p);
                scale_in_place(gz_l2u, inv_p);
                student_net[s].backward(*f.tape_u2l, gz_u2l, grads);
                student_net[s].backward(*f.tape_l2u, gz_l2u, grads);
            }
            // (5) optimizer step
            opt[s].step(student[s], grads);
            student_net[s].set_parameters(student[s]);
        }
        fwd.clear();

        // (6) selection on the unmixed unlabeled batch
        TrainLogRow row;
        row.t = t;
        row.loss1 = loss[0];
        row.loss2 = cfg.dual_student ? loss[1] : 0.0;
        if (cfg.dual_student) {
            std::vector<ProbMap> pu1, pu2;
            for (const auto& s : xu) {
                pu1.push_back(softmax(student_net[0].forward(s.image)));
                pu2.push_back(softmax(student_net[1].forward(s.image)));
            }
            const SelectionOutcome sel = select_student(pu1, pu2, cfg.score);
            row.score1 = sel.score1;
            row.score2 = sel.score2;
            row.fallback_used = sel.fallback_used;
            row.chosen_student = sel.chosen;
        }

        // (7)-(8) teacher update
        double chosen_loss = loss[0];
        switch (cfg.selection_mode) {
            case SelectionMode::entropy:
                chosen_loss = loss[static_cast<std::size_t>(row.chosen_student - 1)];
                ema.step(teacher, student[static_cast<std::size_t>(row.chosen_student - 1)], chosen_loss);
                break;
            case SelectionMode::fixed_1:
                row.chosen_student = 1;
                ema.step(teacher, student[0], chosen_loss);
                break;
            case SelectionMode::fixed_2:
                row.chosen_student = 2;
                chosen_loss = loss[1];
                ema.step(teacher, student[1], chosen_loss);
                break;
            case SelectionMode::average:
                row.chosen_student = 0;
                chosen_loss = 0.5 * (loss[0] + loss[1]);
                ema.step(teacher, tree_axpy(student[0], student[1], 0.5, 0.5), chosen_loss);
                break;
        }
        teacher_view.set_parameters(teacher);
        const LAEMAState& st = ema.state();
        row.w_global = st.last_w_global;
        row.w_decay = st.last_w_decay;
        row.w = st.last_w;
        if (hooks.on_teacher_update) hooks.on_teacher_update(t, teacher);

        // (9) periodic validation
        if (!data.val.empty() && ((t + 1) % cfg.eval_every == 0 || t + 1 == cfg.selftrain_iters)) {
            const double dice = mean_dice(evaluate(teacher_view, data.val));
            row.val_dice = dice;
            if (!res.best_val_dice || dice > *res.best_val_dice) {
                res.best_val_dice = dice;
                res.best_teacher = Checkpoint{t + 1, cfg.net, teacher};
                if (cfg.write_outputs) save_checkpoint(res.best_teacher, cfg.output_dir / "best_teacher");
            }
        }
        res.log.push_back(row);
    }

    const long long iters = cfg.selftrain_iters;
    res.teacher = Checkpoint{iters, cfg.net, teacher};
    res.student1 = Checkpoint{iters, cfg.net, student[0]};
    res.student2 = Checkpoint{iters, cfg.net, cfg.dual_student ? student[1] : student[0]};
    if (!res.best_val_dice) res.best_teacher = res.teacher;

    if (cfg.write_outputs) {
        save_checkpoint(res.teacher, cfg.output_dir / "teacher");
        save_checkpoint(res.student1, cfg.output_dir / "student1");
        if (cfg.dual_student) save_checkpoint(res.student2, cfg.output_dir / "student2");
        if (!res.best_val_dice) save_checkpoint(res.best_teacher, cfg.output_dir / "best_teacher");
        std::ostringstream os;
        write_train_log_csv(os, res.log);
        io::write_text(cfg.output_dir / "train_log.csv", os.str());
    }
    return res;
}

}  // namespace dsseg
