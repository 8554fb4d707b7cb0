#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dsseg/io.hpp"
#include "dsseg/plot.hpp"
#include "dsseg/synthdata.hpp"
#include "dsseg/theory.hpp"
#include "dsseg/trainer.hpp"

namespace fs = std::filesystem;
using namespace dsseg;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kIo = 2;
constexpr int kUsage = 64;

int run_gen_data(const fs::path& spec_path, const fs::path& out_dir) {
    const DatasetSpec spec = dataset_spec_from_json(io::read_json(spec_path));
    const DatasetManifest m = generate_dataset(spec, out_dir);
    std::cout << "wrote " << m.ids.size() << " samples (" << m.labeled_ids.size() << " labeled, "
              << m.unlabeled_ids.size() << " unlabeled, " << m.val_ids.size() << " val) to " << out_dir.string()
              << "\n";
    return kOk;
}

int run_pretrain(const fs::path& config_path) {
    TrainConfig cfg = load_train_config(config_path);
    cfg.write_outputs = true;
    const PretrainResult r = pretrain(cfg);
    std::cout << "pretrained " << cfg.pretrain_iters << " iterations";
    if (!r.losses.empty()) std::printf(", final batch loss %.6f", r.losses.back());
    std::cout << "\ncheckpoint: " << (cfg.output_dir / "pretrain").string() << "\n";
    return kOk;
}

int run_train(const fs::path& config_path) {
    TrainConfig cfg = load_train_config(config_path);
    cfg.write_outputs = true;
    io::ensure_dir(cfg.output_dir);
    io::write_json(cfg.output_dir / "config.json", to_json(cfg));

    const TrainingData data = load_training_data(cfg.dataset_dir);
    Checkpoint init;
    if (!cfg.init_checkpoint.empty()) {
        init = load_checkpoint(cfg.init_checkpoint);
    } else if (fs::exists(cfg.output_dir / "pretrain" / "manifest.json")) {
        init = load_checkpoint(cfg.output_dir / "pretrain");
    } else {
        std::cout << "no pretrained checkpoint found; pretraining first\n";
        init = pretrain(cfg, data).checkpoint;
    }
    const SelfTrainResult r = self_train(cfg, init, data);
    std::cout << "self-trained " << cfg.selftrain_iters << " iterations\n";
    if (r.best_val_dice) std::printf("best teacher val dice %.4f\n", *r.best_val_dice);
    std::cout << "outputs: " << cfg.output_dir.string() << "\n";
    return kOk;
}

int run_eval(const fs::path& ckpt_dir, const fs::path& dataset_dir, const std::string& split, const fs::path& out) {
    const Checkpoint ckpt = load_checkpoint(ckpt_dir);
    const CaseMetrics cases = evaluate(ckpt, dataset_dir, split);
    std::ostringstream os;
    write_metrics_csv(os, cases, ckpt.net.num_classes);
    if (out.empty()) {
        std::cout << os.str();
    } else {
        io::write_text(out, os.str());
        std::printf("mean dice %.4f over %zu cases; report: %s\n", mean_dice(cases), cases.size(),
                    out.string().c_str());
    }
    return kOk;
}

int run_verify_prop1(const fs::path& spec_path, const fs::path& csv_out) {
    const NoiseModelSpec spec = noise_spec_from_json(io::read_json(spec_path));
    const SuppressionReport rep =
        check_suppression(simulate_deviation(spec, EmaMode::standard_ema), simulate_deviation(spec, EmaMode::la_ema));
    if (!csv_out.empty()) {
        std::ostringstream os;
        write_suppression_csv(os, rep);
        io::write_text(csv_out, os.str());
    }
    std::cout << (rep.suppression_expected ? "suppression expected (lambda * loss > 0)\n"
                                           : "no suppression expected; checking ratio = 1\n");
    std::printf("%6s %14s %14s %10s %10s %5s\n", "t", "mean_std", "mean_la", "ratio", "ratio_se", "pass");
    const std::size_t n = rep.rows.size();
    for (std::size_t i = 0; i < n; ++i) {
        // Print a readable subset; the CSV carries every iteration.
        if (n > 12 && i > 2 && i + 3 < n && (i + 1) % 10 != 0) continue;
        const auto& r = rep.rows[i];
        std::printf("%6lld %14.6g %14.6g %10.6f %10.6f %5s\n", r.t, r.mean_std, r.mean_la, r.ratio, r.ratio_se,
                    r.pass ? "yes" : "no");
    }
    std::cout << (rep.all_pass ? "all iterations pass\n" : "check FAILED at one or more iterations\n");
    return rep.all_pass ? kOk : kValidation;
}

int run_plot_log(const fs::path& csv, const fs::path& png) {
    std::istringstream is(io::read_text(csv));
    const auto rows = read_train_log_csv(is);
    write_png(render_val_dice(rows), png);
    std::cout << "wrote " << png.string() << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-student semi-supervised segmentation with loss-aware EMA teacher updates", "dsseg"};
    app.require_subcommand(0, 1);

    std::string a1, a2, split = "unlabeled", out;

    auto* gen = app.add_subcommand("gen-data", "Generate a seeded synthetic dataset");
    gen->add_option("spec", a1, "Dataset spec JSON")->required();
    gen->add_option("out_dir", a2, "Output directory")->required();

    auto* pre = app.add_subcommand("pretrain", "Supervised pretraining on the labeled split");
    pre->add_option("config", a1, "Training config JSON")->required();

    auto* train = app.add_subcommand("train", "Dual-student self-training (pretrains first if needed)");
    train->add_option("config", a1, "Training config JSON")->required();

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    ev->add_option("checkpoint", a1, "Checkpoint directory")->required();
    ev->add_option("dataset", a2, "Dataset directory")->required();
    ev->add_option("--split", split, "labeled, unlabeled, val or all")
        ->check(CLI::IsMember({"labeled", "unlabeled", "val", "all"}))
        ->capture_default_str();
    ev->add_option("-o,--out", out, "Write the metrics CSV here instead of stdout");

    auto* prop = app.add_subcommand("verify-prop1", "Monte Carlo check of LA-EMA variance suppression");
    prop->add_option("spec", a1, "Noise model spec JSON")->required();
    prop->add_option("--csv", out, "Write the full per-iteration report here");

    auto* plot = app.add_subcommand("plot-log", "Plot teacher validation Dice from a training log");
    plot->add_option("log", a1, "train_log.csv")->required();
    plot->add_option("png", a2, "Output PNG")->required();

    if (argc < 2) {
        std::cerr << app.help();
        return kUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return kUsage;
    }

    try {
        if (gen->parsed()) return run_gen_data(a1, a2);
        if (pre->parsed()) return run_pretrain(a1);
        if (train->parsed()) return run_train(a1);
        if (ev->parsed()) return run_eval(a1, a2, split, out);
        if (prop->parsed()) return run_verify_prop1(a1, out);
        if (plot->parsed()) return run_plot_log(a1, a2);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kIo;
    }
    std::cerr << app.help();
    return kUsage;
}
