#include "dsseg/network.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>

#include "dsseg/grid.hpp"
#include "dsseg/io.hpp"
#include "dsseg/rng.hpp"

namespace dsseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const Mat>;
using MatMap = Eigen::Map<Mat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

std::size_t kernel_volume(int dims) { return dims == 3 ? 27 : 9; }

// For every kernel offset k (row-major over {-1,0,1}^dims) and voxel v: index of v + offset_k, or -1 outside.
struct NeighbourTable {
    std::size_t taps = 0;
    std::size_t voxels = 0;
    std::vector<std::int32_t> index;
};

const NeighbourTable& neighbour_table(const Shape& spatial) {
    thread_local std::map<Shape, NeighbourTable> cache;
    auto it = cache.find(spatial);
    if (it != cache.end()) return it->second;

    NeighbourTable t;
    t.taps = spatial.size() == 3 ? 27 : 9;
    t.voxels = shape_numel(spatial);
    t.index.assign(t.taps * t.voxels, -1);
    std::vector<std::size_t> coord;
    std::vector<int> off(spatial.size());
    for (std::size_t k = 0; k < t.taps; ++k) {
        std::size_t r = k;
        for (std::size_t i = spatial.size(); i-- > 0;) {
            off[i] = static_cast<int>(r % 3) - 1;
            r /= 3;
        }
        for (std::size_t v = 0; v < t.voxels; ++v) {
            unravel(v, spatial, coord);
            std::size_t u;
            if (neighbour_index(coord, off, spatial, u)) t.index[k * t.voxels + v] = static_cast<std::int32_t>(u);
        }
    }
    return cache.emplace(spatial, std::move(t)).first->second;
}

// For a fine grid: index of the coarse (half-size) voxel containing each fine voxel.
const std::vector<std::int32_t>& parent_table(const Shape& fine) {
    thread_local std::map<Shape, std::vector<std::int32_t>> cache;
    auto it = cache.find(fine);
    if (it != cache.end()) return it->second;
    Shape coarse = fine;
    for (auto& d : coarse) d /= 2;
    std::vector<std::int32_t> parent(shape_numel(fine));
    std::vector<std::size_t> coord;
    for (std::size_t v = 0; v < parent.size(); ++v) {
        unravel(v, fine, coord);
        for (auto& c : coord) c /= 2;
        parent[v] = static_cast<std::int32_t>(ravel(coord, coarse));
    }
    return cache.emplace(fine, std::move(parent)).first->second;
}

Mat im2col(const Mat& x, const NeighbourTable& t) {
    Mat cols(x.rows() * static_cast<Eigen::Index>(t.taps), static_cast<Eigen::Index>(t.voxels));
    for (Eigen::Index ci = 0; ci < x.rows(); ++ci) {
        const double* src = x.row(ci).data();
        for (std::size_t k = 0; k < t.taps; ++k) {
            double* dst = cols.row(ci * static_cast<Eigen::Index>(t.taps) + static_cast<Eigen::Index>(k)).data();
            const std::int32_t* nb = t.index.data() + k * t.voxels;
            for (std::size_t v = 0; v < t.voxels; ++v) dst[v] = nb[v] >= 0 ? src[nb[v]] : 0.0;
        }
    }
    return cols;
}

void col2im_add(const Mat& dcols, const NeighbourTable& t, Mat& dx) {
    for (Eigen::Index ci = 0; ci < dx.rows(); ++ci) {
        double* dst = dx.row(ci).data();
        for (std::size_t k = 0; k < t.taps; ++k) {
            const double* src = dcols.row(ci * static_cast<Eigen::Index>(t.taps) + static_cast<Eigen::Index>(k)).data();
            const std::int32_t* nb = t.index.data() + k * t.voxels;
            for (std::size_t v = 0; v < t.voxels; ++v) {
                if (nb[v] >= 0) dst[nb[v]] += src[v];
            }
        }
    }
}

struct ConvSpec {
    std::string name;
    int cin = 0;
    int cout = 0;
    bool spatial_kernel = true;  // false for the 1x1 head
    std::size_t weight = 0;      // entry index in the parameter tree
    std::size_t bias = 0;
};

struct Layout {
    std::vector<ConvSpec> enc_a, enc_b;
    ConvSpec bott_a, bott_b;
    std::vector<ConvSpec> dec_a, dec_b;  // indexed by level
    ConvSpec head;
};

int width(const NetConfig& cfg, int level) { return cfg.base_width << level; }

Layout make_layout(const NetConfig& cfg) {
    Layout L;
    std::size_t next = 0;
    auto conv = [&](std::string name, int cin, int cout, bool spatial = true) {
        ConvSpec s{std::move(name), cin, cout, spatial, next, next + 1};
        next += 2;
        return s;
    };
    int cin = cfg.in_channels;
    for (int l = 0; l < cfg.depth; ++l) {
        const std::string p = "enc" + std::to_string(l);
        L.enc_a.push_back(conv(p + ".conv1", cin, width(cfg, l)));
        L.enc_b.push_back(conv(p + ".conv2", width(cfg, l), width(cfg, l)));
        cin = width(cfg, l);
    }
    L.bott_a = conv("bottleneck.conv1", cin, width(cfg, cfg.depth));
    L.bott_b = conv("bottleneck.conv2", width(cfg, cfg.depth), width(cfg, cfg.depth));
    L.dec_a.resize(static_cast<std::size_t>(cfg.depth));
    L.dec_b.resize(static_cast<std::size_t>(cfg.depth));
    for (int l = cfg.depth - 1; l >= 0; --l) {
        const std::string p = "dec" + std::to_string(l);
        L.dec_a[static_cast<std::size_t>(l)] = conv(p + ".conv1", width(cfg, l + 1) + width(cfg, l), width(cfg, l));
        L.dec_b[static_cast<std::size_t>(l)] = conv(p + ".conv2", width(cfg, l), width(cfg, l));
    }
    L.head = conv("head", width(cfg, 0), cfg.num_classes, false);
    return L;
}

std::vector<const ConvSpec*> all_convs(const Layout& L) {
    std::vector<const ConvSpec*> out;
    for (std::size_t l = 0; l < L.enc_a.size(); ++l) {
        out.push_back(&L.enc_a[l]);
        out.push_back(&L.enc_b[l]);
    }
    out.push_back(&L.bott_a);
    out.push_back(&L.bott_b);
    for (std::size_t l = L.dec_a.size(); l-- > 0;) {
        out.push_back(&L.dec_a[l]);
        out.push_back(&L.dec_b[l]);
    }
    out.push_back(&L.head);
    return out;
}

Shape weight_shape(const ConvSpec& s, int dims) {
    Shape shape{static_cast<std::size_t>(s.cout), static_cast<std::size_t>(s.cin)};
    if (s.spatial_kernel) shape.insert(shape.end(), static_cast<std::size_t>(dims), 3);
    return shape;
}

// With `randomize` false the tree only carries the layout (all zeros).
ParameterTree init_parameters(const NetConfig& cfg, bool randomize = true) {
    const Layout L = make_layout(cfg);
    Rng rng(derive_seed(cfg.init_seed, {0x1417}));
    ParameterTree tree;
    for (const ConvSpec* s : all_convs(L)) {
        const Shape ws = weight_shape(*s, cfg.dims);
        const std::size_t fan_in = static_cast<std::size_t>(s->cin) * (s->spatial_kernel ? kernel_volume(cfg.dims) : 1);
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        NdArray<double> w(ws);
        if (randomize) {
            for (auto& v : w) v = rng.normal(0.0, stddev);
        }
        tree.add(s->name + ".weight", std::move(w));
        tree.add(s->name + ".bias", NdArray<double>(Shape{static_cast<std::size_t>(s->cout)}, 0.0));
    }
    return tree;
}

ConstMatMap weight_map(const ParameterTree& p, const ConvSpec& s, int dims) {
    const std::size_t taps = s.spatial_kernel ? kernel_volume(dims) : 1;
    return ConstMatMap(p[s.weight].array.data(), s.cout, static_cast<Eigen::Index>(s.cin * taps));
}

void relu_inplace(Mat& m) { m = m.cwiseMax(0.0); }

void relu_backward(Mat& grad, const Mat& activated) {
    const Eigen::Index n = grad.size();
    double* g = grad.data();
    const double* a = activated.data();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (a[i] <= 0.0) g[i] = 0.0;
    }
}

Shape halve(const Shape& s) {
    Shape out = s;
    for (auto& d : out) d /= 2;
    return out;
}

}  // namespace

struct ForwardTape {
    std::vector<Shape> level_shape;  // level_shape[l] = input spatial / 2^l, l = 0..depth
    std::vector<Mat> enc_in, enc_mid, enc_out;
    std::vector<std::vector<std::int32_t>> pool_arg;
    Mat bott_in, bott_mid, bott_out, bott_drop;
    std::vector<Mat> dec_in, dec_mid, dec_out, dec_drop;
    Mat head_in;
};

void ForwardTapeDeleter::operator()(ForwardTape* t) const { delete t; }
ForwardTapePtr make_tape() { return ForwardTapePtr(new ForwardTape()); }

namespace {

Mat conv_forward(const Mat& x, const ParameterTree& p, const ConvSpec& s, int dims, const Shape& spatial) {
    const auto w = weight_map(p, s, dims);
    const ConstVecMap b(p[s.bias].array.data(), s.cout);
    Mat y;
    if (s.spatial_kernel) {
        y.noalias() = w * im2col(x, neighbour_table(spatial));
    } else {
        y.noalias() = w * x;
    }
    y.colwise() += b;
    return y;
}

// Accumulates weight/bias gradients; writes dL/dx into *dx when requested.
void conv_backward(const Mat& x, const Mat& dy, const ParameterTree& p, const ConvSpec& s, int dims,
                   const Shape& spatial, ParameterTree& grads, Mat* dx) {
    const auto w = weight_map(p, s, dims);
    MatMap dw(grads[s.weight].array.data(), w.rows(), w.cols());
    VecMap db(grads[s.bias].array.data(), s.cout);
    db += dy.rowwise().sum();
    if (!s.spatial_kernel) {
        dw.noalias() += dy * x.transpose();
        if (dx) dx->noalias() = w.transpose() * dy;
        return;
    }
    const auto& table = neighbour_table(spatial);
    const Mat cols = im2col(x, table);
    dw.noalias() += dy * cols.transpose();
    if (dx) {
        const Mat dcols = w.transpose() * dy;
        *dx = Mat::Zero(x.rows(), x.cols());
        col2im_add(dcols, table, *dx);
    }
}

Mat maxpool(const Mat& x, const Shape& fine, std::vector<std::int32_t>& arg) {
    const Shape coarse = halve(fine);
    const std::size_t n_out = shape_numel(coarse);
    const std::size_t n_in = shape_numel(fine);
    const auto& parent = parent_table(fine);
    Mat y = Mat::Constant(x.rows(), static_cast<Eigen::Index>(n_out), -std::numeric_limits<double>::infinity());
    arg.assign(static_cast<std::size_t>(x.rows()) * n_out, -1);
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
        const double* src = x.row(c).data();
        double* dst = y.row(c).data();
        std::int32_t* a = arg.data() + static_cast<std::size_t>(c) * n_out;
        for (std::size_t v = 0; v < n_in; ++v) {
            const auto o = static_cast<std::size_t>(parent[v]);
            if (src[v] > dst[o]) {
                dst[o] = src[v];
                a[o] = static_cast<std::int32_t>(v);
            }
        }
    }
    return y;
}

Mat maxpool_backward(const Mat& dy, const std::vector<std::int32_t>& arg, std::size_t n_in) {
    Mat dx = Mat::Zero(dy.rows(), static_cast<Eigen::Index>(n_in));
    const auto n_out = static_cast<std::size_t>(dy.cols());
    for (Eigen::Index c = 0; c < dy.rows(); ++c) {
        const std::int32_t* a = arg.data() + static_cast<std::size_t>(c) * n_out;
        for (std::size_t o = 0; o < n_out; ++o) dx(c, a[o]) += dy(c, static_cast<Eigen::Index>(o));
    }
    return dx;
}

Mat upsample(const Mat& x, const Shape& fine) {
    const auto& parent = parent_table(fine);
    Mat y(x.rows(), static_cast<Eigen::Index>(parent.size()));
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
        const double* src = x.row(c).data();
        double* dst = y.row(c).data();
        for (std::size_t v = 0; v < parent.size(); ++v) dst[v] = src[parent[v]];
    }
    return y;
}

Mat upsample_backward(const Mat& dy, const Shape& fine, std::size_t n_coarse) {
    const auto& parent = parent_table(fine);
    Mat dx = Mat::Zero(dy.rows(), static_cast<Eigen::Index>(n_coarse));
    for (Eigen::Index c = 0; c < dy.rows(); ++c) {
        const double* src = dy.row(c).data();
        double* dst = dx.row(c).data();
        for (std::size_t v = 0; v < parent.size(); ++v) dst[parent[v]] += src[v];
    }
    return dx;
}

// Inverted dropout; returns the multiplicative mask (0 or 1/(1-rate)).
Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed) {
    Rng rng(seed);
    Mat m(rows, cols);
    const double keep = 1.0 / (1.0 - rate);
    double* d = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) d[i] = rng.uniform() < rate ? 0.0 : keep;
    return m;
}

}  // namespace

void NetConfig::validate() const {
    if (in_channels < 1) throw ValidationError("NetConfig: in_channels must be >= 1");
    if (num_classes < 2) throw ValidationError("NetConfig: num_classes must be >= 2");
    if (base_width < 1) throw ValidationError("NetConfig: base_width must be >= 1");
    if (depth < 1 || depth > 6) throw ValidationError("NetConfig: depth must lie in [1, 6]");
    if (dims != 2 && dims != 3) throw ValidationError("NetConfig: dims must be 2 or 3");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValidationError("NetConfig: dropout_rate must lie in [0, 1)");
}

json to_json(const NetConfig& cfg) {
    return {{"in_channels", cfg.in_channels}, {"num_classes", cfg.num_classes}, {"base_width", cfg.base_width},
            {"depth", cfg.depth},             {"dims", cfg.dims},               {"dropout_rate", cfg.dropout_rate},
            {"init_seed", cfg.init_seed}};
}

NetConfig net_config_from_json(const json& j) {
    NetConfig c;
    try {
        c.in_channels = j.value("in_channels", c.in_channels);
        c.num_classes = j.value("num_classes", c.num_classes);
        c.base_width = j.value("base_width", c.base_width);
        c.depth = j.value("depth", c.depth);
        if (j.contains("dims")) {
            const auto& d = j.at("dims");
            if (d.is_string()) {
                const auto s = d.get<std::string>();
                if (s == "2D" || s == "2d") c.dims = 2;
                else if (s == "3D" || s == "3d") c.dims = 3;
                else throw ValidationError("NetConfig: dims must be \"2D\" or \"3D\"");
            } else {
                c.dims = d.get<int>();
            }
        }
        c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
        c.init_seed = j.value("init_seed", c.init_seed);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("net config: ") + e.what());
    }
    c.validate();
    return c;
}

UNet::UNet(NetConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    params_ = init_parameters(cfg_);
}

UNet::UNet(NetConfig cfg, ParameterTree params) : cfg_(cfg) {
    cfg_.validate();
    set_parameters(std::move(params));
}

void UNet::set_parameters(ParameterTree params) {
    require_congruent(init_parameters(cfg_, false), params);
    params_ = std::move(params);
}

NdArray<double> UNet::forward(const Volume& x, bool stochastic, std::uint64_t dropout_seed) const {
    ForwardTape tape;
    return forward(x, stochastic, dropout_seed, tape);
}

NdArray<double> UNet::forward(const Volume& x, bool stochastic, std::uint64_t dropout_seed, ForwardTape& tape) const {
    const Shape spatial = x.spatial_shape();
    if (spatial.size() != static_cast<std::size_t>(cfg_.dims)) {
        throw ValidationError("UNet::forward: expected " + std::to_string(cfg_.dims) + " spatial axes, got " +
                              shape_str(spatial));
    }
    if (x.channels() != static_cast<std::size_t>(cfg_.in_channels)) {
        throw ValidationError("UNet::forward: expected " + std::to_string(cfg_.in_channels) + " input channels");
    }
    for (auto d : spatial) {
        if (d % cfg_.size_multiple() != 0) {
            throw ValidationError("UNet::forward: spatial shape " + shape_str(spatial) + " not divisible by " +
                                  std::to_string(cfg_.size_multiple()));
        }
    }
    const Layout L = make_layout(cfg_);
    const auto depth = static_cast<std::size_t>(cfg_.depth);
    const bool drop = stochastic && cfg_.dropout_rate > 0.0;

    tape = ForwardTape{};
    tape.level_shape.push_back(spatial);
    for (std::size_t l = 0; l < depth; ++l) tape.level_shape.push_back(halve(tape.level_shape.back()));
    tape.enc_in.resize(depth);
    tape.enc_mid.resize(depth);
    tape.enc_out.resize(depth);
    tape.pool_arg.resize(depth);
    tape.dec_in.resize(depth);
    tape.dec_mid.resize(depth);
    tape.dec_out.resize(depth);
    tape.dec_drop.resize(depth);

    Mat cur = ConstMatMap(x.data().data(), static_cast<Eigen::Index>(x.channels()),
                          static_cast<Eigen::Index>(x.voxels()));
    for (std::size_t l = 0; l < depth; ++l) {
        const Shape& s = tape.level_shape[l];
        tape.enc_in[l] = std::move(cur);
        tape.enc_mid[l] = conv_forward(tape.enc_in[l], params_, L.enc_a[l], cfg_.dims, s);
        relu_inplace(tape.enc_mid[l]);
        tape.enc_out[l] = conv_forward(tape.enc_mid[l], params_, L.enc_b[l], cfg_.dims, s);
        relu_inplace(tape.enc_out[l]);
        cur = maxpool(tape.enc_out[l], s, tape.pool_arg[l]);
    }

    const Shape& sb = tape.level_shape[depth];
    tape.bott_in = std::move(cur);
    tape.bott_mid = conv_forward(tape.bott_in, params_, L.bott_a, cfg_.dims, sb);
    relu_inplace(tape.bott_mid);
    tape.bott_out = conv_forward(tape.bott_mid, params_, L.bott_b, cfg_.dims, sb);
    relu_inplace(tape.bott_out);
    cur = tape.bott_out;
    if (drop) {
        tape.bott_drop = dropout_mask(cur.rows(), cur.cols(), cfg_.dropout_rate, derive_seed(dropout_seed, {depth}));
        cur = cur.cwiseProduct(tape.bott_drop);
    }

    for (std::size_t l = depth; l-- > 0;) {
        const Shape& s = tape.level_shape[l];
        const Mat up = upsample(cur, s);
        Mat cat(up.rows() + tape.enc_out[l].rows(), up.cols());
        cat.topRows(up.rows()) = up;
        cat.bottomRows(tape.enc_out[l].rows()) = tape.enc_out[l];
        tape.dec_in[l] = std::move(cat);
        tape.dec_mid[l] = conv_forward(tape.dec_in[l], params_, L.dec_a[l], cfg_.dims, s);
        relu_inplace(tape.dec_mid[l]);
        tape.dec_out[l] = conv_forward(tape.dec_mid[l], params_, L.dec_b[l], cfg_.dims, s);
        relu_inplace(tape.dec_out[l]);
        cur = tape.dec_out[l];
        if (drop && l > 0) {
            tape.dec_drop[l] = dropout_mask(cur.rows(), cur.cols(), cfg_.dropout_rate, derive_seed(dropout_seed, {l}));
            cur = cur.cwiseProduct(tape.dec_drop[l]);
        }
    }

    tape.head_in = std::move(cur);
    const Mat logits = conv_forward(tape.head_in, params_, L.head, cfg_.dims, spatial);

    Shape out_shape{static_cast<std::size_t>(cfg_.num_classes)};
    out_shape.insert(out_shape.end(), spatial.begin(), spatial.end());
    return NdArray<double>(out_shape, std::vector<double>(logits.data(), logits.data() + logits.size()));
}

void UNet::backward(const ForwardTape& tape, const NdArray<double>& grad_logits, ParameterTree& grads) const {
    require_congruent(params_, grads);
    if (tape.level_shape.empty()) throw ValidationError("UNet::backward: empty tape");
    const Layout L = make_layout(cfg_);
    const auto depth = static_cast<std::size_t>(cfg_.depth);
    const Shape& spatial = tape.level_shape[0];
    if (grad_logits.size() != static_cast<std::size_t>(cfg_.num_classes) * shape_numel(spatial)) {
        throw ValidationError("UNet::backward: gradient shape " + shape_str(grad_logits.shape()));
    }

    Mat g = ConstMatMap(grad_logits.data(), cfg_.num_classes, static_cast<Eigen::Index>(shape_numel(spatial)));
    Mat dx;
    conv_backward(tape.head_in, g, params_, L.head, cfg_.dims, spatial, grads, &dx);
    g = std::move(dx);

    std::vector<Mat> skip_grad(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        const Shape& s = tape.level_shape[l];
        if (tape.dec_drop[l].size() > 0) g = g.cwiseProduct(tape.dec_drop[l]);
        relu_backward(g, tape.dec_out[l]);
        conv_backward(tape.dec_mid[l], g, params_, L.dec_b[l], cfg_.dims, s, grads, &dx);
        g = std::move(dx);
        relu_backward(g, tape.dec_mid[l]);
        conv_backward(tape.dec_in[l], g, params_, L.dec_a[l], cfg_.dims, s, grads, &dx);
        const Eigen::Index up_rows = dx.rows() - tape.enc_out[l].rows();
        skip_grad[l] = dx.bottomRows(tape.enc_out[l].rows());
        g = upsample_backward(dx.topRows(up_rows), s, shape_numel(tape.level_shape[l + 1]));
    }

    const Shape& sb = tape.level_shape[depth];
    if (tape.bott_drop.size() > 0) g = g.cwiseProduct(tape.bott_drop);
    relu_backward(g, tape.bott_out);
    conv_backward(tape.bott_mid, g, params_, L.bott_b, cfg_.dims, sb, grads, &dx);
    g = std::move(dx);
    relu_backward(g, tape.bott_mid);
    conv_backward(tape.bott_in, g, params_, L.bott_a, cfg_.dims, sb, grads, &dx);
    g = std::move(dx);

    for (std::size_t l = depth; l-- > 0;) {
        const Shape& s = tape.level_shape[l];
        g = maxpool_backward(g, tape.pool_arg[l], shape_numel(s));
        g += skip_grad[l];
        relu_backward(g, tape.enc_out[l]);
        conv_backward(tape.enc_mid[l], g, params_, L.enc_b[l], cfg_.dims, s, grads, &dx);
        g = std::move(dx);
        relu_backward(g, tape.enc_mid[l]);
        conv_backward(tape.enc_in[l], g, params_, L.enc_a[l], cfg_.dims, s, grads, l > 0 ? &dx : nullptr);
        if (l > 0) g = std::move(dx);
    }
}

UNet build_network(const NetConfig& cfg) { return UNet(cfg); }

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
    io::ensure_dir(dir);
    json entries = json::array();
    std::vector<char> payload;
    payload.reserve(ckpt.params.parameter_count() * 8);
    for (const auto& e : ckpt.params.entries()) {
        entries.push_back({{"name", e.name}, {"shape", e.array.shape()}, {"dtype", "f64"}});
        for (double v : e.array) io::append_le(payload, v);
    }
    const json manifest{{"version", 1},
                        {"iteration", ckpt.iteration},
                        {"net", to_json(ckpt.net)},
                        {"entries", entries},
                        {"payload", "weights.bin"},
                        {"byte_order", "little-endian"}};
    io::write_bytes(dir / "weights.bin", payload);
    io::write_json(dir / "manifest.json", manifest);
}

Checkpoint load_checkpoint(const fs::path& dir) {
    const fs::path mp = dir / "manifest.json";
    if (!fs::exists(mp)) throw IoError("missing checkpoint manifest " + mp.string());
    const json m = io::read_json(mp);
    Checkpoint ckpt;
    std::string payload_name = "weights.bin";
    std::vector<std::pair<std::string, Shape>> layout;
    try {
        ckpt.iteration = m.at("iteration").get<long long>();
        ckpt.net = net_config_from_json(m.at("net"));
        payload_name = m.value("payload", payload_name);
        for (const auto& e : m.at("entries")) {
            if (e.value("dtype", std::string("f64")) != "f64") throw FormatError("checkpoint dtype must be f64");
            layout.emplace_back(e.at("name").get<std::string>(), e.at("shape").get<Shape>());
        }
    } catch (const json::exception& e) {
        throw FormatError(mp.string() + ": " + e.what());
    }
    const auto bytes = io::read_bytes(dir / payload_name);
    std::size_t expected = 0;
    for (const auto& [name, shape] : layout) expected += shape_numel(shape) * 8;
    if (bytes.size() != expected) {
        throw FormatError(dir.string() + ": weights payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(expected));
    }
    std::size_t off = 0;
    for (const auto& [name, shape] : layout) {
        NdArray<double> a(shape);
        for (auto& v : a) {
            v = io::load_le<double>(bytes.data() + off);
            off += 8;
        }
        ckpt.params.add(name, std::move(a));
    }
    return ckpt;
}

}  // namespace dsseg
