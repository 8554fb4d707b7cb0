#include "dsseg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "dsseg/grid.hpp"
#include "dsseg/io.hpp"
#include "dsseg/rng.hpp"

namespace dsseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kTrainStream = 0;
constexpr std::uint64_t kValStream = 1;
constexpr std::uint64_t kSplitStream = 2;

std::string family_name(ShapeFamily f) {
    switch (f) {
        case ShapeFamily::ellipses: return "ellipses";
        case ShapeFamily::rectangles: return "rectangles";
        case ShapeFamily::mixed: return "mixed";
    }
    return "mixed";
}

ShapeFamily family_from(const std::string& s) {
    if (s == "ellipses") return ShapeFamily::ellipses;
    if (s == "rectangles") return ShapeFamily::rectangles;
    if (s == "mixed") return ShapeFamily::mixed;
    throw ValidationError("unknown shape_family '" + s + "'");
}

std::string sample_id(int index, bool is_val) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%03d", is_val ? "val" : "case", index);
    return buf;
}

struct ShapeDraw {
    bool ellipse = true;
    std::vector<double> center;
    std::vector<double> radius;
    double angle = 0.0;  // rotation in the plane of the last two axes
};

ShapeDraw draw_shape(const DatasetSpec& spec, Rng& rng) {
    ShapeDraw s;
    switch (spec.shape_family) {
        case ShapeFamily::ellipses: s.ellipse = true; break;
        case ShapeFamily::rectangles: s.ellipse = false; break;
        case ShapeFamily::mixed: s.ellipse = rng.coin(); break;
    }
    for (auto d : spec.shape) {
        const double dim = static_cast<double>(d);
        s.center.push_back(rng.uniform(0.25, 0.75) * dim);
        s.radius.push_back(std::max(1.0, rng.uniform(0.08, 0.22) * dim));
    }
    s.angle = rng.uniform(0.0, std::numbers::pi);
    return s;
}

bool inside(const ShapeDraw& s, const std::vector<std::size_t>& coord) {
    const std::size_t k = coord.size();
    std::vector<double> rel(k);
    for (std::size_t i = 0; i < k; ++i) rel[i] = static_cast<double>(coord[i]) + 0.5 - s.center[i];
    const double c = std::cos(s.angle), sn = std::sin(s.angle);
    const double a = rel[k - 2], b = rel[k - 1];
    rel[k - 2] = c * a + sn * b;
    rel[k - 1] = -sn * a + c * b;
    if (s.ellipse) {
        double q = 0.0;
        for (std::size_t i = 0; i < k; ++i) q += (rel[i] / s.radius[i]) * (rel[i] / s.radius[i]);
        return q <= 1.0;
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (std::abs(rel[i]) > s.radius[i]) return false;
    }
    return true;
}

json header_json(const Sample& s) {
    json h;
    h["version"] = 1;
    h["dims"] = s.image.spatial_shape();
    h["channels"] = s.image.channels();
    h["spacing"] = s.image.spacing();
    h["byte_order"] = "little-endian";
    h["image"] = {{"file", "image.bin"}, {"dtype", "f32"}};
    if (s.label) {
        h["num_classes"] = s.label->num_classes();
        h["label"] = {{"file", "label.bin"}, {"dtype", "i32"}};
    }
    return h;
}

}  // namespace

void DatasetSpec::validate() const {
    if (num_samples < 2) throw ValidationError("DatasetSpec: num_samples must be >= 2");
    if (shape.size() != 2 && shape.size() != 3) throw ValidationError("DatasetSpec: shape must have 2 or 3 axes");
    for (auto d : shape) {
        if (d < 4) throw ValidationError("DatasetSpec: every spatial dim must be >= 4");
    }
    if (num_classes < 2) throw ValidationError("DatasetSpec: num_classes must be >= 2");
    if (!(noise_sigma >= 0.0)) throw ValidationError("DatasetSpec: noise_sigma must be >= 0");
    if (!(intensity_overlap >= 0.0 && intensity_overlap <= 1.0)) {
        throw ValidationError("DatasetSpec: intensity_overlap must lie in [0, 1]");
    }
    if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0)) {
        throw ValidationError("DatasetSpec: labeled_fraction must lie in (0, 1]");
    }
    if (num_val < 0) throw ValidationError("DatasetSpec: num_val must be >= 0");
}

int DatasetSpec::labeled_count() const {
    const auto n = static_cast<int>(std::llround(labeled_fraction * num_samples));
    return std::clamp(n, 1, num_samples);
}

std::vector<IntensityBand> intensity_bands(const DatasetSpec& spec) {
    const double step = 1.0 / static_cast<double>(spec.num_classes - 1);
    const double half = step * (0.25 + 0.25 * spec.intensity_overlap);
    std::vector<IntensityBand> bands;
    for (int k = 0; k < spec.num_classes; ++k) {
        const double c = k * step;
        bands.push_back({c - half, c + half});
    }
    return bands;
}

json to_json(const DatasetSpec& spec) {
    return {{"num_samples", spec.num_samples},
            {"shape", spec.shape},
            {"num_classes", spec.num_classes},
            {"shape_family", family_name(spec.shape_family)},
            {"noise_sigma", spec.noise_sigma},
            {"intensity_overlap", spec.intensity_overlap},
            {"labeled_fraction", spec.labeled_fraction},
            {"num_val", spec.num_val},
            {"seed", spec.seed}};
}

DatasetSpec dataset_spec_from_json(const json& j) {
    DatasetSpec s;
    try {
        s.num_samples = j.value("num_samples", s.num_samples);
        s.shape = j.value("shape", s.shape);
        s.num_classes = j.value("num_classes", s.num_classes);
        s.shape_family = family_from(j.value("shape_family", family_name(s.shape_family)));
        s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
        s.intensity_overlap = j.value("intensity_overlap", s.intensity_overlap);
        s.labeled_fraction = j.value("labeled_fraction", s.labeled_fraction);
        s.num_val = j.value("num_val", s.num_val);
        s.seed = j.value("seed", s.seed);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("dataset spec: ") + e.what());
    }
    s.validate();
    return s;
}

json to_json(const DatasetManifest& m) {
    return {{"version", m.version},       {"ids", m.ids},         {"labeled_ids", m.labeled_ids},
            {"unlabeled_ids", m.unlabeled_ids}, {"val_ids", m.val_ids}, {"spec", to_json(m.spec)}};
}

DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest m;
    try {
        m.version = j.at("version").get<int>();
        m.ids = j.at("ids").get<std::vector<std::string>>();
        m.labeled_ids = j.at("labeled_ids").get<std::vector<std::string>>();
        m.unlabeled_ids = j.at("unlabeled_ids").get<std::vector<std::string>>();
        m.val_ids = j.value("val_ids", std::vector<std::string>{});
        m.spec = dataset_spec_from_json(j.at("spec"));
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    return m;
}

Sample synthesize_sample(const DatasetSpec& spec, int index, bool is_val) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, {is_val ? kValStream : kTrainStream, static_cast<std::uint64_t>(index)}));
    const auto bands = intensity_bands(spec);
    const std::size_t n = shape_numel(spec.shape);
    const auto fg = static_cast<std::uint64_t>(spec.num_classes - 1);

    NdArray<std::int32_t> label(spec.shape, 0);
    std::vector<double> base(n, rng.uniform(bands[0].lo, bands[0].hi));

    const int extra = static_cast<int>(rng.below(3));
    std::vector<std::pair<std::int32_t, ShapeDraw>> shapes;
    for (int s = 0; s < extra; ++s) {
        const auto cls = static_cast<std::int32_t>(1 + rng.below(fg));
        shapes.emplace_back(cls, draw_shape(spec, rng));
    }
    // Painted last so every foreground class shows up across consecutive samples.
    shapes.emplace_back(static_cast<std::int32_t>(1 + static_cast<std::uint64_t>(index) % fg), draw_shape(spec, rng));

    std::vector<std::size_t> coord;
    for (const auto& [cls, shape] : shapes) {
        const double level = rng.uniform(bands[cls].lo, bands[cls].hi);
        for (std::size_t v = 0; v < n; ++v) {
            unravel(v, spec.shape, coord);
            if (inside(shape, coord)) {
                label[v] = cls;
                base[v] = level;
            }
        }
    }

    Shape img_shape{1};
    img_shape.insert(img_shape.end(), spec.shape.begin(), spec.shape.end());
    NdArray<double> image(img_shape);
    for (std::size_t v = 0; v < n; ++v) {
        const double noisy = spec.noise_sigma > 0.0 ? base[v] + spec.noise_sigma * rng.normal() : base[v];
        image[v] = static_cast<double>(static_cast<float>(noisy));
    }
    return Sample{Volume(std::move(image)), LabelMap(std::move(label), spec.num_classes), sample_id(index, is_val)};
}

void write_sample(const Sample& sample, const fs::path& sample_dir) {
    sample.validate();
    io::ensure_dir(sample_dir);
    io::write_json(sample_dir / "header.json", header_json(sample));
    std::vector<char> img;
    img.reserve(sample.image.data().size() * 4);
    for (double v : sample.image.data()) io::append_le(img, static_cast<float>(v));
    io::write_bytes(sample_dir / "image.bin", img);
    if (sample.label) {
        std::vector<char> lab;
        lab.reserve(sample.label->size() * 4);
        for (auto v : sample.label->data()) io::append_le(lab, v);
        io::write_bytes(sample_dir / "label.bin", lab);
    }
}

DatasetManifest generate_dataset(const DatasetSpec& spec, const fs::path& out_dir) {
    spec.validate();
    io::ensure_dir(out_dir);

    DatasetManifest m;
    m.spec = spec;
    for (int i = 0; i < spec.num_samples; ++i) {
        const Sample s = synthesize_sample(spec, i, false);
        write_sample(s, out_dir / s.id);
        m.ids.push_back(s.id);
    }
    for (int i = 0; i < spec.num_val; ++i) {
        const Sample s = synthesize_sample(spec, i, true);
        write_sample(s, out_dir / s.id);
        m.val_ids.push_back(s.id);
    }

    // Fisher-Yates with the portable generator, then keep the first labeled_count ids.
    std::vector<std::size_t> order(m.ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(spec.seed, {kSplitStream}));
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng.below(i + 1)]);
    const auto n_lab = static_cast<std::size_t>(spec.labeled_count());
    std::vector<bool> labeled(m.ids.size(), false);
    for (std::size_t i = 0; i < n_lab; ++i) labeled[order[i]] = true;
    for (std::size_t i = 0; i < m.ids.size(); ++i) (labeled[i] ? m.labeled_ids : m.unlabeled_ids).push_back(m.ids[i]);

    io::write_json(out_dir / "manifest.json", to_json(m));
    return m;
}

DatasetManifest load_manifest(const fs::path& dataset_dir) {
    const fs::path p = dataset_dir / "manifest.json";
    if (!fs::exists(p)) throw IoError("missing " + p.string());
    return manifest_from_json(io::read_json(p));
}

Sample load_sample(const fs::path& sample_dir, LabelPolicy policy) {
    const fs::path hp = sample_dir / "header.json";
    if (!fs::exists(hp)) throw IoError("missing " + hp.string());
    const json h = io::read_json(hp);

    Shape dims;
    std::vector<double> spacing;
    std::size_t channels = 1;
    std::string img_file = "image.bin";
    try {
        dims = h.at("dims").get<Shape>();
        spacing = h.value("spacing", std::vector<double>{});
        channels = h.value("channels", std::size_t{1});
        if (h.value("byte_order", std::string("little-endian")) != "little-endian") {
            throw FormatError("unsupported byte_order in " + hp.string());
        }
        if (h.at("image").at("dtype").get<std::string>() != "f32") throw FormatError("image dtype must be f32");
        img_file = h.at("image").value("file", img_file);
    } catch (const json::exception& e) {
        throw FormatError(hp.string() + ": " + e.what());
    }
    if (dims.empty()) throw FormatError(hp.string() + ": empty dims");
    const std::size_t n = shape_numel(dims);

    const auto img_bytes = io::read_bytes(sample_dir / img_file);
    if (img_bytes.size() != n * channels * 4) {
        throw FormatError(sample_dir.string() + ": image payload has " + std::to_string(img_bytes.size()) +
                          " bytes, header implies " + std::to_string(n * channels * 4));
    }
    Shape img_shape{channels};
    img_shape.insert(img_shape.end(), dims.begin(), dims.end());
    NdArray<double> image(img_shape);
    for (std::size_t i = 0; i < image.size(); ++i) image[i] = io::load_le<float>(img_bytes.data() + 4 * i);

    Sample s;
    s.id = sample_dir.filename().string();
    try {
        s.image = Volume(std::move(image), spacing);
    } catch (const ValidationError& e) {
        throw FormatError(sample_dir.string() + ": " + e.what());
    }

    if (policy == LabelPolicy::load && h.contains("label")) {
        int num_classes = 0;
        std::string lab_file = "label.bin";
        try {
            if (h.at("label").at("dtype").get<std::string>() != "i32") throw FormatError("label dtype must be i32");
            lab_file = h.at("label").value("file", lab_file);
            num_classes = h.at("num_classes").get<int>();
        } catch (const json::exception& e) {
            throw FormatError(hp.string() + ": " + e.what());
        }
        const auto lab_bytes = io::read_bytes(sample_dir / lab_file);
        if (lab_bytes.size() != n * 4) {
            throw FormatError(sample_dir.string() + ": label payload has " + std::to_string(lab_bytes.size()) +
                              " bytes, header implies " + std::to_string(n * 4));
        }
        NdArray<std::int32_t> lab(dims);
        for (std::size_t i = 0; i < n; ++i) lab[i] = io::load_le<std::int32_t>(lab_bytes.data() + 4 * i);
        try {
            s.label = LabelMap(std::move(lab), num_classes);
        } catch (const ValidationError& e) {
            throw FormatError(sample_dir.string() + ": " + e.what());
        }
    }
    s.validate();
    return s;
}

Sample crop(const Sample& sample, const std::vector<std::size_t>& offset, const Shape& crop_shape) {
    const Shape full = sample.image.spatial_shape();
    if (crop_shape.size() != full.size() || offset.size() != full.size()) {
        throw ValidationError("crop: rank mismatch against " + shape_str(full));
    }
    for (std::size_t i = 0; i < full.size(); ++i) {
        if (crop_shape[i] == 0 || offset[i] + crop_shape[i] > full[i]) {
            throw ValidationError("crop: " + shape_str(crop_shape) + " does not fit in " + shape_str(full));
        }
    }
    const std::size_t n_out = shape_numel(crop_shape);
    const std::size_t n_in = shape_numel(full);
    const std::size_t channels = sample.image.channels();
    Shape img_shape{channels};
    img_shape.insert(img_shape.end(), crop_shape.begin(), crop_shape.end());
    NdArray<double> img(img_shape);
    std::optional<NdArray<std::int32_t>> lab;
    if (sample.label) lab.emplace(crop_shape);

    std::vector<std::size_t> coord;
    for (std::size_t v = 0; v < n_out; ++v) {
        unravel(v, crop_shape, coord);
        for (std::size_t i = 0; i < coord.size(); ++i) coord[i] += offset[i];
        const std::size_t src = ravel(coord, full);
        for (std::size_t c = 0; c < channels; ++c) img[c * n_out + v] = sample.image.data()[c * n_in + src];
        if (lab) (*lab)[v] = (*sample.label)[src];
    }
    Sample out{Volume(std::move(img), sample.image.spacing()), std::nullopt, sample.id};
    if (lab) out.label = LabelMap(std::move(*lab), sample.label->num_classes());
    return out;
}

Sample flip(const Sample& sample, std::size_t axis) {
    const Shape shape = sample.image.spatial_shape();
    if (axis >= shape.size()) throw ValidationError("flip: axis " + std::to_string(axis) + " out of range");
    const std::size_t n = shape_numel(shape);
    const std::size_t channels = sample.image.channels();
    NdArray<double> img(sample.image.data().shape());
    std::optional<NdArray<std::int32_t>> lab;
    if (sample.label) lab.emplace(shape);
    std::vector<std::size_t> coord;
    for (std::size_t v = 0; v < n; ++v) {
        unravel(v, shape, coord);
        coord[axis] = shape[axis] - 1 - coord[axis];
        const std::size_t src = ravel(coord, shape);
        for (std::size_t c = 0; c < channels; ++c) img[c * n + v] = sample.image.data()[c * n + src];
        if (lab) (*lab)[v] = (*sample.label)[src];
    }
    Sample out{Volume(std::move(img), sample.image.spacing()), std::nullopt, sample.id};
    if (lab) out.label = LabelMap(std::move(*lab), sample.label->num_classes());
    return out;
}

Sample augment(const Sample& sample, const Shape& crop_shape, std::uint64_t seed,
               const std::vector<std::size_t>& flip_axes) {
    const Shape full = sample.image.spatial_shape();
    if (crop_shape.size() != full.size()) throw ValidationError("augment: crop rank mismatch");
    Rng rng(seed);
    std::vector<std::size_t> offset(full.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
        if (crop_shape[i] > full[i] || crop_shape[i] == 0) {
            throw ValidationError("augment: crop " + shape_str(crop_shape) + " larger than sample " + shape_str(full));
        }
        offset[i] = static_cast<std::size_t>(rng.below(full[i] - crop_shape[i] + 1));
    }
    Sample out = crop(sample, offset, crop_shape);
    for (auto axis : flip_axes) {
        if (rng.coin()) out = flip(out, axis);
    }
    return out;
}

}  // namespace dsseg
