#include "dsseg/datamodel.hpp"

#include <algorithm>
#include <cmath>

namespace dsseg {

namespace {

void require_spatial_rank(const Shape& spatial, const char* what) {
    if (spatial.size() != 2 && spatial.size() != 3) {
        throw ValidationError(std::string(what) + ": expected 2 or 3 spatial axes, got shape " + shape_str(spatial));
    }
    for (auto d : spatial) {
        if (d == 0) throw ValidationError(std::string(what) + ": zero-sized spatial axis in " + shape_str(spatial));
    }
}

}  // namespace

Volume::Volume(NdArray<double> data, std::vector<double> spacing) : data_(std::move(data)), spacing_(std::move(spacing)) {
    if (data_.ndim() < 3) throw ValidationError("Volume: expected (C, D1, ..., Dk), got " + shape_str(data_.shape()));
    if (data_.dim(0) == 0) throw ValidationError("Volume: zero channels");
    const auto spatial = spatial_shape();
    require_spatial_rank(spatial, "Volume");
    if (spacing_.empty()) spacing_.assign(spatial.size(), 1.0);
    if (spacing_.size() != spatial.size()) {
        throw ValidationError("Volume: " + std::to_string(spacing_.size()) + " spacing entries for " +
                              std::to_string(spatial.size()) + " spatial axes");
    }
    for (double s : spacing_) {
        if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("Volume: spacing entries must be positive");
    }
    for (double v : data_) {
        if (!std::isfinite(v)) throw ValidationError("Volume: non-finite intensity");
    }
}

LabelMap::LabelMap(NdArray<std::int32_t> data, int num_classes) : data_(std::move(data)), num_classes_(num_classes) {
    if (num_classes_ < 2) throw ValidationError("LabelMap: num_classes must be >= 2");
    require_spatial_rank(data_.shape(), "LabelMap");
    for (auto v : data_) {
        if (v < 0 || v >= num_classes_) {
            throw ValidationError("LabelMap: value " + std::to_string(v) + " outside [0, " +
                                  std::to_string(num_classes_) + ")");
        }
    }
}

ProbMap::ProbMap(NdArray<double> data) : data_(std::move(data)) {
    if (data_.ndim() < 3) throw ValidationError("ProbMap: expected (C, D1, ..., Dk), got " + shape_str(data_.shape()));
    if (data_.dim(0) < 2) throw ValidationError("ProbMap: need at least 2 classes");
    require_spatial_rank(spatial_shape(), "ProbMap");
    const std::size_t n = voxels();
    const std::size_t c = data_.dim(0);
    for (std::size_t v = 0; v < n; ++v) {
        double sum = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            const double p = data_[k * n + v];
            if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("ProbMap: probability outside [0, 1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kProbSumTolerance) {
            throw ValidationError("ProbMap: channel sum " + std::to_string(sum) + " at voxel " + std::to_string(v));
        }
    }
}

NdArray<std::int32_t> ProbMap::argmax() const {
    const std::size_t n = voxels();
    const std::size_t c = data_.dim(0);
    NdArray<std::int32_t> out(spatial_shape());
    for (std::size_t v = 0; v < n; ++v) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < c; ++k) {
            if (data_[k * n + v] > data_[best * n + v]) best = k;
        }
        out[v] = static_cast<std::int32_t>(best);
    }
    return out;
}

LabelMap ProbMap::argmax_labels() const { return LabelMap(argmax(), num_classes()); }

BinaryMask::BinaryMask(NdArray<std::uint8_t> data) : data_(std::move(data)) {
    for (auto v : data_) {
        if (v > 1) throw ValidationError("BinaryMask: values must be 0 or 1");
    }
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

void Sample::validate() const {
    if (label && label->shape() != image.spatial_shape()) {
        throw ValidationError("Sample " + id + ": label shape " + shape_str(label->shape()) +
                              " differs from image spatial shape " + shape_str(image.spatial_shape()));
    }
}

ParameterTree::ParameterTree(std::vector<Entry> entries) {
    for (auto& e : entries) add(std::move(e.name), std::move(e.array));
}

void ParameterTree::add(std::string name, NdArray<double> array) {
    for (const auto& e : entries_) {
        if (e.name == name) throw ValidationError("ParameterTree: duplicate entry name '" + name + "'");
    }
    entries_.push_back({std::move(name), std::move(array)});
}

const NdArray<double>& ParameterTree::get(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e.array;
    }
    throw ValidationError("ParameterTree: no entry named '" + name + "'");
}

NdArray<double>& ParameterTree::get(const std::string& name) {
    return const_cast<NdArray<double>&>(std::as_const(*this).get(name));
}

std::size_t ParameterTree::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.array.size();
    return n;
}

ParameterTree ParameterTree::zeros_like() const {
    ParameterTree out;
    out.entries_.reserve(entries_.size());
    for (const auto& e : entries_) out.entries_.push_back({e.name, NdArray<double>(e.array.shape(), 0.0)});
    return out;
}

void require_congruent(const ParameterTree& a, const ParameterTree& b) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i].name != b[i].name) {
            throw CongruenceError("entry " + std::to_string(i) + ": name '" + a[i].name + "' vs '" + b[i].name + "'");
        }
        if (a[i].array.shape() != b[i].array.shape()) {
            throw CongruenceError("entry '" + a[i].name + "': shape " + shape_str(a[i].array.shape()) + " vs " +
                                  shape_str(b[i].array.shape()));
        }
    }
    if (a.size() != b.size()) {
        const auto& longer = a.size() > b.size() ? a : b;
        throw CongruenceError("entry '" + longer[n].name + "' present in only one tree");
    }
}

bool congruent(const ParameterTree& a, const ParameterTree& b) noexcept {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].name != b[i].name || a[i].array.shape() != b[i].array.shape()) return false;
    }
    return true;
}

ParameterTree tree_axpy(const ParameterTree& a, const ParameterTree& b, double wa, double wb) {
    require_congruent(a, b);
    ParameterTree out = a;
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& dst = out[i].array;
        const auto& src = b[i].array;
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = wa * dst[j] + wb * src[j];
    }
    return out;
}

NdArray<double> one_hot(const LabelMap& labels) {
    const std::size_t n = labels.size();
    Shape shape{static_cast<std::size_t>(labels.num_classes())};
    shape.insert(shape.end(), labels.shape().begin(), labels.shape().end());
    NdArray<double> out(shape, 0.0);
    for (std::size_t v = 0; v < n; ++v) out[static_cast<std::size_t>(labels[v]) * n + v] = 1.0;
    return out;
}

ProbMap softmax(const NdArray<double>& logits) {
    if (logits.ndim() < 2) throw ValidationError("softmax: expected (C, spatial...)");
    const std::size_t c = logits.dim(0);
    const std::size_t n = logits.size() / c;
    NdArray<double> out(logits.shape());
    for (std::size_t v = 0; v < n; ++v) {
        double mx = logits[v];
        for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, logits[k * n + v]);
        double sum = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            const double e = std::exp(logits[k * n + v] - mx);
            out[k * n + v] = e;
            sum += e;
        }
        for (std::size_t k = 0; k < c; ++k) out[k * n + v] /= sum;
    }
    return ProbMap(std::move(out));
}

}  // namespace dsseg
