#include "dsseg/mixing.hpp"

#include <cmath>

#include "dsseg/grid.hpp"
#include "dsseg/rng.hpp"

namespace dsseg {

void MixConfig::validate() const {
    if (zero_ratio.empty()) throw ValidationError("MixConfig: zero_ratio is empty");
    for (double r : zero_ratio) {
        if (!(r > 0.0 && r < 1.0)) throw ValidationError("MixConfig: zero_ratio entries must lie in (0, 1)");
    }
}

std::vector<double> MixConfig::ratios_for(std::size_t rank) const {
    if (zero_ratio.size() == 1) return std::vector<double>(rank, zero_ratio.front());
    if (zero_ratio.size() != rank) {
        throw ValidationError("MixConfig: " + std::to_string(zero_ratio.size()) + " ratios for rank " +
                              std::to_string(rank));
    }
    return zero_ratio;
}

BinaryMask make_zero_centered_mask(const Shape& shape, const std::vector<double>& zero_ratio, std::uint64_t seed) {
    if (shape.empty() || zero_ratio.size() != shape.size()) {
        throw ValidationError("make_zero_centered_mask: need one ratio per axis of " + shape_str(shape));
    }
    std::vector<std::size_t> block(shape.size());
    std::vector<std::size_t> offset(shape.size());
    Rng rng(seed);
    for (std::size_t i = 0; i < shape.size(); ++i) {
        const double r = zero_ratio[i];
        if (!(r > 0.0 && r < 1.0)) throw ValidationError("make_zero_centered_mask: ratio outside (0, 1)");
        block[i] = static_cast<std::size_t>(std::floor(r * static_cast<double>(shape[i])));
        if (block[i] < 1) {
            throw ValidationError("make_zero_centered_mask: zero block vanishes on axis " + std::to_string(i) +
                                  " of " + shape_str(shape));
        }
        offset[i] = static_cast<std::size_t>(rng.below(shape[i] - block[i] + 1));
    }

    NdArray<std::uint8_t> mask(shape, 1);
    std::vector<std::size_t> coord;
    for (std::size_t idx = 0; idx < mask.size(); ++idx) {
        unravel(idx, shape, coord);
        bool inside = true;
        for (std::size_t i = 0; i < shape.size() && inside; ++i) {
            inside = coord[i] >= offset[i] && coord[i] < offset[i] + block[i];
        }
        if (inside) mask[idx] = 0;
    }
    return BinaryMask(std::move(mask));
}

Volume mix(const Volume& a, const Volume& b, const BinaryMask& mask) {
    if (a.data().shape() != b.data().shape() || a.spatial_shape() != mask.shape()) {
        throw ValidationError("mix: volume shapes " + shape_str(a.data().shape()) + ", " + shape_str(b.data().shape()) +
                              " and mask " + shape_str(mask.shape()) + " are not congruent");
    }
    const std::size_t n = mask.size();
    NdArray<double> out(a.data().shape());
    for (std::size_t c = 0; c < a.channels(); ++c) {
        for (std::size_t v = 0; v < n; ++v) {
            const std::size_t i = c * n + v;
            out[i] = mask[v] ? a.data()[i] : b.data()[i];
        }
    }
    return Volume(std::move(out), a.spacing());
}

LabelMap mix(const LabelMap& a, const LabelMap& b, const BinaryMask& mask) {
    if (a.shape() != b.shape() || a.shape() != mask.shape()) {
        throw ValidationError("mix: label shapes " + shape_str(a.shape()) + ", " + shape_str(b.shape()) +
                              " and mask " + shape_str(mask.shape()) + " are not congruent");
    }
    if (a.num_classes() != b.num_classes()) throw ValidationError("mix: label maps disagree on num_classes");
    NdArray<std::int32_t> out(a.shape());
    for (std::size_t v = 0; v < mask.size(); ++v) out[v] = mask[v] ? a[v] : b[v];
    return LabelMap(std::move(out), a.num_classes());
}

CutMixPair cutmix_pair(const Volume& x_l, const Volume& x_u, const LabelMap& y_l, const LabelMap& y_u_pseudo,
                       const BinaryMask& mask) {
    if (y_l.shape() != x_l.spatial_shape()) throw ValidationError("cutmix_pair: labeled image/label mismatch");
    return CutMixPair{
        mix(x_l, x_u, mask),
        mix(x_u, x_l, mask),
        mix(y_l, y_u_pseudo, mask),
        mix(y_u_pseudo, y_l, mask),
    };
}

}  // namespace dsseg
