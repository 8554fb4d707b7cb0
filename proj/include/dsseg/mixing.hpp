#pragma once

#include <cstdint>
#include <vector>

#include "dsseg/datamodel.hpp"

namespace dsseg {

struct MixConfig {
    // Fraction of each spatial axis covered by the zero block. One entry is broadcast to all axes.
    std::vector<double> zero_ratio{2.0 / 3.0};
    // Draw a separate mask for each student instead of sharing one per (labeled, unlabeled) pair.
    bool per_student_masks = false;

    void validate() const;
    std::vector<double> ratios_for(std::size_t rank) const;
};

// Ones everywhere except one axis-aligned block of floor(ratio_i * D_i) zeros at a uniformly random offset.
BinaryMask make_zero_centered_mask(const Shape& shape, const std::vector<double>& zero_ratio, std::uint64_t seed);

// mask * a + (1 - mask) * b; the mask is broadcast over volume channels.
Volume mix(const Volume& a, const Volume& b, const BinaryMask& mask);
LabelMap mix(const LabelMap& a, const LabelMap& b, const BinaryMask& mask);

struct CutMixPair {
    Volume x_l2u;
    Volume x_u2l;
    LabelMap y_l2u;
    LabelMap y_u2l;
};

// Labeled-into-unlabeled and unlabeled-into-labeled mixes for one (labeled, unlabeled) pair.
CutMixPair cutmix_pair(const Volume& x_l, const Volume& x_u, const LabelMap& y_l, const LabelMap& y_u_pseudo,
                       const BinaryMask& mask);

}  // namespace dsseg
