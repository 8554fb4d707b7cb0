#pragma once

#include <span>

#include "dsseg/datamodel.hpp"

namespace dsseg {

// Per-voxel confidence measure summed by the selection score.
enum class ScoreKind {
    self_cross_entropy,  // -log p[argmax p]
    shannon,             // -sum_c p_c log p_c
};

struct SelectionOutcome {
    int chosen = 1;  // 1 or 2
    double score1 = 0.0;
    double score2 = 0.0;
    double agreement_fraction = 0.0;
    bool fallback_used = false;
};

// 1 where the argmax classes of p1 and p2 coincide.
BinaryMask agreement_mask(const ProbMap& p1, const ProbMap& p2);

// Sum of the per-voxel score over voxels where `mask` is set; 0 for an empty mask.
double self_entropy_score(const ProbMap& p, const BinaryMask& mask, ScoreKind kind = ScoreKind::self_cross_entropy);

// Picks the student with the lower score over the agreement region. Ties go to student 1. When the two
// students agree nowhere, the mean score over all voxels is compared instead and `fallback_used` is set.
SelectionOutcome select_student(const ProbMap& p1, const ProbMap& p2,
                                ScoreKind kind = ScoreKind::self_cross_entropy);

// Batch form: scores are summed over every element of the batch before the comparison.
SelectionOutcome select_student(std::span<const ProbMap> p1, std::span<const ProbMap> p2,
                                ScoreKind kind = ScoreKind::self_cross_entropy);

}  // namespace dsseg
