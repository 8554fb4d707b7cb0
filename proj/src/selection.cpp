#include "dsseg/selection.hpp"

#include <algorithm>
#include <cmath>

#include "dsseg/losses.hpp"

namespace dsseg {

namespace {

double voxel_score(const ProbMap& p, std::size_t v, ScoreKind kind) {
    const std::size_t n = p.voxels();
    const auto classes = static_cast<std::size_t>(p.num_classes());
    const auto& d = p.data();
    if (kind == ScoreKind::shannon) {
        double h = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            const double q = d[c * n + v];
            if (q > 0.0) h -= q * std::log(q);
        }
        return h;
    }
    double best = d[v];
    for (std::size_t c = 1; c < classes; ++c) best = std::max(best, d[c * n + v]);
    return -std::log(std::clamp(best, kLogClamp, 1.0));
}

void require_same_shape(const ProbMap& p1, const ProbMap& p2, const char* op) {
    if (p1.data().shape() != p2.data().shape()) {
        throw ValidationError(std::string(op) + ": " + shape_str(p1.data().shape()) + " vs " +
                              shape_str(p2.data().shape()));
    }
}

}  // namespace

BinaryMask agreement_mask(const ProbMap& p1, const ProbMap& p2) {
    require_same_shape(p1, p2, "agreement_mask");
    const auto a = p1.argmax();
    const auto b = p2.argmax();
    NdArray<std::uint8_t> out(a.shape());
    for (std::size_t v = 0; v < a.size(); ++v) out[v] = a[v] == b[v] ? 1 : 0;
    return BinaryMask(std::move(out));
}

double self_entropy_score(const ProbMap& p, const BinaryMask& mask, ScoreKind kind) {
    if (p.spatial_shape() != mask.shape()) {
        throw ValidationError("self_entropy_score: mask " + shape_str(mask.shape()) + " vs prediction " +
                              shape_str(p.data().shape()));
    }
    double sum = 0.0;
    for (std::size_t v = 0; v < mask.size(); ++v) {
        if (mask[v]) sum += voxel_score(p, v, kind);
    }
    return sum;
}

SelectionOutcome select_student(const ProbMap& p1, const ProbMap& p2, ScoreKind kind) {
    return select_student(std::span<const ProbMap>(&p1, 1), std::span<const ProbMap>(&p2, 1), kind);
}

SelectionOutcome select_student(std::span<const ProbMap> p1, std::span<const ProbMap> p2, ScoreKind kind) {
    if (p1.size() != p2.size() || p1.empty()) {
        throw ValidationError("select_student: need equally sized, non-empty prediction batches");
    }
    SelectionOutcome out;
    std::size_t agree = 0;
    std::size_t total = 0;
    for (std::size_t b = 0; b < p1.size(); ++b) {
        require_same_shape(p1[b], p2[b], "select_student");
        const BinaryMask m = agreement_mask(p1[b], p2[b]);
        agree += m.count();
        total += m.size();
        out.score1 += self_entropy_score(p1[b], m, kind);
        out.score2 += self_entropy_score(p2[b], m, kind);
    }
    out.agreement_fraction = static_cast<double>(agree) / static_cast<double>(total);

    if (agree == 0) {
        out.fallback_used = true;
        out.score1 = out.score2 = 0.0;
        for (std::size_t b = 0; b < p1.size(); ++b) {
            for (std::size_t v = 0; v < p1[b].voxels(); ++v) {
                out.score1 += voxel_score(p1[b], v, kind);
                out.score2 += voxel_score(p2[b], v, kind);
            }
        }
        out.score1 /= static_cast<double>(total);
        out.score2 /= static_cast<double>(total);
    }
    out.chosen = out.score2 < out.score1 ? 2 : 1;
    return out;
}

}  // namespace dsseg
