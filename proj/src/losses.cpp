#include "dsseg/losses.hpp"

#include <algorithm>
#include <cmath>

namespace dsseg {

namespace {

void require_congruent(const ProbMap& p, const LabelMap& y, const char* op) {
    if (p.spatial_shape() != y.shape()) {
        throw ValidationError(std::string(op) + ": prediction " + shape_str(p.data().shape()) + " vs label " +
                              shape_str(y.shape()));
    }
    if (p.num_classes() != y.num_classes()) {
        throw ValidationError(std::string(op) + ": " + std::to_string(p.num_classes()) + " predicted classes vs " +
                              std::to_string(y.num_classes()) + " label classes");
    }
}

LossGrad dice_impl(const ProbMap& p, const LabelMap& y, double eps, bool want_grad) {
    require_congruent(p, y, "soft_dice_loss");
    const std::size_t n = p.voxels();
    const auto classes = static_cast<std::size_t>(p.num_classes());
    const auto& pd = p.data();

    std::vector<double> inter(classes, 0.0), psum(classes, 0.0), ysum(classes, 0.0);
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t v = 0; v < n; ++v) {
            const double pv = pd[c * n + v];
            psum[c] += pv;
            if (static_cast<std::size_t>(y[v]) == c) {
                inter[c] += pv;
                ysum[c] += 1.0;
            }
        }
    }

    LossGrad out;
    double mean_dice = 0.0;
    for (std::size_t c = 0; c < classes; ++c) mean_dice += (2.0 * inter[c] + eps) / (psum[c] + ysum[c] + eps);
    mean_dice /= static_cast<double>(classes);
    out.value = 1.0 - mean_dice;

    if (want_grad) {
        out.grad = NdArray<double>(pd.shape(), 0.0);
        const double scale = -1.0 / static_cast<double>(classes);
        for (std::size_t c = 0; c < classes; ++c) {
            const double num = 2.0 * inter[c] + eps;
            const double den = psum[c] + ysum[c] + eps;
            for (std::size_t v = 0; v < n; ++v) {
                const double yv = static_cast<std::size_t>(y[v]) == c ? 1.0 : 0.0;
                out.grad[c * n + v] = scale * (2.0 * yv * den - num) / (den * den);
            }
        }
    }
    return out;
}

LossGrad ce_impl(const ProbMap& p, const LabelMap& y, bool want_grad) {
    require_congruent(p, y, "ce_loss");
    const std::size_t n = p.voxels();
    LossGrad out;
    if (want_grad) out.grad = NdArray<double>(p.data().shape(), 0.0);
    double sum = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        const std::size_t i = static_cast<std::size_t>(y[v]) * n + v;
        const double raw = p.data()[i];
        const double q = std::clamp(raw, kLogClamp, 1.0);
        sum -= std::log(q);
        if (want_grad && raw > kLogClamp) out.grad[i] = -1.0 / (static_cast<double>(n) * raw);
    }
    out.value = sum / static_cast<double>(n);
    return out;
}

LossGrad mse_impl(const ProbMap& p, const LabelMap& y, const BinaryMask& mask, MseReduction reduction, bool want_grad) {
    require_congruent(p, y, "masked_mse");
    if (mask.shape() != y.shape()) throw ValidationError("masked_mse: mask shape " + shape_str(mask.shape()));
    const std::size_t n = p.voxels();
    const auto classes = static_cast<std::size_t>(p.num_classes());
    LossGrad out;
    if (want_grad) out.grad = NdArray<double>(p.data().shape(), 0.0);

    const std::size_t domain = reduction == MseReduction::masked_mean ? mask.count() : n;
    if (domain == 0) return out;
    const double norm = static_cast<double>(domain * classes);

    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t v = 0; v < n; ++v) {
            if (!mask[v]) continue;
            const std::size_t i = c * n + v;
            const double err = p.data()[i] - (static_cast<std::size_t>(y[v]) == c ? 1.0 : 0.0);
            sum += err * err;
            if (want_grad) out.grad[i] = 2.0 * err / norm;
        }
    }
    out.value = sum / norm;
    return out;
}

}  // namespace

void LossWeights::validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ValidationError("LossWeights: alpha and beta must be >= 0");
    if (alpha == 0.0 && beta == 0.0) throw ValidationError("LossWeights: alpha and beta are both zero");
}

double soft_dice_loss(const ProbMap& p, const LabelMap& y, double eps) { return dice_impl(p, y, eps, false).value; }
LossGrad soft_dice_loss_grad(const ProbMap& p, const LabelMap& y, double eps) { return dice_impl(p, y, eps, true); }

double ce_loss(const ProbMap& p, const LabelMap& y) { return ce_impl(p, y, false).value; }
LossGrad ce_loss_grad(const ProbMap& p, const LabelMap& y) { return ce_impl(p, y, true); }

double combined_seg_loss(const ProbMap& p, const LabelMap& y) { return soft_dice_loss(p, y) + ce_loss(p, y); }

LossGrad combined_seg_loss_grad(const ProbMap& p, const LabelMap& y) {
    LossGrad dice = soft_dice_loss_grad(p, y);
    const LossGrad ce = ce_loss_grad(p, y);
    dice.value += ce.value;
    for (std::size_t i = 0; i < dice.grad.size(); ++i) dice.grad[i] += ce.grad[i];
    return dice;
}

double cutmix_loss(const ProbMap& p_u2l, const ProbMap& p_l2u, const LabelMap& y_u2l, const LabelMap& y_l2u) {
    return combined_seg_loss(p_u2l, y_u2l) + combined_seg_loss(p_l2u, y_l2u);
}

BinaryMask disagreement_mask(const ProbMap& p1, const ProbMap& p2) {
    if (p1.data().shape() != p2.data().shape()) {
        throw ValidationError("disagreement_mask: " + shape_str(p1.data().shape()) + " vs " +
                              shape_str(p2.data().shape()));
    }
    const auto a = p1.argmax();
    const auto b = p2.argmax();
    NdArray<std::uint8_t> out(a.shape());
    for (std::size_t v = 0; v < a.size(); ++v) out[v] = a[v] != b[v] ? 1 : 0;
    return BinaryMask(std::move(out));
}

double masked_mse(const ProbMap& p, const LabelMap& y, const BinaryMask& mask, MseReduction reduction) {
    return mse_impl(p, y, mask, reduction, false).value;
}

LossGrad masked_mse_grad(const ProbMap& p, const LabelMap& y, const BinaryMask& mask, MseReduction reduction) {
    return mse_impl(p, y, mask, reduction, true);
}

double uncertainty_mse_loss(const ProbMap& p_u2l, const ProbMap& p_l2u, const LabelMap& y_u2l,
                            const LabelMap& y_l2u, const BinaryMask& m_u2l, const BinaryMask& m_l2u,
                            MseReduction reduction) {
    return masked_mse(p_u2l, y_u2l, m_u2l, reduction) + masked_mse(p_l2u, y_l2u, m_l2u, reduction);
}

double total_student_loss(double cutmix, double mse, const LossWeights& w) {
    w.validate();
    if (!(cutmix >= 0.0) || !(mse >= 0.0)) throw ValidationError("total_student_loss: negative component");
    return w.alpha * cutmix + w.beta * mse;
}

NdArray<double> softmax_backward(const ProbMap& p, const NdArray<double>& grad_p) {
    if (grad_p.shape() != p.data().shape()) throw ValidationError("softmax_backward: gradient shape mismatch");
    const std::size_t n = p.voxels();
    const auto classes = static_cast<std::size_t>(p.num_classes());
    NdArray<double> out(grad_p.shape());
    for (std::size_t v = 0; v < n; ++v) {
        double dot = 0.0;
        for (std::size_t c = 0; c < classes; ++c) dot += p.data()[c * n + v] * grad_p[c * n + v];
        for (std::size_t c = 0; c < classes; ++c) {
            const std::size_t i = c * n + v;
            out[i] = p.data()[i] * (grad_p[i] - dot);
        }
    }
    return out;
}

}  // namespace dsseg
