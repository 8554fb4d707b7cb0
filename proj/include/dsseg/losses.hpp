#pragma once

#include "dsseg/datamodel.hpp"

namespace dsseg {

inline constexpr double kDiceSmoothing = 1e-5;
inline constexpr double kLogClamp = 1e-12;

struct LossWeights {
    double alpha = 0.5;
    double beta = 0.5;

    void validate() const;
};

// Normalization of the masked squared error in the uncertainty loss.
enum class MseReduction {
    masked_mean,  // divide by (masked voxels * classes); 0 for an empty mask
    global_mean,  // divide by (all voxels * classes)
};

// Loss value together with its gradient with respect to the probabilities.
struct LossGrad {
    double value = 0.0;
    NdArray<double> grad;
};

// 1 - mean_c (2 sum p_c y_c + eps) / (sum p_c + sum y_c + eps), averaged over all classes.
double soft_dice_loss(const ProbMap& p, const LabelMap& y, double eps = kDiceSmoothing);
LossGrad soft_dice_loss_grad(const ProbMap& p, const LabelMap& y, double eps = kDiceSmoothing);

// Mean over voxels of -log p[y], probabilities clamped to [1e-12, 1].
double ce_loss(const ProbMap& p, const LabelMap& y);
LossGrad ce_loss_grad(const ProbMap& p, const LabelMap& y);

double combined_seg_loss(const ProbMap& p, const LabelMap& y);
LossGrad combined_seg_loss_grad(const ProbMap& p, const LabelMap& y);

double cutmix_loss(const ProbMap& p_u2l, const ProbMap& p_l2u, const LabelMap& y_u2l, const LabelMap& y_l2u);

// 1 where the argmax classes of p1 and p2 differ.
BinaryMask disagreement_mask(const ProbMap& p1, const ProbMap& p2);

// Squared error against the one-hot target, restricted to `mask`.
double masked_mse(const ProbMap& p, const LabelMap& y, const BinaryMask& mask,
                  MseReduction reduction = MseReduction::masked_mean);
LossGrad masked_mse_grad(const ProbMap& p, const LabelMap& y, const BinaryMask& mask,
                         MseReduction reduction = MseReduction::masked_mean);

double uncertainty_mse_loss(const ProbMap& p_u2l, const ProbMap& p_l2u, const LabelMap& y_u2l,
                            const LabelMap& y_l2u, const BinaryMask& m_u2l, const BinaryMask& m_l2u,
                            MseReduction reduction = MseReduction::masked_mean);

double total_student_loss(double cutmix, double mse, const LossWeights& w);

// Chain rule through softmax: dL/dz from p = softmax(z) and dL/dp.
NdArray<double> softmax_backward(const ProbMap& p, const NdArray<double>& grad_p);

}  // namespace dsseg
