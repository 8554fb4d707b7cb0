#include <cmath>

#include "doctest.h"
#include "dsseg/errors.hpp"
#include "dsseg/losses.hpp"
#include "dsseg/selection.hpp"
#include "oracles.hpp"

using namespace dsseg;

namespace {

ProbMap one_hot_probs(const LabelMap& y) { return ProbMap(one_hot(y)); }

LabelMap labels(std::initializer_list<int> v, std::size_t h, std::size_t w, int classes) {
    NdArray<std::int32_t> a(Shape{h, w});
    std::size_t i = 0;
    for (int x : v) a[i++] = x;
    return LabelMap(std::move(a), classes);
}

ProbMap probs_from(const std::vector<double>& x, const Shape& s) { return ProbMap(NdArray<double>(s, x)); }

}  // namespace

TEST_CASE("dice and ce vanish on exact one-hot predictions") {
    Rng rng(1);
    const LabelMap y = oracle::random_labels(rng, 3, {5, 5});
    const ProbMap p = one_hot_probs(y);
    CHECK(soft_dice_loss(p, y) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(ce_loss(p, y) == 0.0);
    CHECK(combined_seg_loss(p, y) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("soft dice matches a direct evaluation") {
    // Two voxels, binary: p_fg = (0.8, 0.3), y = (1, 0).
    const ProbMap p = probs_from({0.2, 0.7, 0.8, 0.3}, {2, 1, 2});
    const LabelMap y = labels({1, 0}, 1, 2, 2);
    const double e = 1e-5;
    const double d0 = (2 * 0.7 + e) / (0.9 + 1 + e);
    const double d1 = (2 * 0.8 + e) / (1.1 + 1 + e);
    CHECK(soft_dice_loss(p, y) == doctest::Approx(1.0 - 0.5 * (d0 + d1)).epsilon(1e-12));
    CHECK(ce_loss(p, y) == doctest::Approx(-(std::log(0.8) + std::log(0.7)) / 2).epsilon(1e-12));
}

TEST_CASE("ce clamps zero probabilities") {
    const ProbMap p = probs_from({1.0, 0.0}, {2, 1, 1});
    const LabelMap y = labels({1}, 1, 1, 2);
    CHECK(ce_loss(p, y) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("cutmix loss is the sum of both directions") {
    Rng rng(3);
    const ProbMap a = oracle::random_probs(rng, 3, 4, 4), b = oracle::random_probs(rng, 3, 4, 4);
    const LabelMap ya = oracle::random_labels(rng, 3, {4, 4}), yb = oracle::random_labels(rng, 3, {4, 4});
    CHECK(cutmix_loss(a, b, ya, yb) == doctest::Approx(combined_seg_loss(a, ya) + combined_seg_loss(b, yb)));
    CHECK(cutmix_loss(a, b, ya, yb) == cutmix_loss(b, a, yb, ya));
    const LabelMap wrong = oracle::random_labels(rng, 3, {4, 3});
    CHECK_THROWS_AS(cutmix_loss(a, b, wrong, yb), ValidationError);
}

TEST_CASE("disagreement mask") {
    Rng rng(4);
    const ProbMap p = oracle::random_probs(rng, 3, 6, 6), q = oracle::random_probs(rng, 3, 6, 6);
    CHECK(disagreement_mask(p, p).count() == 0);
    CHECK(disagreement_mask(p, q) == disagreement_mask(q, p));
    const BinaryMask agree = agreement_mask(p, q), dis = disagreement_mask(p, q);
    for (std::size_t i = 0; i < 36; ++i) CHECK(agree[i] != dis[i]);

    // Complementary binary argmaxes everywhere.
    const ProbMap a = probs_from({0.9, 0.2, 0.1, 0.8}, {2, 1, 2});
    const ProbMap b = probs_from({0.1, 0.8, 0.9, 0.2}, {2, 1, 2});
    CHECK(disagreement_mask(a, b).count() == 2);

    // 3-class 2x2 with one differing voxel (index 2).
    const ProbMap c = probs_from({.6, .1, .1, .2, .2, .8, .2, .2, .2, .1, .7, .6}, {3, 2, 2});
    const ProbMap d = probs_from({.6, .1, .5, .2, .2, .8, .2, .2, .2, .1, .3, .6}, {3, 2, 2});
    const BinaryMask m = disagreement_mask(c, d);
    CHECK(m.count() == 1);
    CHECK(m[2]);
}

TEST_CASE("masked mse conventions") {
    const LabelMap y = labels({1}, 1, 1, 2);
    const ProbMap p = probs_from({0.3, 0.7}, {2, 1, 1});
    const BinaryMask full(NdArray<std::uint8_t>(Shape{1, 1}, 1));
    const BinaryMask empty(NdArray<std::uint8_t>(Shape{1, 1}, 0));
    CHECK(masked_mse(p, y, full) == doctest::Approx(0.09).epsilon(1e-12));
    CHECK(masked_mse(p, y, empty) == 0.0);
    CHECK(uncertainty_mse_loss(p, p, y, y, full, full) == doctest::Approx(0.18).epsilon(1e-12));
    CHECK(uncertainty_mse_loss(p, p, y, y, empty, empty) == 0.0);
    CHECK(uncertainty_mse_loss(one_hot_probs(y), one_hot_probs(y), y, y, full, full) == 0.0);

    // Normalization: one of four voxels masked; global_mean divides by all voxels instead.
    const LabelMap y4 = labels({1, 1, 1, 1}, 2, 2, 2);
    const ProbMap p4 = probs_from({0.3, 0.3, 0.3, 0.3, 0.7, 0.7, 0.7, 0.7}, {2, 2, 2});
    NdArray<std::uint8_t> one(Shape{2, 2}, 0);
    one[0] = 1;
    CHECK(masked_mse(p4, y4, BinaryMask(one)) == doctest::Approx(0.09));
    CHECK(masked_mse(p4, y4, BinaryMask(one), MseReduction::global_mean) == doctest::Approx(0.09 / 4));
}

TEST_CASE("total student loss") {
    CHECK(total_student_loss(0.0, 0.0, {}) == 0.0);
    CHECK(total_student_loss(1.0, 1.0, {0.5, 0.5}) == 1.0);
    CHECK(total_student_loss(2.0, 4.0, {0.25, 0.75}) == 3.5);
    CHECK_THROWS_AS(total_student_loss(-1.0, 0.0, {}), ValidationError);
    CHECK_THROWS_AS(total_student_loss(1.0, 0.0, {-0.5, 0.5}), ValidationError);
}

TEST_CASE("loss gradients agree with central differences") {
    Rng rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        const ProbMap p = oracle::random_probs(rng, 3, 4, 4, 1.0);
        const LabelMap y = oracle::random_labels(rng, 3, {4, 4});
        NdArray<std::uint8_t> mraw(Shape{4, 4});
        for (auto& v : mraw) v = static_cast<std::uint8_t>(rng.coin());
        const BinaryMask m(mraw);
        const Shape s = p.data().shape();
        auto wrap = [&](auto loss) {
            return [&, loss](const std::vector<double>& x) { return loss(ProbMap(NdArray<double>(s, x))); };
        };
        CHECK(oracle::max_rel_fd_error(wrap([&](const ProbMap& q) { return soft_dice_loss(q, y); }), p.data().values(),
                                       soft_dice_loss_grad(p, y).grad.values()) < 1e-4);
        CHECK(oracle::max_rel_fd_error(wrap([&](const ProbMap& q) { return ce_loss(q, y); }), p.data().values(),
                                       ce_loss_grad(p, y).grad.values()) < 1e-4);
        CHECK(oracle::max_rel_fd_error(wrap([&](const ProbMap& q) { return masked_mse(q, y, m); }),
                                       p.data().values(), masked_mse_grad(p, y, m).grad.values()) < 1e-4);
        CHECK(soft_dice_loss_grad(p, y).value == soft_dice_loss(p, y));
    }
}

TEST_CASE("softmax backward matches differences through softmax") {
    Rng rng(9);
    NdArray<double> z(Shape{3, 2, 2});
    for (auto& v : z) v = rng.normal();
    const LabelMap y = oracle::random_labels(rng, 3, {2, 2});
    const ProbMap p = softmax(z);
    const auto g = softmax_backward(p, combined_seg_loss_grad(p, y).grad);
    auto f = [&](const std::vector<double>& x) { return combined_seg_loss(softmax(NdArray<double>(z.shape(), x)), y); };
    CHECK(oracle::max_rel_fd_error(f, z.values(), g.values()) < 1e-5);
}
