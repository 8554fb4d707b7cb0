#include "doctest.h"
#include "dsseg/errors.hpp"
#include "dsseg/grid.hpp"
#include "dsseg/mixing.hpp"
#include "dsseg/rng.hpp"

using namespace dsseg;

namespace {

Volume random_volume(Rng& rng, const Shape& spatial) {
    Shape s{1};
    s.insert(s.end(), spatial.begin(), spatial.end());
    NdArray<double> a(s);
    for (auto& v : a) v = rng.normal();
    return Volume(std::move(a));
}

}  // namespace

TEST_CASE("zero block has the expected size and is a single box") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Shape s{9, 12};
        const BinaryMask m = make_zero_centered_mask(s, {2.0 / 3.0, 2.0 / 3.0}, seed);
        CHECK(m.size() - m.count() == 6 * 8);
        // Bounding box of the zeros is exactly 6 x 8.
        std::size_t y0 = 99, y1 = 0, x0 = 99, x1 = 0;
        for (std::size_t y = 0; y < 9; ++y)
            for (std::size_t x = 0; x < 12; ++x)
                if (!m[y * 12 + x]) {
                    y0 = std::min(y0, y), y1 = std::max(y1, y);
                    x0 = std::min(x0, x), x1 = std::max(x1, x);
                }
        CHECK(y1 - y0 + 1 == 6);
        CHECK(x1 - x0 + 1 == 8);
    }
}

TEST_CASE("per-axis ratios and 3D masks") {
    const BinaryMask m = make_zero_centered_mask({4, 5, 6}, {0.5, 0.4, 0.99}, 3);
    CHECK(m.size() - m.count() == 2 * 2 * 5);
    CHECK(make_zero_centered_mask({4, 4}, {0.5, 0.5}, 1).count() == 12);
    // Largest admissible block leaves one voxel per axis; every placement keeps the count.
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CHECK(make_zero_centered_mask({5, 6}, {0.8, 0.9}, seed).count() == 5 * 6 - 4 * 5);
    }
    CHECK_THROWS_AS(make_zero_centered_mask({4, 4}, {0.0, 0.5}, 1), ValidationError);
    CHECK_THROWS_AS(make_zero_centered_mask({4, 4}, {1.0, 0.5}, 1), ValidationError);
    CHECK_THROWS_AS(make_zero_centered_mask({4, 4}, {0.1, 0.5}, 1), ValidationError);
    CHECK_THROWS_AS(make_zero_centered_mask({4, 4}, {0.5}, 1), ValidationError);
}

TEST_CASE("mask is a pure function of the seed") {
    CHECK(make_zero_centered_mask({16, 16}, {2.0 / 3.0, 2.0 / 3.0}, 9) == make_zero_centered_mask({16, 16}, {2.0 / 3.0, 2.0 / 3.0}, 9));
    bool any_differ = false;
    for (std::uint64_t s = 0; s < 10 && !any_differ; ++s) {
        any_differ = !(make_zero_centered_mask({16, 16}, {0.5, 0.5}, s) == make_zero_centered_mask({16, 16}, {0.5, 0.5}, s + 1));
    }
    CHECK(any_differ);
}

TEST_CASE("mix conserves the sum and selects by mask") {
    Rng rng(11);
    const Shape sp{6, 7};
    for (int trial = 0; trial < 20; ++trial) {
        const Volume a = random_volume(rng, sp), b = random_volume(rng, sp);
        const BinaryMask m = make_zero_centered_mask(sp, {0.5, 0.5}, rng.next_u64());
        const Volume ab = mix(a, b, m), ba = mix(b, a, m);
        for (std::size_t i = 0; i < 42; ++i) {
            CHECK(ab.data()[i] + ba.data()[i] == a.data()[i] + b.data()[i]);
            CHECK(ab.data()[i] == (m[i] ? a.data()[i] : b.data()[i]));
        }
    }
}

TEST_CASE("multi-channel volumes broadcast the mask") {
    NdArray<double> a(Shape{2, 2, 2}, 1.0), b(Shape{2, 2, 2}, 5.0);
    NdArray<std::uint8_t> m(Shape{2, 2}, 1);
    m[3] = 0;
    const Volume out = mix(Volume(a), Volume(b), BinaryMask(m));
    CHECK(out.data()[3] == 5.0);
    CHECK(out.data()[7] == 5.0);
    CHECK(out.data()[2] == 1.0);
}

TEST_CASE("cutmix pair swaps regions for images and labels") {
    Rng rng(2);
    const Shape sp{4, 4};
    const Volume xl = random_volume(rng, sp), xu = random_volume(rng, sp);
    const LabelMap yl(NdArray<std::int32_t>(sp, 1), 3), yu(NdArray<std::int32_t>(sp, 2), 3);
    const BinaryMask m = make_zero_centered_mask(sp, {0.5, 0.5}, 4);
    const CutMixPair p = cutmix_pair(xl, xu, yl, yu, m);
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(p.x_l2u.data()[i] == (m[i] ? xl.data()[i] : xu.data()[i]));
        CHECK(p.x_u2l.data()[i] == (m[i] ? xu.data()[i] : xl.data()[i]));
        CHECK(p.y_l2u[i] == (m[i] ? 1 : 2));
        CHECK(p.y_u2l[i] == (m[i] ? 2 : 1));
    }
}

TEST_CASE("config broadcasts a single ratio") {
    MixConfig c;
    CHECK(c.ratios_for(3) == std::vector<double>(3, 2.0 / 3.0));
    c.zero_ratio = {0.5, 0.25};
    CHECK_THROWS_AS(c.ratios_for(3), ValidationError);
    c.zero_ratio = {1.0};
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("mix rejects shape mismatch") {
    const Volume a(NdArray<double>(Shape{1, 4, 4})), b(NdArray<double>(Shape{1, 4, 5}));
    const BinaryMask m(NdArray<std::uint8_t>(Shape{4, 4}, 1));
    CHECK_THROWS_AS(mix(a, b, m), ValidationError);
    CHECK_THROWS_AS(mix(a, a, BinaryMask(NdArray<std::uint8_t>(Shape{4, 5}, 1))), ValidationError);
}
