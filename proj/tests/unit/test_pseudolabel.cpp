#include "doctest.h"
#include "dsseg/errors.hpp"
#include "dsseg/pseudolabel.hpp"
#include "oracles.hpp"

using namespace dsseg;

namespace {

LabelMap from_rows(const std::vector<std::string>& rows, int classes) {
    const std::size_t h = rows.size(), w = rows[0].size();
    NdArray<std::int32_t> a(Shape{h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) a[y * w + x] = rows[y][x] - '0';
    return LabelMap(std::move(a), classes);
}

}  // namespace

TEST_CASE("keeps only the larger blob") {
    const LabelMap in = from_rows({"11100", "11000", "00000", "00011"}, 2);
    const LabelMap out = largest_component_filter(in);
    CHECK(out == from_rows({"11100", "11000", "00000", "00000"}, 2));
}

TEST_CASE("single blobs, background-only maps and classes are independent") {
    const LabelMap one = from_rows({"0110", "0110", "2000"}, 3);
    CHECK(largest_component_filter(one) == one);
    const LabelMap bg = from_rows({"000", "000"}, 3);
    CHECK(largest_component_filter(bg) == bg);
    const LabelMap mixed = from_rows({"1102", "0002", "2010"}, 3);
    CHECK(largest_component_filter(mixed) == from_rows({"1102", "0002", "0000"}, 3));
}

TEST_CASE("diagonal contact is not a connection under face adjacency") {
    const LabelMap in = from_rows({"110", "001"}, 2);
    CHECK(largest_component_filter(in) == from_rows({"110", "000"}, 2));
    CHECK(largest_component_filter(in, Adjacency::full) == in);
}

TEST_CASE("equal sizes keep the component with the smallest index") {
    const LabelMap in = from_rows({"1001", "1001"}, 2);
    CHECK(largest_component_filter(in) == from_rows({"1000", "1000"}, 2));
}

TEST_CASE("3D components use six-neighbourhood") {
    NdArray<std::int32_t> a(Shape{3, 3, 3}, 0);
    a[0] = 1;                  // (0,0,0)
    a[9] = 1;                  // (1,0,0)
    a[26] = 1;                 // (2,2,2), isolated
    const LabelMap out = largest_component_filter(LabelMap(a, 2));
    CHECK(out[0] == 1);
    CHECK(out[9] == 1);
    CHECK(out[26] == 0);
}

TEST_CASE("random maps: one component, subset, idempotent") {
    Rng rng(12);
    for (int i = 0; i < 50; ++i) {
        const LabelMap in = oracle::random_labels(rng, 3, {8, 9});
        const LabelMap out = largest_component_filter(in);
        for (int c = 1; c < 3; ++c) CHECK(oracle::count_components_2d(out, c) <= 1);
        for (std::size_t v = 0; v < in.size(); ++v)
            if (out[v] != 0) CHECK(out[v] == in[v]);
        CHECK(largest_component_filter(out) == out);
    }
}

TEST_CASE("predict applies softmax and validates shape") {
    const Volume x(NdArray<double>(Shape{1, 4, 4}));
    const ProbMap p = predict([](const Volume&) { return NdArray<double>(Shape{3, 4, 4}, 2.0); }, x);
    for (auto v : p.data()) CHECK(v == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(predict([](const Volume&) { return NdArray<double>(Shape{3, 4, 5}); }, x), ValidationError);
}
