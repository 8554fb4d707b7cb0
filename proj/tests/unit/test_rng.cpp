#include <cmath>
#include <set>

#include "doctest.h"
#include "dsseg/rng.hpp"

using namespace dsseg;

TEST_CASE("generator is reproducible and sub-streams differ") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    std::set<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 50; ++i)
        for (std::uint64_t j = 0; j < 50; ++j) seeds.insert(derive_seed(7, {i, j}));
    CHECK(seeds.size() == 2500);
    CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
    CHECK(derive_seed(7, {1}) != derive_seed(8, {1}));
}

TEST_CASE("uniform and below stay in range") {
    Rng r(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        CHECK((u >= 0.0 && u < 1.0));
        CHECK(r.below(7) < 7);
    }
}

TEST_CASE("normal draws have unit moments") {
    Rng r(3);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}
