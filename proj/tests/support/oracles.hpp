#pragma once

// Independent reference implementations used by the unit and acceptance tests. These are written as plain loops
// over coordinates and deliberately share no code with the library routines they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "dsseg/datamodel.hpp"
#include "dsseg/rng.hpp"

namespace oracle {

using dsseg::BinaryMask;
using dsseg::LabelMap;
using dsseg::NdArray;
using dsseg::ProbMap;
using dsseg::Rng;
using dsseg::Shape;

// ---- random inputs -------------------------------------------------------------------------------------------

// Softmax of Gaussian logits with scale `spread`; 2D spatial grid h x w.
inline ProbMap random_probs(Rng& rng, int classes, std::size_t h, std::size_t w, double spread = 2.0) {
    NdArray<double> p(Shape{static_cast<std::size_t>(classes), h, w});
    const std::size_t n = h * w;
    for (std::size_t v = 0; v < n; ++v) {
        std::vector<double> z(static_cast<std::size_t>(classes));
        double mx = -1e300;
        for (auto& x : z) {
            x = spread * rng.normal();
            mx = std::max(mx, x);
        }
        double s = 0.0;
        for (auto& x : z) s += (x = std::exp(x - mx));
        for (int c = 0; c < classes; ++c) p[static_cast<std::size_t>(c) * n + v] = z[static_cast<std::size_t>(c)] / s;
    }
    return ProbMap(std::move(p));
}

inline LabelMap random_labels(Rng& rng, int classes, const Shape& shape) {
    NdArray<std::int32_t> a(shape);
    for (auto& v : a) v = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(classes)));
    return LabelMap(std::move(a), classes);
}

// Binary (0/1) label map made of a few random rectangles, optionally sprinkled with isolated voxels.
inline LabelMap random_blob_mask(Rng& rng, std::size_t h, std::size_t w, int blobs, double speckle = 0.0) {
    NdArray<std::int32_t> a(Shape{h, w}, 0);
    for (int b = 0; b < blobs; ++b) {
        const std::size_t bh = 1 + rng.below(std::max<std::size_t>(1, h / 2));
        const std::size_t bw = 1 + rng.below(std::max<std::size_t>(1, w / 2));
        const std::size_t y0 = rng.below(h - bh + 1), x0 = rng.below(w - bw + 1);
        for (std::size_t y = y0; y < y0 + bh; ++y)
            for (std::size_t x = x0; x < x0 + bw; ++x) a[y * w + x] = 1;
    }
    for (auto& v : a)
        if (rng.uniform() < speckle) v = 1 - v;
    return LabelMap(std::move(a), 2);
}

// ---- selection ------------------------------------------------------------------------------------------------

inline int argmax_at(const ProbMap& p, std::size_t h, std::size_t w, std::size_t y, std::size_t x) {
    const auto& d = p.data();
    int best = 0;
    for (int c = 1; c < p.num_classes(); ++c) {
        if (d[(static_cast<std::size_t>(c) * h + y) * w + x] > d[(static_cast<std::size_t>(best) * h + y) * w + x]) {
            best = c;
        }
    }
    return best;
}

struct SelectionRef {
    int chosen = 1;
    double e1 = 0.0, e2 = 0.0;
    std::vector<int> agree;  // per voxel
};

// Agreement = equal argmax; score = sum over agreement voxels of -log(max prob) (clamped at 1e-12).
inline SelectionRef select_reference(const ProbMap& p1, const ProbMap& p2) {
    const auto sp = p1.spatial_shape();
    const std::size_t h = sp[0], w = sp[1];
    SelectionRef r;
    r.agree.assign(h * w, 0);
    std::size_t agreeing = 0;
    double all1 = 0.0, all2 = 0.0;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const int a1 = argmax_at(p1, h, w, y, x), a2 = argmax_at(p2, h, w, y, x);
            const double s1 = -std::log(std::max(p1.data()[(static_cast<std::size_t>(a1) * h + y) * w + x], 1e-12));
            const double s2 = -std::log(std::max(p2.data()[(static_cast<std::size_t>(a2) * h + y) * w + x], 1e-12));
            all1 += s1;
            all2 += s2;
            if (a1 == a2) {
                r.agree[y * w + x] = 1;
                ++agreeing;
                r.e1 += s1;
                r.e2 += s2;
            }
        }
    }
    if (agreeing == 0) {
        r.e1 = all1 / static_cast<double>(h * w);
        r.e2 = all2 / static_cast<double>(h * w);
    }
    r.chosen = r.e2 < r.e1 ? 2 : 1;
    return r;
}

// ---- connected components ---------------------------------------------------------------------------------------

// Number of 4-connected components of `cls` in a 2D label map, by repeated label propagation until a fixed point.
inline int count_components_2d(const LabelMap& m, int cls) {
    const std::size_t h = m.shape()[0], w = m.shape()[1];
    std::vector<long> id(h * w, -1);
    for (std::size_t i = 0; i < h * w; ++i)
        if (m[i] == cls) id[i] = static_cast<long>(i);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t i = y * w + x;
                if (id[i] < 0) continue;
                const std::pair<long, long> nb[4] = {{static_cast<long>(y) - 1, static_cast<long>(x)},
                                                     {static_cast<long>(y) + 1, static_cast<long>(x)},
                                                     {static_cast<long>(y), static_cast<long>(x) - 1},
                                                     {static_cast<long>(y), static_cast<long>(x) + 1}};
                for (auto [ny, nx] : nb) {
                    if (ny < 0 || nx < 0 || ny >= static_cast<long>(h) || nx >= static_cast<long>(w)) continue;
                    const long j = id[static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx)];
                    if (j >= 0 && j < id[i]) {
                        id[i] = j;
                        changed = true;
                    }
                }
            }
        }
    }
    std::vector<long> roots;
    for (long v : id)
        if (v >= 0) roots.push_back(v);
    std::sort(roots.begin(), roots.end());
    return static_cast<int>(std::unique(roots.begin(), roots.end()) - roots.begin());
}

// ---- metrics --------------------------------------------------------------------------------------------------

struct OverlapRef {
    double dice, jaccard;
};

inline OverlapRef overlap_reference(const LabelMap& a, const LabelMap& b, int cls) {
    long na = 0, nb = 0, both = 0, either = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool x = a[i] == cls, y = b[i] == cls;
        na += x;
        nb += y;
        both += x && y;
        either += x || y;
    }
    if (na + nb == 0) return {1.0, 1.0};
    return {2.0 * static_cast<double>(both) / static_cast<double>(na + nb),
            static_cast<double>(both) / static_cast<double>(either)};
}

// Surface voxels of class `cls` in 2D: in-class voxels with a 4-neighbour that is out of class or off the grid.
inline std::vector<std::pair<long, long>> surface_2d(const LabelMap& m, int cls) {
    const long h = static_cast<long>(m.shape()[0]), w = static_cast<long>(m.shape()[1]);
    auto in = [&](long y, long x) {
        return y >= 0 && x >= 0 && y < h && x < w && m[static_cast<std::size_t>(y * w + x)] == cls;
    };
    std::vector<std::pair<long, long>> out;
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x)
            if (in(y, x) && !(in(y - 1, x) && in(y + 1, x) && in(y, x - 1) && in(y, x + 1))) out.emplace_back(y, x);
    return out;
}

inline double percentile_linear(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct DistanceRef {
    std::optional<double> hd95, asd;
};

inline DistanceRef distance_reference(const LabelMap& a, const LabelMap& b, int cls, double sy, double sx) {
    const auto sa = surface_2d(a, cls), sb = surface_2d(b, cls);
    if (sa.empty() || sb.empty()) return {};
    auto directed = [&](const auto& from, const auto& to) {
        std::vector<double> d;
        for (auto [y, x] : from) {
            double best = std::numeric_limits<double>::infinity();
            for (auto [v, u] : to) {
                const double dy = (y - v) * sy, dx = (x - u) * sx;
                best = std::min(best, std::sqrt(dy * dy + dx * dx));
            }
            d.push_back(best);
        }
        return d;
    };
    const auto ab = directed(sa, sb), ba = directed(sb, sa);
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    return {std::max(percentile_linear(ab, 95.0), percentile_linear(ba, 95.0)), 0.5 * (mean(ab) + mean(ba))};
}

// ---- finite differences ---------------------------------------------------------------------------------------

// Largest relative error between `analytic` and central differences of f at x. Entries where both values are
// below `floor` in magnitude count as agreeing.
inline double max_rel_fd_error(const std::function<double(const std::vector<double>&)>& f,
                               std::span<const double> x0_span, std::span<const double> analytic, double h = 1e-6,
                               double floor = 1e-9) {
    std::vector<double> x(x0_span.begin(), x0_span.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        const double num = (fp - fm) / (2.0 * h);
        const double scale = std::max(std::abs(num), std::abs(analytic[i]));
        if (scale < floor) continue;
        worst = std::max(worst, std::abs(num - analytic[i]) / scale);
    }
    return worst;
}

}  // namespace oracle
