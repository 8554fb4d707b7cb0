#include "dsseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "dsseg/grid.hpp"

namespace dsseg {

namespace {

void require_same(const LabelMap& pred, const LabelMap& gt, const char* op) {
    if (pred.shape() != gt.shape()) {
        throw ValidationError(std::string(op) + ": prediction " + shape_str(pred.shape()) + " vs ground truth " +
                              shape_str(gt.shape()));
    }
}

std::vector<double> directed(const std::vector<std::vector<double>>& from, const std::vector<std::vector<double>>& to) {
    std::vector<double> out;
    out.reserve(from.size());
    for (const auto& a : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& b : to) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
            best = std::min(best, d2);
        }
        out.push_back(std::sqrt(best));
    }
    std::sort(out.begin(), out.end());
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

void write_opt(std::ostream& os, const std::optional<double>& v) {
    if (v) {
        os << *v;
    } else {
        os << "NA";
    }
}

}  // namespace

DiceJaccard dice_jaccard(const LabelMap& pred, const LabelMap& gt, int cls) {
    require_same(pred, gt, "dice_jaccard");
    std::size_t a = 0, b = 0, both = 0;
    for (std::size_t v = 0; v < pred.size(); ++v) {
        const bool in_a = pred[v] == cls;
        const bool in_b = gt[v] == cls;
        a += in_a;
        b += in_b;
        both += in_a && in_b;
    }
    if (a + b == 0) return {1.0, 1.0};
    return {2.0 * static_cast<double>(both) / static_cast<double>(a + b),
            static_cast<double>(both) / static_cast<double>(a + b - both)};
}

std::vector<std::size_t> boundary_voxels(const LabelMap& labels, int cls) {
    const Shape& shape = labels.shape();
    const auto offsets = neighbour_offsets(shape.size(), Adjacency::face);
    std::vector<std::size_t> out;
    std::vector<std::size_t> coord;
    for (std::size_t v = 0; v < labels.size(); ++v) {
        if (labels[v] != cls) continue;
        unravel(v, shape, coord);
        for (const auto& off : offsets) {
            std::size_t u;
            if (!neighbour_index(coord, off, shape, u) || labels[u] != cls) {
                out.push_back(v);
                break;
            }
        }
    }
    return out;
}

double percentile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw ValidationError("percentile_sorted: empty input");
    const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

SurfaceDistances surface_distances(const LabelMap& pred, const LabelMap& gt, int cls,
                                   const std::vector<double>& spacing) {
    require_same(pred, gt, "surface_distances");
    if (spacing.size() != pred.shape().size()) throw ValidationError("surface_distances: spacing rank mismatch");
    for (double s : spacing) {
        if (!(s > 0.0)) throw ValidationError("surface_distances: spacing must be positive");
    }
    auto physical = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::vector<double>> pts;
        std::vector<std::size_t> coord;
        for (auto v : idx) {
            unravel(v, pred.shape(), coord);
            std::vector<double> p(coord.size());
            for (std::size_t i = 0; i < coord.size(); ++i) p[i] = static_cast<double>(coord[i]) * spacing[i];
            pts.push_back(std::move(p));
        }
        return pts;
    };
    const auto a = physical(boundary_voxels(pred, cls));
    const auto b = physical(boundary_voxels(gt, cls));
    if (a.empty() || b.empty()) return {};

    const auto ab = directed(a, b);
    const auto ba = directed(b, a);
    return {std::max(percentile_sorted(ab, 95.0), percentile_sorted(ba, 95.0)), 0.5 * (mean_of(ab) + mean_of(ba))};
}

MetricsRecord evaluate_case(const LabelMap& pred, const LabelMap& gt, const std::vector<double>& spacing) {
    require_same(pred, gt, "evaluate_case");
    if (pred.num_classes() != gt.num_classes()) throw ValidationError("evaluate_case: num_classes mismatch");
    MetricsRecord rec;
    rec.dice = rec.jaccard = 0.0;
    double hd_sum = 0.0, asd_sum = 0.0;
    int hd_n = 0, asd_n = 0;
    for (int cls = 1; cls < gt.num_classes(); ++cls) {
        const auto overlap = dice_jaccard(pred, gt, cls);
        const auto dist = surface_distances(pred, gt, cls, spacing);
        rec.per_class.push_back({cls, overlap.dice, overlap.jaccard, dist.hd95_mm, dist.asd_mm});
        rec.dice += overlap.dice;
        rec.jaccard += overlap.jaccard;
        if (dist.hd95_mm) hd_sum += *dist.hd95_mm, ++hd_n;
        if (dist.asd_mm) asd_sum += *dist.asd_mm, ++asd_n;
    }
    const auto fg = static_cast<double>(gt.num_classes() - 1);
    rec.dice /= fg;
    rec.jaccard /= fg;
    if (hd_n) rec.hd95_mm = hd_sum / hd_n;
    if (asd_n) rec.asd_mm = asd_sum / asd_n;
    return rec;
}

void write_metrics_csv(std::ostream& os, const std::vector<std::pair<std::string, MetricsRecord>>& cases,
                       int num_classes) {
    os << "case_id";
    for (int c = 1; c < num_classes; ++c) {
        os << ",dice_c" << c << ",jaccard_c" << c << ",hd95_mm_c" << c << ",asd_mm_c" << c;
    }
    os << ",dice,jaccard,hd95_mm,asd_mm\n";
    os << std::setprecision(10);

    const std::size_t cols = static_cast<std::size_t>(num_classes - 1) * 4 + 4;
    std::vector<double> sums(cols, 0.0);
    std::vector<int> counts(cols, 0);
    auto emit = [&](std::size_t col, const std::optional<double>& v) {
        os << ',';
        write_opt(os, v);
        if (v) sums[col] += *v, ++counts[col];
    };
    for (const auto& [id, rec] : cases) {
        if (rec.per_class.size() != static_cast<std::size_t>(num_classes - 1)) {
            throw ValidationError("write_metrics_csv: case " + id + " has the wrong number of classes");
        }
        os << id;
        std::size_t col = 0;
        for (const auto& cm : rec.per_class) {
            emit(col++, cm.dice);
            emit(col++, cm.jaccard);
            emit(col++, cm.hd95_mm);
            emit(col++, cm.asd_mm);
        }
        emit(col++, rec.dice);
        emit(col++, rec.jaccard);
        emit(col++, rec.hd95_mm);
        emit(col++, rec.asd_mm);
        os << '\n';
    }
    os << "mean";
    for (std::size_t col = 0; col < cols; ++col) {
        os << ',';
        write_opt(os, counts[col] ? std::optional<double>(sums[col] / counts[col]) : std::nullopt);
    }
    os << '\n';
}

double mean_dice(const std::vector<std::pair<std::string, MetricsRecord>>& cases) {
    if (cases.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [id, rec] : cases) s += rec.dice;
    return s / static_cast<double>(cases.size());
}

}  // namespace dsseg
