#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsseg/datamodel.hpp"

namespace dsseg {

struct DiceJaccard {
    double dice = 1.0;
    double jaccard = 1.0;
};

// Surface distances in mm. std::nullopt marks an undefined value (one of the two surfaces is empty).
struct SurfaceDistances {
    std::optional<double> hd95_mm;
    std::optional<double> asd_mm;
};

struct ClassMetrics {
    int cls = 1;
    double dice = 1.0;
    double jaccard = 1.0;
    std::optional<double> hd95_mm;
    std::optional<double> asd_mm;
};

// Macro averages over foreground classes. Distances average only the classes where they are defined.
struct MetricsRecord {
    double dice = 1.0;
    double jaccard = 1.0;
    std::optional<double> hd95_mm;
    std::optional<double> asd_mm;
    std::vector<ClassMetrics> per_class;
};

// Overlap of the class-`cls` masks. Both are 1 when both masks are empty.
DiceJaccard dice_jaccard(const LabelMap& pred, const LabelMap& gt, int cls);

// Foreground voxels with at least one face neighbour outside the mask; voxels beyond the grid count as outside.
std::vector<std::size_t> boundary_voxels(const LabelMap& labels, int cls);

// Linear-interpolation percentile (q in [0, 100]) of an ascending list.
double percentile_sorted(const std::vector<double>& sorted, double q);

// Pairwise boundary distances (O(|A| |B|)); hd95 is the larger directed 95th percentile, asd the mean of the
// two directed means.
SurfaceDistances surface_distances(const LabelMap& pred, const LabelMap& gt, int cls,
                                   const std::vector<double>& spacing);

MetricsRecord evaluate_case(const LabelMap& pred, const LabelMap& gt, const std::vector<double>& spacing);

// CSV with one row per case (per-class then macro columns) followed by a "mean" summary row.
void write_metrics_csv(std::ostream& os, const std::vector<std::pair<std::string, MetricsRecord>>& cases,
                       int num_classes);

// Mean over cases of the macro Dice.
double mean_dice(const std::vector<std::pair<std::string, MetricsRecord>>& cases);

}  // namespace dsseg
