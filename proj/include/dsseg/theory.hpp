#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dsseg/laema.hpp"
#include "json.hpp"

namespace dsseg {

enum class LossProcess { constant, uniform };

// How the teacher evolves between iterations of one trial.
enum class TeacherProcess {
    reset_to_optimum,  // teacher equals theta* before every update (single-step analysis)
    accumulate,        // teacher carries its deviation forward (exploratory, no closed form)
};

// Student = theta* + eps with eps ~ N(0, diag(sigma^2)); the loss feeding the decay factor follows `loss_process`.
struct NoiseModelSpec {
    int dim = 16;
    std::vector<double> sigma{1.0};  // one entry (broadcast) or `dim` entries
    LossProcess loss_process = LossProcess::constant;
    double loss = 2.0;     // constant process
    double loss_lo = 0.0;  // uniform process
    double loss_hi = 1.0;
    int iterations = 100;  // t = 0 .. iterations-1
    int trials = 100000;
    double lambda = 0.3;
    double w_max = 0.01;
    TeacherProcess teacher = TeacherProcess::reset_to_optimum;
    std::uint64_t seed = 0;

    void validate() const;
    double sigma_at(int i) const { return sigma.size() == 1 ? sigma.front() : sigma.at(static_cast<std::size_t>(i)); }
    double trace() const;  // sum of variances
    bool operator==(const NoiseModelSpec&) const = default;
};

nlohmann::json to_json(const NoiseModelSpec& spec);
NoiseModelSpec noise_spec_from_json(const nlohmann::json& j);

// Monte Carlo mean and standard error of ||theta_T - theta*||^2 per iteration.
struct DeviationSeries {
    NoiseModelSpec spec;
    EmaMode mode = EmaMode::standard_ema;
    std::vector<double> mean;
    std::vector<double> se;
};

// Both modes consume the same random draws for a given spec (common random numbers), so they differ only
// through the update weight.
DeviationSeries simulate_deviation(const NoiseModelSpec& spec, EmaMode mode);

struct SuppressionRow {
    long long t = 0;
    double mean_std = 0.0, se_std = 0.0;
    double mean_la = 0.0, se_la = 0.0;
    double ratio = 1.0;     // mean_la / mean_std (1 when both vanish)
    double ratio_se = 0.0;  // delta-method standard error of the ratio
    bool pass = false;
};

struct SuppressionReport {
    bool suppression_expected = true;  // false when lambda * loss can be 0 or there is no noise
    bool all_pass = true;
    std::vector<SuppressionRow> rows;
};

// With suppression expected, an iteration passes when mean_la + 3 SE(diff) < mean_std. Otherwise it passes when
// the ratio is within 3 SE of 1.
SuppressionReport check_suppression(const DeviationSeries& standard, const DeviationSeries& loss_aware);

// Columns: t, mode, mean, se, ratio, pass (two rows per iteration).
void write_suppression_csv(std::ostream& os, const SuppressionReport& report);

}  // namespace dsseg
