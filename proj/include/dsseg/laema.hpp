#pragma once

#include "dsseg/datamodel.hpp"

namespace dsseg {

enum class EmaMode { standard_ema, la_ema };

struct LAEMAConfig {
    double w_max = 0.01;   // floor of the global student weight
    double lambda = 0.3;   // loss scale inside the decay factor
    EmaMode mode = EmaMode::la_ema;

    void validate() const;
};

struct LAEMAState {
    long long t = 0;  // number of updates applied so far
    double last_w_global = 1.0;
    double last_w_decay = 1.0;
    double last_w = 1.0;
};

// max(1 / (1 + t), w_max)
double global_weight(long long t, double w_max);

// exp(-lambda * loss); loss must be >= 0.
double decay_weight(double loss, double lambda);

// global_weight * decay_weight in la_ema mode, global_weight alone in standard_ema mode.
double la_ema_weight(long long t, double loss, const LAEMAConfig& cfg);

// (1 - w) * teacher + w * student, w in (0, 1].
ParameterTree ema_update(const ParameterTree& teacher, const ParameterTree& student, double w);

// Stateful driver: computes the weight for the current iteration, blends, and advances t.
class LossAwareEma {
public:
    explicit LossAwareEma(LAEMAConfig cfg = {});

    const LAEMAConfig& config() const noexcept { return cfg_; }
    const LAEMAState& state() const noexcept { return state_; }

    // Returns the weight used for this step.
    double step(ParameterTree& teacher, const ParameterTree& student, double loss);

private:
    LAEMAConfig cfg_;
    LAEMAState state_;
};

}  // namespace dsseg
