#include "dsseg/laema.hpp"

#include <algorithm>
#include <cmath>

namespace dsseg {

void LAEMAConfig::validate() const {
    if (!(w_max > 0.0 && w_max <= 1.0)) throw ValidationError("LAEMAConfig: w_max must lie in (0, 1]");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("LAEMAConfig: lambda must be >= 0");
}

double global_weight(long long t, double w_max) {
    if (t < 0) throw ValidationError("global_weight: negative iteration");
    return std::max(1.0 / (1.0 + static_cast<double>(t)), w_max);
}

double decay_weight(double loss, double lambda) {
    if (!(loss >= 0.0) || !std::isfinite(loss)) throw ValidationError("decay_weight: loss must be finite and >= 0");
    return std::exp(-lambda * loss);
}

double la_ema_weight(long long t, double loss, const LAEMAConfig& cfg) {
    cfg.validate();
    const double g = global_weight(t, cfg.w_max);
    if (cfg.mode == EmaMode::standard_ema) return g;
    return g * decay_weight(loss, cfg.lambda);
}

ParameterTree ema_update(const ParameterTree& teacher, const ParameterTree& student, double w) {
    if (!(w > 0.0 && w <= 1.0)) throw ValidationError("ema_update: weight must lie in (0, 1]");
    return tree_axpy(teacher, student, 1.0 - w, w);
}

LossAwareEma::LossAwareEma(LAEMAConfig cfg) : cfg_(cfg) { cfg_.validate(); }

double LossAwareEma::step(ParameterTree& teacher, const ParameterTree& student, double loss) {
    const double g = global_weight(state_.t, cfg_.w_max);
    const double d = cfg_.mode == EmaMode::la_ema ? decay_weight(loss, cfg_.lambda) : 1.0;
    // Same expression as la_ema_weight so the two paths agree bitwise.
    const double w = cfg_.mode == EmaMode::la_ema ? g * d : g;
    teacher = ema_update(teacher, student, w);
    state_.last_w_global = g;
    state_.last_w_decay = d;
    state_.last_w = w;
    ++state_.t;
    return w;
}

}  // namespace dsseg
