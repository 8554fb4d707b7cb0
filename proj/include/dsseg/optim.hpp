#pragma once

#include "dsseg/datamodel.hpp"
#include "json.hpp"

namespace dsseg {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    double momentum = 0.9;       // sgd
    double weight_decay = 0.0;   // L2 term added to the gradient
    double beta1 = 0.9;          // adam
    double beta2 = 0.999;        // adam
    double eps = 1e-8;           // adam

    void validate() const;
    static OptimizerConfig sgd(double lr = 0.01, double momentum = 0.9, double weight_decay = 1e-4);
    static OptimizerConfig adam(double lr = 1e-3);
};

nlohmann::json to_json(const OptimizerConfig& cfg);
OptimizerConfig optimizer_config_from_json(const nlohmann::json& j);

// SGD with heavy-ball momentum, or Adam with bias correction. State is lazily shaped on the first step.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg);

    void step(ParameterTree& params, const ParameterTree& grads);
    long long steps() const noexcept { return t_; }

private:
    OptimizerConfig cfg_;
    ParameterTree m_;
    ParameterTree v_;
    long long t_ = 0;
};

}  // namespace dsseg
