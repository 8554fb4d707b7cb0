#include "dsseg/optim.hpp"

#include <cmath>

namespace dsseg {

using nlohmann::json;

void OptimizerConfig::validate() const {
    if (!(lr > 0.0)) throw ValidationError("optimizer: lr must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("optimizer: momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ValidationError("optimizer: weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ValidationError("optimizer: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ValidationError("optimizer: eps must be > 0");
}

OptimizerConfig OptimizerConfig::sgd(double lr, double momentum, double weight_decay) {
    OptimizerConfig c;
    c.kind = OptimizerKind::sgd;
    c.lr = lr;
    c.momentum = momentum;
    c.weight_decay = weight_decay;
    return c;
}

OptimizerConfig OptimizerConfig::adam(double lr) {
    OptimizerConfig c;
    c.kind = OptimizerKind::adam;
    c.lr = lr;
    return c;
}

json to_json(const OptimizerConfig& c) {
    json j{{"type", c.kind == OptimizerKind::sgd ? "sgd" : "adam"}, {"lr", c.lr}, {"weight_decay", c.weight_decay}};
    if (c.kind == OptimizerKind::sgd) {
        j["momentum"] = c.momentum;
    } else {
        j["beta1"] = c.beta1;
        j["beta2"] = c.beta2;
        j["eps"] = c.eps;
    }
    return j;
}

OptimizerConfig optimizer_config_from_json(const json& j) {
    try {
        const std::string type = j.value("type", std::string("adam"));
        OptimizerConfig c;
        if (type == "sgd") {
            c = OptimizerConfig::sgd();
        } else if (type == "adam") {
            c = OptimizerConfig::adam();
        } else {
            throw ValidationError("optimizer: unknown type '" + type + "'");
        }
        c.lr = j.value("lr", c.lr);
        c.momentum = j.value("momentum", c.momentum);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.eps = j.value("eps", c.eps);
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("optimizer config: ") + e.what());
    }
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Optimizer::step(ParameterTree& params, const ParameterTree& grads) {
    require_congruent(params, grads);
    if (t_ == 0) {
        m_ = params.zeros_like();
        if (cfg_.kind == OptimizerKind::adam) v_ = params.zeros_like();
    } else {
        require_congruent(params, m_);
    }
    ++t_;

    if (cfg_.kind == OptimizerKind::sgd) {
        for (std::size_t e = 0; e < params.size(); ++e) {
            auto& p = params[e].array;
            const auto& g = grads[e].array;
            auto& buf = m_[e].array;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double d = g[i] + cfg_.weight_decay * p[i];
                buf[i] = t_ == 1 ? d : cfg_.momentum * buf[i] + d;
                p[i] -= cfg_.lr * buf[i];
            }
        }
        return;
    }

    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t e = 0; e < params.size(); ++e) {
        auto& p = params[e].array;
        const auto& g = grads[e].array;
        auto& m = m_[e].array;
        auto& v = v_[e].array;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double d = g[i] + cfg_.weight_decay * p[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * d;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * d * d;
            p[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
        }
    }
}

}  // namespace dsseg
