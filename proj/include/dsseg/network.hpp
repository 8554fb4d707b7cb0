#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "dsseg/datamodel.hpp"
#include "json.hpp"

namespace dsseg {

struct NetConfig {
    int in_channels = 1;
    int num_classes = 3;
    int base_width = 8;
    int depth = 3;
    int dims = 2;  // spatial rank, 2 or 3
    double dropout_rate = 0.1;
    std::uint64_t init_seed = 0;

    void validate() const;
    // Inputs must have every spatial dim divisible by this.
    std::size_t size_multiple() const { return std::size_t{1} << depth; }
};

nlohmann::json to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const nlohmann::json& j);

// Opaque record of intermediate activations kept for the backward pass.
struct ForwardTape;

// U-shaped encoder/decoder: `depth` levels of (3^k conv, ReLU) x2 with max-pooling, a bottleneck, and nearest
// upsampling + skip concatenation on the way up, then a 1x1 head. Dropout (training forward only) follows the
// bottleneck and every decoder level except the last.
class UNet {
public:
    // Fresh network with He-normal weights drawn from cfg.init_seed.
    explicit UNet(NetConfig cfg);
    // Network with given weights; throws CongruenceError if they do not match the layout of `cfg`.
    UNet(NetConfig cfg, ParameterTree params);

    const NetConfig& config() const noexcept { return cfg_; }
    const ParameterTree& parameters() const noexcept { return params_; }
    void set_parameters(ParameterTree params);

    // Logits of shape (num_classes, spatial...). With `stochastic`, dropout masks are drawn from `dropout_seed`.
    NdArray<double> forward(const Volume& x, bool stochastic = false, std::uint64_t dropout_seed = 0) const;
    NdArray<double> forward(const Volume& x, bool stochastic, std::uint64_t dropout_seed, ForwardTape& tape) const;

    // Adds dL/dtheta for the recorded forward pass into `grads` (congruent with parameters()).
    void backward(const ForwardTape& tape, const NdArray<double>& grad_logits, ParameterTree& grads) const;

private:
    NetConfig cfg_;
    ParameterTree params_;
};

struct ForwardTapeDeleter {
    void operator()(ForwardTape* t) const;
};
using ForwardTapePtr = std::unique_ptr<ForwardTape, ForwardTapeDeleter>;
ForwardTapePtr make_tape();

// Same as UNet(cfg); named for symmetry with the other module operations.
UNet build_network(const NetConfig& cfg);

struct Checkpoint {
    long long iteration = 0;
    NetConfig net;
    ParameterTree params;
};

// Directory with manifest.json (iteration, net config, entry names/shapes/dtype) and weights.bin
// (little-endian f64, entries concatenated in manifest order).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace dsseg
