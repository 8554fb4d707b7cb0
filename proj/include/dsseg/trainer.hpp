#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsseg/grid.hpp"
#include "dsseg/laema.hpp"
#include "dsseg/losses.hpp"
#include "dsseg/metrics.hpp"
#include "dsseg/mixing.hpp"
#include "dsseg/network.hpp"
#include "dsseg/optim.hpp"
#include "dsseg/rng.hpp"
#include "dsseg/selection.hpp"
#include "dsseg/synthdata.hpp"
#include "json.hpp"

namespace dsseg {

// Which student (or blend) updates the teacher.
enum class SelectionMode { entropy, fixed_1, fixed_2, average };

struct TrainConfig {
    std::filesystem::path dataset_dir;
    std::filesystem::path output_dir = "runs/default";
    // Checkpoint used to initialise self-training; empty means output_dir/pretrain.
    std::filesystem::path init_checkpoint;

    int pretrain_iters = 300;
    int selftrain_iters = 600;
    int labeled_per_batch = 2;
    int unlabeled_per_batch = 2;
    Shape crop_shape{32, 32};
    std::vector<std::size_t> flip_axes{0, 1};
    OptimizerConfig optimizer = OptimizerConfig::adam(1e-3);
    int eval_every = 50;

    LossWeights loss_weights;
    MixConfig mix;
    LAEMAConfig laema;
    NetConfig net;
    std::uint64_t seed = 0;

    bool dual_student = true;
    SelectionMode selection_mode = SelectionMode::entropy;
    ScoreKind score = ScoreKind::self_cross_entropy;
    MseReduction mse_reduction = MseReduction::masked_mean;
    Adjacency pseudo_label_adjacency = Adjacency::face;
    bool write_outputs = true;  // checkpoints and logs under output_dir

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
// Every field is optional; missing fields keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

struct TrainLogRow {
    long long t = 0;
    double loss1 = 0.0;
    double loss2 = 0.0;  // 0 without a second student
    int chosen_student = 1;  // 0 for the average blend
    double score1 = 0.0;
    double score2 = 0.0;
    double w_global = 1.0;
    double w_decay = 1.0;
    double w = 1.0;
    bool fallback_used = false;
    std::optional<double> val_dice;
};

void write_train_log_csv(std::ostream& os, const std::vector<TrainLogRow>& rows);
std::vector<TrainLogRow> read_train_log_csv(std::istream& is);

// Named random streams. Every random decision in training derives its seed from TrainConfig::seed through these.
namespace streams {
inline constexpr std::uint64_t kPretrainOrder = 11;
inline constexpr std::uint64_t kLabeledOrder = 12;
inline constexpr std::uint64_t kUnlabeledOrder = 13;
inline constexpr std::uint64_t kAugment = 21;
inline constexpr std::uint64_t kMask = 31;
inline constexpr std::uint64_t kDropout = 41;

inline constexpr std::uint64_t kPretrainPhase = 0;
inline constexpr std::uint64_t kSelfTrainPhase = 1;

inline std::uint64_t augment_seed(std::uint64_t seed, std::uint64_t phase, long long t, std::size_t slot) {
    return derive_seed(seed, {kAugment, phase, static_cast<std::uint64_t>(t), slot});
}
// student is 0 when both students share the mask.
inline std::uint64_t mask_seed(std::uint64_t seed, long long t, std::size_t pair, std::size_t student) {
    return derive_seed(seed, {kMask, static_cast<std::uint64_t>(t), pair, student});
}
// student is 0 during pretraining.
inline std::uint64_t dropout_seed(std::uint64_t seed, std::uint64_t phase, std::size_t student, long long t,
                                  std::size_t slot) {
    return derive_seed(seed, {kDropout, phase, student, static_cast<std::uint64_t>(t), slot});
}
}  // namespace streams

// Endless sampler over [0, n): a fresh seeded permutation per pass.
class CyclicSampler {
public:
    CyclicSampler(std::size_t n, std::uint64_t seed);
    std::size_t next();

private:
    void reshuffle();
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    Rng rng_;
};

// Samples held in memory for one run. Unlabeled samples are loaded without their labels.
struct TrainingData {
    DatasetManifest manifest;
    std::vector<Sample> labeled;
    std::vector<Sample> unlabeled;
    std::vector<Sample> val;
};

TrainingData load_training_data(const std::filesystem::path& dataset_dir);

struct PretrainResult {
    Checkpoint checkpoint;
    std::vector<double> losses;  // batch loss per iteration
};

// Supervised training of one network on the labeled split with Dice + CE.
PretrainResult pretrain(const TrainConfig& cfg);
PretrainResult pretrain(const TrainConfig& cfg, const TrainingData& data);

struct SelfTrainHooks {
    // Called after every teacher update with the iteration and the new teacher weights.
    std::function<void(long long, const ParameterTree&)> on_teacher_update;
};

struct SelfTrainResult {
    Checkpoint teacher;
    Checkpoint best_teacher;
    Checkpoint student1;
    Checkpoint student2;
    std::vector<TrainLogRow> log;
    std::optional<double> best_val_dice;
    long long pseudo_label_batches = 0;    // batches passed through the component filter
    long long pseudo_labels_filtered = 0;  // individual pseudo-labels filtered
};

SelfTrainResult self_train(const TrainConfig& cfg, const Checkpoint& init, const SelfTrainHooks& hooks = {});
SelfTrainResult self_train(const TrainConfig& cfg, const Checkpoint& init, const TrainingData& data,
                           const SelfTrainHooks& hooks = {});

// Deterministic forward + argmax.
LabelMap predict_labels(const UNet& net, const Volume& x);

using CaseMetrics = std::vector<std::pair<std::string, MetricsRecord>>;

// Per-case metrics on a split ("labeled", "unlabeled", "val" or "all").
CaseMetrics evaluate(const Checkpoint& ckpt, const std::filesystem::path& dataset_dir, const std::string& split);
CaseMetrics evaluate(const UNet& net, const std::vector<Sample>& samples);

}  // namespace dsseg
