#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cf/dataset.hpp"
#include "cf/estimator.hpp"

namespace cf {

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 0.05;
    int batch_size = 128;
    int epochs = 30;
    double alpha = 0.7;      // focal loss class weight
    double gamma = 3.0;      // focal loss focusing exponent
    int shift_range = -1;    // augmentation shift bound; -1 means L/3
    bool cosine = true;      // cosine-annealed learning rate, per step
    std::uint64_t seed = 0;

    int resolved_shift(int L) const { return shift_range < 0 ? L / 3 : shift_range; }
    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
    bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const EstimatorConfig& cfg);
EstimatorConfig estimator_config_from_json(const nlohmann::json& j);

struct EstimatorCheckpoint {
    EstimatorWeights weights;
    TrainConfig train;
    int epoch = -1;                    // epoch the weights come from; -1 for untrained
    double val_auprc = 0.0;
    std::vector<double> loss_curve;    // mean training loss per epoch
    std::vector<double> val_curve;     // validation AUPRC per epoch
    bool diverged = false;
    std::string note;

    bool operator==(const EstimatorCheckpoint&) const = default;
};

// Adam with decoupled weight decay. Decay (theta -= lr * wd * theta) applies to weight
// matrices and the embedding kernel only.
class AdamW {
public:
    AdamW(const EstimatorWeights& w, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8);
    void step(EstimatorWeights& w, const std::vector<ad::Matrix>& grads, double lr);
    long steps() const { return t_; }

private:
    double wd_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<bool> decay_;
    std::vector<ad::Matrix> m_, v_;
};

double cosine_lr(double base, long step, long total_steps);

// Scores every sample with the estimator.
std::vector<double> predict(const EstimatorWeights& w, const Dataset& ds, int jobs = 1);

struct EpochReport {
    int epoch = 0;
    double train_loss = 0.0;
    double val_auprc = 0.0;
};

// Trains from init_estimator(est_cfg, seed) and returns the epoch with the best validation
// AUPRC (earliest on ties). A non-finite loss or gradient stops training; the best
// checkpoint so far is returned with `diverged` set.
EstimatorCheckpoint train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                          const EstimatorConfig& est_cfg, int jobs = 1,
                          const std::function<void(const EpochReport&)>& on_epoch = {});

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Weights are stored as f32; save rounds them, so load(save(c)) == c when c is rounded.
void save_checkpoint(const EstimatorCheckpoint& ckpt, const std::filesystem::path& path);
EstimatorCheckpoint load_checkpoint(const std::filesystem::path& path);
// Throws ValidationError when the checkpoint cannot score sequences of length L.
void require_input_length(const EstimatorCheckpoint& ckpt, std::uint32_t L);

}  // namespace cf
