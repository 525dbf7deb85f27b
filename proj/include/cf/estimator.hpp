#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cf/autodiff.hpp"
#include "cf/rng.hpp"

namespace cf {

struct EstimatorConfig {
    int L = 3840;           // input length
    int W = 32;             // window length (kernel = stride)
    int C = 64;             // token width
    int depth = 2;          // encoder blocks
    int heads = 2;
    int ff_hidden = 256;    // feed-forward width
    int pooler_hidden = 64; // attention-pooler MLP width

    int tokens() const { return L / W; }
    void validate() const;
    bool operator==(const EstimatorConfig&) const = default;
};

struct NamedTensor {
    std::string name;
    std::vector<std::uint32_t> dims;  // rank 1 tensors are stored as 1 x n matrices
    ad::Matrix value;
};

// All learnable parameters, in a fixed order that defines the checkpoint layout.
class EstimatorWeights {
public:
    EstimatorWeights() = default;
    explicit EstimatorWeights(const EstimatorConfig& cfg);  // shapes only, zero-filled

    const EstimatorConfig& config() const { return cfg_; }
    std::vector<NamedTensor>& tensors() { return tensors_; }
    const std::vector<NamedTensor>& tensors() const { return tensors_; }

    std::size_t index_of(const std::string& name) const;
    ad::Matrix& operator[](const std::string& name) { return tensors_[index_of(name)].value; }
    const ad::Matrix& operator[](const std::string& name) const { return tensors_[index_of(name)].value; }

    std::size_t parameter_count() const;
    bool all_finite() const;
    // Rounds every value to the nearest f32, the precision stored in checkpoints.
    void round_to_f32();

    bool operator==(const EstimatorWeights& other) const;

private:
    EstimatorConfig cfg_;
    std::vector<NamedTensor> tensors_;
};

// Closed-form parameter count for a configuration.
std::size_t expected_parameter_count(const EstimatorConfig& cfg);

// Truncated-normal (std 0.02, cut at 2 std) projections, class token and positional
// embeddings; unit layer-norm gains; zero biases; zero output head.
EstimatorWeights init_estimator(const EstimatorConfig& cfg, std::uint64_t seed);

// A pair sample as a length-L sequence of (cause, effect) values, time-major.
using PairView = std::span<const float>;

// Trace of one forward pass kept for gradients and probes.
struct ForwardTrace {
    ad::Var logit;
    std::vector<ad::Var> params;           // parallel to EstimatorWeights::tensors()
    ad::Var last_attention_output;         // (tokens+1) x C, output of the last attention sub-layer
    std::vector<ad::Var> attention_maps;   // per block and head, (tokens+1) x (tokens+1)
    ad::Var pooler_weights;                // 1 x (tokens+1)
};

// Builds the forward graph on `tape`. Parameters become leaves when `track_params` is set.
ForwardTrace forward_graph(ad::Tape& tape, const EstimatorWeights& w, PairView x, bool track_params);

double forward_logit(const EstimatorWeights& w, PairView x);
// P(causal | X) in (0, 1).
double forward(const EstimatorWeights& w, PairView x);

double sigmoid(double z);

// y=1: -alpha (1-p)^gamma ln p;  y=0: -(1-alpha) p^gamma ln(1-p). Requires p in (0,1).
double focal_loss(double p, int label, double alpha, double gamma);

// Shifts both columns by `shift` steps (positive = later), replicating the boundary value
// into the vacated positions.
std::vector<float> shift_pair(PairView x, int shift);

// Draws a shift uniformly from the integers in [-range, range] and applies it.
std::vector<float> random_shift_augment(PairView x, int range, Rng& rng, int* drawn = nullptr);

struct LabeledView {
    PairView x;
    int label = 0;
};

struct BatchGradient {
    double loss = 0.0;                    // mean focal loss over the batch
    std::vector<ad::Matrix> grads;        // parallel to EstimatorWeights::tensors()
};

// Exact gradient of the mean batch focal loss. Samples are processed in a fixed number of
// chunks reduced in order, so the result does not depend on `jobs`.
BatchGradient grad(const EstimatorWeights& w, std::span<const LabeledView> batch, double alpha, double gamma,
                   int jobs = 1);

}  // namespace cf
