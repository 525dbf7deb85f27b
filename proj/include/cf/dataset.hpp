#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cf/perturb.hpp"
#include "cf/sim.hpp"

namespace cf {

// Two stacked sequences, time-major: x[2t] is the candidate cause, x[2t+1] the candidate
// effect. label = A_{i,j,m}.
struct PairSample {
    std::vector<float> x;
    std::uint8_t label = 0;
    std::uint32_t i = 0;
    std::uint32_t j = 0;
    std::uint32_t m = 0;

    bool operator==(const PairSample&) const = default;
};

struct Dataset {
    std::string split;  // "train", "val", "test0", ...
    std::uint32_t L = 0;
    std::vector<PairSample> samples;
    nlohmann::json sidecar = nlohmann::json::object();  // plan, provenance, source

    std::size_t positives() const;
};

struct SplitPlan {
    int n_elements = -1;                 // system size for the id-half rule; -1: recording rows
    std::vector<int> test_periods{0, 1}; // positions among kept (non-outlier) periods
    std::vector<int> val_periods{2};
    int undersample_ratio = 3;
    int min_unique = 4;                  // periods with fewer unique elements are dropped
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static SplitPlan from_json(const nlohmann::json& j);
};

struct SplitResult {
    Dataset train;
    Dataset val;
    std::vector<Dataset> tests;
    std::vector<int> kept_periods;       // period index m of every kept period, in order
    std::vector<int> dropped_periods;
};

// Every ordered pair (i, j), i != j, of `element_ids`, labelled from the ground truth.
std::vector<PairSample> make_pairs(const StateRecording& recording, const CausalGroundTruth& gt,
                                   std::span<const std::int32_t> element_ids);

// Keeps every positive and a uniform draw without replacement of ratio * positives
// negatives (all of them if fewer). Original order is preserved. Train split only.
std::vector<PairSample> undersample_negatives(const std::vector<PairSample>& samples, int ratio, std::uint64_t seed);

// Per period: dedup, drop outliers, split elements by id half (train: first half), map
// periods to test/val/train by position, build pairs, undersample train negatives.
SplitResult build_split(const std::vector<StateRecording>& recordings, const std::vector<CausalGroundTruth>& gts,
                        const SplitPlan& plan);

// All ordered pairs of every period, no split and no undersampling.
Dataset build_all_pairs(const std::vector<StateRecording>& recordings, const std::vector<CausalGroundTruth>& gts,
                        const std::string& split);

struct NoiseSpec {
    double scale = 0.0;
    bool normalize_per_sequence = false;  // multiply by each sequence's own std
    std::uint64_t seed = 0;
};

// x' = x + s * sigma * eps, eps ~ N(0,1) i.i.d.; labels untouched.
std::vector<PairSample> add_noise(const std::vector<PairSample>& samples, const NoiseSpec& spec);
Dataset add_noise(const Dataset& ds, const NoiseSpec& spec);

struct LinearNetworkSpec {
    int n_nodes = 5;
    double edge_density = 0.2;
    int seq_len = 200;
    int n_subjects = 50;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
};

struct LinearNetworkData {
    std::vector<StateRecording> recordings;     // one per subject, period = subject index
    std::vector<CausalGroundTruth> ground_truth; // A[i][j] = 1 iff x_i drives x_j
};

// x_{t+1} = W x_t + b u_t + noise, with lag-one coupling W drawn per subject (each directed
// off-diagonal edge present with probability edge_density) and rescaled to spectral
// radius below 0.95. u_t is a slowly switching binary drive.
LinearNetworkData gen_linear_network(const LinearNetworkSpec& spec);

inline constexpr std::uint16_t kDatasetVersion = 1;

// <path> holds the binary container, <path>.json the sidecar.
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace cf
