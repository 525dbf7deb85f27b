#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cf/sim.hpp"

namespace cf {

struct PerturbSpec {
    ForceMode mode = ForceMode::invert;
    int onset = -1;       // half-clock within the period; -1 means l/2
    int hold = 1;         // half-clocks the forcing persists
    int window = 1;       // half-clocks measured after onset
    double epsilon = 0.0; // binarization threshold; 0 gives the strict > 0 rule
    bool dedup = true;    // perturb only unique elements of each period

    int resolved_onset(const SimConfig& cfg) const { return onset < 0 ? cfg.l / 2 : onset; }
    void validate(const SimConfig& cfg) const;
};

// Temporal causal effects for one period. Row i holds the effects of perturbing element i.
// The diagonal is computed but excluded from datasets and metrics.
struct CausalGroundTruth {
    int period = 0;
    std::vector<std::int32_t> element_ids;
    std::vector<float> tce;              // n*n, row-major (cause, effect)
    std::vector<std::uint8_t> adjacency; // n*n
    std::vector<std::string> warnings;

    std::size_t size() const { return element_ids.size(); }
    float tce_at(std::size_t i, std::size_t j) const { return tce[i * size() + j]; }
    std::uint8_t adj_at(std::size_t i, std::size_t j) const { return adjacency[i * size() + j]; }
    bool operator==(const CausalGroundTruth&) const = default;
};

// Runs `window` half-clocks from the pre-onset fixpoint with element `target` forced for the
// first `hold` of them. Returns all transistors, row length window*k.
StateRecording perturbed_segment(const Circuit& circuit, const SimState& base_state_at_onset,
                                 std::int32_t target, const PerturbSpec& spec, const SimConfig& cfg,
                                 std::vector<std::string>* warnings = nullptr);

// Mean absolute difference between the perturbed and regular trajectories of one element.
double compute_tce(std::span<const float> x_pert, std::span<const float> x_base);

std::uint8_t binarize_tce(double tce, double epsilon = 0.0);

// Lowest-id representative of each group of bitwise-identical rows, in ascending id order.
std::vector<std::int32_t> dedup_unique(const StateRecording& recording);

struct SweepPeriod {
    StateRecording recording;
    CausalGroundTruth ground_truth;
};

// Simulates cfg.periods periods and, in each, perturbs every (unique) element at the onset
// half-clock, filling TCE and adjacency over the period's element set.
std::vector<SweepPeriod> ground_truth_sweep(const Circuit& circuit, const SimConfig& cfg, const PerturbSpec& spec,
                                            int jobs = 1);

// Averages TCE across periods over the elements present in every period, then binarizes with
// `epsilon`. Intended for float-valued systems where single-period effects are noisy.
CausalGroundTruth aggregate_mean_tce(const std::vector<CausalGroundTruth>& periods, double epsilon);

// <stem>.gt.json sidecar plus <stem>.tce (f32) and <stem>.adj (u8) matrices.
void save_ground_truth(const std::filesystem::path& stem, const CausalGroundTruth& gt);
CausalGroundTruth load_ground_truth(const std::filesystem::path& stem);

}  // namespace cf
