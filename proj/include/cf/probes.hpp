#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cf/estimator.hpp"

namespace cf {

struct SaliencyMap {
    std::vector<double> values;  // length L, min-max normalized to [0, 1]
    double confidence = 0.0;     // model p for the pair
    bool degenerate = false;     // constant CAM, reported as all zeros
};

// Grad-CAM on the output of the last attention sub-layer: channel weights are the
// token-mean gradients of the logit, the map is the rectified weighted channel sum per
// window token (class token excluded), linearly interpolated from window centers to L.
SaliencyMap grad_cam(const EstimatorWeights& w, PairView x);

struct ReversalResult {
    double p_original = 0.0;
    double p_shifted = 0.0;
};

// Moves the effect column `shift` steps earlier (boundary replication) and rescores.
ReversalResult temporal_reversal_probe(const EstimatorWeights& w, PairView x, int shift = 30);

// Shifts only the effect column; positive = earlier.
std::vector<float> shift_effect_earlier(PairView x, int shift);

// Rows of (index, value).
void write_saliency_csv(const SaliencyMap& map, const std::filesystem::path& path);

}  // namespace cf
