#pragma once

#include <cstdint>
#include <span>

namespace cf {

// Mann-Whitney statistic with average ranks for ties; equals the trapezoidal ROC area.
// Throws ValidationError unless both classes are present.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Average precision: sum over the descending-score sweep of (R_n - R_{n-1}) * P_n, where each
// block of tied scores is one step. Throws ValidationError without positives.
double auprc(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace cf
