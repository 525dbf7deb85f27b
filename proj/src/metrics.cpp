#include "cf/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "cf/error.hpp"

namespace cf {

namespace {

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return descending ? scores[a] > scores[b] : scores[a] < scores[b];
    });
    return order;
}

void check_shapes(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) {
        throw ValidationError("metric: scores and labels differ in length");
    }
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_shapes(scores, labels);
    const auto n_pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](auto v) { return v != 0; }));
    const double n_neg = static_cast<double>(labels.size()) - n_pos;
    if (n_pos == 0.0 || n_neg == 0.0) {
        throw ValidationError("auroc: needs both classes");
    }
    const auto order = order_by_score(scores, false);
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        // Ranks i+1..j share their average.
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t q = i; q < j; ++q) {
            if (labels[order[q]]) {
                pos_rank_sum += avg_rank;
            }
        }
        i = j;
    }
    const double u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    return u / (n_pos * n_neg);
}

double auprc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_shapes(scores, labels);
    const auto n_pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](auto v) { return v != 0; }));
    if (n_pos == 0.0) {
        throw ValidationError("auprc: needs at least one positive");
    }
    const auto order = order_by_score(scores, true);
    double tp = 0.0, fp = 0.0, ap = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        double block_pos = 0.0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            block_pos += labels[order[j]] ? 1.0 : 0.0;
            ++j;
        }
        tp += block_pos;
        fp += static_cast<double>(j - i) - block_pos;
        if (block_pos > 0.0) {
            ap += (block_pos / n_pos) * (tp / (tp + fp));
        }
        i = j;
    }
    return ap;
}

}  // namespace cf
