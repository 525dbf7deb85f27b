#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cf/dataset.hpp"
#include "cf/train.hpp"

namespace cf {

enum class MethodKind { corr, mi, granger, checkpoint, oracle, constant };

struct Method {
    MethodKind kind = MethodKind::corr;
    std::filesystem::path checkpoint;  // only for MethodKind::checkpoint
    std::string tag() const;
};

// Accepts corr | mi | granger | oracle | constant | checkpoint:PATH.
Method parse_method(const std::string& tag);

struct ScoredPair {
    std::uint32_t i = 0, j = 0, m = 0;
    std::uint8_t label = 0;
    double score = 0.0;
    bool degenerate = false;
};

// Scores every off-diagonal sample of `ds`. Checkpoint methods use `ckpt`, which must be
// loaded by the caller.
std::vector<ScoredPair> score_dataset(const Method& method, const Dataset& ds, const EstimatorCheckpoint* ckpt,
                                      int jobs = 1);

struct GroupMetrics {
    std::uint32_t group = 0;
    std::size_t n = 0;
    std::size_t n_pos = 0;
    double auroc = 0.0;
    double auprc = 0.0;
};

struct MetricsReport {
    std::string method;
    std::string dataset;
    double noise_scale = 0.0;
    std::vector<GroupMetrics> groups;
    std::vector<std::string> warnings;  // skipped groups
    double auroc_mean = 0.0, auroc_std = 0.0;
    double auprc_mean = 0.0, auprc_std = 0.0;
    std::size_t n = 0;
    std::size_t n_pos = 0;
};

// Groups scored pairs by period/subject, computes per-group metrics (groups lacking a class
// are skipped with a warning) and their mean and population std.
MetricsReport summarize(const std::string& method, const std::vector<ScoredPair>& scores, double noise_scale = 0.0);

struct Evaluation {
    MetricsReport report;
    std::vector<ScoredPair> scores;
};

Evaluation evaluate_method(const Method& method, const Dataset& ds, int jobs = 1, double noise_scale = 0.0);

// Columns: method, group, n, n_pos, auroc, auprc, noise_scale.
void write_report_csv(const std::vector<MetricsReport>& reports, const std::filesystem::path& path);
nlohmann::json report_json(const std::vector<MetricsReport>& reports);
// Columns: method, i, j, m, score, degenerate.
void write_scores_csv(const std::string& method, const std::vector<ScoredPair>& scores,
                      const std::filesystem::path& path);

struct PeriodStats {
    int period = 0;
    std::size_t n_unique = 0;
    std::size_t positives = 0;
    double positive_rate = 0.0;  // positives / (n (n - 1))
};

struct StatsReport {
    std::vector<PeriodStats> periods;
    // min, q25, median, q75, max of the per-period positive rate
    double rate_quantiles[5] = {0, 0, 0, 0, 0};
    std::size_t total_positives = 0;
};

StatsReport ground_truth_stats(const std::vector<CausalGroundTruth>& gts);
void write_stats_csv(const StatsReport& s, const std::filesystem::path& path);
nlohmann::json stats_json(const StatsReport& s);

}  // namespace cf
