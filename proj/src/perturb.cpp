#include "cf/perturb.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <unordered_map>

#include "cf/binio.hpp"
#include "cf/error.hpp"
#include "cf/parallel.hpp"
#include "cf/recording_io.hpp"

namespace cf {

void PerturbSpec::validate(const SimConfig& cfg) const {
    const int start = resolved_onset(cfg);
    if (start < 0 || start >= cfg.l) {
        throw ValidationError("perturb: onset outside the period");
    }
    if (hold < 1) {
        throw ValidationError("perturb: hold must be >= 1");
    }
    if (window < 1 || start + window > cfg.l) {
        throw ValidationError("perturb: onset + window must not exceed l");
    }
    if (epsilon < 0.0) {
        throw ValidationError("perturb: epsilon must be >= 0");
    }
}

StateRecording perturbed_segment(const Circuit& circuit, const SimState& base_state_at_onset, std::int32_t target,
                                 const PerturbSpec& spec, const SimConfig& cfg, std::vector<std::string>* warnings) {
    if (target < 0 || static_cast<std::size_t>(target) >= circuit.transistor_count()) {
        throw ValidationError("perturb: unknown element " + std::to_string(target));
    }
    const std::size_t n = circuit.transistor_count();
    const std::size_t row_len = static_cast<std::size_t>(spec.window) * static_cast<std::size_t>(cfg.k);
    StateRecording seg;
    seg.row_len = static_cast<int>(row_len);
    seg.element_ids.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        seg.element_ids[t] = static_cast<std::int32_t>(t);
    }
    seg.data.assign(n * row_len, 0.0f);

    SimState state = base_state_at_onset;
    const Forcing forcing{target, spec.mode};
    for (int h = 0; h < spec.window; ++h) {
        auto half = step_half_clock(state, circuit, cfg, h < spec.hold ? &forcing : nullptr);
        if (!half.converged && warnings != nullptr) {
            warnings->push_back("perturbing element " + std::to_string(target) + ": no fixpoint in half-clock " +
                                std::to_string(h) + " after onset");
        }
        const std::size_t base = static_cast<std::size_t>(h) * static_cast<std::size_t>(cfg.k);
        for (std::size_t s = 0; s < half.snapshots.size(); ++s) {
            for (std::size_t t = 0; t < n; ++t) {
                seg.data[t * row_len + base + s] = half.snapshots[s][t] ? 1.0f : 0.0f;
            }
        }
    }
    return seg;
}

double compute_tce(std::span<const float> x_pert, std::span<const float> x_base) {
    if (x_pert.size() != x_base.size()) {
        throw ValidationError("compute_tce: length mismatch");
    }
    if (x_pert.empty()) {
        throw ValidationError("compute_tce: empty sequences");
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < x_pert.size(); ++t) {
        sum += std::abs(static_cast<double>(x_pert[t]) - static_cast<double>(x_base[t]));
    }
    return sum / static_cast<double>(x_pert.size());
}

std::uint8_t binarize_tce(double tce, double epsilon) {
    return tce > epsilon ? 1 : 0;
}

std::vector<std::int32_t> dedup_unique(const StateRecording& recording) {
    const std::size_t len = static_cast<std::size_t>(recording.row_len);
    std::vector<std::size_t> order(recording.rows());
    for (std::size_t r = 0; r < order.size(); ++r) {
        order[r] = r;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return recording.element_ids[a] < recording.element_ids[b];
    });
    std::unordered_map<std::string, std::int32_t> seen;
    std::vector<std::int32_t> kept;
    for (std::size_t r : order) {
        auto row = recording.row(r);
        std::string key(reinterpret_cast<const char*>(row.data()), len * sizeof(float));
        if (seen.emplace(std::move(key), recording.element_ids[r]).second) {
            kept.push_back(recording.element_ids[r]);
        }
    }
    return kept;
}

std::vector<SweepPeriod> ground_truth_sweep(const Circuit& circuit, const SimConfig& cfg, const PerturbSpec& spec,
                                            int jobs) {
    cfg.validate();
    spec.validate(cfg);
    const int onset = spec.resolved_onset(cfg);
    auto runs = simulate(circuit, cfg, onset);

    std::vector<SweepPeriod> out;
    out.reserve(runs.size());
    const std::size_t k = static_cast<std::size_t>(cfg.k);
    const std::size_t win_len = static_cast<std::size_t>(spec.window) * k;
    const std::size_t offset = static_cast<std::size_t>(onset) * k;

    for (auto& run : runs) {
        const auto& rec = run.recording;
        std::vector<std::int32_t> ids;
        if (spec.dedup) {
            ids = dedup_unique(rec);
        } else {
            ids = rec.element_ids;
        }
        const std::size_t n = ids.size();
        CausalGroundTruth gt;
        gt.period = rec.period;
        gt.element_ids = ids;
        gt.tce.assign(n * n, 0.0f);
        gt.adjacency.assign(n * n, 0);
        gt.warnings = run.warnings;

        std::vector<std::vector<std::string>> cell_warnings(n);
        const SimState& onset_state = *run.captured;
        parallel_for(n, jobs, [&](std::size_t a) {
            // Fresh copy of the pre-onset state per perturbed element.
            auto seg = perturbed_segment(circuit, onset_state, ids[a], spec, cfg, &cell_warnings[a]);
            for (std::size_t b = 0; b < n; ++b) {
                const auto row = static_cast<std::size_t>(ids[b]);
                std::span<const float> pert = seg.row(row);
                std::span<const float> base = rec.row(row).subspan(offset, win_len);
                const double tce = compute_tce(pert, base);
                gt.tce[a * n + b] = static_cast<float>(tce);
                gt.adjacency[a * n + b] = binarize_tce(tce, spec.epsilon);
            }
        });
        for (auto& w : cell_warnings) {
            gt.warnings.insert(gt.warnings.end(), w.begin(), w.end());
        }
        out.push_back({std::move(run.recording), std::move(gt)});
    }
    return out;
}

CausalGroundTruth aggregate_mean_tce(const std::vector<CausalGroundTruth>& periods, double epsilon) {
    if (periods.empty()) {
        throw ValidationError("aggregate_mean_tce: no periods");
    }
    std::map<std::int32_t, int> presence;
    for (const auto& gt : periods) {
        for (auto id : gt.element_ids) {
            ++presence[id];
        }
    }
    CausalGroundTruth agg;
    agg.period = -1;
    for (const auto& [id, count] : presence) {
        if (count == static_cast<int>(periods.size())) {
            agg.element_ids.push_back(id);
        }
    }
    const std::size_t n = agg.element_ids.size();
    std::vector<double> sum(n * n, 0.0);
    for (const auto& gt : periods) {
        std::unordered_map<std::int32_t, std::size_t> pos;
        for (std::size_t r = 0; r < gt.size(); ++r) {
            pos[gt.element_ids[r]] = r;
        }
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = 0; b < n; ++b) {
                sum[a * n + b] += gt.tce_at(pos[agg.element_ids[a]], pos[agg.element_ids[b]]);
            }
        }
    }
    agg.tce.resize(n * n);
    agg.adjacency.resize(n * n);
    for (std::size_t c = 0; c < n * n; ++c) {
        const double mean = sum[c] / static_cast<double>(periods.size());
        agg.tce[c] = static_cast<float>(mean);
        agg.adjacency[c] = binarize_tce(mean, epsilon);
    }
    return agg;
}

void save_ground_truth(const std::filesystem::path& stem, const CausalGroundTruth& gt) {
    const auto n = static_cast<std::uint32_t>(gt.size());
    write_matrix(with_suffix(stem, ".tce"), n, n, gt.tce);
    write_matrix(with_suffix(stem, ".adj"), n, n, gt.adjacency);
    nlohmann::json side{{"m", gt.period}, {"element_ids", gt.element_ids}, {"warnings", gt.warnings}};
    bin::write_text(with_suffix(stem, ".gt.json"), side.dump(1) + "\n");
}

CausalGroundTruth load_ground_truth(const std::filesystem::path& stem) {
    CausalGroundTruth gt;
    try {
        auto side = nlohmann::json::parse(bin::read_text(with_suffix(stem, ".gt.json")));
        gt.period = side.at("m").get<int>();
        gt.element_ids = side.at("element_ids").get<std::vector<std::int32_t>>();
        gt.warnings = side.value("warnings", std::vector<std::string>{});
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("ground-truth sidecar " + stem.string() + ": " + e.what());
    }
    const auto n = gt.size();
    auto adj = read_matrix(with_suffix(stem, ".adj"));
    if (adj.dtype != MatrixDtype::u8 || adj.rows != n || adj.row_len != n) {
        throw ValidationError("adjacency matrix shape does not match element_ids (" + std::to_string(n) + ")");
    }
    gt.adjacency = std::move(adj.u8);
    const auto tce_path = with_suffix(stem, ".tce");
    if (std::filesystem::exists(tce_path)) {
        auto tce = read_matrix(tce_path);
        if (tce.dtype != MatrixDtype::f32 || tce.rows != n || tce.row_len != n) {
            throw ValidationError("tce matrix shape does not match element_ids");
        }
        gt.tce = std::move(tce.f32);
    } else {
        gt.tce.assign(n * n, 0.0f);
        for (std::size_t c = 0; c < n * n; ++c) {
            gt.tce[c] = gt.adjacency[c] ? 1.0f : 0.0f;
        }
    }
    return gt;
}

}  // namespace cf
