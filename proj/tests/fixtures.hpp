#pragma once
// Reference implementations used as test oracles, plus small helpers.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cf/estimator.hpp"
#include "cf/netlist.hpp"
#include "cf/rng.hpp"

namespace fx {

// Three inverters in a loop, not connected to the clock.
inline cf::Netlist ring_oscillator() {
    cf::Netlist nl;
    nl.wires = {{0, "gnd", false, false}, {1, "vcc", false, false}, {2, "clk", false, false},
                {3, "r0", true, false},   {4, "r1", true, false},   {5, "r2", true, false}};
    nl.gnd = 0;
    nl.vcc = 1;
    nl.clock = 2;
    nl.transistors = {{0, 5, 3, 0}, {1, 3, 4, 0}, {2, 4, 5, 0}};
    return nl;
}

// reach[i][j] = 1 when a change of transistor i reaches the gate of transistor j through at
// most max_depth channel-to-gate hops. Only valid for circuits without pass transistors,
// where a transistor's channel wires are driven by that transistor alone.
inline std::vector<std::vector<int>> gate_reachability(const cf::Netlist& nl, int max_depth) {
    const std::size_t n = nl.transistors.size();
    auto is_rail = [&](cf::WireId w) { return w == nl.vcc || w == nl.gnd || w == nl.clock; };
    std::vector<std::vector<std::size_t>> next(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = nl.transistors[i];
        for (std::size_t j = 0; j < n; ++j) {
            const auto g = nl.transistors[j].gate;
            if ((g == a.c1 && !is_rail(a.c1)) || (g == a.c2 && !is_rail(a.c2))) next[i].push_back(j);
        }
    }
    std::vector<std::vector<int>> reach(n, std::vector<int>(n, 0));
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<int> depth(n, -1);
        std::deque<std::size_t> q{s};
        depth[s] = 0;
        while (!q.empty()) {
            const auto u = q.front();
            q.pop_front();
            if (depth[u] >= max_depth) continue;
            for (auto v : next[u]) {
                if (depth[v] < 0) {
                    depth[v] = depth[u] + 1;
                    q.push_back(v);
                }
            }
        }
        for (std::size_t j = 0; j < n; ++j) reach[s][j] = (j != s && depth[j] > 0) ? 1 : 0;
    }
    return reach;
}

// Fraction of (positive, negative) pairs ranked correctly, ties counting one half.
inline double brute_auroc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
    double good = 0, total = 0;
    for (std::size_t a = 0; a < s.size(); ++a) {
        if (!y[a]) continue;
        for (std::size_t b = 0; b < s.size(); ++b) {
            if (y[b]) continue;
            total += 1;
            good += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
        }
    }
    return good / total;
}

// Average precision by sweeping every distinct threshold from high to low.
inline double brute_auprc(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
    std::vector<double> th(s.begin(), s.end());
    std::sort(th.begin(), th.end(), std::greater<>());
    th.erase(std::unique(th.begin(), th.end()), th.end());
    double P = 0;
    for (auto v : y) P += v;
    double ap = 0, prev_recall = 0;
    for (double t : th) {
        double tp = 0, pred = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] >= t) {
                pred += 1;
                tp += y[i];
            }
        }
        const double recall = tp / P;
        ap += (recall - prev_recall) * (tp / pred);
        prev_recall = recall;
    }
    return ap;
}

// Tiny estimator with a random (non-zero) head so every parameter carries gradient.
inline cf::EstimatorWeights tiny_weights(std::uint64_t seed) {
    cf::EstimatorConfig cfg;
    cfg.L = 64;
    cfg.W = 8;
    cfg.C = 8;
    cfg.depth = 1;
    cfg.heads = 2;
    cfg.ff_hidden = 16;
    cfg.pooler_hidden = 8;
    auto w = cf::init_estimator(cfg, seed);
    cf::Rng rng(seed + 1);
    for (auto& t : w.tensors())
        for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] += 0.3 * rng.normal();
    return w;
}

struct GradCheck {
    std::string worst_tensor;
    double worst_rel = 0.0;
};

// Central differences of the mean focal loss, compared tensor by tensor as
// |analytic - numeric| / max(|analytic|, |numeric|, floor) in the 2-norm.
inline GradCheck finite_difference_check(const cf::EstimatorWeights& w, const std::vector<std::vector<float>>& xs,
                                         const std::vector<int>& labels, double h = 1e-5, double floor = 1e-7) {
    auto loss = [&](const cf::EstimatorWeights& v) {
        double sum = 0;
        for (std::size_t s = 0; s < xs.size(); ++s)
            sum += cf::focal_loss(cf::forward(v, xs[s]), labels[s], 0.7, 3.0);
        return sum / static_cast<double>(xs.size());
    };
    std::vector<cf::LabeledView> batch;
    for (std::size_t s = 0; s < xs.size(); ++s) batch.push_back({xs[s], labels[s]});
    const auto g = cf::grad(w, batch, 0.7, 3.0);
    GradCheck out;
    cf::EstimatorWeights v = w;
    for (std::size_t k = 0; k < w.tensors().size(); ++k) {
        auto& m = v.tensors()[k].value;
        cf::ad::Matrix num(m.rows(), m.cols());
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const double orig = m.data()[i];
            m.data()[i] = orig + h;
            const double up = loss(v);
            m.data()[i] = orig - h;
            const double down = loss(v);
            m.data()[i] = orig;
            num.data()[i] = (up - down) / (2 * h);
        }
        const double rel = (g.grads[k] - num).norm() / std::max({g.grads[k].norm(), num.norm(), floor});
        if (rel >= out.worst_rel) {
            out.worst_rel = rel;
            out.worst_tensor = w.tensors()[k].name;
        }
    }
    return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cf_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace fx
