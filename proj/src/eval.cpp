#include "cf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "cf/baselines.hpp"
#include "cf/binio.hpp"
#include "cf/error.hpp"
#include "cf/metrics.hpp"
#include "cf/parallel.hpp"

namespace cf {

std::string Method::tag() const {
    switch (kind) {
        case MethodKind::corr: return "corr";
        case MethodKind::mi: return "mi";
        case MethodKind::granger: return "granger";
        case MethodKind::checkpoint: return "checkpoint";
        case MethodKind::oracle: return "oracle";
        case MethodKind::constant: return "constant";
    }
    return "?";
}

Method parse_method(const std::string& tag) {
    if (tag == "corr") return {MethodKind::corr, {}};
    if (tag == "mi") return {MethodKind::mi, {}};
    if (tag == "granger") return {MethodKind::granger, {}};
    if (tag == "oracle") return {MethodKind::oracle, {}};
    if (tag == "constant") return {MethodKind::constant, {}};
    const std::string prefix = "checkpoint:";
    if (tag.starts_with(prefix) && tag.size() > prefix.size())
        return {MethodKind::checkpoint, tag.substr(prefix.size())};
    throw ValidationError("unknown method tag '" + tag + "'");
}

std::vector<ScoredPair> score_dataset(const Method& method, const Dataset& ds, const EstimatorCheckpoint* ckpt,
                                      int jobs) {
    if (method.kind == MethodKind::checkpoint) {
        if (ckpt == nullptr) throw ValidationError("checkpoint method needs a loaded checkpoint");
        require_input_length(*ckpt, ds.L);
    }
    std::vector<std::size_t> keep;
    for (std::size_t s = 0; s < ds.samples.size(); ++s)
        if (ds.samples[s].i != ds.samples[s].j) keep.push_back(s);  // diagonal is masked

    std::vector<ScoredPair> out(keep.size());
    parallel_for(keep.size(), jobs, [&](std::size_t q) {
        const auto& s = ds.samples[keep[q]];
        auto& r = out[q];
        r.i = s.i;
        r.j = s.j;
        r.m = s.m;
        r.label = s.label;
        if (method.kind == MethodKind::oracle) {
            r.score = s.label;
            return;
        }
        if (method.kind == MethodKind::constant) {
            r.score = 0.5;
            return;
        }
        if (method.kind == MethodKind::checkpoint) {
            r.score = forward(ckpt->weights, s.x);
            return;
        }
        const std::size_t L = s.x.size() / 2;
        std::vector<double> x(L), y(L);
        for (std::size_t t = 0; t < L; ++t) {
            x[t] = s.x[2 * t];
            y[t] = s.x[2 * t + 1];
        }
        BaselineScore b;
        if (method.kind == MethodKind::corr) b = corr_score(x, y);
        else if (method.kind == MethodKind::mi) b = mi_score(x, y);
        else b = granger_score(x, y);
        r.score = b.value;
        r.degenerate = b.degenerate;
    });
    return out;
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = sd = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(v.size()));
}

}  // namespace

MetricsReport summarize(const std::string& method, const std::vector<ScoredPair>& scores, double noise_scale) {
    MetricsReport rep;
    rep.method = method;
    rep.noise_scale = noise_scale;
    std::map<std::uint32_t, std::vector<const ScoredPair*>> groups;
    for (const auto& s : scores) groups[s.m].push_back(&s);
    std::vector<double> ar, ap;
    for (const auto& [g, members] : groups) {
        GroupMetrics gm;
        gm.group = g;
        gm.n = members.size();
        std::vector<double> sc;
        std::vector<std::uint8_t> lab;
        for (const auto* p : members) {
            sc.push_back(p->score);
            lab.push_back(p->label);
            gm.n_pos += p->label;
        }
        rep.n += gm.n;
        rep.n_pos += gm.n_pos;
        if (gm.n_pos == 0 || gm.n_pos == gm.n) {
            rep.warnings.push_back("group " + std::to_string(g) + " skipped: only one class present");
            continue;
        }
        gm.auroc = auroc(sc, lab);
        gm.auprc = auprc(sc, lab);
        ar.push_back(gm.auroc);
        ap.push_back(gm.auprc);
        rep.groups.push_back(gm);
    }
    mean_std(ar, rep.auroc_mean, rep.auroc_std);
    mean_std(ap, rep.auprc_mean, rep.auprc_std);
    return rep;
}

Evaluation evaluate_method(const Method& method, const Dataset& ds, int jobs, double noise_scale) {
    std::optional<EstimatorCheckpoint> ckpt;
    if (method.kind == MethodKind::checkpoint) ckpt = load_checkpoint(method.checkpoint);
    Evaluation ev;
    ev.scores = score_dataset(method, ds, ckpt ? &*ckpt : nullptr, jobs);
    ev.report = summarize(method.tag(), ev.scores, noise_scale);
    ev.report.dataset = ds.split;
    return ev;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

void write_report_csv(const std::vector<MetricsReport>& reports, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "method,group,n,n_pos,auroc,auprc,noise_scale\n";
    for (const auto& r : reports)
        for (const auto& g : r.groups)
            os << r.method << ',' << g.group << ',' << g.n << ',' << g.n_pos << ',' << fmt(g.auroc) << ','
               << fmt(g.auprc) << ',' << fmt(r.noise_scale) << '\n';
    bin::write_text(path, os.str());
}

nlohmann::json report_json(const std::vector<MetricsReport>& reports) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json groups = nlohmann::json::array();
        for (const auto& g : r.groups)
            groups.push_back({{"group", g.group}, {"n", g.n}, {"n_pos", g.n_pos}, {"auroc", g.auroc},
                              {"auprc", g.auprc}});
        rows.push_back({{"method", r.method},
                        {"dataset", r.dataset},
                        {"noise_scale", r.noise_scale},
                        {"auroc", {{"mean", r.auroc_mean}, {"std", r.auroc_std}}},
                        {"auprc", {{"mean", r.auprc_mean}, {"std", r.auprc_std}}},
                        {"n", r.n},
                        {"n_pos", r.n_pos},
                        {"groups", groups},
                        {"warnings", r.warnings}});
    }
    return rows;
}

void write_scores_csv(const std::string& method, const std::vector<ScoredPair>& scores,
                      const std::filesystem::path& path) {
    std::ostringstream os;
    os << "method,i,j,m,score,degenerate\n";
    char buf[32];
    for (const auto& s : scores) {
        std::snprintf(buf, sizeof buf, "%.9g", s.score);
        os << method << ',' << s.i << ',' << s.j << ',' << s.m << ',' << buf << ',' << (s.degenerate ? 1 : 0)
           << '\n';
    }
    bin::write_text(path, os.str());
}

StatsReport ground_truth_stats(const std::vector<CausalGroundTruth>& gts) {
    StatsReport rep;
    std::vector<double> rates;
    for (const auto& gt : gts) {
        PeriodStats ps;
        ps.period = gt.period;
        ps.n_unique = gt.size();
        for (std::size_t i = 0; i < gt.size(); ++i)
            for (std::size_t j = 0; j < gt.size(); ++j)
                if (i != j && gt.adj_at(i, j)) ++ps.positives;
        const double pairs = static_cast<double>(ps.n_unique) * static_cast<double>(ps.n_unique > 0 ? ps.n_unique - 1 : 0);
        ps.positive_rate = pairs > 0 ? static_cast<double>(ps.positives) / pairs : 0.0;
        rep.total_positives += ps.positives;
        rates.push_back(ps.positive_rate);
        rep.periods.push_back(ps);
    }
    if (!rates.empty()) {
        std::sort(rates.begin(), rates.end());
        const double qs[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
        for (int q = 0; q < 5; ++q) {
            // linear interpolation between order statistics
            const double pos = qs[q] * static_cast<double>(rates.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const auto hi = std::min(lo + 1, rates.size() - 1);
            rep.rate_quantiles[q] = rates[lo] + (pos - static_cast<double>(lo)) * (rates[hi] - rates[lo]);
        }
    }
    return rep;
}

void write_stats_csv(const StatsReport& s, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "period,n_unique,positives,positive_rate\n";
    for (const auto& p : s.periods)
        os << p.period << ',' << p.n_unique << ',' << p.positives << ',' << fmt(p.positive_rate) << '\n';
    bin::write_text(path, os.str());
}

nlohmann::json stats_json(const StatsReport& s) {
    return {{"periods", s.periods.size()},
            {"total_positives", s.total_positives},
            {"positive_rate",
             {{"min", s.rate_quantiles[0]},
              {"q25", s.rate_quantiles[1]},
              {"median", s.rate_quantiles[2]},
              {"q75", s.rate_quantiles[3]},
              {"max", s.rate_quantiles[4]}}}};
}

}  // namespace cf
