#include "cf/dataset.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "cf/binio.hpp"
#include "cf/error.hpp"
#include "cf/parallel.hpp"
#include "cf/recording_io.hpp"
#include "cf/rng.hpp"

namespace cf {

std::size_t Dataset::positives() const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const PairSample& s) { return s.label != 0; }));
}

void SplitPlan::validate() const {
    if (undersample_ratio < 1) throw ValidationError("undersample_ratio must be >= 1");
    if (min_unique < 2) throw ValidationError("min_unique must be >= 2");
    if (test_periods.empty()) throw ValidationError("plan needs at least one test period");
    if (val_periods.empty()) throw ValidationError("plan needs at least one validation period");
    std::set<int> seen;
    for (const auto* list : {&test_periods, &val_periods}) {
        for (int p : *list) {
            if (p < 0) throw ValidationError("period positions must be >= 0");
            if (!seen.insert(p).second) throw ValidationError("test and validation periods overlap");
        }
    }
}

nlohmann::json SplitPlan::to_json() const {
    return {{"n_elements", n_elements},     {"test_periods", test_periods},
            {"val_periods", val_periods},   {"undersample_ratio", undersample_ratio},
            {"min_unique", min_unique},     {"seed", seed}};
}

SplitPlan SplitPlan::from_json(const nlohmann::json& j) {
    SplitPlan p;
    try {
        p.n_elements = j.value("n_elements", p.n_elements);
        p.test_periods = j.value("test_periods", p.test_periods);
        p.val_periods = j.value("val_periods", p.val_periods);
        p.undersample_ratio = j.value("undersample_ratio", p.undersample_ratio);
        p.min_unique = j.value("min_unique", p.min_unique);
        p.seed = j.value("seed", p.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad split plan: ") + e.what());
    }
    p.validate();
    return p;
}

namespace {

std::unordered_map<std::int32_t, std::size_t> row_map(const std::vector<std::int32_t>& ids) {
    std::unordered_map<std::int32_t, std::size_t> m;
    for (std::size_t r = 0; r < ids.size(); ++r) m.emplace(ids[r], r);
    return m;
}

void check_aligned(const StateRecording& rec, const CausalGroundTruth& gt) {
    const std::size_t n = gt.size();
    if (gt.tce.size() != n * n || gt.adjacency.size() != n * n)
        throw ValidationError("ground truth matrices do not match its element list");
    if (rec.data.size() != rec.rows() * static_cast<std::size_t>(rec.row_len))
        throw ValidationError("recording data does not match its shape");
}

// Rows of `rec` restricted to `ids`, in that order.
StateRecording restrict(const StateRecording& rec, const std::vector<std::int32_t>& ids) {
    auto rows = row_map(rec.element_ids);
    StateRecording out;
    out.period = rec.period;
    out.row_len = rec.row_len;
    out.element_ids = ids;
    out.data.reserve(ids.size() * static_cast<std::size_t>(rec.row_len));
    for (auto id : ids) {
        auto it = rows.find(id);
        if (it == rows.end())
            throw ValidationError("element " + std::to_string(id) + " missing from recording of period " +
                                  std::to_string(rec.period));
        auto r = rec.row(it->second);
        out.data.insert(out.data.end(), r.begin(), r.end());
    }
    return out;
}

}  // namespace

std::vector<PairSample> make_pairs(const StateRecording& recording, const CausalGroundTruth& gt,
                                   std::span<const std::int32_t> element_ids) {
    check_aligned(recording, gt);
    auto rec_rows = row_map(recording.element_ids);
    auto gt_rows = row_map(gt.element_ids);
    std::vector<std::size_t> r_idx, g_idx;
    for (auto id : element_ids) {
        auto r = rec_rows.find(id);
        auto g = gt_rows.find(id);
        if (r == rec_rows.end() || g == gt_rows.end())
            throw ValidationError("element " + std::to_string(id) + " not aligned between recording and ground truth");
        r_idx.push_back(r->second);
        g_idx.push_back(g->second);
    }
    const std::size_t n = element_ids.size();
    const std::size_t L = static_cast<std::size_t>(recording.row_len);
    std::vector<PairSample> out;
    out.reserve(n * (n > 0 ? n - 1 : 0));
    for (std::size_t a = 0; a < n; ++a) {
        auto xa = recording.row(r_idx[a]);
        for (std::size_t b = 0; b < n; ++b) {
            if (a == b) continue;
            auto xb = recording.row(r_idx[b]);
            PairSample s;
            s.x.resize(2 * L);
            for (std::size_t t = 0; t < L; ++t) {
                s.x[2 * t] = xa[t];
                s.x[2 * t + 1] = xb[t];
            }
            s.label = gt.adj_at(g_idx[a], g_idx[b]) ? 1 : 0;
            s.i = static_cast<std::uint32_t>(element_ids[a]);
            s.j = static_cast<std::uint32_t>(element_ids[b]);
            s.m = static_cast<std::uint32_t>(recording.period);
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<PairSample> undersample_negatives(const std::vector<PairSample>& samples, int ratio, std::uint64_t seed) {
    if (ratio < 1) throw ValidationError("undersample ratio must be >= 1");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < samples.size(); ++i) (samples[i].label ? pos : neg).push_back(i);
    if (pos.empty()) throw ValidationError("cannot undersample: no positive samples");
    const std::size_t want = std::min(neg.size(), pos.size() * static_cast<std::size_t>(ratio));
    // partial Fisher-Yates over the negative indices
    Rng rng(seed);
    for (std::size_t a = 0; a < want; ++a) {
        auto b = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(a),
                                                          static_cast<std::int64_t>(neg.size()) - 1));
        std::swap(neg[a], neg[b]);
    }
    std::vector<std::size_t> keep = pos;
    keep.insert(keep.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(want));
    std::sort(keep.begin(), keep.end());
    std::vector<PairSample> out;
    out.reserve(keep.size());
    for (auto k : keep) out.push_back(samples[k]);
    return out;
}

SplitResult build_split(const std::vector<StateRecording>& recordings, const std::vector<CausalGroundTruth>& gts,
                        const SplitPlan& plan) {
    plan.validate();
    if (recordings.size() != gts.size()) throw ValidationError("recordings and ground truths differ in count");
    if (recordings.empty()) throw ValidationError("no periods to split");

    int n_elements = plan.n_elements;
    if (n_elements < 0) {
        for (const auto& r : recordings) n_elements = std::max(n_elements, static_cast<int>(r.rows()));
    }
    const std::int32_t half = n_elements / 2;

    // dedup per period, then drop outliers
    const std::size_t P = recordings.size();
    std::vector<std::vector<std::int32_t>> uniq(P);
    parallel_for(P, default_jobs(), [&](std::size_t p) {
        if (recordings[p].period != gts[p].period)
            throw ValidationError("recording and ground truth periods are misaligned");
        check_aligned(recordings[p], gts[p]);
        uniq[p] = dedup_unique(restrict(recordings[p], gts[p].element_ids));
    });

    SplitResult res;
    std::vector<std::size_t> kept;
    for (std::size_t p = 0; p < P; ++p) {
        if (static_cast<int>(uniq[p].size()) < plan.min_unique) {
            res.dropped_periods.push_back(recordings[p].period);
        } else {
            kept.push_back(p);
            res.kept_periods.push_back(recordings[p].period);
        }
    }

    int needed = 0;
    for (int x : plan.test_periods) needed = std::max(needed, x + 1);
    for (int x : plan.val_periods) needed = std::max(needed, x + 1);
    const int n_eval = static_cast<int>(plan.test_periods.size() + plan.val_periods.size());
    if (static_cast<int>(kept.size()) < needed || static_cast<int>(kept.size()) <= n_eval)
        throw ValidationError("insufficient periods: " + std::to_string(kept.size()) + " kept after dropping " +
                              std::to_string(res.dropped_periods.size()) + " outliers, plan needs more than " +
                              std::to_string(std::max(needed, n_eval)));

    enum class Role { train, val, test };
    std::vector<Role> role(kept.size(), Role::train);
    std::vector<int> test_index(kept.size(), -1);
    for (std::size_t t = 0; t < plan.test_periods.size(); ++t) {
        role[static_cast<std::size_t>(plan.test_periods[t])] = Role::test;
        test_index[static_cast<std::size_t>(plan.test_periods[t])] = static_cast<int>(t);
    }
    for (int v : plan.val_periods) role[static_cast<std::size_t>(v)] = Role::val;

    std::vector<std::vector<PairSample>> per(kept.size());
    parallel_for(kept.size(), default_jobs(), [&](std::size_t q) {
        const std::size_t p = kept[q];
        std::vector<std::int32_t> ids;
        for (auto id : uniq[p]) {
            const bool train_half = id < half;
            if ((role[q] == Role::train) == train_half) ids.push_back(id);
        }
        per[q] = make_pairs(recordings[p], gts[p], ids);
    });

    const std::uint32_t L = static_cast<std::uint32_t>(recordings[kept[0]].row_len);
    res.train.split = "train";
    res.val.split = "val";
    res.train.L = res.val.L = L;
    res.tests.resize(plan.test_periods.size());
    for (std::size_t t = 0; t < res.tests.size(); ++t) {
        res.tests[t].split = "test" + std::to_string(t);
        res.tests[t].L = L;
    }
    std::vector<PairSample> train_all;
    for (std::size_t q = 0; q < kept.size(); ++q) {
        if (static_cast<std::uint32_t>(recordings[kept[q]].row_len) != L)
            throw ValidationError("recordings differ in row length");
        auto& dst = role[q] == Role::train ? train_all
                    : role[q] == Role::val ? res.val.samples
                                           : res.tests[static_cast<std::size_t>(test_index[q])].samples;
        dst.insert(dst.end(), std::make_move_iterator(per[q].begin()), std::make_move_iterator(per[q].end()));
    }
    if (std::none_of(train_all.begin(), train_all.end(), [](const PairSample& s) { return s.label != 0; }))
        throw ValidationError("training split has no positive pairs");
    res.train.samples = undersample_negatives(train_all, plan.undersample_ratio, plan.seed);

    nlohmann::json common = {{"plan", plan.to_json()},
                             {"element_split_id", half},
                             {"kept_periods", res.kept_periods},
                             {"dropped_periods", res.dropped_periods}};
    res.train.sidecar = common;
    res.train.sidecar["generated_pairs"] = train_all.size();
    res.val.sidecar = common;
    for (auto& t : res.tests) t.sidecar = common;
    return res;
}

Dataset build_all_pairs(const std::vector<StateRecording>& recordings, const std::vector<CausalGroundTruth>& gts,
                        const std::string& split) {
    if (recordings.size() != gts.size()) throw ValidationError("recordings and ground truths differ in count");
    Dataset ds;
    ds.split = split;
    for (std::size_t p = 0; p < recordings.size(); ++p) {
        if (p == 0) ds.L = static_cast<std::uint32_t>(recordings[p].row_len);
        if (static_cast<std::uint32_t>(recordings[p].row_len) != ds.L)
            throw ValidationError("recordings differ in row length");
        if (recordings[p].period != gts[p].period)
            throw ValidationError("recording and ground truth periods are misaligned");
        auto pairs = make_pairs(recordings[p], gts[p], gts[p].element_ids);
        ds.samples.insert(ds.samples.end(), std::make_move_iterator(pairs.begin()),
                          std::make_move_iterator(pairs.end()));
    }
    return ds;
}

namespace {

double column_std(const std::vector<float>& x, int col) {
    const std::size_t L = x.size() / 2;
    if (L == 0) return 0.0;
    double mean = 0.0;
    for (std::size_t t = 0; t < L; ++t) mean += x[2 * t + static_cast<std::size_t>(col)];
    mean /= static_cast<double>(L);
    double var = 0.0;
    for (std::size_t t = 0; t < L; ++t) {
        const double d = x[2 * t + static_cast<std::size_t>(col)] - mean;
        var += d * d;
    }
    return std::sqrt(var / static_cast<double>(L));
}

}  // namespace

std::vector<PairSample> add_noise(const std::vector<PairSample>& samples, const NoiseSpec& spec) {
    if (!(spec.scale >= 0.0) || !std::isfinite(spec.scale)) throw ValidationError("noise scale must be >= 0");
    if (spec.scale == 0.0) return samples;
    std::vector<PairSample> out = samples;
    Rng rng(spec.seed);
    for (auto& s : out) {
        double sigma[2] = {1.0, 1.0};
        if (spec.normalize_per_sequence) {
            sigma[0] = column_std(s.x, 0);
            sigma[1] = column_std(s.x, 1);
        }
        for (std::size_t v = 0; v < s.x.size(); ++v)
            s.x[v] = static_cast<float>(s.x[v] + spec.scale * sigma[v % 2] * rng.normal());
    }
    return out;
}

Dataset add_noise(const Dataset& ds, const NoiseSpec& spec) {
    Dataset out;
    out.split = ds.split;
    out.L = ds.L;
    out.sidecar = ds.sidecar;
    out.sidecar["noise"] = {{"scale", spec.scale}, {"normalize_per_sequence", spec.normalize_per_sequence},
                            {"seed", spec.seed}};
    out.samples = add_noise(ds.samples, spec);
    return out;
}

LinearNetworkData gen_linear_network(const LinearNetworkSpec& spec) {
    if (spec.n_nodes < 2) throw ValidationError("linear network needs at least 2 nodes");
    if (spec.seq_len < 2) throw ValidationError("seq_len must be >= 2");
    if (spec.n_subjects < 1) throw ValidationError("n_subjects must be >= 1");
    if (spec.noise_std < 0.0) throw ValidationError("noise_std must be >= 0");
    // Edges follow a random topological order, so each unordered pair carries at most one
    // direction; it is drawn with probability 2*density to keep the ordered-pair rate at density.
    if (!(spec.edge_density >= 0.0 && spec.edge_density <= 0.5))
        throw ValidationError("infeasible edge density: acyclic coupling allows at most 0.5");

    const int n = spec.n_nodes;
    const int burn_in = 100;
    LinearNetworkData out;
    for (int s = 0; s < spec.n_subjects; ++s) {
        Rng rng(mix64(spec.seed ^ mix64(static_cast<std::uint64_t>(s) + 1)));
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        for (int a = n - 1; a > 0; --a) std::swap(order[static_cast<std::size_t>(a)],
                                                  order[static_cast<std::size_t>(rng.uniform_int(0, a))]);

        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);  // W(j, i): effect of x_i on x_j
        for (int i = 0; i < n; ++i) W(i, i) = rng.uniform(0.2, 0.5);
        for (int a = 0; a < n; ++a) {
            for (int b = a + 1; b < n; ++b) {
                if (!rng.bernoulli(2.0 * spec.edge_density)) continue;
                const int from = order[static_cast<std::size_t>(a)], to = order[static_cast<std::size_t>(b)];
                const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
                W(to, from) = sign * rng.uniform(0.4, 0.8);
            }
        }
        const double rho = W.eigenvalues().cwiseAbs().maxCoeff();
        if (rho >= 0.95) W *= 0.9 / rho;

        Eigen::VectorXd b(n), x = Eigen::VectorXd::Zero(n), u(n);
        for (int i = 0; i < n; ++i) {
            b(i) = rng.uniform(0.5, 1.0);
            u(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        }

        StateRecording rec;
        rec.period = s;
        rec.row_len = spec.seq_len;
        rec.element_ids.resize(static_cast<std::size_t>(n));
        std::iota(rec.element_ids.begin(), rec.element_ids.end(), 0);
        rec.data.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(spec.seq_len), 0.0f);
        for (int t = -burn_in; t < spec.seq_len; ++t) {
            Eigen::VectorXd eps(n);
            for (int i = 0; i < n; ++i) {
                eps(i) = rng.normal();
                if (rng.bernoulli(0.05)) u(i) = 1.0 - u(i);
            }
            x = W * x + b.cwiseProduct(u) + spec.noise_std * eps;
            if (t >= 0)
                for (int i = 0; i < n; ++i)
                    rec.data[static_cast<std::size_t>(i) * static_cast<std::size_t>(spec.seq_len) +
                             static_cast<std::size_t>(t)] = static_cast<float>(x(i));
        }

        CausalGroundTruth gt;
        gt.period = s;
        gt.element_ids = rec.element_ids;
        gt.tce.assign(static_cast<std::size_t>(n * n), 0.0f);
        gt.adjacency.assign(static_cast<std::size_t>(n * n), 0);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const auto c = static_cast<std::size_t>(i * n + j);
                gt.tce[c] = static_cast<float>(std::abs(W(j, i)));
                gt.adjacency[c] = W(j, i) != 0.0 ? 1 : 0;
            }
        }
        out.recordings.push_back(std::move(rec));
        out.ground_truth.push_back(std::move(gt));
    }
    return out;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
    bin::Writer w;
    w.put_magic("CFDS");
    w.put<std::uint16_t>(kDatasetVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.samples.size()));
    w.put<std::uint32_t>(ds.L);
    for (const auto& s : ds.samples) {
        if (s.x.size() != 2 * static_cast<std::size_t>(ds.L))
            throw ValidationError("sample length does not match dataset L");
        w.put<std::uint8_t>(s.label);
        w.put<std::uint32_t>(s.i);
        w.put<std::uint32_t>(s.j);
        w.put<std::uint32_t>(s.m);
        w.put_span<float>(s.x);
    }
    w.save(path);
    nlohmann::json side = ds.sidecar;
    side["split"] = ds.split;
    side["n_samples"] = ds.samples.size();
    side["L"] = ds.L;
    side["positives"] = ds.positives();
    bin::write_text(with_suffix(path, ".json"), side.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& path) {
    auto r = bin::Reader::from_file(path);
    r.expect_magic("CFDS");
    const auto version = r.get<std::uint16_t>();
    if (version != kDatasetVersion)
        throw FormatError("dataset version " + std::to_string(version) + " is not supported");
    Dataset ds;
    const auto n = r.get<std::uint32_t>();
    ds.L = r.get<std::uint32_t>();
    const std::size_t per = 13 + 8 * static_cast<std::size_t>(ds.L);
    if (r.remaining() != per * n) throw FormatError("dataset payload size does not match its header");
    ds.samples.resize(n);
    for (auto& s : ds.samples) {
        s.label = r.get<std::uint8_t>();
        if (s.label > 1) throw FormatError("dataset label out of range");
        s.i = r.get<std::uint32_t>();
        s.j = r.get<std::uint32_t>();
        s.m = r.get<std::uint32_t>();
        s.x.resize(2 * static_cast<std::size_t>(ds.L));
        r.get_bytes(s.x.data(), s.x.size() * sizeof(float));
    }
    const auto side_path = with_suffix(path, ".json");
    if (std::filesystem::exists(side_path)) {
        try {
            ds.sidecar = nlohmann::json::parse(bin::read_text(side_path));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("bad dataset sidecar: " + std::string(e.what()));
        }
        ds.split = ds.sidecar.value("split", std::string{});
        for (const char* k : {"split", "n_samples", "L", "positives"}) ds.sidecar.erase(k);
    }
    return ds;
}

}  // namespace cf
