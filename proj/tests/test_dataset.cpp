#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>

#include "cf/dataset.hpp"
#include "cf/error.hpp"
#include "cf/rng.hpp"
#include "fixtures.hpp"

using namespace cf;

namespace {

struct Periods {
    std::vector<StateRecording> recs;
    std::vector<CausalGroundTruth> gts;
};

// n elements with distinct rows except that element n-1 copies element 0. `sparse` periods
// hold only three distinct rows so they get dropped with min_unique 4.
Periods make_periods(int n, int count, int L, std::uint64_t seed, std::set<int> sparse = {}) {
    Periods out;
    Rng rng(seed);
    for (int m = 0; m < count; ++m) {
        StateRecording r;
        r.period = m;
        r.row_len = L;
        CausalGroundTruth g;
        g.period = m;
        for (int e = 0; e < n; ++e) {
            r.element_ids.push_back(e);
            g.element_ids.push_back(e);
            for (int t = 0; t < L; ++t) {
                float v;
                if (sparse.count(m)) v = static_cast<float>(((e % 3) >> (t % 2)) & 1);
                else if (e == n - 1) v = r.data[static_cast<std::size_t>(t)];
                else v = static_cast<float>(((e + 1) >> (t % 8)) & 1) + 0.001f * static_cast<float>(t);
                r.data.push_back(v);
            }
        }
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const bool on = a != b && rng.uniform() < 0.2;
                g.adjacency.push_back(on ? 1 : 0);
                g.tce.push_back(on ? 0.5f : 0.0f);
            }
        out.recs.push_back(std::move(r));
        out.gts.push_back(std::move(g));
    }
    return out;
}

}  // namespace

TEST_CASE("pairs stack cause and effect time-major") {
    auto p = make_periods(4, 1, 5, 1);
    const std::vector<std::int32_t> ids{0, 1, 2, 3};
    const auto pairs = make_pairs(p.recs[0], p.gts[0], ids);
    REQUIRE(pairs.size() == 12);
    for (const auto& s : pairs) {
        REQUIRE(s.i != s.j);
        REQUIRE(s.x.size() == 10);
        for (int t = 0; t < 5; ++t) {
            REQUIRE(s.x[2 * t] == p.recs[0].row(s.i)[t]);
            REQUIRE(s.x[2 * t + 1] == p.recs[0].row(s.j)[t]);
        }
        REQUIRE(s.label == p.gts[0].adj_at(s.i, s.j));
    }
}

TEST_CASE("pairs align recording and ground truth by id, not position") {
    auto p = make_periods(3, 1, 4, 2);
    auto& g = p.gts[0];
    // reverse the ground truth ordering
    CausalGroundTruth rev = g;
    rev.element_ids = {2, 1, 0};
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) rev.adjacency[a * 3 + b] = g.adj_at(2 - a, 2 - b);
    const std::vector<std::int32_t> ids{0, 1, 2};
    REQUIRE(make_pairs(p.recs[0], rev, ids) == make_pairs(p.recs[0], g, ids));
    const std::vector<std::int32_t> bad{0, 7};
    REQUIRE_THROWS_AS(make_pairs(p.recs[0], g, bad), ValidationError);
}

TEST_CASE("undersampling keeps every positive and ratio times as many negatives") {
    std::vector<PairSample> s(200);
    for (std::size_t q = 0; q < s.size(); ++q) {
        s[q].i = static_cast<std::uint32_t>(q);
        s[q].label = q % 10 == 0 ? 1 : 0;
    }
    const auto out = undersample_negatives(s, 3, 5);
    std::size_t pos = 0;
    for (std::size_t q = 0; q < out.size(); ++q) {
        pos += out[q].label;
        if (q > 0) REQUIRE(out[q].i > out[q - 1].i);
    }
    REQUIRE(pos == 20);
    REQUIRE(out.size() - pos == 60);
    REQUIRE(undersample_negatives(s, 3, 5) == out);
    REQUIRE(undersample_negatives(s, 3, 6) != out);
    // too few negatives: all kept
    REQUIRE(undersample_negatives(s, 100, 5).size() == 200);
    for (auto& x : s) x.label = 0;
    REQUIRE_THROWS_AS(undersample_negatives(s, 3, 5), ValidationError);
}

TEST_CASE("split separates elements by id half and periods by role") {
    const int n = 10;
    auto p = make_periods(n, 6, 16, 3, {1});
    SplitPlan plan;
    plan.test_periods = {0, 1};
    plan.val_periods = {2};
    plan.seed = 9;
    const auto res = build_split(p.recs, p.gts, plan);

    REQUIRE(res.dropped_periods == std::vector<int>{1});
    REQUIRE(res.kept_periods == std::vector<int>{0, 2, 3, 4, 5});
    REQUIRE(res.tests.size() == 2);
    // kept positions 0, 1 -> periods 0, 2; position 2 -> period 3
    for (const auto& s : res.tests[0].samples) REQUIRE(s.m == 0);
    for (const auto& s : res.tests[1].samples) REQUIRE(s.m == 2);
    for (const auto& s : res.val.samples) REQUIRE(s.m == 3);
    for (const auto& s : res.train.samples) REQUIRE((s.m == 4 || s.m == 5));

    for (const auto* ds : {&res.val, &res.tests[0], &res.tests[1]})
        for (const auto& s : ds->samples) {
            REQUIRE(s.i >= n / 2);
            REQUIRE(s.j >= n / 2);
            REQUIRE(s.i != static_cast<std::uint32_t>(n - 1));  // copy of element 0, deduplicated
        }
    for (const auto& s : res.train.samples) {
        REQUIRE(s.i < n / 2);
        REQUIRE(s.j < n / 2);
    }
    REQUIRE(res.train.sidecar.at("element_split_id") == n / 2);
}

TEST_CASE("evaluation splits are complete and train is exactly undersampled") {
    const int n = 12;
    auto p = make_periods(n, 8, 16, 4);
    SplitPlan plan;
    plan.seed = 1;
    const auto res = build_split(p.recs, p.gts, plan);
    // element n-1 duplicates element 0 and is removed everywhere; the test half keeps 6..10
    const std::size_t test_elems = 5;
    for (const auto& t : res.tests) REQUIRE(t.samples.size() == test_elems * (test_elems - 1));
    REQUIRE(res.val.samples.size() == test_elems * (test_elems - 1));
    const auto pos = res.train.positives();
    REQUIRE(pos > 0);
    REQUIRE(res.train.samples.size() - pos == 3 * pos);
    REQUIRE(res.tests.size() == 2);
    REQUIRE(res.train.sidecar.at("generated_pairs").get<std::size_t>() == 5 * 6 * 5);
}

TEST_CASE("split plan errors") {
    auto p = make_periods(6, 3, 8, 5);
    SplitPlan plan;
    REQUIRE_THROWS_AS(build_split(p.recs, p.gts, plan), ValidationError);  // nothing left for training
    plan.val_periods = {0};
    REQUIRE_THROWS_AS(plan.validate(), ValidationError);
    plan = SplitPlan{};
    plan.undersample_ratio = 0;
    REQUIRE_THROWS_AS(plan.validate(), ValidationError);
    plan = SplitPlan{};
    plan.seed = 77;
    plan.test_periods = {3, 1};
    REQUIRE(SplitPlan::from_json(plan.to_json()).to_json() == plan.to_json());
    REQUIRE_THROWS_AS(SplitPlan::from_json(nlohmann::json{{"test_periods", "x"}}), ValidationError);
}

TEST_CASE("all-pairs dataset covers every ordered pair") {
    auto p = make_periods(5, 3, 8, 6);
    const auto ds = build_all_pairs(p.recs, p.gts, "all");
    REQUIRE(ds.samples.size() == 3 * 20);
    REQUIRE(ds.L == 8);
}

TEST_CASE("noise has the requested scale and leaves labels alone") {
    std::vector<PairSample> s(50);
    for (auto& x : s) {
        x.x.assign(400, 1.0f);
        x.label = 1;
    }
    NoiseSpec spec{0.5, false, 3};
    const auto out = add_noise(s, spec);
    double sum = 0, sq = 0;
    std::size_t cnt = 0;
    for (const auto& x : out) {
        REQUIRE(x.label == 1);
        for (float v : x.x) {
            sum += v - 1.0;
            sq += (v - 1.0) * (v - 1.0);
            ++cnt;
        }
    }
    const double mean = sum / static_cast<double>(cnt);
    const double sd = std::sqrt(sq / static_cast<double>(cnt) - mean * mean);
    REQUIRE(std::abs(mean) < 0.01);
    REQUIRE(sd == Catch::Approx(0.5).epsilon(0.02));
    REQUIRE(add_noise(s, spec) == out);
    REQUIRE(add_noise(s, NoiseSpec{0.0, false, 3}) == s);
    REQUIRE_THROWS_AS(add_noise(s, NoiseSpec{-1.0, false, 3}), ValidationError);
    // constant sequences have zero std, so normalized noise vanishes
    REQUIRE(add_noise(s, NoiseSpec{0.5, true, 3}) == s);
}

TEST_CASE("dataset container round-trip and corruption") {
    const auto dir = fx::temp_dir("ds");
    auto p = make_periods(4, 1, 6, 7);
    Dataset ds = build_all_pairs(p.recs, p.gts, "test0");
    ds.sidecar["k"] = 30;
    write_dataset(ds, dir / "a.cfds");
    const auto back = read_dataset(dir / "a.cfds");
    REQUIRE(back.samples == ds.samples);
    REQUIRE(back.split == "test0");
    REQUIRE(back.L == 6);
    REQUIRE(back.sidecar == ds.sidecar);

    std::filesystem::resize_file(dir / "a.cfds", std::filesystem::file_size(dir / "a.cfds") - 3);
    REQUIRE_THROWS_AS(read_dataset(dir / "a.cfds"), FormatError);
    REQUIRE_THROWS(read_dataset(dir / "missing.cfds"));
}

TEST_CASE("linear network ground truth matches the coupling") {
    LinearNetworkSpec spec;
    spec.n_subjects = 40;
    spec.seed = 11;
    const auto data = gen_linear_network(spec);
    REQUIRE(data.recordings.size() == 40);
    std::size_t edges = 0, slots = 0;
    for (std::size_t s = 0; s < 40; ++s) {
        const auto& g = data.ground_truth[s];
        REQUIRE(data.recordings[s].row_len == 200);
        REQUIRE(g.size() == 5);
        for (std::size_t a = 0; a < 5; ++a) {
            REQUIRE(g.adj_at(a, a) == 0);
            for (std::size_t b = 0; b < 5; ++b) {
                if (a == b) continue;
                REQUIRE((g.adj_at(a, b) == 1) == (g.tce_at(a, b) > 0.0f));
                REQUIRE(!(g.adj_at(a, b) && g.adj_at(b, a)));  // acyclic
                edges += g.adj_at(a, b);
                ++slots;
            }
        }
        for (float v : data.recordings[s].data) REQUIRE(std::isfinite(v));
    }
    const double rate = static_cast<double>(edges) / static_cast<double>(slots);
    REQUIRE(rate == Catch::Approx(0.2).margin(0.05));
    REQUIRE(gen_linear_network(spec).recordings == data.recordings);
    spec.edge_density = 0.6;
    REQUIRE_THROWS_AS(gen_linear_network(spec), ValidationError);
}
