#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "cf/baselines.hpp"
#include "cf/error.hpp"
#include "cf/eval.hpp"
#include "cf/probes.hpp"
#include "cf/rng.hpp"
#include "fixtures.hpp"

using namespace cf;

namespace {

Dataset scored_fixture(std::uint32_t L = 64) {
    Dataset ds;
    ds.split = "test0";
    ds.L = L;
    Rng rng(5);
    for (std::uint32_t m = 0; m < 3; ++m)
        for (std::uint32_t i = 0; i < 4; ++i)
            for (std::uint32_t j = 0; j < 4; ++j) {
                PairSample s;
                s.i = i;
                s.j = j;
                s.m = m;
                s.label = (i + j + m) % 3 == 0 ? 1 : 0;
                for (std::uint32_t t = 0; t < L; ++t) {
                    s.x.push_back(rng.uniform() < 0.5 ? 1.0f : 0.0f);
                    s.x.push_back(static_cast<float>(rng.normal()));
                }
                ds.samples.push_back(std::move(s));
            }
    return ds;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("method tags") {
    REQUIRE(parse_method("corr").kind == MethodKind::corr);
    REQUIRE(parse_method("granger").tag() == "granger");
    const auto c = parse_method("checkpoint:runs/m.cfck");
    REQUIRE(c.kind == MethodKind::checkpoint);
    REQUIRE(c.checkpoint == "runs/m.cfck");
    REQUIRE_THROWS_AS(parse_method("checkpoint:"), ValidationError);
    REQUIRE_THROWS_AS(parse_method("transformer"), ValidationError);
}

TEST_CASE("scoring masks the diagonal and reproduces the baselines") {
    const auto ds = scored_fixture();
    const auto sc = score_dataset(parse_method("corr"), ds, nullptr);
    REQUIRE(sc.size() == 3 * 12);
    std::size_t q = 0;
    for (const auto& s : ds.samples) {
        if (s.i == s.j) continue;
        std::vector<double> x, y;
        for (std::size_t t = 0; t < ds.L; ++t) {
            x.push_back(s.x[2 * t]);
            y.push_back(s.x[2 * t + 1]);
        }
        REQUIRE(sc[q].i == s.i);
        REQUIRE(sc[q].score == corr_score(x, y).value);
        ++q;
    }
    REQUIRE(score_dataset(parse_method("granger"), ds, nullptr, 3).size() == sc.size());
    REQUIRE_THROWS_AS(score_dataset(parse_method("checkpoint:x"), ds, nullptr), ValidationError);
}

TEST_CASE("oracle and constant methods bracket the metrics") {
    const auto ds = scored_fixture();
    const auto o = summarize("oracle", score_dataset(parse_method("oracle"), ds, nullptr));
    REQUIRE(o.auroc_mean == 1.0);
    REQUIRE(o.auprc_mean == 1.0);
    const auto c = summarize("constant", score_dataset(parse_method("constant"), ds, nullptr));
    REQUIRE(c.auroc_mean == 0.5);
    REQUIRE(c.groups.size() == 3);
    // constant AUPRC is the positive rate of each group
    double rate = 0;
    for (const auto& g : c.groups) rate += static_cast<double>(g.n_pos) / static_cast<double>(g.n);
    REQUIRE(c.auprc_mean == Catch::Approx(rate / 3.0));
}

TEST_CASE("summary statistics over groups") {
    std::vector<ScoredPair> sc;
    auto add = [&](std::uint32_t m, std::uint8_t y, double s) { sc.push_back({0, 1, m, y, s, false}); };
    // group 0: perfect ranking; group 1: inverted; group 2: negatives only
    add(0, 1, 0.9);
    add(0, 0, 0.1);
    add(1, 1, 0.1);
    add(1, 0, 0.9);
    add(2, 0, 0.3);
    add(2, 0, 0.4);
    const auto r = summarize("m", sc, 0.1);
    REQUIRE(r.groups.size() == 2);
    REQUIRE(r.warnings.size() == 1);
    REQUIRE(r.auroc_mean == 0.5);
    REQUIRE(r.auroc_std == 0.5);
    REQUIRE(r.auprc_mean == Catch::Approx(0.75));
    REQUIRE(r.auprc_std == Catch::Approx(0.25));
    REQUIRE(r.n == 6);
    REQUIRE(r.n_pos == 2);

    const auto dir = fx::temp_dir("report");
    write_report_csv({r}, dir / "r.csv");
    const auto text = slurp(dir / "r.csv");
    REQUIRE(text.rfind("method,group,n,n_pos,auroc,auprc,noise_scale\n", 0) == 0);
    REQUIRE(report_json({r})[0].at("method") == "m");
    write_scores_csv("m", sc, dir / "s.csv");
    REQUIRE(slurp(dir / "s.csv").rfind("method,i,j,m,score,degenerate\n", 0) == 0);
}

TEST_CASE("checkpoint evaluation loads the model itself") {
    const auto dir = fx::temp_dir("evalck");
    EstimatorCheckpoint c;
    c.weights = fx::tiny_weights(2);
    c.weights.round_to_f32();
    save_checkpoint(c, dir / "m.cfck");
    const auto ds = scored_fixture();
    const auto ev = evaluate_method(parse_method("checkpoint:" + (dir / "m.cfck").string()), ds);
    REQUIRE(ev.scores.size() == 36);
    REQUIRE(ev.scores[0].score == forward(c.weights, ds.samples[1].x));
    REQUIRE_THROWS_AS(evaluate_method(parse_method("checkpoint:" + (dir / "m.cfck").string()), scored_fixture(32)),
                      ValidationError);
}

TEST_CASE("ground truth statistics") {
    std::vector<CausalGroundTruth> gts;
    // 5 elements -> 20 ordered pairs; rates 2/20 .. 10/20
    for (int p = 0; p < 5; ++p) {
        CausalGroundTruth g;
        g.period = p;
        g.element_ids = {0, 1, 2, 3, 4};
        g.adjacency.assign(25, 0);
        g.tce.assign(25, 0.0f);
        int placed = 0;
        for (std::size_t q = 0; q < 25 && placed < 2 * (p + 1); ++q) {
            if (q / 5 == q % 5) continue;
            g.adjacency[q] = 1;
            ++placed;
        }
        g.adjacency[0] = 1;  // diagonal is ignored
        gts.push_back(g);
    }
    const auto s = ground_truth_stats(gts);
    REQUIRE(s.total_positives == 30);
    const double expect[5] = {0.1, 0.2, 0.3, 0.4, 0.5};
    for (int q = 0; q < 5; ++q) REQUIRE(s.rate_quantiles[q] == Catch::Approx(expect[q]));
    REQUIRE(stats_json(s).contains("periods"));
}

TEST_CASE("effect shift moves only the effect column earlier") {
    const std::vector<float> x{1, 10, 2, 20, 3, 30, 4, 40};
    REQUIRE(shift_effect_earlier(x, 1) == std::vector<float>{1, 20, 2, 30, 3, 40, 4, 40});
    REQUIRE(shift_effect_earlier(x, 0) == x);
    REQUIRE_THROWS_AS(shift_effect_earlier(x, 4), ValidationError);
    REQUIRE_THROWS_AS(shift_effect_earlier(x, -1), ValidationError);
    const auto w = fx::tiny_weights(3);
    std::vector<float> y(128, 0.0f);
    for (std::size_t t = 0; t < 64; ++t) y[2 * t] = y[2 * t + 1] = t % 5 < 2 ? 1.0f : 0.0f;
    const auto r = temporal_reversal_probe(w, y, 3);
    REQUIRE(r.p_original == forward(w, y));
    REQUIRE(r.p_shifted == forward(w, shift_effect_earlier(y, 3)));
}

TEST_CASE("grad-cam map is normalized over the input length") {
    const auto w = fx::tiny_weights(4);
    Rng rng(1);
    std::vector<float> x(128);
    for (auto& v : x) v = rng.uniform() < 0.5 ? 1.0f : 0.0f;
    const auto m = grad_cam(w, x);
    REQUIRE(m.values.size() == 64);
    REQUIRE(m.confidence == forward(w, x));
    if (!m.degenerate) {
        REQUIRE(*std::max_element(m.values.begin(), m.values.end()) == Catch::Approx(1.0));
        REQUIRE(*std::min_element(m.values.begin(), m.values.end()) == Catch::Approx(0.0).margin(1e-12));
    }
    for (double v : m.values) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
    }
    // zero head: no gradient reaches the tokens, the map is flat
    EstimatorConfig cfg = w.config();
    const auto flat = grad_cam(init_estimator(cfg, 1), x);
    REQUIRE(flat.degenerate);
    for (double v : flat.values) REQUIRE(v == 0.0);

    const auto dir = fx::temp_dir("cam");
    write_saliency_csv(m, dir / "s.csv");
    REQUIRE(slurp(dir / "s.csv").find('\n') != std::string::npos);
}
