#include <catch_amalgamated.hpp>

#include <cmath>

#include "cf/error.hpp"
#include "cf/metrics.hpp"
#include "cf/rng.hpp"
#include "cf/train.hpp"
#include "fixtures.hpp"

using namespace cf;

namespace {

// Positives carry a cause that is mostly on, negatives one that is mostly off.
Dataset toy_dataset(const std::string& split, int n, std::uint64_t seed) {
    Dataset ds;
    ds.split = split;
    ds.L = 64;
    Rng rng(seed);
    for (int s = 0; s < n; ++s) {
        PairSample p;
        p.label = s % 3 == 0 ? 1 : 0;
        p.i = static_cast<std::uint32_t>(s);
        p.j = static_cast<std::uint32_t>(s + 1);
        const double on = p.label ? 0.8 : 0.2;
        for (int t = 0; t < 64; ++t) {
            p.x.push_back(rng.uniform() < on ? 1.0f : 0.0f);
            p.x.push_back(rng.uniform() < 0.5 ? 1.0f : 0.0f);
        }
        ds.samples.push_back(std::move(p));
    }
    return ds;
}

EstimatorConfig tiny_config() { return fx::tiny_weights(0).config(); }

TrainConfig quick_config() {
    TrainConfig c;
    c.epochs = 6;
    c.batch_size = 16;
    c.lr = 3e-3;
    c.shift_range = 8;
    c.seed = 21;
    return c;
}

}  // namespace

TEST_CASE("first AdamW step against a hand computation") {
    auto w = fx::tiny_weights(3);
    const auto before = w;
    std::vector<ad::Matrix> g;
    for (const auto& t : w.tensors()) g.push_back(ad::Matrix::Constant(t.value.rows(), t.value.cols(), 0.5));
    AdamW opt(w, 0.1);
    opt.step(w, g, 0.01);
    REQUIRE(opt.steps() == 1);
    // bias-corrected moments give m/sqrt(v) = g/|g| on the first step
    const double move = 0.01 * 0.5 / (0.5 + 1e-8);
    for (const std::string name : {"block0.attn.qkv.weight", "embed.kernel", "head.weight"}) {
        const ad::Matrix expect = (before[name] * (1.0 - 0.01 * 0.1)).array() - move;
        REQUIRE((w[name] - expect).cwiseAbs().maxCoeff() < 1e-15);
    }
    for (const std::string name : {"embed.bias", "block0.ln1.gain", "cls_token", "pos_embed", "head.bias"}) {
        const ad::Matrix expect = before[name].array() - move;
        REQUIRE((w[name] - expect).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("AdamW with zero learning rate leaves weights unchanged") {
    auto w = fx::tiny_weights(3);
    const auto before = w;
    std::vector<ad::Matrix> g;
    for (const auto& t : w.tensors()) g.push_back(ad::Matrix::Ones(t.value.rows(), t.value.cols()));
    AdamW opt(w, 0.05);
    opt.step(w, g, 0.0);
    REQUIRE(w == before);
}

TEST_CASE("cosine schedule") {
    REQUIRE(cosine_lr(1.0, 0, 100) == 1.0);
    REQUIRE(cosine_lr(1.0, 50, 100) == Catch::Approx(0.5));
    REQUIRE(cosine_lr(1.0, 100, 100) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(cosine_lr(2.0, 25, 100) == Catch::Approx(1.0 + std::cos(M_PI / 4)));
}

TEST_CASE("training learns a separable toy problem deterministically") {
    const auto tr = toy_dataset("train", 96, 1);
    const auto va = toy_dataset("val", 48, 2);
    std::vector<EpochReport> reports;
    const auto a = train(tr, va, quick_config(), tiny_config(), 1, [&](const EpochReport& r) { reports.push_back(r); });
    REQUIRE(reports.size() == 6);
    REQUIRE(a.loss_curve.size() == 6);
    REQUIRE_FALSE(a.diverged);
    REQUIRE(a.loss_curve.back() < a.loss_curve.front());
    REQUIRE(a.val_auprc > 0.9);
    // best epoch is the earliest maximum of the validation curve
    const auto best = std::max_element(a.val_curve.begin(), a.val_curve.end());
    REQUIRE(a.epoch == static_cast<int>(best - a.val_curve.begin()));
    REQUIRE(a.val_auprc == *best);

    const auto b = train(tr, va, quick_config(), tiny_config(), 2);
    REQUIRE(a == b);
    auto other = quick_config();
    other.seed = 22;
    REQUIRE_FALSE(train(tr, va, other, tiny_config(), 1).weights == a.weights);
}

TEST_CASE("divergence returns the best checkpoint so far") {
    auto cfg = quick_config();
    cfg.lr = 1e300;
    cfg.cosine = false;
    const auto c = train(toy_dataset("train", 32, 1), toy_dataset("val", 16, 2), cfg, tiny_config());
    REQUIRE(c.diverged);
    REQUIRE_FALSE(c.note.empty());
    REQUIRE(c.weights.all_finite());
}

TEST_CASE("training input checks") {
    auto tr = toy_dataset("train", 30, 1);
    const auto va = toy_dataset("val", 12, 2);
    auto est = tiny_config();
    est.L = 128;
    REQUIRE_THROWS_AS(train(tr, va, quick_config(), est, 1), ValidationError);
    for (auto& s : tr.samples) s.label = 0;
    REQUIRE_THROWS_AS(train(tr, va, quick_config(), tiny_config(), 1), ValidationError);
    auto cfg = quick_config();
    cfg.alpha = 1.0;
    REQUIRE_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("config JSON round-trips") {
    auto cfg = quick_config();
    cfg.cosine = false;
    REQUIRE(TrainConfig::from_json(cfg.to_json()) == cfg);
    const auto est = tiny_config();
    REQUIRE(estimator_config_from_json(to_json(est)) == est);
    REQUIRE_THROWS_AS(TrainConfig::from_json(nlohmann::json{{"lr", "fast"}}), ValidationError);
    REQUIRE_THROWS_AS(TrainConfig::from_json(nlohmann::json{{"epochs", 0}}), ValidationError);
}

TEST_CASE("checkpoint round-trip and corruption") {
    const auto dir = fx::temp_dir("ckpt");
    EstimatorCheckpoint c;
    c.weights = fx::tiny_weights(9);
    c.weights.round_to_f32();
    c.train = quick_config();
    c.epoch = 4;
    c.val_auprc = 0.625;
    c.loss_curve = {0.1, 0.05};
    c.val_curve = {0.5, 0.625};
    c.note = "x";
    save_checkpoint(c, dir / "m.cfck");
    REQUIRE(load_checkpoint(dir / "m.cfck") == c);
    REQUIRE_NOTHROW(require_input_length(c, 64));
    REQUIRE_THROWS_AS(require_input_length(c, 3840), ValidationError);

    std::filesystem::resize_file(dir / "m.cfck", std::filesystem::file_size(dir / "m.cfck") - 5);
    REQUIRE_THROWS_AS(load_checkpoint(dir / "m.cfck"), FormatError);
}

TEST_CASE("predict scores every sample") {
    const auto w = fx::tiny_weights(1);
    const auto ds = toy_dataset("test0", 10, 3);
    const auto p1 = predict(w, ds, 1);
    REQUIRE(p1.size() == 10);
    REQUIRE(p1 == predict(w, ds, 3));
    REQUIRE(p1[4] == forward(w, ds.samples[4].x));
}
