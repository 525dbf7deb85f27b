#include "cf/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cf/binio.hpp"
#include "cf/error.hpp"
#include "cf/metrics.hpp"
#include "cf/parallel.hpp"
#include "cf/rng.hpp"

namespace cf {

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("train: lr must be > 0");
    if (weight_decay < 0.0) throw ValidationError("train: weight_decay must be >= 0");
    if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("train: alpha must lie in (0, 1)");
    if (gamma < 0.0) throw ValidationError("train: gamma must be >= 0");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"lr", lr},       {"weight_decay", weight_decay}, {"batch_size", batch_size},
            {"epochs", epochs}, {"alpha", alpha},             {"gamma", gamma},
            {"shift_range", shift_range}, {"cosine", cosine}, {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.lr = j.value("lr", c.lr);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.alpha = j.value("alpha", c.alpha);
        c.gamma = j.value("gamma", c.gamma);
        c.shift_range = j.value("shift_range", c.shift_range);
        c.cosine = j.value("cosine", c.cosine);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad train config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const EstimatorConfig& cfg) {
    return {{"L", cfg.L},         {"W", cfg.W},         {"C", cfg.C},
            {"depth", cfg.depth}, {"heads", cfg.heads}, {"ff_hidden", cfg.ff_hidden},
            {"pooler_hidden", cfg.pooler_hidden}};
}

EstimatorConfig estimator_config_from_json(const nlohmann::json& j) {
    EstimatorConfig c;
    try {
        c.L = j.value("L", c.L);
        c.W = j.value("W", c.W);
        c.C = j.value("C", c.C);
        c.depth = j.value("depth", c.depth);
        c.heads = j.value("heads", c.heads);
        c.ff_hidden = j.value("ff_hidden", c.ff_hidden);
        c.pooler_hidden = j.value("pooler_hidden", c.pooler_hidden);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad estimator config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

bool decays(const std::string& name) {
    return name.ends_with(".weight") || name == "embed.kernel";
}

}  // namespace

AdamW::AdamW(const EstimatorWeights& w, double weight_decay, double beta1, double beta2, double eps)
    : wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps) {
    for (const auto& t : w.tensors()) {
        decay_.push_back(decays(t.name));
        m_.push_back(ad::Matrix::Zero(t.value.rows(), t.value.cols()));
        v_.push_back(ad::Matrix::Zero(t.value.rows(), t.value.cols()));
    }
}

void AdamW::step(EstimatorWeights& w, const std::vector<ad::Matrix>& grads, double lr) {
    auto& ts = w.tensors();
    if (grads.size() != ts.size()) throw ValidationError("AdamW: gradient count does not match weights");
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < ts.size(); ++i) {
        auto& th = ts[i].value;
        if (decay_[i] && wd_ != 0.0) th *= 1.0 - lr * wd_;
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * grads[i];
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * grads[i].cwiseProduct(grads[i]);
        th.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
}

double cosine_lr(double base, long step, long total_steps) {
    if (total_steps <= 0) return base;
    const double f = std::clamp(static_cast<double>(step) / static_cast<double>(total_steps), 0.0, 1.0);
    return 0.5 * base * (1.0 + std::cos(std::numbers::pi * f));
}

std::vector<double> predict(const EstimatorWeights& w, const Dataset& ds, int jobs) {
    if (static_cast<int>(ds.L) != w.config().L)
        throw ValidationError("dataset L=" + std::to_string(ds.L) + " does not match estimator L=" +
                              std::to_string(w.config().L));
    std::vector<double> p(ds.samples.size());
    parallel_for(p.size(), jobs, [&](std::size_t s) { p[s] = forward(w, ds.samples[s].x); });
    return p;
}

namespace {

double val_metric(const EstimatorWeights& w, const Dataset& val, int jobs) {
    if (val.positives() == 0) return 0.0;
    auto p = predict(w, val, jobs);
    std::vector<std::uint8_t> y;
    y.reserve(val.samples.size());
    for (const auto& s : val.samples) y.push_back(s.label);
    return auprc(p, y);
}

}  // namespace

EstimatorCheckpoint train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                          const EstimatorConfig& est_cfg, int jobs,
                          const std::function<void(const EpochReport&)>& on_epoch) {
    cfg.validate();
    est_cfg.validate();
    if (static_cast<int>(train_set.L) != est_cfg.L || static_cast<int>(val_set.L) != est_cfg.L)
        throw ValidationError("dataset length does not match estimator L=" + std::to_string(est_cfg.L));
    const std::size_t pos = train_set.positives();
    if (pos == 0 || pos == train_set.samples.size())
        throw ValidationError("training set must contain both classes");
    const int shift = cfg.resolved_shift(est_cfg.L);
    if (shift >= est_cfg.L) throw ValidationError("train: shift_range must be < L");

    EstimatorWeights w = init_estimator(est_cfg, derive_seed(cfg.seed, "init"));
    AdamW opt(w, cfg.weight_decay);
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    Rng aug_rng(derive_seed(cfg.seed, "augment"));

    const std::size_t n = train_set.samples.size();
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    const long steps_per_epoch = static_cast<long>((n + bs - 1) / bs);
    const long total_steps = steps_per_epoch * cfg.epochs;

    EstimatorCheckpoint best;
    best.train = cfg;
    best.weights = w;
    best.weights.round_to_f32();
    double best_val = -1.0;
    std::vector<double> loss_curve, val_curve;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    bool diverged = false;
    std::string note;

    for (int epoch = 0; epoch < cfg.epochs && !diverged; ++epoch) {
        for (std::size_t a = n; a > 1; --a) {
            const auto b = static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(a) - 1));
            std::swap(order[a - 1], order[b]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t end = std::min(n, start + bs);
            std::vector<std::vector<float>> xs;
            xs.reserve(end - start);
            std::vector<LabeledView> batch;
            batch.reserve(end - start);
            for (std::size_t s = start; s < end; ++s) {
                const auto& smp = train_set.samples[order[s]];
                xs.push_back(shift > 0 ? random_shift_augment(smp.x, shift, aug_rng) : smp.x);
            }
            for (std::size_t s = start; s < end; ++s)
                batch.push_back({xs[s - start], train_set.samples[order[s]].label});
            BatchGradient g;
            try {
                g = grad(w, batch, cfg.alpha, cfg.gamma, jobs);
            } catch (const RuntimeFailure& e) {
                diverged = true;
                note = e.what();
                break;
            }
            if (!std::isfinite(g.loss)) {
                diverged = true;
                note = "non-finite training loss in epoch " + std::to_string(epoch);
                break;
            }
            epoch_loss += g.loss * static_cast<double>(end - start);
            const double lr = cfg.cosine ? cosine_lr(cfg.lr, opt.steps(), total_steps) : cfg.lr;
            opt.step(w, g.grads, lr);
            if (!w.all_finite()) {
                diverged = true;
                note = "non-finite weights after step " + std::to_string(opt.steps());
                break;
            }
        }
        if (diverged) break;
        loss_curve.push_back(epoch_loss / static_cast<double>(n));
        const double v = val_metric(w, val_set, jobs);
        val_curve.push_back(v);
        if (v > best_val) {
            best_val = v;
            best.weights = w;
            best.weights.round_to_f32();
            best.epoch = epoch;
            best.val_auprc = v;
        }
        if (on_epoch) on_epoch({epoch, loss_curve.back(), v});
    }
    best.loss_curve = loss_curve;
    best.val_curve = val_curve;
    best.diverged = diverged;
    best.note = note;
    return best;
}

namespace {

nlohmann::json checkpoint_meta(const EstimatorCheckpoint& c) {
    return {{"estimator", to_json(c.weights.config())},
            {"train", c.train.to_json()},
            {"seed", c.train.seed},
            {"epoch", c.epoch},
            {"val_auprc", c.val_auprc},
            {"loss_curve", c.loss_curve},
            {"val_curve", c.val_curve},
            {"diverged", c.diverged},
            {"note", c.note}};
}

}  // namespace

void save_checkpoint(const EstimatorCheckpoint& ckpt, const std::filesystem::path& path) {
    bin::Writer w;
    w.put_magic("CFCK");
    w.put<std::uint16_t>(kCheckpointVersion);
    const std::string meta = checkpoint_meta(ckpt).dump();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(meta.size()));
    w.put_bytes(meta.data(), meta.size());
    const auto& ts = ckpt.weights.tensors();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ts.size()));
    for (const auto& t : ts) {
        w.put<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
        w.put_bytes(t.name.data(), t.name.size());
        w.put<std::uint8_t>(static_cast<std::uint8_t>(t.dims.size()));
        for (auto d : t.dims) w.put<std::uint32_t>(d);
        for (Eigen::Index r = 0; r < t.value.rows(); ++r)
            for (Eigen::Index c = 0; c < t.value.cols(); ++c) w.put<float>(static_cast<float>(t.value(r, c)));
    }
    w.save(path);
}

EstimatorCheckpoint load_checkpoint(const std::filesystem::path& path) {
    auto r = bin::Reader::from_file(path);
    r.expect_magic("CFCK");
    const auto version = r.get<std::uint16_t>();
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint version " + std::to_string(version) + " is not supported");
    std::string meta_text(r.get<std::uint32_t>(), '\0');
    r.get_bytes(meta_text.data(), meta_text.size());
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint metadata is not JSON: ") + e.what());
    }
    EstimatorCheckpoint c;
    try {
        c.weights = EstimatorWeights(estimator_config_from_json(meta.at("estimator")));
        c.train = TrainConfig::from_json(meta.at("train"));
        c.epoch = meta.at("epoch").get<int>();
        c.val_auprc = meta.at("val_auprc").get<double>();
        c.loss_curve = meta.at("loss_curve").get<std::vector<double>>();
        c.val_curve = meta.at("val_curve").get<std::vector<double>>();
        c.diverged = meta.at("diverged").get<bool>();
        c.note = meta.at("note").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint metadata: ") + e.what());
    }
    auto& ts = c.weights.tensors();
    if (r.get<std::uint32_t>() != ts.size()) throw FormatError("checkpoint tensor count does not match its config");
    for (auto& t : ts) {
        std::string name(r.get<std::uint16_t>(), '\0');
        r.get_bytes(name.data(), name.size());
        if (name != t.name) throw FormatError("checkpoint tensor '" + name + "' where '" + t.name + "' was expected");
        std::vector<std::uint32_t> dims(r.get<std::uint8_t>());
        for (auto& d : dims) d = r.get<std::uint32_t>();
        if (dims != t.dims) throw FormatError("checkpoint tensor '" + name + "' has the wrong shape");
        for (Eigen::Index i = 0; i < t.value.rows(); ++i)
            for (Eigen::Index j = 0; j < t.value.cols(); ++j) t.value(i, j) = r.get<float>();
    }
    if (!r.at_end()) throw FormatError("trailing bytes after checkpoint tensors");
    if (!c.weights.all_finite()) throw FormatError("checkpoint holds non-finite weights");
    return c;
}

void require_input_length(const EstimatorCheckpoint& ckpt, std::uint32_t L) {
    if (static_cast<int>(L) != ckpt.weights.config().L)
        throw ValidationError("config mismatch: checkpoint expects L=" + std::to_string(ckpt.weights.config().L) +
                              ", input has L=" + std::to_string(L));
}

}  // namespace cf
