#include "cf/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cf/error.hpp"
#include "cf/parallel.hpp"

namespace cf {

void EstimatorConfig::validate() const {
    if (L < 1 || W < 1 || C < 1 || depth < 1 || heads < 1 || ff_hidden < 1 || pooler_hidden < 1) {
        throw ValidationError("estimator config: all sizes must be positive");
    }
    if (L % W != 0) {
        throw ValidationError("estimator config: L must be divisible by W");
    }
    if (C % heads != 0) {
        throw ValidationError("estimator config: C must be divisible by heads");
    }
}

namespace {

std::vector<NamedTensor> layout(const EstimatorConfig& cfg) {
    const auto u = [](int v) { return static_cast<std::uint32_t>(v); };
    std::vector<NamedTensor> t;
    auto add = [&](std::string name, std::vector<std::uint32_t> dims) {
        const auto rows = dims.size() == 1 ? 1u : dims[0];
        const auto cols = dims.size() == 1 ? dims[0] : dims[1];
        t.push_back({std::move(name), std::move(dims), ad::Matrix::Zero(rows, cols)});
    };
    add("embed.kernel", {u(2 * cfg.W), u(cfg.C)});
    add("embed.bias", {u(cfg.C)});
    add("cls_token", {1, u(cfg.C)});
    add("pos_embed", {u(cfg.tokens() + 1), u(cfg.C)});
    for (int b = 0; b < cfg.depth; ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        add(p + "ln1.gain", {u(cfg.C)});
        add(p + "ln1.bias", {u(cfg.C)});
        add(p + "attn.qkv.weight", {u(cfg.C), u(3 * cfg.C)});
        add(p + "attn.qkv.bias", {u(3 * cfg.C)});
        add(p + "attn.proj.weight", {u(cfg.C), u(cfg.C)});
        add(p + "attn.proj.bias", {u(cfg.C)});
        add(p + "ln2.gain", {u(cfg.C)});
        add(p + "ln2.bias", {u(cfg.C)});
        add(p + "mlp.fc1.weight", {u(cfg.C), u(cfg.ff_hidden)});
        add(p + "mlp.fc1.bias", {u(cfg.ff_hidden)});
        add(p + "mlp.fc2.weight", {u(cfg.ff_hidden), u(cfg.C)});
        add(p + "mlp.fc2.bias", {u(cfg.C)});
    }
    add("pooler.fc1.weight", {u(cfg.C), u(cfg.pooler_hidden)});
    add("pooler.fc1.bias", {u(cfg.pooler_hidden)});
    add("pooler.fc2.weight", {u(cfg.pooler_hidden), 1});
    add("pooler.fc2.bias", {1});
    add("head.weight", {u(cfg.C), 1});
    add("head.bias", {1});
    return t;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

EstimatorWeights::EstimatorWeights(const EstimatorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    tensors_ = layout(cfg_);
}

std::size_t EstimatorWeights::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        if (tensors_[i].name == name) {
            return i;
        }
    }
    throw ValidationError("no parameter named " + name);
}

std::size_t EstimatorWeights::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) {
        n += static_cast<std::size_t>(t.value.size());
    }
    return n;
}

bool EstimatorWeights::all_finite() const {
    return std::all_of(tensors_.begin(), tensors_.end(), [](const NamedTensor& t) { return t.value.allFinite(); });
}

void EstimatorWeights::round_to_f32() {
    for (auto& t : tensors_) {
        t.value = t.value.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
    }
}

bool EstimatorWeights::operator==(const EstimatorWeights& other) const {
    if (!(cfg_ == other.cfg_) || tensors_.size() != other.tensors_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        const auto& a = tensors_[i];
        const auto& b = other.tensors_[i];
        if (a.name != b.name || a.dims != b.dims || a.value != b.value) {
            return false;
        }
    }
    return true;
}

std::size_t expected_parameter_count(const EstimatorConfig& cfg) {
    const std::size_t C = static_cast<std::size_t>(cfg.C);
    const std::size_t F = static_cast<std::size_t>(cfg.ff_hidden);
    const std::size_t P = static_cast<std::size_t>(cfg.pooler_hidden);
    const std::size_t N = static_cast<std::size_t>(cfg.tokens());
    const std::size_t W = static_cast<std::size_t>(cfg.W);
    const std::size_t embed = 2 * W * C + C;
    const std::size_t tokens = C + (N + 1) * C;
    const std::size_t block = 2 * C + (C * 3 * C + 3 * C) + (C * C + C) + 2 * C + (C * F + F) + (F * C + C);
    const std::size_t pooler = C * P + P + P + 1;
    const std::size_t head = C + 1;
    return embed + tokens + static_cast<std::size_t>(cfg.depth) * block + pooler + head;
}

EstimatorWeights init_estimator(const EstimatorConfig& cfg, std::uint64_t seed) {
    EstimatorWeights w(cfg);
    Rng rng(seed);
    auto trunc_normal = [&](ad::Matrix& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            double v = rng.normal();
            while (std::abs(v) > 2.0) {
                v = rng.normal();
            }
            m.data()[i] = 0.02 * v;
        }
    };
    for (auto& t : w.tensors()) {
        if (t.name.rfind("head.", 0) == 0) {
            t.value.setZero();
        } else if (ends_with(t.name, ".gain")) {
            t.value.setOnes();
        } else if (ends_with(t.name, ".bias")) {
            t.value.setZero();
        } else {
            trunc_normal(t.value);
        }
    }
    return w;
}

ForwardTrace forward_graph(ad::Tape& tape, const EstimatorWeights& w, PairView x, bool track_params) {
    const auto& cfg = w.config();
    if (x.size() != static_cast<std::size_t>(2 * cfg.L)) {
        throw ValidationError("forward: input length " + std::to_string(x.size() / 2) + " does not match L=" +
                              std::to_string(cfg.L));
    }
    ForwardTrace tr;
    tr.params.reserve(w.tensors().size());
    for (const auto& t : w.tensors()) {
        tr.params.push_back(track_params ? tape.leaf(t.value) : tape.constant(t.value));
    }
    std::size_t cursor = 0;
    auto next = [&]() { return tr.params[cursor++]; };

    const int N = cfg.tokens();
    const int W = cfg.W;
    // Non-overlapping windows as rows: [cause window | effect window].
    ad::Matrix patches(N, 2 * W);
    for (int n = 0; n < N; ++n) {
        for (int s = 0; s < W; ++s) {
            const auto t = static_cast<std::size_t>(n * W + s);
            patches(n, s) = x[2 * t];
            patches(n, W + s) = x[2 * t + 1];
        }
    }
    const ad::Var in = tape.constant(std::move(patches));
    const ad::Var kernel = next();
    const ad::Var kbias = next();
    const ad::Var cls = next();
    const ad::Var pos = next();
    ad::Var h = ad::add_row(ad::matmul(in, kernel), kbias);
    h = ad::add(ad::concat_rows(cls, h), pos);

    const int d = cfg.C / cfg.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (int b = 0; b < cfg.depth; ++b) {
        const ad::Var ln1_g = next(), ln1_b = next();
        const ad::Var qkv_w = next(), qkv_b = next();
        const ad::Var proj_w = next(), proj_b = next();
        const ad::Var ln2_g = next(), ln2_b = next();
        const ad::Var fc1_w = next(), fc1_b = next();
        const ad::Var fc2_w = next(), fc2_b = next();

        const ad::Var a_in = ad::layer_norm(h, ln1_g, ln1_b);
        const ad::Var qkv = ad::add_row(ad::matmul(a_in, qkv_w), qkv_b);
        std::vector<ad::Var> head_out;
        for (int hd = 0; hd < cfg.heads; ++hd) {
            const ad::Var q = ad::slice_cols(qkv, hd * d, d);
            const ad::Var k = ad::slice_cols(qkv, cfg.C + hd * d, d);
            const ad::Var v = ad::slice_cols(qkv, 2 * cfg.C + hd * d, d);
            const ad::Var att = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), att_scale));
            tr.attention_maps.push_back(att);
            head_out.push_back(ad::matmul(att, v));
        }
        const ad::Var attn = ad::add_row(ad::matmul(ad::concat_cols(head_out), proj_w), proj_b);
        if (b == cfg.depth - 1) {
            tr.last_attention_output = attn;
        }
        h = ad::add(h, attn);
        const ad::Var f_in = ad::layer_norm(h, ln2_g, ln2_b);
        const ad::Var f = ad::add_row(ad::matmul(ad::gelu(ad::add_row(ad::matmul(f_in, fc1_w), fc1_b)), fc2_w), fc2_b);
        h = ad::add(h, f);
    }

    const ad::Var p1_w = next(), p1_b = next(), p2_w = next(), p2_b = next();
    const ad::Var head_w = next(), head_b = next();
    const ad::Var score = ad::add_row(ad::matmul(ad::gelu(ad::add_row(ad::matmul(h, p1_w), p1_b)), p2_w), p2_b);
    tr.pooler_weights = ad::softmax_rows(ad::transpose(score));
    const ad::Var pooled = ad::matmul(tr.pooler_weights, h);
    tr.logit = ad::add(ad::matmul(pooled, head_w), head_b);
    return tr;
}

double forward_logit(const EstimatorWeights& w, PairView x) {
    ad::Tape tape;
    auto tr = forward_graph(tape, w, x, false);
    const double z = tr.logit.value()(0, 0);
    if (!std::isfinite(z)) {
        throw RuntimeFailure("forward: non-finite activation");
    }
    return z;
}

double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

double forward(const EstimatorWeights& w, PairView x) {
    return sigmoid(forward_logit(w, x));
}

double focal_loss(double p, int label, double alpha, double gamma) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ValidationError("focal_loss: p must lie in (0, 1)");
    }
    if (label != 0 && label != 1) {
        throw ValidationError("focal_loss: label must be 0 or 1");
    }
    if (label == 1) {
        return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
    }
    return -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
}

std::vector<float> shift_pair(PairView x, int shift) {
    const auto L = static_cast<std::int64_t>(x.size() / 2);
    std::vector<float> out(x.size());
    for (std::int64_t t = 0; t < L; ++t) {
        const std::int64_t src = std::clamp<std::int64_t>(t - shift, 0, L - 1);
        out[static_cast<std::size_t>(2 * t)] = x[static_cast<std::size_t>(2 * src)];
        out[static_cast<std::size_t>(2 * t + 1)] = x[static_cast<std::size_t>(2 * src + 1)];
    }
    return out;
}

std::vector<float> random_shift_augment(PairView x, int range, Rng& rng, int* drawn) {
    const auto L = static_cast<int>(x.size() / 2);
    if (range < 0 || range >= L) {
        throw ValidationError("random_shift_augment: range must lie in [0, L)");
    }
    const int s = static_cast<int>(rng.uniform_int(-range, range));
    if (drawn != nullptr) {
        *drawn = s;
    }
    return shift_pair(x, s);
}

BatchGradient grad(const EstimatorWeights& w, std::span<const LabeledView> batch, double alpha, double gamma, int jobs) {
    if (batch.empty()) {
        throw ValidationError("grad: empty batch");
    }
    constexpr std::size_t kChunks = 8;
    const std::size_t chunks = std::min(kChunks, batch.size());
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    std::vector<BatchGradient> partial(chunks);
    parallel_for(chunks, jobs, [&](std::size_t c) {
        auto& acc = partial[c];
        acc.grads.reserve(w.tensors().size());
        for (const auto& t : w.tensors()) {
            acc.grads.push_back(ad::Matrix::Zero(t.value.rows(), t.value.cols()));
        }
        const std::size_t begin = batch.size() * c / chunks;
        const std::size_t end = batch.size() * (c + 1) / chunks;
        for (std::size_t s = begin; s < end; ++s) {
            ad::Tape tape;
            auto tr = forward_graph(tape, w, batch[s].x, true);
            const ad::Var loss = ad::focal_loss_from_logit(tr.logit, batch[s].label, alpha, gamma);
            acc.loss += loss.value()(0, 0) * inv_b;
            tape.backward(loss, inv_b);
            for (std::size_t i = 0; i < tr.params.size(); ++i) {
                acc.grads[i] += tr.params[i].grad();
            }
        }
    });
    BatchGradient out = std::move(partial[0]);
    for (std::size_t c = 1; c < chunks; ++c) {
        out.loss += partial[c].loss;
        for (std::size_t i = 0; i < out.grads.size(); ++i) {
            out.grads[i] += partial[c].grads[i];
        }
    }
    for (std::size_t i = 0; i < out.grads.size(); ++i) {
        if (!out.grads[i].allFinite()) {
            throw RuntimeFailure("grad: non-finite gradient in " + w.tensors()[i].name);
        }
    }
    return out;
}

}  // namespace cf
