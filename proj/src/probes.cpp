#include "cf/probes.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "cf/binio.hpp"
#include "cf/error.hpp"

namespace cf {

SaliencyMap grad_cam(const EstimatorWeights& w, PairView x) {
    const auto& cfg = w.config();
    ad::Tape tape;
    auto tr = forward_graph(tape, w, x, true);  // parameters as leaves so gradients reach the activations
    tape.backward(tr.logit);

    const ad::Matrix& A = tr.last_attention_output.value();
    const ad::Matrix& G = tr.last_attention_output.grad();
    const int N = cfg.tokens();
    // token 0 is the class token
    const Eigen::RowVectorXd alpha = G.bottomRows(N).colwise().mean();
    Eigen::VectorXd cam = (A.bottomRows(N) * alpha.transpose()).cwiseMax(0.0);

    SaliencyMap out;
    out.confidence = sigmoid(tr.logit.value()(0, 0));
    out.values.assign(static_cast<std::size_t>(cfg.L), 0.0);
    const double half = (cfg.W - 1) / 2.0;
    for (int t = 0; t < cfg.L; ++t) {
        const double pos = (t - half) / cfg.W;  // fractional token index of step t
        double v;
        if (pos <= 0.0) {
            v = cam(0);
        } else if (pos >= N - 1) {
            v = cam(N - 1);
        } else {
            const int lo = static_cast<int>(pos);
            const double f = pos - lo;
            v = (1.0 - f) * cam(lo) + f * cam(lo + 1);
        }
        out.values[static_cast<std::size_t>(t)] = v;
    }
    const auto [mn, mx] = std::minmax_element(out.values.begin(), out.values.end());
    const double lo = *mn, range = *mx - *mn;
    if (!(range > 1e-12 * std::max(1.0, std::abs(*mx)))) {
        std::fill(out.values.begin(), out.values.end(), 0.0);
        out.degenerate = true;
        return out;
    }
    for (auto& v : out.values) v = std::clamp((v - lo) / range, 0.0, 1.0);
    return out;
}

std::vector<float> shift_effect_earlier(PairView x, int shift) {
    const auto L = static_cast<std::int64_t>(x.size() / 2);
    if (shift < 0 || shift >= L) throw ValidationError("reversal shift must lie in [0, L)");
    std::vector<float> out(x.begin(), x.end());
    for (std::int64_t t = 0; t < L; ++t) {
        const std::int64_t src = std::min<std::int64_t>(t + shift, L - 1);
        out[static_cast<std::size_t>(2 * t + 1)] = x[static_cast<std::size_t>(2 * src + 1)];
    }
    return out;
}

ReversalResult temporal_reversal_probe(const EstimatorWeights& w, PairView x, int shift) {
    ReversalResult r;
    r.p_original = forward(w, x);
    r.p_shifted = shift == 0 ? r.p_original : forward(w, shift_effect_earlier(x, shift));
    return r;
}

void write_saliency_csv(const SaliencyMap& map, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "index,value\n";
    char buf[32];
    for (std::size_t t = 0; t < map.values.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%.6f", map.values[t]);
        os << t << ',' << buf << '\n';
    }
    bin::write_text(path, os.str());
}

}  // namespace cf
