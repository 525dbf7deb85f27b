#include "cf/baselines.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cf/error.hpp"

namespace cf {

const char* method_name(BaselineMethod m) {
    switch (m) {
    case BaselineMethod::corr: return "corr";
    case BaselineMethod::mi: return "mi";
    case BaselineMethod::granger: return "granger";
    }
    return "?";
}

namespace {

void require_same_length(std::span<const double> x, std::span<const double> y, std::size_t min_len,
                         const char* who) {
    if (x.size() != y.size()) {
        throw ValidationError(std::string(who) + ": length mismatch");
    }
    if (x.size() < min_len) {
        throw ValidationError(std::string(who) + ": sequences too short");
    }
}

bool is_constant(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

bool is_binary(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

std::vector<int> bin_indices(std::span<const double> x, int bins) {
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it;
    const double width = (*hi_it - lo) / bins;
    std::vector<int> idx(x.size(), 0);
    if (width <= 0.0) {
        return idx;
    }
    for (std::size_t t = 0; t < x.size(); ++t) {
        idx[t] = std::min(bins - 1, static_cast<int>((x[t] - lo) / width));
    }
    return idx;
}

double plug_in_mi(const std::vector<int>& a, const std::vector<int>& b, int na, int nb) {
    std::vector<double> joint(static_cast<std::size_t>(na * nb), 0.0);
    std::vector<double> pa(static_cast<std::size_t>(na), 0.0);
    std::vector<double> pb(static_cast<std::size_t>(nb), 0.0);
    for (std::size_t t = 0; t < a.size(); ++t) {
        joint[static_cast<std::size_t>(a[t] * nb + b[t])] += 1.0;
        pa[static_cast<std::size_t>(a[t])] += 1.0;
        pb[static_cast<std::size_t>(b[t])] += 1.0;
    }
    const double n = static_cast<double>(a.size());
    double mi = 0.0;
    for (int i = 0; i < na; ++i) {
        for (int j = 0; j < nb; ++j) {
            const double c = joint[static_cast<std::size_t>(i * nb + j)];
            if (c > 0.0) {
                // c/n * ln( (c/n) / (pa/n * pb/n) ) = c/n * ln( c*n / (pa*pb) )
                mi += c / n * std::log(c * n / (pa[static_cast<std::size_t>(i)] * pb[static_cast<std::size_t>(j)]));
            }
        }
    }
    // Exact factorization can still leave round-off of either sign.
    return std::max(0.0, mi);
}

// Minimum-norm least squares; returns residual variance (1/T) and whether the design
// matrix lost rank.
std::pair<double, bool> residual_variance(const Eigen::MatrixXd& design, const Eigen::VectorXd& target) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
    const Eigen::VectorXd coef = cod.solve(target);
    const Eigen::VectorXd resid = target - design * coef;
    const double var = resid.squaredNorm() / static_cast<double>(target.size());
    return {var, cod.rank() < design.cols()};
}

}  // namespace

BaselineScore corr_score(std::span<const double> x, std::span<const double> y) {
    require_same_length(x, y, 2, "corr_score");
    BaselineScore s{0.0, false, false, BaselineMethod::corr};
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        mx += x[t];
        my += y[t];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double dx = x[t] - mx;
        const double dy = y[t] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        s.degenerate = true;
        return s;
    }
    s.value = std::min(1.0, std::abs(sxy) / std::sqrt(sxx * syy));
    return s;
}

BaselineScore mi_score(std::span<const double> x, std::span<const double> y, int bins) {
    require_same_length(x, y, 2, "mi_score");
    if (bins < 2) {
        throw ValidationError("mi_score: bins must be >= 2");
    }
    BaselineScore s{0.0, false, false, BaselineMethod::mi};
    if (is_constant(x) || is_constant(y)) {
        s.degenerate = true;
        return s;
    }
    if (is_binary(x) && is_binary(y)) {
        std::vector<int> a(x.size()), b(y.size());
        for (std::size_t t = 0; t < x.size(); ++t) {
            a[t] = x[t] == 1.0 ? 1 : 0;
            b[t] = y[t] == 1.0 ? 1 : 0;
        }
        s.value = plug_in_mi(a, b, 2, 2);
        return s;
    }
    s.value = plug_in_mi(bin_indices(x, bins), bin_indices(y, bins), bins, bins);
    return s;
}

BaselineScore granger_score(std::span<const double> cause, std::span<const double> effect, int lag) {
    if (lag < 1) {
        throw ValidationError("granger_score: lag must be >= 1");
    }
    if (cause.size() != effect.size()) {
        throw ValidationError("granger_score: length mismatch");
    }
    if (cause.size() <= static_cast<std::size_t>(2 * lag + 1)) {
        throw ValidationError("granger_score: sequence too short for lag " + std::to_string(lag));
    }
    BaselineScore s{1.0, true, false, BaselineMethod::granger};
    if (is_constant(cause)) {
        // The cause columns are collinear with the intercept and add nothing.
        s.degenerate = true;
        return s;
    }
    const auto T = static_cast<Eigen::Index>(effect.size()) - lag;
    Eigen::MatrixXd restricted(T, 1 + lag);
    Eigen::MatrixXd full(T, 1 + 2 * lag);
    Eigen::VectorXd target(T);
    for (Eigen::Index r = 0; r < T; ++r) {
        const auto t = static_cast<std::size_t>(r + lag);
        target(r) = effect[t];
        restricted(r, 0) = 1.0;
        full(r, 0) = 1.0;
        for (int p = 1; p <= lag; ++p) {
            restricted(r, p) = effect[t - static_cast<std::size_t>(p)];
            full(r, p) = effect[t - static_cast<std::size_t>(p)];
            full(r, lag + p) = cause[t - static_cast<std::size_t>(p)];
        }
    }
    const auto [var_r, deg_r] = residual_variance(restricted, target);
    const auto [var_f, deg_f] = residual_variance(full, target);
    // An absolute floor keeps exact fits finite; the restricted model is nested, so the
    // ratio stays >= 1 up to solver round-off.
    constexpr double kFloor = 1e-12;
    s.value = (var_r + kFloor) / (var_f + kFloor);
    s.degenerate = deg_r || deg_f;
    return s;
}

}  // namespace cf
