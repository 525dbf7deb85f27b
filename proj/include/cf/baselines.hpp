#pragma once

#include <span>
#include <string>

namespace cf {

enum class BaselineMethod { corr, mi, granger };

struct BaselineScore {
    double value = 0.0;            // higher means more likely causal
    bool direction_sensitive = false;
    bool degenerate = false;       // constant input or rank-deficient regression
    BaselineMethod method = BaselineMethod::corr;
};

const char* method_name(BaselineMethod m);

// |Pearson r|. Constant input yields 0 flagged degenerate.
BaselineScore corr_score(std::span<const double> x, std::span<const double> y);

// Plug-in mutual information in nats. Binary (0/1) inputs use exact 2x2 counts, otherwise
// both variables are cut into `bins` equal-width bins over their observed range.
BaselineScore mi_score(std::span<const double> x, std::span<const double> y, int bins = 16);

// Variance ratio of the autoregressive residual (effect on its own `lag` past values) over
// the bivariate residual (own past plus cause past). Both fits include an intercept and use
// 1/T residual variance.
BaselineScore granger_score(std::span<const double> cause, std::span<const double> effect, int lag = 5);

}  // namespace cf
