#include "cf/autodiff.hpp"

#include <cmath>
#include <numbers>

#include "cf/error.hpp"

namespace cf::ad {

const Matrix& Var::value() const { return tape->value(id); }
const Matrix& Var::grad() const { return tape->grad(id); }

Var Tape::constant(Matrix value) {
    nodes_.push_back({std::move(value), Matrix(), false, nullptr});
    return {this, nodes_.size() - 1};
}

Var Tape::leaf(Matrix value) {
    Matrix g = Matrix::Zero(value.rows(), value.cols());
    nodes_.push_back({std::move(value), std::move(g), true, nullptr});
    return {this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, std::function<void(Tape&, std::size_t)> backward) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, std::function<void(Tape&, std::size_t)> backward) {
    bool needs = false;
    for (const auto& v : inputs) {
        needs = needs || nodes_[v.id].requires_grad;
    }
    Node node;
    node.value = std::move(value);
    node.requires_grad = needs;
    if (needs) {
        node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
        node.backward = std::move(backward);
    }
    nodes_.push_back(std::move(node));
    return {this, nodes_.size() - 1};
}

void Tape::backward(Var out, double seed) {
    if (out.tape != this || nodes_[out.id].value.size() != 1) {
        throw ValidationError("backward: output must be a 1x1 node on this tape");
    }
    if (!nodes_[out.id].requires_grad) {
        return;
    }
    nodes_[out.id].grad(0, 0) += seed;
    for (std::size_t i = out.id + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (n.requires_grad && n.backward) {
            n.backward(*this, i);
        }
    }
}

namespace {

bool wants(Tape& t, Var v) { return t.requires_grad(v.id); }

void check(bool ok, const char* what) {
    if (!ok) {
        throw ValidationError(std::string("shape mismatch in ") + what);
    }
}

}  // namespace

Var matmul(Var a, Var b) {
    check(a.cols() == b.rows(), "matmul");
    Tape& t = *a.tape;
    return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        if (wants(tp, a)) tp.grad_mut(a.id).noalias() += g * tp.value(b.id).transpose();
        if (wants(tp, b)) tp.grad_mut(b.id).noalias() += tp.value(a.id).transpose() * g;
    });
}

Var matmul_nt(Var a, Var b) {
    check(a.cols() == b.cols(), "matmul_nt");
    Tape& t = *a.tape;
    return t.record(a.value() * b.value().transpose(), {a, b}, [a, b](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        if (wants(tp, a)) tp.grad_mut(a.id).noalias() += g * tp.value(b.id);
        if (wants(tp, b)) tp.grad_mut(b.id).noalias() += g.transpose() * tp.value(a.id);
    });
}

Var add(Var a, Var b) {
    check(a.rows() == b.rows() && a.cols() == b.cols(), "add");
    Tape& t = *a.tape;
    return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        if (wants(tp, a)) tp.grad_mut(a.id) += g;
        if (wants(tp, b)) tp.grad_mut(b.id) += g;
    });
}

Var add_row(Var a, Var row) {
    check(row.rows() == 1 && row.cols() == a.cols(), "add_row");
    Tape& t = *a.tape;
    Matrix out = a.value();
    out.rowwise() += row.value().row(0);
    return t.record(std::move(out), {a, row}, [a, row](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        if (wants(tp, a)) tp.grad_mut(a.id) += g;
        if (wants(tp, row)) tp.grad_mut(row.id) += g.colwise().sum();
    });
}

Var scale(Var a, double s) {
    Tape& t = *a.tape;
    return t.record(a.value() * s, {a}, [a, s](Tape& tp, std::size_t self) {
        if (wants(tp, a)) tp.grad_mut(a.id) += tp.grad(self) * s;
    });
}

Var transpose(Var a) {
    Tape& t = *a.tape;
    return t.record(a.value().transpose(), {a}, [a](Tape& tp, std::size_t self) {
        if (wants(tp, a)) tp.grad_mut(a.id) += tp.grad(self).transpose();
    });
}

Var gelu(Var a) {
    Tape& t = *a.tape;
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    Matrix out = a.value().unaryExpr([inv_sqrt2](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
    return t.record(std::move(out), {a}, [a, inv_sqrt2](Tape& tp, std::size_t self) {
        if (!wants(tp, a)) return;
        const Matrix& x = tp.value(a.id);
        const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        Matrix d = x.unaryExpr([&](double v) {
            return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
        });
        tp.grad_mut(a.id) += tp.grad(self).cwiseProduct(d);
    });
}

Var softmax_rows(Var a) {
    Tape& t = *a.tape;
    Matrix out(a.rows(), a.cols());
    const Matrix& x = a.value();
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mx = x.row(r).maxCoeff();
        out.row(r) = (x.row(r).array() - mx).exp().matrix();
        out.row(r) /= out.row(r).sum();
    }
    return t.record(std::move(out), {a}, [a](Tape& tp, std::size_t self) {
        if (!wants(tp, a)) return;
        const Matrix& y = tp.value(self);
        const Matrix& g = tp.grad(self);
        Matrix& ga = tp.grad_mut(a.id);
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const double dot = g.row(r).dot(y.row(r));
            ga.row(r) += (y.row(r).array() * (g.row(r).array() - dot)).matrix();
        }
    });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    check(gain.rows() == 1 && gain.cols() == x.cols() && bias.rows() == 1 && bias.cols() == x.cols(), "layer_norm");
    Tape& t = *x.tape;
    const Matrix& v = x.value();
    const Eigen::Index n = v.cols();
    Matrix xhat(v.rows(), n);
    Eigen::VectorXd inv_std(v.rows());
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const double mean = v.row(r).mean();
        const double var = (v.row(r).array() - mean).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (v.row(r).array() - mean) * inv_std(r);
    }
    Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
    out.rowwise() += bias.value().row(0);
    return t.record(std::move(out), {x, gain, bias},
                    [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        if (wants(tp, gain)) tp.grad_mut(gain.id) += g.cwiseProduct(xhat).colwise().sum();
        if (wants(tp, bias)) tp.grad_mut(bias.id) += g.colwise().sum();
        if (!wants(tp, x)) return;
        const auto n = static_cast<double>(xhat.cols());
        Matrix gx = g.array().rowwise() * tp.value(gain.id).row(0).array();
        Matrix& dx = tp.grad_mut(x.id);
        for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
            const double mean_g = gx.row(r).sum() / n;
            const double mean_gx = gx.row(r).dot(xhat.row(r)) / n;
            dx.row(r) += (inv_std(r) * (gx.row(r).array() - mean_g - xhat.row(r).array() * mean_gx)).matrix();
        }
    });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    check(start >= 0 && start + count <= a.cols(), "slice_cols");
    Tape& t = *a.tape;
    return t.record(a.value().middleCols(start, count), {a}, [a, start, count](Tape& tp, std::size_t self) {
        if (wants(tp, a)) tp.grad_mut(a.id).middleCols(start, count) += tp.grad(self);
    });
}

Var concat_cols(std::span<const Var> parts) {
    check(!parts.empty(), "concat_cols");
    Tape& t = *parts.front().tape;
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        check(p.rows() == parts.front().rows(), "concat_cols");
        cols += p.cols();
    }
    Matrix out(parts.front().rows(), cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p.cols()) = p.value();
        at += p.cols();
    }
    std::vector<Var> saved(parts.begin(), parts.end());
    return t.record(std::move(out), parts, [saved](Tape& tp, std::size_t self) {
        Eigen::Index off = 0;
        for (const auto& p : saved) {
            const Eigen::Index c = tp.value(p.id).cols();
            if (wants(tp, p)) tp.grad_mut(p.id) += tp.grad(self).middleCols(off, c);
            off += c;
        }
    });
}

Var concat_rows(Var top, Var bottom) {
    check(top.cols() == bottom.cols(), "concat_rows");
    Tape& t = *top.tape;
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top.value();
    out.bottomRows(bottom.rows()) = bottom.value();
    return t.record(std::move(out), {top, bottom}, [top, bottom](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Eigen::Index r = tp.value(top.id).rows();
        if (wants(tp, top)) tp.grad_mut(top.id) += g.topRows(r);
        if (wants(tp, bottom)) tp.grad_mut(bottom.id) += g.bottomRows(g.rows() - r);
    });
}

Var sum_all(Var a) {
    Tape& t = *a.tape;
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return t.record(std::move(out), {a}, [a](Tape& tp, std::size_t self) {
        if (wants(tp, a)) tp.grad_mut(a.id).array() += tp.grad(self)(0, 0);
    });
}

namespace {

// ln(1 + e^x) without overflow.
double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

Var focal_loss_from_logit(Var z, int label, double alpha, double gamma) {
    check(z.rows() == 1 && z.cols() == 1, "focal_loss_from_logit");
    Tape& t = *z.tape;
    const double zv = z.value()(0, 0);
    const double p = sigmoid(zv);
    Matrix out(1, 1);
    double dldz = 0.0;
    if (label == 1) {
        // -ln p = softplus(-z)
        const double q = 1.0 - p;
        const double nll = softplus(-zv);
        out(0, 0) = alpha * std::pow(q, gamma) * nll;
        // d/dz: alpha * [gamma q^(gamma-1) (-p q) nll + q^gamma (-q)]
        dldz = alpha * std::pow(q, gamma) * (-gamma * p * nll - q);
    } else {
        // -ln(1-p) = softplus(z)
        const double nll = softplus(zv);
        out(0, 0) = (1.0 - alpha) * std::pow(p, gamma) * nll;
        dldz = (1.0 - alpha) * std::pow(p, gamma) * (gamma * (1.0 - p) * nll + p);
    }
    return t.record(std::move(out), {z}, [z, dldz](Tape& tp, std::size_t self) {
        if (wants(tp, z)) tp.grad_mut(z.id)(0, 0) += tp.grad(self)(0, 0) * dldz;
    });
}

}  // namespace cf::ad
