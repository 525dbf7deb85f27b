#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices. A Tape records every
// operation of one forward pass together with a closure that pushes the output adjoint
// back onto its inputs; Tape::backward replays the closures in reverse creation order.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace cf::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Matrix& value() const;
    const Matrix& grad() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Input that never receives a gradient.
    Var constant(Matrix value);
    // Input whose gradient is accumulated and can be read after backward().
    Var leaf(Matrix value);

    // Seeds d(out)/d(out) = seed (out must be 1x1) and propagates to every node.
    void backward(Var out, double seed = 1.0);

    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    Matrix& grad_mut(std::size_t id) { return nodes_[id].grad; }
    std::size_t size() const { return nodes_.size(); }

    // Used by op implementations: records an output that depends on `inputs`.
    Var record(Matrix value, std::initializer_list<Var> inputs, std::function<void(Tape&, std::size_t)> backward);
    Var record(Matrix value, std::span<const Var> inputs, std::function<void(Tape&, std::size_t)> backward);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        std::function<void(Tape&, std::size_t)> backward;
    };
    std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);          // a * b
Var matmul_nt(Var a, Var b);       // a * b^T
Var add(Var a, Var b);             // same shapes
Var add_row(Var a, Var row);       // row (1 x n) broadcast over rows of a
Var scale(Var a, double s);
Var transpose(Var a);
Var gelu(Var a);                   // exact erf form
Var softmax_rows(Var a);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);  // per row; gain/bias are 1 x n
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(Var top, Var bottom);
Var sum_all(Var a);                // 1 x 1

// Focal loss of a 1x1 logit z against label y, computed through log-sigmoid for stability:
// y=1: -alpha (1-p)^gamma ln p;  y=0: -(1-alpha) p^gamma ln(1-p),  p = sigmoid(z).
Var focal_loss_from_logit(Var z, int label, double alpha, double gamma);

}  // namespace cf::ad
