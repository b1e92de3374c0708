#pragma once

// Tape-based reverse-mode differentiation over Tensor values.
//
// A Tape records every traced operation in creation order, so parents always
// precede their consumers. `backward` walks the record once in reverse and
// sums every consumer's contribution into each node's gradient. A tape is
// single-use and confined to one thread; concurrent traces use separate tapes.

#include <cstddef>
#include <functional>
#include <vector>

#include "cura/ops.hpp"
#include "cura/tensor.hpp"

namespace cura::ad {

class Tape;

/// Handle to a value recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
};

/// Reverse-mode result: one gradient per tape node, zero where no path
/// reaches the loss.
class Gradients {
public:
    Gradients() = default;
    Gradients(const Tape* tape, std::vector<Tensor> grads) : tape_(tape), grads_(std::move(grads)) {}

    const Tensor& operator[](Var v) const;
    std::size_t size() const noexcept { return grads_.size(); }

private:
    const Tape* tape_ = nullptr;
    std::vector<Tensor> grads_;
};

class Tape {
public:
    /// Called with the node's upstream gradient; pushes contributions to
    /// parents through `accumulate`.
    using BackwardFn = std::function<void(Tape& tape, const Tensor& grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Input value. Only leaves created with `requires_grad` (and everything
    /// computed from them) receive gradients.
    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    /// Records a derived value. `fn` may be empty for operations with no
    /// differentiable parent.
    Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn fn);

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Adds `contribution` to the gradient of node `id` during a backward pass.
    void accumulate(std::size_t id, const Tensor& contribution);
    void accumulate(std::size_t id, Tensor&& contribution);

    /// Exact gradients of the scalar `loss` with respect to every node.
    /// Throws UsageError if `loss` belongs to another tape or the tape was
    /// already differentiated, ShapeError if `loss` is not a scalar.
    Gradients backward(Var loss);

private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        bool requires_grad = false;
    };

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool consumed_ = false;
};

// Traced operations. Operands must live on the same tape.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
/// a (m x n) plus bias (n) added to every row.
Var add_row_bias(Var a, Var bias);
Var scale(Var a, double factor);
Var add_scalar(Var a, double c);
Var activation(Activation kind, Var x);
Var conv1d(Var x, Var kernel, Var bias, ConvMode mode);
/// Column means of an m x n matrix, as 1 x n.
Var mean_rows(Var a);
/// Final row of an m x n matrix, as 1 x n.
Var last_row(Var a);
Var reshape(Var a, Shape shape);
/// Sum of all elements, as a scalar of shape [1].
Var sum(Var a);
/// Mean squared deviation from a fixed target of the same element count.
Var mse_loss(Var pred, const Tensor& target);
/// -log softmax(logits)[true_class], stabilized by max subtraction.
Var cross_entropy(Var logits, std::size_t true_class);

}  // namespace cura::ad
