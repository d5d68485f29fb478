#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tbn/rng.hpp"
#include "tbn/tensor.hpp"

namespace tbn {

/// Handle to a value recorded on a Tape.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode differentiation over a recorded list of ops.
///
/// Every op appends a node holding its forward value and a closure that,
/// given the node's output gradient, accumulates into its inputs' gradients.
/// backward() runs the closures newest-first and then adds the gradients of
/// parameter leaves into Parameter::grad. A Tape is single-use: record,
/// backward once, discard.
///
/// All ops treat tensors as matrices [rows, cols] over the last axis.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf value; its gradient is kept so callers can inspect d(loss)/d(input).
    Var input(Tensor<T> value);
    /// Leaf bound to a parameter. Binding the same Parameter twice yields the same Var.
    Var param(Parameter<T>& p);

    /// y = x W + b for x [n, d_in], W [d_in, d_out], b [d_out].
    Var affine(Var x, Var w, Var b);
    Var relu(Var x);
    Var sigmoid(Var x);
    /// Elementwise product of equal-shape tensors.
    Var mul(Var a, Var b);
    Var add(Var a, Var b);
    /// Concatenation along the last axis; all inputs share the row count.
    Var concat(std::span<const Var> xs);
    /// Inverted dropout: survivors scaled by 1/(1-p) in training, identity otherwise.
    Var dropout(Var x, double p, bool training, Rng& rng);
    /// [n*group, c] -> [n, c], averaging each run of `group` consecutive rows.
    Var group_mean(Var x, std::size_t group);
    /// Mean over `axis` of a [rows, cols] tensor: axis 0 -> [1, cols], axis 1 -> [rows, 1].
    Var mean_over(Var x, std::size_t axis);
    /// Each row holds a height x width image; k x k average pooling (height, width divisible by k).
    Var avg_pool(Var x, std::size_t height, std::size_t width, std::size_t k);
    /// Mean softmax cross-entropy over rows; returns a [1] tensor.
    Var softmax_xent(Var logits, std::span<const int> targets);

    /// Escape hatch for ops defined outside the tape (used by fault-injection fixtures).
    Var custom(Tensor<T> value, BackwardFn backward);

    void backward(Var loss);

    const Tensor<T>& value(Var v) const { return node(v).value; }
    const Tensor<T>& grad(Var v) const { return node(v).grad; }
    Tensor<T>& grad_mut(Var v) { return node(v).grad; }
    /// Parameter bound to a leaf, or nullptr.
    const Parameter<T>* bound_parameter(Var v) const { return node(v).param; }
    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        Parameter<T>* param = nullptr;
        BackwardFn backward;
    };

    Node& node(Var v);
    const Node& node(Var v) const;
    Var push(Tensor<T> value, BackwardFn backward, Parameter<T>* param = nullptr);

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

/// Row-wise softmax (numerically stable), exposed for prediction paths.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

}  // namespace tbn
