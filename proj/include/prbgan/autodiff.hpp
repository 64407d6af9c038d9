#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "prbgan/tensor.hpp"

namespace prbgan::autodiff {

class Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the (acyclic) computation graph. Holds the forward value,
// a gradient accumulator of the same shape, and the backward rule of the
// operation that produced it. Gradients accumulate across backward() calls
// until the caller resets them; the MC-averaged training steps rely on
// exactly that.
class Node {
public:
    static NodePtr leaf(Tensor value, bool requires_grad = true);
    static NodePtr constant(Tensor value) { return leaf(std::move(value), false); }
    static NodePtr constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    const Tensor& value() const { return value_; }
    Tensor& value() { return value_; }
    const Tensor& grad() const { return grad_; }
    Tensor& grad() { return grad_; }
    bool requires_grad() const { return requires_grad_; }
    const char* op() const { return op_; }
    const std::vector<NodePtr>& parents() const { return parents_; }

    void zero_grad() { grad_.fill(0.0); }

    // Internal: op constructors only.
    static NodePtr make(Tensor value, std::vector<NodePtr> parents, const char* op,
                        std::function<void(Node&)> backward);

private:
    Tensor value_;
    Tensor grad_;
    std::vector<NodePtr> parents_;
    std::function<void(Node&)> backward_;
    bool requires_grad_ = false;
    const char* op_ = "leaf";

    friend void backward(const NodePtr& root);
};

inline NodePtr leaf(Tensor value, bool requires_grad = true) {
    return Node::leaf(std::move(value), requires_grad);
}
inline NodePtr constant(Tensor value) { return Node::constant(std::move(value)); }

// --- graph ops ------------------------------------------------------------
// Elementwise ops accept equal shapes, or one scalar operand broadcast
// against the other (the only broadcast form supported).

NodePtr matmul(const NodePtr& a, const NodePtr& b);

NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr add(const NodePtr& a, double s);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, double s);
NodePtr div(const NodePtr& a, const NodePtr& b); // |denominator| < 1e-12 is an error
NodePtr neg(const NodePtr& a);
NodePtr log(const NodePtr& a);  // non-positive input is a domain error
NodePtr exp(const NodePtr& a);  // overflow to inf is a numeric error

NodePtr sum(const NodePtr& a);
NodePtr mean(const NodePtr& a);
NodePtr population_variance(const NodePtr& a);

NodePtr leaky_relu(const NodePtr& a, double slope);
NodePtr sigmoid(const NodePtr& a);
NodePtr softplus(const NodePtr& a);

// Row-broadcast helpers for [r x c] matrices against length-c vectors;
// realize the "+ b" and unit-mask factors of an MLP layer.
NodePtr add_row(const NodePtr& m, const NodePtr& row);
NodePtr mul_row(const NodePtr& m, const NodePtr& row);

// Numerically stable mean binary cross-entropy straight from logits
// (log-sum-exp form; never sigmoid-then-log). Targets must be 0 or 1.
NodePtr bce_with_logits(const NodePtr& logits, const Tensor& targets);

// Sorts each column of a and b independently (ascending), pairs order
// statistics, and returns the mean squared difference over all n*k pairs.
// The sort permutations are captured at forward time; backward routes
// gradients through them.
NodePtr sorted_sq_diff(const NodePtr& a, const NodePtr& b);

// Reverse pass from a scalar root. Accumulates into every reachable
// grad-requiring node's grad buffer; deterministic topological order.
void backward(const NodePtr& root);

// Guard threshold for div.
inline constexpr double kDivGuard = 1e-12;

} // namespace prbgan::autodiff
