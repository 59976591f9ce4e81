// tape.hpp - minimal reverse-mode autodiff over a fixed op set
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "moelab/kernels.hpp"
#include "moelab/tensor.hpp"

namespace moelab::grad {

using NodeId = std::int32_t;

// Define-by-run tape: every builder computes its forward value immediately and
// records the node; backward() walks the nodes in reverse creation order and
// accumulates adjoints (sums, never overwrites), so shared subexpressions and
// parameters used through several paths get the full gradient.
class Tape {
public:
    // Leaf that receives no gradient.
    NodeId constant(Tensor value);
    // Trainable leaf; the current contents of storage are copied in, and the
    // pointer is kept so optimizers can map gradients back to the parameter.
    // Registering the same tensor again returns the existing node, so every
    // parameter has exactly one node (and one total gradient) per tape.
    NodeId param(Tensor& storage);

    // y = x * W^T (+ bias per row); W is (out x in), bias rank-1 of length out.
    NodeId linear(NodeId x, NodeId w, NodeId bias = -1);
    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    // m + v broadcast over rows; v rank-1 of length cols(m).
    NodeId add_rowvec(NodeId m, NodeId v);
    NodeId mul(NodeId a, NodeId b);
    // m * s with s a single-element node.
    NodeId mul_scalar_node(NodeId m, NodeId s);
    NodeId scale(NodeId a, double c);
    NodeId activation(NodeId a, Activation act);
    NodeId softmax_rows(NodeId a, double temperature = 1.0);
    NodeId l2_normalize_rows(NodeId a, double eps = 1e-12);

    // Row-wise top-k mask + renormalize: forward keeps the k largest entries of
    // each row (ties toward the lowest index) rescaled to sum 1, zeroes the rest.
    // Backward treats the selection as constant: unselected entries get zero
    // gradient, selected ones get the exact renormalization Jacobian.
    NodeId topk_mask_renorm(NodeId probs, std::size_t k);

    // Row gather/scatter; duplicate indices accumulate, so gather_rows doubles
    // as an embedding lookup.
    NodeId gather_rows(NodeId m, std::vector<std::size_t> rows);
    NodeId scatter_rows(NodeId m, std::vector<std::size_t> rows, std::size_t out_rows);
    // Flat-index gather into a rank-1 value.
    NodeId select_entries(NodeId m, std::vector<std::size_t> flat_indices);
    // Row i of m scaled by v[i]; v rank-1 of length rows(m).
    NodeId scale_rows(NodeId m, NodeId v);

    NodeId column_mean(NodeId m);
    NodeId sum(NodeId a);
    NodeId mean(NodeId a);
    // Mean over rows of -log softmax(logits)[label]; fused and stable.
    NodeId softmax_cross_entropy(NodeId logits, std::vector<std::size_t> labels);
    // mean((a - target)^2), composed from primitive ops.
    NodeId mse(NodeId a, const Tensor& target);

    const Tensor& value(NodeId id) const;
    const Tensor& gradient(NodeId id) const;

    // Backward from a scalar loss; resets previous gradients first.
    void backward(NodeId loss);

    std::span<const std::pair<NodeId, Tensor*>> trainables() const { return trainables_; }
    std::size_t node_count() const { return nodes_.size(); }
    void clear();

private:
    enum class Op {
        constant, param, linear, matmul, add, sub, add_rowvec, mul, mul_scalar,
        scale, activation, softmax, l2norm, topk_renorm, gather_rows, scatter_rows,
        select_entries, scale_rows, column_mean, sum, cross_entropy
    };

    struct Node {
        Op op;
        NodeId a = -1, b = -1, c = -1;
        Tensor value;
        Tensor grad;
        Activation act = Activation::relu;
        double scalar = 0.0;  // scale factor, temperature or eps
        std::size_t k = 0;    // top-k width or scatter target rows
        std::vector<std::size_t> indices;  // gather/scatter rows, flat indices, labels
        Tensor cache;                      // softmax probs, top-k denominators
        Tensor* bound = nullptr;
    };

    NodeId push(Node node);
    Node& at(NodeId id);
    const Node& at(NodeId id) const;
    void check_same_shape(NodeId a, NodeId b, const char* who) const;
    void backward_node(Node& node);

    std::vector<Node> nodes_;
    std::vector<std::pair<NodeId, Tensor*>> trainables_;
    bool ran_backward_ = false;
};

struct FdCheckItem {
    Tensor* param;
    Tensor analytic;
};

struct FdOptions {
    double step = 1e-5;                  // central difference half-width h
    std::size_t samples_per_tensor = 4;  // entries probed per parameter block
    std::uint64_t seed = 0;
    double denom_floor = 1e-12;          // added to |fd| in the denominator
};

// Max over sampled entries of |analytic - fd| / (|fd| + floor), where fd is the
// central difference (f(p+h) - f(p-h)) / 2h and eval() recomputes the loss from
// the (perturbed) parameter tensors.
double finite_diff_max_rel_error(const std::function<double()>& eval,
                                 std::span<const FdCheckItem> items, const FdOptions& opts);

// Forward-only convenience: rows masked to their top-k entries (ties toward the
// lowest index) and renormalized to sum 1. Rank-1 input is a single row.
Tensor straight_through_topk(const Tensor& probabilities, std::size_t k);

}  // namespace moelab::grad
