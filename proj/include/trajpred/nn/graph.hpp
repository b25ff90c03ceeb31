#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "trajpred/nn/tensor.hpp"

namespace trajpred::nn {

using NodeId = std::int32_t;

/// Reverse-mode autodiff tape. Operations record their backward rule at
/// construction; backward() walks the tape in reverse creation order, which is
/// a valid topological order by construction. A Graph instance is
/// single-threaded; run one per worker.
class Graph {
public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves.
  NodeId constant(Tensor v);
  NodeId input(Tensor v);                 // differentiable leaf (owned value)
  NodeId param(const Tensor* external);   // differentiable leaf, external storage

  // Elementwise / broadcast arithmetic.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId add_rowvec(NodeId a, NodeId v);  // (m x n) + (1 x n)
  NodeId mul_colvec(NodeId a, NodeId v);  // (m x n) .* (m x 1)
  NodeId scale(NodeId a, double c);
  NodeId add_scalar(NodeId a, double c);

  // Linear algebra and layout.
  NodeId matmul(NodeId a, NodeId b);
  NodeId matmul_const_left(Tensor m, NodeId a);  // m is data, not differentiated
  NodeId transpose(NodeId a);
  NodeId concat_cols(const std::vector<NodeId>& xs);
  NodeId concat_rows(const std::vector<NodeId>& xs);
  NodeId slice_cols(NodeId a, std::size_t start, std::size_t count);
  NodeId slice_rows(NodeId a, std::size_t start, std::size_t count);
  NodeId select_rows(NodeId a, std::vector<std::size_t> rows);
  NodeId reshape(NodeId a, std::size_t rows, std::size_t cols);

  // Nonlinearities.
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId tanh_(NodeId a);
  NodeId exp_(NodeId a);
  NodeId log_(NodeId a);
  NodeId apply_unary(NodeId a, double (*f)(double), double (*dfdx)(double));

  // Rowwise reductions / normalizations.
  /// softmax over each row of a + offsets (offsets are data, e.g. -1e9 masks).
  NodeId softmax_rows(NodeId a, const Tensor* offsets = nullptr);
  NodeId logsumexp_rows(NodeId a);  // (m x n) -> (m x 1)
  NodeId sum(NodeId a);             // -> 1x1
  NodeId mean(NodeId a);            // -> 1x1
  NodeId mean_rows(NodeId a);       // (m x n) -> (1 x n), average over rows
  NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);
  NodeId group_norm(NodeId x, std::size_t groups, NodeId gain, NodeId bias, double eps = 1e-5);

  void backward(NodeId root);

  const Tensor& value(NodeId id) const;
  /// Gradient of the last backward() w.r.t. node id; empty tensor if the node
  /// received no gradient.
  const Tensor& grad(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

  void reset();

private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    std::function<void(Graph&, NodeId)> back;
  };

  NodeId push(Tensor value, bool requires_grad, std::function<void(Graph&, NodeId)> back);
  Tensor& grad_buf(NodeId id);
  void accumulate(NodeId id, const Tensor& g);
  void check_same_shape(NodeId a, NodeId b, const char* op) const;

  std::vector<Node> nodes_;
};

}  // namespace trajpred::nn
