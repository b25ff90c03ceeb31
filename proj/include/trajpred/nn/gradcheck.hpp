#pragma once

#include <functional>
#include <vector>

#include "trajpred/nn/graph.hpp"
#include "trajpred/nn/params.hpp"

namespace trajpred::nn {

/// Builds a scalar output from differentiable input nodes.
using GraphFn = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

/// Central-difference check of reverse-mode gradients w.r.t. every entry of
/// every input tensor. Returns the max relative error
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const GraphFn& fn, const std::vector<Tensor>& inputs, double epsilon = 1e-5);

/// Same check for model parameters: eval must return the scalar loss, and fill
/// grads when the buffer is non-null. Checks every trainable entry of store.
double grad_check_store(const std::function<double(GradBuffer*)>& eval, ParamStore& store,
                        double epsilon = 1e-5);

}  // namespace trajpred::nn
