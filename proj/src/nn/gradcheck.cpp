#include "trajpred/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace trajpred::nn {

namespace {

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

double eval_scalar(const GraphFn& fn, const std::vector<Tensor>& inputs) {
  Graph g;
  std::vector<NodeId> ids;
  ids.reserve(inputs.size());
  for (const Tensor& t : inputs) ids.push_back(g.input(t));
  return g.value(fn(g, ids)).item();
}

}  // namespace

double grad_check(const GraphFn& fn, const std::vector<Tensor>& inputs, double epsilon) {
  // Analytic pass.
  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<NodeId> ids;
    ids.reserve(inputs.size());
    for (const Tensor& t : inputs) ids.push_back(g.input(t));
    NodeId out = fn(g, ids);
    g.backward(out);
    for (NodeId id : ids) {
      const Tensor& gr = g.grad(id);
      analytic.push_back(gr.empty() ? Tensor::zeros(g.value(id).rows(), g.value(id).cols()) : gr);
    }
  }

  double max_err = 0.0;
  std::vector<Tensor> work = inputs;
  for (std::size_t i = 0; i < work.size(); ++i) {
    for (std::size_t j = 0; j < work[i].size(); ++j) {
      double orig = work[i].at(j);
      work[i].at(j) = orig + epsilon;
      double fp = eval_scalar(fn, work);
      work[i].at(j) = orig - epsilon;
      double fm = eval_scalar(fn, work);
      work[i].at(j) = orig;
      double numeric = (fp - fm) / (2.0 * epsilon);
      max_err = std::max(max_err, rel_error(analytic[i].at(j), numeric));
    }
  }
  return max_err;
}

double grad_check_store(const std::function<double(GradBuffer*)>& eval, ParamStore& store,
                        double epsilon) {
  GradBuffer grads(store);
  grads.zero();
  eval(&grads);

  double max_err = 0.0;
  for (int i = 0; i < static_cast<int>(store.count()); ++i) {
    if (!store.entry(i).trainable) continue;
    Tensor& value = store.value(i);
    for (std::size_t j = 0; j < value.size(); ++j) {
      double orig = value.at(j);
      value.at(j) = orig + epsilon;
      double fp = eval(nullptr);
      value.at(j) = orig - epsilon;
      double fm = eval(nullptr);
      value.at(j) = orig;
      double numeric = (fp - fm) / (2.0 * epsilon);
      max_err = std::max(max_err, rel_error(grads[i].at(j), numeric));
    }
  }
  return max_err;
}

}  // namespace trajpred::nn
