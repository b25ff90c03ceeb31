#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "trajpred/nn/graph.hpp"
#include "trajpred/nn/tensor.hpp"

namespace trajpred::nn {

/// Named parameter tensors in registration order. Order is stable and defines
/// both the checkpoint blob layout and the optimizer update order.
class ParamStore {
public:
  struct Entry {
    std::string name;
    Tensor value;
    bool trainable = true;
  };

  int add(const std::string& name, Tensor init, bool trainable = true);
  int index_of(const std::string& name) const;  // -1 if absent
  std::size_t count() const { return entries_.size(); }
  Entry& entry(int i) { return entries_[static_cast<std::size_t>(i)]; }
  const Entry& entry(int i) const { return entries_[static_cast<std::size_t>(i)]; }
  Tensor& value(int i) { return entries_[static_cast<std::size_t>(i)].value; }
  const Tensor& value(int i) const { return entries_[static_cast<std::size_t>(i)].value; }

  bool all_finite() const;
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);

private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
};

/// Per-worker gradient accumulator mirroring a ParamStore's shapes.
class GradBuffer {
public:
  explicit GradBuffer(const ParamStore& store);
  Tensor& operator[](int i) { return grads_[static_cast<std::size_t>(i)]; }
  const Tensor& operator[](int i) const { return grads_[static_cast<std::size_t>(i)]; }
  std::size_t count() const { return grads_.size(); }
  void zero();
  void add(const GradBuffer& other);
  void scale(double c);

private:
  std::vector<Tensor> grads_;
};

/// Binds ParamStore entries to nodes of one Graph, creating each param node on
/// first use and remembering the mapping for gradient extraction.
class ParamBinder {
public:
  ParamBinder(Graph& g, const ParamStore& store);
  NodeId use(int index);
  NodeId use(const std::string& name);
  /// Adds every bound parameter's gradient (if any) into out.
  void extract_grads(GradBuffer& out) const;

private:
  Graph* g_;
  const ParamStore* store_;
  std::vector<NodeId> bound_;
};

// Initializers. All draws use the supplied engine; the call order is fixed so
// a seed fully determines every parameter.
Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);
Tensor uniform_init(std::size_t rows, std::size_t cols, double lo, double hi,
                    std::mt19937_64& rng);
Tensor gaussian_init(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);

}  // namespace trajpred::nn
