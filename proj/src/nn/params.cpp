#include "trajpred/nn/params.hpp"

#include <cmath>
#include <stdexcept>

#include "emap.hpp"

namespace trajpred::nn {

int ParamStore::add(const std::string& name, Tensor init, bool trainable) {
  if (by_name_.count(name) != 0) throw std::logic_error("duplicate parameter name: " + name);
  Entry e;
  e.name = name;
  e.value = std::move(init);
  e.trainable = trainable;
  entries_.push_back(std::move(e));
  int idx = static_cast<int>(entries_.size() - 1);
  by_name_[name] = idx;
  return idx;
}

int ParamStore::index_of(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? -1 : it->second;
}

bool ParamStore::all_finite() const {
  for (const auto& e : entries_) {
    if (!e.value.all_finite()) return false;
  }
  return true;
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> out;
  for (const auto& e : entries_) {
    out.insert(out.end(), e.value.data(), e.value.data() + e.value.size());
  }
  return out;
}

void ParamStore::unflatten(const std::vector<double>& flat) {
  std::size_t off = 0;
  for (auto& e : entries_) {
    if (off + e.value.size() > flat.size()) throw std::invalid_argument("unflatten: blob too small");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + e.value.size()), e.value.data());
    off += e.value.size();
  }
  if (off != flat.size()) throw std::invalid_argument("unflatten: blob size mismatch");
}

GradBuffer::GradBuffer(const ParamStore& store) {
  grads_.reserve(store.count());
  for (std::size_t i = 0; i < store.count(); ++i) {
    const Tensor& v = store.value(static_cast<int>(i));
    grads_.emplace_back(v.rows(), v.cols());
  }
}

void GradBuffer::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

void GradBuffer::add(const GradBuffer& other) {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    map(grads_[i]) += cmap(other.grads_[i]);
  }
}

void GradBuffer::scale(double c) {
  for (auto& g : grads_) map(g) *= c;
}

ParamBinder::ParamBinder(Graph& g, const ParamStore& store)
    : g_(&g), store_(&store), bound_(store.count(), -1) {}

NodeId ParamBinder::use(int index) {
  NodeId& slot = bound_[static_cast<std::size_t>(index)];
  if (slot < 0) slot = g_->param(&store_->value(index));
  return slot;
}

NodeId ParamBinder::use(const std::string& name) {
  int idx = store_->index_of(name);
  if (idx < 0) throw std::logic_error("unknown parameter: " + name);
  return use(idx);
}

void ParamBinder::extract_grads(GradBuffer& out) const {
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    if (bound_[i] < 0) continue;
    const Tensor& g = g_->grad(bound_[i]);
    if (g.empty()) continue;
    map(out[static_cast<int>(i)]) += cmap(g);
  }
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  return uniform_init(rows, cols, -bound, bound, rng);
}

Tensor uniform_init(std::size_t rows, std::size_t cols, double lo, double hi,
                    std::mt19937_64& rng) {
  Tensor t(rows, cols);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = dist(rng);
  return t;
}

Tensor gaussian_init(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  Tensor t(rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = dist(rng);
  return t;
}

}  // namespace trajpred::nn
