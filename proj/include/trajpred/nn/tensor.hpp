#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace trajpred::nn {

/// Dense row-major 64-bit float tensor. The graph ops treat every tensor as a
/// matrix; scalars are 1x1 and vectors are 1xN.
class Tensor {
public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols);

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor full(std::size_t rows, std::size_t cols, double v);
  static Tensor scalar(double v);
  static Tensor row(std::initializer_list<double> xs);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  bool empty() const { return data_.empty(); }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& at(std::size_t i) { return data_[i]; }
  double at(std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v);
  void resize(std::size_t rows, std::size_t cols);
  bool all_finite() const;
  double item() const;  // requires size()==1

  std::string shape_str() const;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Thread-local multiply-accumulate counter used by the dense kernels; the
/// attention benchmark scopes it around the parts whose complexity is under
/// measurement.
struct MacCounter {
  static bool& enabled();
  static unsigned long long& count();
};

/// RAII scope that enables MAC counting and restores the previous state.
class MacCountScope {
public:
  MacCountScope();
  ~MacCountScope();
  unsigned long long macs() const;

private:
  bool prev_enabled_;
  unsigned long long start_;
};

// Plain (non-autodiff) dense helpers. Used by oracles, references and the
// forward kernels inside the graph.
Tensor tmatmul(const Tensor& a, const Tensor& b);
Tensor tmatmul_tn(const Tensor& a, const Tensor& b);  // a^T * b
Tensor tmatmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor ttranspose(const Tensor& a);
void taxpy(Tensor& y, double alpha, const Tensor& x);  // y += alpha*x

}  // namespace trajpred::nn
