#include "trajpred/nn/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace trajpred::nn {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

ECMap cmap(const Tensor& t) {
  return ECMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

EMap map(Tensor& t) {
  return EMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void count_macs(std::size_t m, std::size_t k, std::size_t n) {
  if (MacCounter::enabled()) {
    MacCounter::count() += static_cast<unsigned long long>(m) * k * n;
  }
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }

Tensor Tensor::full(std::size_t rows, std::size_t cols, double v) {
  Tensor t(rows, cols);
  t.fill(v);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t(1, 1);
  t.at(0) = v;
  return t;
}

Tensor Tensor::row(std::initializer_list<double> xs) {
  Tensor t(1, xs.size());
  std::size_t i = 0;
  for (double x : xs) t.at(i++) = x;
  return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("from_rows: ragged rows");
    for (double x : row) t.at(i++) = x;
  }
  return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::resize(std::size_t rows, std::size_t cols) {
  rows_ = rows;
  cols_ = cols;
  data_.assign(rows * cols, 0.0);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::item() const {
  if (size() != 1) throw std::logic_error("item() on tensor of size " + std::to_string(size()));
  return data_[0];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(" << rows_ << "x" << cols_ << ")";
  return os.str();
}

bool& MacCounter::enabled() {
  thread_local bool on = false;
  return on;
}

unsigned long long& MacCounter::count() {
  thread_local unsigned long long n = 0;
  return n;
}

MacCountScope::MacCountScope() : prev_enabled_(MacCounter::enabled()), start_(MacCounter::count()) {
  MacCounter::enabled() = true;
}

MacCountScope::~MacCountScope() { MacCounter::enabled() = prev_enabled_; }

unsigned long long MacCountScope::macs() const { return MacCounter::count() - start_; }

Tensor tmatmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul shape mismatch " + a.shape_str() + " x " + b.shape_str());
  }
  Tensor out(a.rows(), b.cols());
  map(out).noalias() = cmap(a) * cmap(b);
  count_macs(a.rows(), a.cols(), b.cols());
  return out;
}

Tensor tmatmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("matmul_tn shape mismatch " + a.shape_str() + " x " + b.shape_str());
  }
  Tensor out(a.cols(), b.cols());
  map(out).noalias() = cmap(a).transpose() * cmap(b);
  count_macs(a.cols(), a.rows(), b.cols());
  return out;
}

Tensor tmatmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_nt shape mismatch " + a.shape_str() + " x " + b.shape_str());
  }
  Tensor out(a.rows(), b.rows());
  map(out).noalias() = cmap(a) * cmap(b).transpose();
  count_macs(a.rows(), a.cols(), b.rows());
  return out;
}

Tensor ttranspose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  map(out) = cmap(a).transpose();
  return out;
}

void taxpy(Tensor& y, double alpha, const Tensor& x) {
  if (!y.same_shape(x)) throw std::invalid_argument("axpy shape mismatch");
  map(y) += alpha * cmap(x);
}

}  // namespace trajpred::nn
