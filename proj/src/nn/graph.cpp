#include "trajpred/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <utility>

#include "emap.hpp"

namespace trajpred::nn {

NodeId Graph::push(Tensor value, bool requires_grad, std::function<void(Graph&, NodeId)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external != nullptr ? *n.external : n.value;
}

const Tensor& Graph::grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

Tensor& Graph::grad_buf(NodeId id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) {
    const Tensor& v = value(id);
    n.grad.resize(v.rows(), v.cols());
  }
  return n.grad;
}

void Graph::accumulate(NodeId id, const Tensor& g) {
  Tensor& buf = grad_buf(id);
  map(buf) += cmap(g);
}

void Graph::check_same_shape(NodeId a, NodeId b, const char* op) const {
  if (!value(a).same_shape(value(b))) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + value(a).shape_str() +
                                " vs " + value(b).shape_str());
  }
}

void Graph::reset() { nodes_.clear(); }

NodeId Graph::constant(Tensor v) { return push(std::move(v), false, nullptr); }

NodeId Graph::input(Tensor v) { return push(std::move(v), true, nullptr); }

NodeId Graph::param(const Tensor* external) {
  Node n;
  n.external = external;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::add(NodeId a, NodeId b) {
  check_same_shape(a, b, "add");
  Tensor out(value(a).rows(), value(a).cols());
  map(out) = cmap(value(a)) + cmap(value(b));
  bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](Graph& g, NodeId self) {
    const Tensor& gr = g.grad(self);
    if (g.requires_grad(a)) g.accumulate(a, gr);
    if (g.requires_grad(b)) g.accumulate(b, gr);
  });
}

NodeId Graph::sub(NodeId a, NodeId b) {
  check_same_shape(a, b, "sub");
  Tensor out(value(a).rows(), value(a).cols());
  map(out) = cmap(value(a)) - cmap(value(b));
  bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](Graph& g, NodeId self) {
    const Tensor& gr = g.grad(self);
    if (g.requires_grad(a)) g.accumulate(a, gr);
    if (g.requires_grad(b)) {
      Tensor& buf = g.grad_buf(b);
      map(buf) -= cmap(gr);
    }
  });
}

NodeId Graph::mul(NodeId a, NodeId b) {
  check_same_shape(a, b, "mul");
  Tensor out(value(a).rows(), value(a).cols());
  arr(out) = carr(value(a)) * carr(value(b));
  bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](Graph& g, NodeId self) {
    const Tensor& gr = g.grad(self);
    if (g.requires_grad(a)) {
      Tensor& buf = g.grad_buf(a);
      arr(buf) += carr(gr) * carr(g.value(b));
    }
    if (g.requires_grad(b)) {
      Tensor& buf = g.grad_buf(b);
      arr(buf) += carr(gr) * carr(g.value(a));
    }
  });
}

NodeId Graph::add_rowvec(NodeId a, NodeId v) {
  const Tensor& A = value(a);
  const Tensor& V = value(v);
  if (V.rows() != 1 || V.cols() != A.cols()) {
    throw std::invalid_argument("add_rowvec: shape mismatch " + A.shape_str() + " vs " +
                                V.shape_str());
  }
  Tensor out(A.rows(), A.cols());
  map(out) = cmap(A).rowwise() + cmap(V).row(0);
  bool rg = requires_grad(a) || requires_grad(v);
  return push(std::move(out), rg, [a, v](Graph& g, NodeId self) {
    const Tensor& gr = g.grad(self);
    if (g.requires_grad(a)) g.accumulate(a, gr);
    if (g.requires_grad(v)) {
      Tensor& buf = g.grad_buf(v);
      map(buf).row(0) += cmap(gr).colwise().sum();
    }
  });
}

NodeId Graph::mul_colvec(NodeId a, NodeId v) {
  const Tensor& A = value(a);
  const Tensor& V = value(v);
  if (V.cols() != 1 || V.rows() != A.rows()) {
    throw std::invalid_argument("mul_colvec: shape mismatch " + A.shape_str() + " vs " +
                                V.shape_str());
  }
  Tensor out(A.rows(), A.cols());
  arr(out) = carr(A).colwise() * carr(V).col(0);
  bool rg = requires_grad(a) || requires_grad(v);
  return push(std::move(out), rg, [a, v](Graph& g, NodeId self) {
    const Tensor& gr = g.grad(self);
    if (g.requires_grad(a)) {
      Tensor& buf = g.grad_buf(a);
      arr(buf) += carr(gr).colwise() * carr(g.value(v)).col(0);
    }
    if (g.requires_grad(v)) {
      Tensor& buf = g.grad_buf(v);
      arr(buf).col(0) += (carr(gr) * carr(g.value(a))).rowwise().sum();
    }
  });
}

NodeId Graph::scale(NodeId a, double c) {
  Tensor out(value(a).rows(), value(a).cols());
  map(out) = c * cmap(value(a));
  return push(std::move(out), requires_grad(a), [a, c](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    Tensor& buf = g.grad_buf(a);
    map(buf) += c * cmap(g.grad(self));
  });
}

NodeId Graph::add_scalar(NodeId a, double c) {
  Tensor out(value(a).rows(), value(a).cols());
  arr(out) = carr(value(a)) + c;
  return push(std::move(out), requires_grad(a), [a](Graph& g, NodeId self) {
    if (g.requires_grad(a)) g.accumulate(a, g.grad(self));
  });
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.cols() != B.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + A.shape_str() + " x " + B.shape_str());
  }
  Tensor out(A.rows(), B.cols());
  map(out).noalias() = cmap(A) * cmap(B);
  count_matmul_macs(A.rows(), A.cols(), B.cols());
  bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](Graph& g, NodeId self) {
    const Tensor& gr = g.grad(self);
    if (g.requires_grad(a)) {
      Tensor& buf = g.grad_buf(a);
      map(buf).noalias() += cmap(gr) * cmap(g.value(b)).transpose();
      count_matmul_macs(gr.rows(), gr.cols(), g.value(b).rows());
    }
    if (g.requires_grad(b)) {
      Tensor& buf = g.grad_buf(b);
      map(buf).noalias() += cmap(g.value(a)).transpose() * cmap(gr);
      count_matmul_macs(g.value(a).cols(), g.value(a).rows(), gr.cols());
    }
  });
}

NodeId Graph::matmul_const_left(Tensor m, NodeId a) {
  const Tensor& A = value(a);
  if (m.cols() != A.rows()) {
    throw std::invalid_argument("matmul_const_left: shape mismatch " + m.shape_str() + " x " +
                                A.shape_str());
  }
  Tensor out(m.rows(), A.cols());
  map(out).noalias() = cmap(m) * cmap(A);
  count_matmul_macs(m.rows(), m.cols(), A.cols());
  auto mat = std::make_shared<Tensor>(std::move(m));
  return push(std::move(out), requires_grad(a), [a, mat](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    const Tensor& gr = g.grad(self);
    Tensor& buf = g.grad_buf(a);
    map(buf).noalias() += cmap(*mat).transpose() * cmap(gr);
    count_matmul_macs(mat->cols(), mat->rows(), gr.cols());
  });
}

NodeId Graph::transpose(NodeId a) {
  Tensor out = ttranspose(value(a));
  return push(std::move(out), requires_grad(a), [a](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    Tensor& buf = g.grad_buf(a);
    map(buf) += cmap(g.grad(self)).transpose();
  });
}

NodeId Graph::concat_cols(const std::vector<NodeId>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty list");
  std::size_t rows = value(xs[0]).rows();
  std::size_t cols = 0;
  bool rg = false;
  for (NodeId x : xs) {
    if (value(x).rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += value(x).cols();
    rg = rg || requires_grad(x);
  }
  Tensor out(rows, cols);
  std::size_t off = 0;
  for (NodeId x : xs) {
    const Tensor& v = value(x);
    map(out).middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(v.cols())) =
        cmap(v);
    off += v.cols();
  }
  std::vector<NodeId> parents = xs;
  return push(std::move(out), rg, [parents](Graph& g, NodeId self) {
    const Tensor& gr = g.grad(self);
    std::size_t off = 0;
    for (NodeId x : parents) {
      std::size_t c = g.value(x).cols();
      if (g.requires_grad(x)) {
        Tensor& buf = g.grad_buf(x);
        map(buf) +=
            cmap(gr).middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(c));
      }
      off += c;
    }
  });
}

NodeId Graph::concat_rows(const std::vector<NodeId>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty list");
  std::size_t cols = value(xs[0]).cols();
  std::size_t rows = 0;
  bool rg = false;
  for (NodeId x : xs) {
    if (value(x).cols() != cols) throw std::invalid_argument("concat_rows: col mismatch");
    rows += value(x).rows();
    rg = rg || requires_grad(x);
  }
  Tensor out(rows, cols);
  std::size_t off = 0;
  for (NodeId x : xs) {
    const Tensor& v = value(x);
    map(out).middleRows(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(v.rows())) =
        cmap(v);
    off += v.rows();
  }
  std::vector<NodeId> parents = xs;
  return push(std::move(out), rg, [parents](Graph& g, NodeId self) {
    const Tensor& gr = g.grad(self);
    std::size_t off = 0;
    for (NodeId x : parents) {
      std::size_t r = g.value(x).rows();
      if (g.requires_grad(x)) {
        Tensor& buf = g.grad_buf(x);
        map(buf) +=
            cmap(gr).middleRows(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(r));
      }
      off += r;
    }
  });
}

NodeId Graph::slice_cols(NodeId a, std::size_t start, std::size_t count) {
  const Tensor& A = value(a);
  if (start + count > A.cols()) throw std::invalid_argument("slice_cols: out of range");
  Tensor out(A.rows(), count);
  map(out) = cmap(A).middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count));
  return push(std::move(out), requires_grad(a), [a, start, count](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    Tensor& buf = g.grad_buf(a);
    map(buf).middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) +=
        cmap(g.grad(self));
  });
}

NodeId Graph::slice_rows(NodeId a, std::size_t start, std::size_t count) {
  const Tensor& A = value(a);
  if (start + count > A.rows()) throw std::invalid_argument("slice_rows: out of range");
  Tensor out(count, A.cols());
  map(out) = cmap(A).middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count));
  return push(std::move(out), requires_grad(a), [a, start, count](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    Tensor& buf = g.grad_buf(a);
    map(buf).middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) +=
        cmap(g.grad(self));
  });
}

NodeId Graph::select_rows(NodeId a, std::vector<std::size_t> rows) {
  const Tensor& A = value(a);
  Tensor out(rows.size(), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= A.rows()) throw std::invalid_argument("select_rows: index out of range");
    map(out).row(static_cast<Eigen::Index>(i)) = cmap(A).row(static_cast<Eigen::Index>(rows[i]));
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(std::move(rows));
  return push(std::move(out), requires_grad(a), [a, idx](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    const Tensor& gr = g.grad(self);
    Tensor& buf = g.grad_buf(a);
    for (std::size_t i = 0; i < idx->size(); ++i) {
      map(buf).row(static_cast<Eigen::Index>((*idx)[i])) +=
          cmap(gr).row(static_cast<Eigen::Index>(i));
    }
  });
}

NodeId Graph::reshape(NodeId a, std::size_t rows, std::size_t cols) {
  const Tensor& A = value(a);
  if (rows * cols != A.size()) throw std::invalid_argument("reshape: size mismatch");
  Tensor out(rows, cols);
  std::copy(A.data(), A.data() + A.size(), out.data());
  return push(std::move(out), requires_grad(a), [a](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    const Tensor& gr = g.grad(self);
    Tensor& buf = g.grad_buf(a);
    for (std::size_t i = 0; i < gr.size(); ++i) buf.at(i) += gr.at(i);
  });
}

NodeId Graph::relu(NodeId a) {
  Tensor out(value(a).rows(), value(a).cols());
  arr(out) = carr(value(a)).max(0.0);
  return push(std::move(out), requires_grad(a), [a](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    const Tensor& x = g.value(a);
    const Tensor& gr = g.grad(self);
    Tensor& buf = g.grad_buf(a);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x.at(i) > 0.0) buf.at(i) += gr.at(i);
    }
  });
}

NodeId Graph::sigmoid(NodeId a) {
  Tensor out(value(a).rows(), value(a).cols());
  arr(out) = 1.0 / (1.0 + (-carr(value(a))).exp());
  return push(std::move(out), requires_grad(a), [a](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    const Tensor& y = g.value(self);
    Tensor& buf = g.grad_buf(a);
    arr(buf) += carr(g.grad(self)) * carr(y) * (1.0 - carr(y));
  });
}

NodeId Graph::tanh_(NodeId a) {
  Tensor out(value(a).rows(), value(a).cols());
  arr(out) = carr(value(a)).tanh();
  return push(std::move(out), requires_grad(a), [a](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    const Tensor& y = g.value(self);
    Tensor& buf = g.grad_buf(a);
    arr(buf) += carr(g.grad(self)) * (1.0 - carr(y) * carr(y));
  });
}

NodeId Graph::exp_(NodeId a) {
  Tensor out(value(a).rows(), value(a).cols());
  arr(out) = carr(value(a)).exp();
  return push(std::move(out), requires_grad(a), [a](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    Tensor& buf = g.grad_buf(a);
    arr(buf) += carr(g.grad(self)) * carr(g.value(self));
  });
}

NodeId Graph::log_(NodeId a) {
  Tensor out(value(a).rows(), value(a).cols());
  arr(out) = carr(value(a)).log();
  return push(std::move(out), requires_grad(a), [a](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    Tensor& buf = g.grad_buf(a);
    arr(buf) += carr(g.grad(self)) / carr(g.value(a));
  });
}

NodeId Graph::apply_unary(NodeId a, double (*f)(double), double (*dfdx)(double)) {
  const Tensor& A = value(a);
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) out.at(i) = f(A.at(i));
  return push(std::move(out), requires_grad(a), [a, dfdx](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    const Tensor& x = g.value(a);
    const Tensor& gr = g.grad(self);
    Tensor& buf = g.grad_buf(a);
    for (std::size_t i = 0; i < x.size(); ++i) buf.at(i) += gr.at(i) * dfdx(x.at(i));
  });
}

NodeId Graph::softmax_rows(NodeId a, const Tensor* offsets) {
  const Tensor& A = value(a);
  Tensor out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < A.cols(); ++c) {
      double s = A(r, c) + (offsets != nullptr ? (*offsets)(r, c) : 0.0);
      out(r, c) = s;
      mx = std::max(mx, s);
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < A.cols(); ++c) {
      out(r, c) = std::exp(out(r, c) - mx);
      denom += out(r, c);
    }
    for (std::size_t c = 0; c < A.cols(); ++c) out(r, c) /= denom;
  }
  return push(std::move(out), requires_grad(a), [a](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    const Tensor& y = g.value(self);
    const Tensor& gr = g.grad(self);
    Tensor& buf = g.grad_buf(a);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += gr(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) buf(r, c) += y(r, c) * (gr(r, c) - dot);
    }
  });
}

NodeId Graph::logsumexp_rows(NodeId a) {
  const Tensor& A = value(a);
  Tensor out(A.rows(), 1);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < A.cols(); ++c) mx = std::max(mx, A(r, c));
    double s = 0.0;
    for (std::size_t c = 0; c < A.cols(); ++c) s += std::exp(A(r, c) - mx);
    out(r, 0) = mx + std::log(s);
  }
  return push(std::move(out), requires_grad(a), [a](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(self);
    const Tensor& gr = g.grad(self);
    Tensor& buf = g.grad_buf(a);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) {
        buf(r, c) += gr(r, 0) * std::exp(x(r, c) - y(r, 0));
      }
    }
  });
}

NodeId Graph::sum(NodeId a) {
  Tensor out = Tensor::scalar(carr(value(a)).sum());
  return push(std::move(out), requires_grad(a), [a](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    Tensor& buf = g.grad_buf(a);
    arr(buf) += g.grad(self).at(0);
  });
}

NodeId Graph::mean(NodeId a) {
  double n = static_cast<double>(value(a).size());
  Tensor out = Tensor::scalar(carr(value(a)).sum() / n);
  return push(std::move(out), requires_grad(a), [a, n](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    Tensor& buf = g.grad_buf(a);
    arr(buf) += g.grad(self).at(0) / n;
  });
}

NodeId Graph::mean_rows(NodeId a) {
  const Tensor& A = value(a);
  double n = static_cast<double>(A.rows());
  Tensor out(1, A.cols());
  map(out).row(0) = cmap(A).colwise().sum() / n;
  return push(std::move(out), requires_grad(a), [a, n](Graph& g, NodeId self) {
    if (!g.requires_grad(a)) return;
    const Tensor& gr = g.grad(self);
    Tensor& buf = g.grad_buf(a);
    map(buf).rowwise() += cmap(gr).row(0) / n;
  });
}

NodeId Graph::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
  const Tensor& X = value(x);
  const Tensor& G = value(gain);
  const Tensor& B = value(bias);
  if (G.rows() != 1 || G.cols() != X.cols() || B.rows() != 1 || B.cols() != X.cols()) {
    throw std::invalid_argument("layer_norm: gain/bias must be 1x" + std::to_string(X.cols()));
  }
  std::size_t n = X.cols();
  Tensor out(X.rows(), n);
  auto stats = std::make_shared<Tensor>(X.rows(), 2);  // mean, inv std per row
  for (std::size_t r = 0; r < X.rows(); ++r) {
    double m = 0.0;
    for (std::size_t c = 0; c < n; ++c) m += X(r, c);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t c = 0; c < n; ++c) v += (X(r, c) - m) * (X(r, c) - m);
    v /= static_cast<double>(n);
    double istd = 1.0 / std::sqrt(v + eps);
    (*stats)(r, 0) = m;
    (*stats)(r, 1) = istd;
    for (std::size_t c = 0; c < n; ++c) out(r, c) = (X(r, c) - m) * istd * G(0, c) + B(0, c);
  }
  bool rg = requires_grad(x) || requires_grad(gain) || requires_grad(bias);
  return push(std::move(out), rg, [x, gain, bias, stats](Graph& g, NodeId self) {
    const Tensor& X = g.value(x);
    const Tensor& G = g.value(gain);
    const Tensor& gr = g.grad(self);
    std::size_t n = X.cols();
    double dn = static_cast<double>(n);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      double m = (*stats)(r, 0);
      double istd = (*stats)(r, 1);
      if (g.requires_grad(gain)) {
        Tensor& gb = g.grad_buf(gain);
        for (std::size_t c = 0; c < n; ++c) gb(0, c) += gr(r, c) * (X(r, c) - m) * istd;
      }
      if (g.requires_grad(bias)) {
        Tensor& bb = g.grad_buf(bias);
        for (std::size_t c = 0; c < n; ++c) bb(0, c) += gr(r, c);
      }
      if (g.requires_grad(x)) {
        // dxhat = gr * gain; dx derived from the standardization algebra.
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          double xhat = (X(r, c) - m) * istd;
          double dxhat = gr(r, c) * G(0, c);
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
        }
        Tensor& xb = g.grad_buf(x);
        for (std::size_t c = 0; c < n; ++c) {
          double xhat = (X(r, c) - m) * istd;
          double dxhat = gr(r, c) * G(0, c);
          xb(r, c) += istd * (dxhat - sum_dxhat / dn - xhat * sum_dxhat_xhat / dn);
        }
      }
    }
  });
}

NodeId Graph::group_norm(NodeId x, std::size_t groups, NodeId gain, NodeId bias, double eps) {
  const Tensor& X = value(x);
  const Tensor& G = value(gain);
  const Tensor& B = value(bias);
  if (groups == 0 || X.cols() % groups != 0) {
    throw std::invalid_argument("group_norm: channels " + std::to_string(X.cols()) +
                                " not divisible by groups " + std::to_string(groups));
  }
  if (G.rows() != 1 || G.cols() != X.cols() || B.rows() != 1 || B.cols() != X.cols()) {
    throw std::invalid_argument("group_norm: gain/bias must be 1x" + std::to_string(X.cols()));
  }
  std::size_t gsize = X.cols() / groups;
  Tensor out(X.rows(), X.cols());
  auto stats = std::make_shared<Tensor>(X.rows(), 2 * groups);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t gi = 0; gi < groups; ++gi) {
      std::size_t c0 = gi * gsize;
      double m = 0.0;
      for (std::size_t c = c0; c < c0 + gsize; ++c) m += X(r, c);
      m /= static_cast<double>(gsize);
      double v = 0.0;
      for (std::size_t c = c0; c < c0 + gsize; ++c) v += (X(r, c) - m) * (X(r, c) - m);
      v /= static_cast<double>(gsize);
      double istd = 1.0 / std::sqrt(v + eps);
      (*stats)(r, 2 * gi) = m;
      (*stats)(r, 2 * gi + 1) = istd;
      for (std::size_t c = c0; c < c0 + gsize; ++c) {
        out(r, c) = (X(r, c) - m) * istd * G(0, c) + B(0, c);
      }
    }
  }
  bool rg = requires_grad(x) || requires_grad(gain) || requires_grad(bias);
  return push(std::move(out), rg, [x, gain, bias, stats, groups, gsize](Graph& g, NodeId self) {
    const Tensor& X = g.value(x);
    const Tensor& G = g.value(gain);
    const Tensor& gr = g.grad(self);
    double dn = static_cast<double>(gsize);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      for (std::size_t gi = 0; gi < groups; ++gi) {
        std::size_t c0 = gi * gsize;
        double m = (*stats)(r, 2 * gi);
        double istd = (*stats)(r, 2 * gi + 1);
        if (g.requires_grad(gain)) {
          Tensor& gb = g.grad_buf(gain);
          for (std::size_t c = c0; c < c0 + gsize; ++c) {
            gb(0, c) += gr(r, c) * (X(r, c) - m) * istd;
          }
        }
        if (g.requires_grad(bias)) {
          Tensor& bb = g.grad_buf(bias);
          for (std::size_t c = c0; c < c0 + gsize; ++c) bb(0, c) += gr(r, c);
        }
        if (g.requires_grad(x)) {
          double sum_dxhat = 0.0;
          double sum_dxhat_xhat = 0.0;
          for (std::size_t c = c0; c < c0 + gsize; ++c) {
            double xhat = (X(r, c) - m) * istd;
            double dxhat = gr(r, c) * G(0, c);
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
          }
          Tensor& xb = g.grad_buf(x);
          for (std::size_t c = c0; c < c0 + gsize; ++c) {
            double xhat = (X(r, c) - m) * istd;
            double dxhat = gr(r, c) * G(0, c);
            xb(r, c) += istd * (dxhat - sum_dxhat / dn - xhat * sum_dxhat_xhat / dn);
          }
        }
      }
    }
  });
}

void Graph::backward(NodeId root) {
  if (value(root).size() != 1) {
    throw std::logic_error("backward: root must be scalar, got " + value(root).shape_str());
  }
  grad_buf(root).at(0) = 1.0;
  for (NodeId id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty() || !n.back) continue;
    n.back(*this, id);
  }
}

}  // namespace trajpred::nn
