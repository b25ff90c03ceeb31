#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "trajpred/nn/gradcheck.hpp"
#include "trajpred/nn/graph.hpp"
#include "trajpred/nn/tensor.hpp"

using namespace trajpred::nn;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  Tensor t(r, c);
  std::uniform_real_distribution<double> d(-scale, scale);
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = d(rng);
  return t;
}

}  // namespace

TEST_CASE("softmax of equal scores is uniform") {
  Graph g;
  NodeId x = g.input(Tensor::row({0.0, 0.0, 0.0}));
  NodeId y = g.softmax_rows(x);
  for (int c = 0; c < 3; ++c) CHECK(g.value(y)(0, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and are positive") {
  std::mt19937_64 rng(11);
  Tensor x = random_tensor(7, 9, rng, 30.0);
  Graph g;
  NodeId y = g.softmax_rows(g.input(x));
  for (std::size_t r = 0; r < 7; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 9; ++c) {
      CHECK(g.value(y)(r, c) > 0.0);
      s += g.value(y)(r, c);
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax honors -1e9 mask offsets") {
  Tensor off(1, 3);
  off(0, 2) = -1e9;
  Graph g;
  NodeId y = g.softmax_rows(g.input(Tensor::row({1.0, 1.0, 50.0})), &off);
  CHECK(g.value(y)(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(g.value(y)(0, 1) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(g.value(y)(0, 2) < 1e-12);
}

TEST_CASE("relu clamps value and gradient") {
  Graph g;
  NodeId x = g.input(Tensor::row({-1.0, 2.0}));
  NodeId y = g.sum(g.relu(x));
  CHECK(g.value(y).item() == doctest::Approx(2.0));
  g.backward(y);
  CHECK(g.grad(x)(0, 0) == 0.0);
  CHECK(g.grad(x)(0, 1) == 1.0);
}

TEST_CASE("d sum(x^2)/dx is 2x") {
  Graph g;
  NodeId x = g.input(Tensor::row({1.0, 2.0}));
  NodeId y = g.sum(g.mul(x, x));
  g.backward(y);
  CHECK(g.grad(x)(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g.grad(x)(0, 1) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("matmul against hand computation") {
  Graph g;
  NodeId a = g.input(Tensor::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
  NodeId b = g.input(Tensor::from_rows({{5.0, 6.0}, {7.0, 8.0}}));
  NodeId c = g.matmul(a, b);
  CHECK(g.value(c)(0, 0) == doctest::Approx(19.0));
  CHECK(g.value(c)(0, 1) == doctest::Approx(22.0));
  CHECK(g.value(c)(1, 0) == doctest::Approx(43.0));
  CHECK(g.value(c)(1, 1) == doctest::Approx(50.0));
}

TEST_CASE("shape mismatch errors name the shapes") {
  Graph g;
  NodeId a = g.input(Tensor::zeros(2, 3));
  NodeId b = g.input(Tensor::zeros(2, 3));
  CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("(2x3)"), std::invalid_argument);
}

TEST_CASE("gradient of a linear map is exact") {
  std::mt19937_64 rng(1);
  Tensor w = random_tensor(4, 3, rng);
  double err = grad_check(
      [&](Graph& g, const std::vector<NodeId>& in) {
        return g.sum(g.matmul(in[0], g.constant(w)));
      },
      {random_tensor(2, 4, rng)});
  CHECK(err <= 1e-10);
}

TEST_CASE("gradcheck core ops") {
  std::mt19937_64 rng(2);
  Tensor x = random_tensor(3, 4, rng);
  Tensor y = random_tensor(3, 4, rng);
  Tensor m = random_tensor(4, 5, rng);
  Tensor v = random_tensor(1, 4, rng);
  Tensor cv = random_tensor(3, 1, rng);
  Tensor weight = random_tensor(3, 5, rng);

  SUBCASE("add/sub/mul") {
    double err = grad_check(
        [](Graph& g, const std::vector<NodeId>& in) {
          return g.sum(g.mul(g.add(in[0], in[1]), g.sub(in[0], in[1])));
        },
        {x, y});
    CHECK(err <= 1e-6);
  }
  SUBCASE("matmul both sides") {
    double err = grad_check(
        [&](Graph& g, const std::vector<NodeId>& in) {
          return g.sum(g.mul(g.matmul(in[0], in[1]), g.constant(weight)));
        },
        {x, m});
    CHECK(err <= 1e-6);
  }
  SUBCASE("add_rowvec / mul_colvec") {
    double err = grad_check(
        [](Graph& g, const std::vector<NodeId>& in) {
          return g.sum(g.mul_colvec(g.add_rowvec(in[0], in[1]), in[2]));
        },
        {x, v, cv});
    CHECK(err <= 1e-6);
  }
  SUBCASE("transpose, reshape, slices, concat") {
    double err = grad_check(
        [](Graph& g, const std::vector<NodeId>& in) {
          NodeId t = g.transpose(in[0]);                        // 4x3
          NodeId r = g.reshape(t, 3, 4);                        // 3x4
          NodeId s = g.slice_cols(r, 1, 2);                     // 3x2
          NodeId sq = g.transpose(g.slice_cols(in[1], 0, 3));   // 3x3
          NodeId c = g.concat_cols({s, sq});                    // 3x5
          NodeId rowed = g.slice_rows(c, 0, 2);                 // 2x5
          NodeId st = g.concat_rows({c, rowed});                // 5x5
          return g.mean(g.mul(st, st));
        },
        {x, y});
    CHECK(err <= 1e-6);
  }
  SUBCASE("select_rows with repeats") {
    double err = grad_check(
        [](Graph& g, const std::vector<NodeId>& in) {
          NodeId s = g.select_rows(in[0], {2, 0, 2, 1, 2});
          return g.sum(g.mul(s, s));
        },
        {x});
    CHECK(err <= 1e-6);
  }
  SUBCASE("unary chain exp/log/tanh/sigmoid") {
    Tensor pos = random_tensor(3, 4, rng);
    for (std::size_t i = 0; i < pos.size(); ++i) pos.at(i) = std::abs(pos.at(i)) + 0.5;
    double err = grad_check(
        [](Graph& g, const std::vector<NodeId>& in) {
          NodeId a = g.tanh_(g.log_(in[0]));
          NodeId b = g.sigmoid(g.exp_(g.scale(in[0], 0.3)));
          return g.sum(g.mul(a, b));
        },
        {pos});
    CHECK(err <= 1e-6);
  }
  SUBCASE("softmax and logsumexp") {
    double err = grad_check(
        [&](Graph& g, const std::vector<NodeId>& in) {
          NodeId sm = g.softmax_rows(in[0]);
          NodeId lse = g.logsumexp_rows(in[1]);
          return g.add(g.sum(g.mul(sm, g.constant(y))), g.mean(lse));
        },
        {x, y});
    CHECK(err <= 1e-6);
  }
  SUBCASE("mean_rows and scalar ops") {
    double err = grad_check(
        [](Graph& g, const std::vector<NodeId>& in) {
          NodeId mr = g.mean_rows(in[0]);
          return g.sum(g.mul(mr, g.add_scalar(g.scale(mr, 2.0), 1.0)));
        },
        {x});
    CHECK(err <= 1e-6);
  }
}

TEST_CASE("layer_norm standardizes rows before affine") {
  Graph g;
  NodeId gain = g.input(Tensor::full(1, 2, 1.0));
  NodeId bias = g.input(Tensor::zeros(1, 2));
  NodeId x = g.input(Tensor::from_rows({{1.0, 3.0}}));
  NodeId y = g.layer_norm(x, gain, bias, 1e-12);
  CHECK(g.value(y)(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(g.value(y)(0, 1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm on a constant row is zero pre-affine") {
  Graph g;
  NodeId gain = g.input(Tensor::full(1, 3, 1.0));
  NodeId bias = g.input(Tensor::zeros(1, 3));
  NodeId y = g.layer_norm(g.input(Tensor::row({4.0, 4.0, 4.0})), gain, bias);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(g.value(y)(0, c)) < 1e-9);
}

TEST_CASE("layer_norm is invariant to additive input shift") {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor(4, 6, rng);
  Tensor shifted = x;
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 6; ++c) shifted(r, c) += 17.5;
  }
  Graph g;
  NodeId gain = g.constant(Tensor::full(1, 6, 1.0));
  NodeId bias = g.constant(Tensor::zeros(1, 6));
  NodeId a = g.layer_norm(g.input(x), gain, bias, 1e-9);
  NodeId b = g.layer_norm(g.input(shifted), gain, bias, 1e-9);
  for (std::size_t i = 0; i < g.value(a).size(); ++i) {
    CHECK(std::abs(g.value(a).at(i) - g.value(b).at(i)) < 1e-9);
  }
}

TEST_CASE("gradcheck layer_norm and group_norm") {
  std::mt19937_64 rng(4);
  Tensor x = random_tensor(3, 8, rng);
  Tensor gain = random_tensor(1, 8, rng);
  Tensor bias = random_tensor(1, 8, rng);
  double err_ln = grad_check(
      [](Graph& g, const std::vector<NodeId>& in) {
        NodeId y = g.layer_norm(in[0], in[1], in[2]);
        return g.sum(g.mul(y, y));
      },
      {x, gain, bias});
  CHECK(err_ln <= 1e-4);
  double err_gn = grad_check(
      [](Graph& g, const std::vector<NodeId>& in) {
        NodeId y = g.group_norm(in[0], 4, in[1], in[2]);
        return g.sum(g.mul(y, y));
      },
      {x, gain, bias});
  CHECK(err_gn <= 1e-4);
}

TEST_CASE("group_norm rejects indivisible channels") {
  Graph g;
  NodeId gain = g.input(Tensor::full(1, 6, 1.0));
  NodeId bias = g.input(Tensor::zeros(1, 6));
  CHECK_THROWS_AS(g.group_norm(g.input(Tensor::zeros(2, 6)), 4, gain, bias), std::invalid_argument);
}

TEST_CASE("deliberately wrong backward rule is caught") {
  // Forward computes sin but the registered derivative is wrong.
  double err = grad_check(
      [](Graph& g, const std::vector<NodeId>& in) {
        NodeId y = g.apply_unary(
            in[0], [](double v) { return std::sin(v); },
            [](double v) { return std::cos(2.0 * v); });
        return g.sum(y);
      },
      {Tensor::row({0.3, 1.1, -0.7})});
  CHECK(err > 1e-2);
}

TEST_CASE("logsumexp is overflow safe with -1e9 entries") {
  Graph g;
  NodeId x = g.input(Tensor::row({-1e9, 0.0, 1.0}));
  NodeId y = g.logsumexp_rows(x);
  double expected = std::log(std::exp(0.0) + std::exp(1.0));
  CHECK(g.value(y).item() == doctest::Approx(expected).epsilon(1e-12));
}
