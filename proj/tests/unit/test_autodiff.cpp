// Copyright 2026 The HSML Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <cmath>

#include "hsml/autodiff/graph.hpp"
#include "hsml/autodiff/ops.hpp"
#include "hsml/rng.hpp"
#include "support/numeric.hpp"
#include "support/random_graph.hpp"

using namespace hsml;
using namespace hsml::ad;
using hsml::testing::close;

namespace {

Tensor random_tensor(Rng& rng, Shape shape) {
  Tensor t(shape, 0.0);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("tensor construction checks sizes", "[tensor]") {
  CHECK(Tensor({2, 3}, 1.5).size() == 6);
  CHECK(Tensor::scalar(4.0).rank() == 0);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  const Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(m.at(1, 0) == 3.0);
}

TEST_CASE("forward values of simple ops", "[autodiff]") {
  Graph g;
  CHECK(tanh(g.constant(0.0)).value().item() == 0.0);
  CHECK(sigmoid(g.constant(0.0)).value().item() == 0.5);
  CHECK(g.eval(g.constant(5.0)).item() == 5.0);
  const Var s = softmax(g.leaf(Tensor::vector({0.0, 0.0})));
  CHECK(s.value()[0] == 0.5);
  CHECK(s.value()[1] == 0.5);
}

TEST_CASE("matmul agrees with a triple-loop oracle", "[autodiff]") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor a = random_tensor(rng, {2, 3});
    const Tensor b = random_tensor(rng, {3, 1});
    Graph g;
    const Tensor& c = matmul(g.leaf(a), g.leaf(b)).value();
    for (std::size_t i = 0; i < 2; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a.at(i, k) * b.at(k, 0);
      CHECK(c.at(i, 0) == s);
    }
  }
}

TEST_CASE("transposed matmul variants match explicit transposes", "[autodiff]") {
  Rng rng(8);
  const Tensor a = random_tensor(rng, {3, 2});
  const Tensor b = random_tensor(rng, {4, 3});
  Graph g;
  const Var at = g.leaf(a);
  const Var bt = g.leaf(b);
  const Tensor& c = matmul(at, bt, true, true).value();  // [2, 4] = a^T b^T
  REQUIRE(c.shape() == Shape{2, 4});
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a.at(k, i) * b.at(j, k);
      CHECK(c.at(i, j) == s);
    }
  }
}

TEST_CASE("shape mismatches name the op and both shapes", "[autodiff]") {
  Graph g;
  const Var a = g.zeros({2, 3});
  const Var b = g.zeros({3, 2});
  try {
    add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[3, 2]") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(bias_add(a, g.zeros({2})), ShapeError);
  CHECK_THROWS_AS(slice(a, 1, 2, 5), ShapeError);
}

TEST_CASE("first and second derivatives of polynomials", "[autodiff]") {
  Graph g;
  const Var x = g.leaf(Tensor::scalar(3.0));
  const Var y = mul(x, x);
  const std::vector<Var> wrt{x};
  CHECK(g.grad(y, wrt)[0].value().item() == 6.0);

  Graph h;
  const Var z = h.leaf(Tensor::scalar(2.0));
  const std::vector<Var> zw{z};
  const Var cube = mul(mul(z, z), z);
  const Var d1 = h.grad(cube, zw)[0];
  const Var d2 = h.grad(d1, zw)[0];
  CHECK(d1.value().item() == 12.0);
  CHECK(d2.value().item() == 12.0);
}

TEST_CASE("grad of grad of x^3 is 6x at random points", "[autodiff][property]") {
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const double x0 = rng.uniform(-3.0, 3.0);
    Graph g;
    const Var x = g.leaf(Tensor::scalar(x0));
    const std::vector<Var> wrt{x};
    const Var d1 = g.grad(mul(mul(x, x), x), wrt)[0];
    const double d2 = g.grad(d1, wrt)[0].value().item();
    CHECK(std::abs(d2 - 6.0 * x0) <= 1e-9);
  }
}

TEST_CASE("unreachable leaves get exact zeros", "[autodiff][property]") {
  Graph g;
  const Var x = g.leaf(Tensor::vector({1.0, 2.0}));
  const Var unused = g.leaf(Tensor({2, 2}, 3.0));
  const std::vector<Var> wrt{x, unused};
  const auto grads = g.grad(sum(square(x)), wrt);
  CHECK(grads[1].value() == Tensor({2, 2}, 0.0));
  CHECK(grads[0].value() == Tensor::vector({2.0, 4.0}));
}

TEST_CASE("grad requires a scalar output", "[autodiff]") {
  Graph g;
  const Var x = g.leaf(Tensor::vector({1.0, 2.0}));
  const std::vector<Var> wrt{x};
  CHECK_THROWS_AS(g.grad(square(x), wrt), GradError);
}

TEST_CASE("placeholders evaluate once bound", "[autodiff]") {
  Graph g;
  const Var p = g.placeholder({2});
  const Var y = sum(square(p));
  CHECK_THROWS_AS(g.eval(y), UnboundLeafError);
  g.bind(p, Tensor::vector({1.0, 2.0}));
  CHECK(g.eval(y).item() == 5.0);
  CHECK_THROWS(g.bind(p, Tensor::vector({1.0, 2.0})));
}

TEST_CASE("relu and max_rows route gradients to the active entries", "[autodiff]") {
  Graph g;
  const Var x = g.leaf(Tensor::matrix(2, 2, {-1.0, 2.0, 3.0, -4.0}));
  const std::vector<Var> wrt{x};
  CHECK(g.grad(sum(relu(x)), wrt)[0].value() == Tensor::matrix(2, 2, {0.0, 1.0, 1.0, 0.0}));
  CHECK(g.grad(sum(max_rows(x)), wrt)[0].value() == Tensor::matrix(2, 2, {0.0, 1.0, 1.0, 0.0}));
}

TEST_CASE("stop_gradient blocks flow", "[autodiff]") {
  Graph g;
  const Var x = g.leaf(Tensor::scalar(2.0));
  const std::vector<Var> wrt{x};
  const Var y = mul(stop_gradient(x), x);
  CHECK(g.grad(y, wrt)[0].value().item() == 2.0);
}

TEST_CASE("2-layer MLP loss gradient matches finite differences", "[autodiff]") {
  Rng rng(3);
  const Tensor w1 = random_tensor(rng, {2, 5});
  const Tensor w2 = random_tensor(rng, {5, 1});
  const Tensor xs = random_tensor(rng, {4, 2});
  const Tensor ys = random_tensor(rng, {4, 1});
  auto loss = [&](Graph& g, Var a, Var b) {
    const Var h = tanh(matmul(g.leaf(xs), a));
    return mean(square(sub(matmul(h, b), g.leaf(ys))));
  };
  Graph g;
  const Var a = g.leaf(w1);
  const Var b = g.leaf(w2);
  const std::vector<Var> wrt{a, b};
  const auto grads = g.grad(loss(g, a, b), wrt);
  auto f1 = [&](const Tensor& t) {
    Graph h;
    return loss(h, h.leaf(t), h.leaf(w2)).value().item();
  };
  auto f2 = [&](const Tensor& t) {
    Graph h;
    return loss(h, h.leaf(w1), h.leaf(t)).value().item();
  };
  for (std::size_t i = 0; i < w1.size(); ++i) {
    CHECK(close(grads[0].value()[i], testing::central_difference(f1, w1, i), 1e-4, 1e-7));
  }
  for (std::size_t i = 0; i < w2.size(); ++i) {
    CHECK(close(grads[1].value()[i], testing::central_difference(f2, w2, i), 1e-4, 1e-7));
  }
}

TEST_CASE("random composite graphs pass finite-difference checks", "[autodiff][property]") {
  Rng rng(2026);
  std::size_t failures = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const testing::RandomProgram program = testing::random_program(rng);
    const testing::RandomInputs inputs = testing::random_inputs(rng);
    Graph g;
    std::vector<Var> leaves;
    for (const Tensor& t : inputs.tensors) leaves.push_back(g.leaf(t));
    const auto grads = g.grad(testing::build(program, leaves), leaves);
    for (std::size_t l = 0; l < leaves.size(); ++l) {
      auto f = [&](const Tensor& t) {
        Graph h;
        std::vector<Var> ls;
        for (std::size_t k = 0; k < inputs.tensors.size(); ++k) {
          ls.push_back(h.leaf(k == l ? t : inputs.tensors[k]));
        }
        return testing::build(program, ls).value().item();
      };
      for (std::size_t i = 0; i < inputs.tensors[l].size(); ++i) {
        const double fd = testing::central_difference(f, inputs.tensors[l], i);
        if (!close(grads[l].value()[i], fd, 1e-4, 1e-7)) ++failures;
      }
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("gradients of gradients pass finite-difference checks", "[autodiff][property]") {
  Rng rng(99);
  std::size_t failures = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const testing::RandomProgram program = testing::random_program(rng, 1, 4);
    const testing::RandomInputs inputs = testing::random_inputs(rng);
    const Tensor u = random_tensor(rng, {3, 4});
    // s(a) = <grad_a f(a, ...), u>
    auto s = [&](Graph& g, const Tensor& a, Var* a_out) {
      std::vector<Var> ls{g.leaf(a)};
      for (std::size_t k = 1; k < inputs.tensors.size(); ++k) ls.push_back(g.leaf(inputs.tensors[k]));
      if (a_out) *a_out = ls[0];
      const std::vector<Var> wrt{ls[0]};
      const Var ga = g.grad(testing::build(program, ls), wrt)[0];
      return sum(mul(ga, g.leaf(u)));
    };
    Graph g;
    Var a;
    const Var out = s(g, inputs.tensors[0], &a);
    const std::vector<Var> wrt{a};
    const Tensor analytic = g.grad(out, wrt)[0].value();
    auto f = [&](const Tensor& t) {
      Graph h;
      return s(h, t, nullptr).value().item();
    };
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      if (!close(analytic[i], testing::central_difference(f, inputs.tensors[0], i), 1e-4, 1e-7)) {
        ++failures;
      }
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("evaluation is bit-reproducible", "[autodiff][property]") {
  Rng rng(5);
  const testing::RandomProgram program = testing::random_program(rng, 5, 8);
  const testing::RandomInputs inputs = testing::random_inputs(rng);
  auto run = [&] {
    Graph g;
    std::vector<Var> ls;
    for (const Tensor& t : inputs.tensors) ls.push_back(g.leaf(t));
    return testing::build(program, ls).value().item();
  };
  const double first = run();
  CHECK(run() == first);
}
