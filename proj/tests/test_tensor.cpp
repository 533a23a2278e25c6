#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "odegrad/optim.hpp"
#include "odegrad/rng.hpp"
#include "odegrad/tensor.hpp"

using namespace odegrad;

TEST_CASE("matmul identity and hand-computed product") {
  Tensor I2 = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor col = Tensor::matrix(2, 1, {3, 4});
  Tensor r = matmul(I2, col);
  CHECK(r.at(0, 0) == doctest::Approx(3));
  CHECK(r.at(1, 0) == doctest::Approx(4));

  Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
  Tensor b = Tensor::matrix(2, 1, {5, 6});
  Tensor p = matmul(a, b);
  CHECK(p.at(0, 0) == doctest::Approx(17));
  CHECK(p.at(1, 0) == doctest::Approx(39));

  Tensor zero = Tensor::zeros({2, 2});
  Tensor any = Tensor::matrix(2, 3, {1, -2, 3, 4, 7, 0.5});
  Tensor z = matmul(zero, any);
  for (int i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);
}

TEST_CASE("matmul shape mismatch throws") {
  Tensor a = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
}

TEST_CASE("matmul associativity on random 3-chains") {
  RngState rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor a = gaussian_sample(rng, {3, 4}, 0.0, 1.0);
    Tensor b = gaussian_sample(rng, {4, 2}, 0.0, 1.0);
    Tensor c = gaussian_sample(rng, {2, 5}, 0.0, 1.0);
    Tensor lhs = matmul(matmul(a, b), c);
    Tensor rhs = matmul(a, matmul(b, c));
    const double scale = norm_inf(lhs);
    CHECK(norm_inf(lhs - rhs) <= 1e-12 * std::max(1.0, scale));
  }
}

TEST_CASE("elementwise ops") {
  Tensor x = Tensor::vec({0.0});
  CHECK(elementwise(Elt::Tanh, x)[0] == doctest::Approx(0.0));
  CHECK(elementwise(Elt::Sigmoid, x)[0] == doctest::Approx(0.5));
  Tensor y = Tensor::vec({-1.0, 2.0});
  Tensor r = elementwise(Elt::Relu, y);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 2.0);
  CHECK_THROWS_AS(elementwise(Elt::Log, Tensor::vec({-1.0})), NumericError);
  CHECK(elementwise(Elt::Exp, Tensor::vec({1.0}))[0] == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("gaussian_sample determinism and degenerate std") {
  RngState a(42), b(42);
  Tensor ta = gaussian_sample(a, {32}, 0.0, 1.0);
  Tensor tb = gaussian_sample(b, {32}, 0.0, 1.0);
  for (int i = 0; i < ta.size(); ++i) CHECK(ta[i] == tb[i]);

  RngState c(1);
  Tensor flat = gaussian_sample(c, {5}, 3.5, 0.0);
  for (int i = 0; i < flat.size(); ++i) CHECK(flat[i] == 3.5);

  CHECK_THROWS_AS(gaussian_sample(c, {2}, 0.0, -1.0), std::invalid_argument);
}

TEST_CASE("gaussian_sample moments at 1e5 draws") {
  RngState rng(2024);
  const int n = 100000;
  Tensor t = gaussian_sample(rng, {n}, 0.0, 1.0);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += t[i];
  mean /= n;
  double var = 0.0;
  for (int i = 0; i < n; ++i) var += (t[i] - mean) * (t[i] - mean);
  var /= n - 1;
  CHECK(std::fabs(mean) < 0.02);
  CHECK(std::fabs(var - 1.0) < 0.05);
}

TEST_CASE("adam zero gradient is identity") {
  RngState rng(3);
  Tensor theta = gaussian_sample(rng, {17}, 0.0, 1.0);
  AdamState st = adam_init({}, theta);
  Tensor zero({17});
  Tensor before = theta;
  for (int i = 0; i < 5; ++i) std::tie(st, theta) = adam_step(std::move(st), theta, zero);
  for (int i = 0; i < theta.size(); ++i) CHECK(theta[i] == before[i]);
}

TEST_CASE("adam first step magnitude") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  Tensor theta = Tensor::vec({0.0});
  AdamState st = adam_init(cfg, theta);
  std::tie(st, theta) = adam_step(std::move(st), theta, Tensor::vec({1.0}));
  CHECK(theta[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam minimizes a strongly convex scalar") {
  AdamConfig cfg;
  cfg.lr = 0.05;
  Tensor theta = Tensor::vec({1.0});
  AdamState st = adam_init(cfg, theta);
  for (int i = 0; i < 500; ++i) {
    Tensor grad = Tensor::vec({2.0 * theta[0]});
    std::tie(st, theta) = adam_step(std::move(st), theta, grad);
  }
  CHECK(std::fabs(theta[0]) < 1e-3);
}

TEST_CASE("adam shape mismatch") {
  Tensor theta({3});
  AdamState st = adam_init({}, theta);
  CHECK_THROWS_AS(adam_step(std::move(st), theta, Tensor({4})), DimensionError);
}

TEST_CASE("rmsprop reduces a quadratic") {
  RmsPropConfig cfg;
  cfg.lr = 1e-2;
  Tensor theta = Tensor::vec({1.0});
  RmsPropState st = rmsprop_init(cfg, theta);
  for (int i = 0; i < 2000; ++i) {
    Tensor grad = Tensor::vec({2.0 * theta[0]});
    std::tie(st, theta) = rmsprop_step(std::move(st), theta, grad);
  }
  CHECK(std::fabs(theta[0]) < 0.05);
}

TEST_CASE("rng split streams differ") {
  RngState rng(9);
  RngState child = rng.split();
  CHECK(rng.next_u64() != child.next_u64());
}
