#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "odegrad/dynamics.hpp"
#include "odegrad/rng.hpp"

using namespace odegrad;

namespace {

double a_dot_f(const DynamicsFunc& f, const Tensor& z, double t, const Tensor& a) {
  return dot(a, f.eval(z, t));
}

bool close_rel(double got, double want, double rel, double abs_floor) {
  const double diff = std::fabs(got - want);
  return diff <= abs_floor + rel * std::fabs(want);
}

// Central finite differences of a.f against every input of the field.
void check_vjp_against_fd(const DynamicsFunc& f, const Tensor& z, double t, const Tensor& a,
                          double eps = 1e-5, double rel = 1e-6, double abs_floor = 1e-8) {
  VjpResult v = f.vjp(z, t, a);
  for (int i = 0; i < z.size(); ++i) {
    Tensor zp = z, zm = z;
    zp[i] += eps;
    zm[i] -= eps;
    const double fd = (a_dot_f(f, zp, t, a) - a_dot_f(f, zm, t, a)) / (2 * eps);
    CHECK_MESSAGE(close_rel(v.vjp_z[i], fd, rel, abs_floor),
                  arch_name(f.arch()) << " vjp_z[" << i << "] " << v.vjp_z[i] << " vs " << fd);
  }
  Tensor theta = f.params();
  DynamicsFunc fp = f;
  for (int i = 0; i < theta.size(); ++i) {
    Tensor tp = theta, tm = theta;
    tp[i] += eps;
    tm[i] -= eps;
    fp.set_params(tp);
    const double lo_hi = a_dot_f(fp, z, t, a);
    fp.set_params(tm);
    const double lo_lo = a_dot_f(fp, z, t, a);
    const double fd = (lo_hi - lo_lo) / (2 * eps);
    CHECK_MESSAGE(close_rel(v.vjp_theta[i], fd, rel, abs_floor),
                  arch_name(f.arch()) << " vjp_theta[" << i << "] " << v.vjp_theta[i]
                                      << " vs " << fd);
  }
  const double fd_t = (a_dot_f(f, z, t + eps, a) - a_dot_f(f, z, t - eps, a)) / (2 * eps);
  CHECK_MESSAGE(close_rel(v.vjp_t, fd_t, rel, abs_floor),
                arch_name(f.arch()) << " vjp_t " << v.vjp_t << " vs " << fd_t);
}

double fd_trace(const DynamicsFunc& f, const Tensor& z, double t) {
  Tensor jac = fd_jacobian(f, z, t);
  double tr = 0.0;
  for (int i = 0; i < f.state_dim(); ++i) tr += jac.at(i, i);
  return tr;
}

std::vector<DynamicsFunc> all_architectures(RngState& rng) {
  std::vector<DynamicsFunc> fs;
  fs.push_back(make_linear(gaussian_sample(rng, {3, 3}, 0.0, 0.7)));
  fs.push_back(build_mlp_dynamics(3, {8}, rng, true));
  fs.push_back(build_mlp_dynamics(3, {8}, rng, false));
  fs.push_back(build_planar(3, rng));
  fs.push_back(build_gated_planar(3, 4, rng));
  fs.push_back(build_hamiltonian(4, 6, rng));
  return fs;
}

}  // namespace

TEST_CASE("eval closed-form cases") {
  Tensor A0 = Tensor::zeros({2, 2});
  DynamicsFunc zero_field = make_linear(A0);
  Tensor z = Tensor::vec({0.3, -0.7});
  Tensor out = zero_field.eval(z, 0.0);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);

  DynamicsFunc planar =
      make_planar(Tensor::vec({1, 0}), Tensor::vec({1, 0}), 0.0);
  Tensor at_origin = planar.eval(Tensor::vec({0.0, 0.0}), 0.0);
  CHECK(at_origin[0] == doctest::Approx(0.0));
  CHECK(at_origin[1] == doctest::Approx(0.0));

  DynamicsFunc diag = make_linear(Tensor::matrix(2, 2, {1, 0, 0, 2}));
  Tensor v = diag.eval(Tensor::vec({1.0, 1.0}), 0.0);
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(2.0));

  CHECK_THROWS_AS(diag.eval(Tensor::vec({1.0, 2.0, 3.0}), 0.0), DimensionError);
}

TEST_CASE("vjp zero adjoint annihilates") {
  RngState rng(11);
  for (const DynamicsFunc& f : all_architectures(rng)) {
    Tensor z = gaussian_sample(rng, {f.state_dim()}, 0.0, 0.8);
    VjpResult v = f.vjp(z, 0.3, Tensor({f.state_dim()}));
    CHECK(norm_inf(v.vjp_z) == 0.0);
    CHECK(norm_inf(v.vjp_theta) == 0.0);
    CHECK(v.vjp_t == 0.0);
  }
}

TEST_CASE("vjp_z of a linear field is the transpose product") {
  DynamicsFunc diag = make_linear(Tensor::matrix(2, 2, {1, 0, 0, 2}));
  VjpResult v = diag.vjp(Tensor::vec({0.0, 0.0}), 0.0, Tensor::vec({1.0, 1.0}));
  CHECK(v.vjp_z[0] == doctest::Approx(1.0));
  CHECK(v.vjp_z[1] == doctest::Approx(2.0));
}

TEST_CASE("vjp matches finite differences on every architecture") {
  RngState rng(23);
  for (const DynamicsFunc& f : all_architectures(rng)) {
    for (int rep = 0; rep < 5; ++rep) {
      Tensor z = gaussian_sample(rng, {f.state_dim()}, 0.0, 0.9);
      Tensor a = gaussian_sample(rng, {f.state_dim()}, 0.0, 1.0);
      const double t = rng.uniform(-0.5, 0.8);
      check_vjp_against_fd(f, z, t, a);
    }
  }
}

TEST_CASE("jacobian_trace closed forms") {
  DynamicsFunc diag = make_linear(Tensor::matrix(2, 2, {1, 0, 0, 2}));
  RngState rng(5);
  for (int rep = 0; rep < 3; ++rep) {
    Tensor z = gaussian_sample(rng, {2}, 0.0, 1.0);
    CHECK(diag.jacobian_trace(z, 0.0) == doctest::Approx(3.0));
  }

  DynamicsFunc planar = make_planar(Tensor::vec({1, 0}), Tensor::vec({1, 0}), 0.0);
  CHECK(planar.jacobian_trace(Tensor::vec({0.0, 0.0}), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("hamiltonian split trace is exactly zero") {
  RngState rng(31);
  DynamicsFunc f = build_hamiltonian(4, 10, rng);
  for (int rep = 0; rep < 100; ++rep) {
    Tensor z = gaussian_sample(rng, {4}, 0.0, 1.5);
    CHECK(std::fabs(f.jacobian_trace(z, 0.0)) < 1e-12);
  }
}

TEST_CASE("jacobian_trace agrees with finite-difference jacobian") {
  RngState rng(17);
  for (const DynamicsFunc& f : all_architectures(rng)) {
    for (int rep = 0; rep < 100; ++rep) {
      Tensor z = gaussian_sample(rng, {f.state_dim()}, 0.0, 1.0);
      const double t = rng.uniform(0.0, 1.0);
      const double exact = f.jacobian_trace(z, t);
      const double approx = fd_trace(f, z, t);
      CHECK(std::fabs(exact - approx) < 1e-5);
    }
  }
}

TEST_CASE("fd_jacobian recovers a linear field") {
  RngState rng(41);
  Tensor A = gaussian_sample(rng, {3, 3}, 0.0, 1.0);
  DynamicsFunc f = make_linear(A);
  Tensor z = gaussian_sample(rng, {3}, 0.0, 1.0);
  Tensor jac = fd_jacobian(f, z, 0.0, 1e-5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(std::fabs(jac.at(i, j) - A.at(i, j)) < 1e-8);

  DynamicsFunc zero_field = make_linear(Tensor::zeros({2, 2}));
  Tensor zj = fd_jacobian(zero_field, Tensor::vec({1.0, 2.0}), 0.0);
  CHECK(norm_inf(zj) == 0.0);
}

TEST_CASE("trace_grad matches finite differences of the trace") {
  RngState rng(53);
  std::vector<DynamicsFunc> fs;
  fs.push_back(make_linear(gaussian_sample(rng, {3, 3}, 0.0, 0.7)));
  fs.push_back(build_planar(3, rng));
  fs.push_back(build_gated_planar(2, 3, rng));
  fs.push_back(build_hamiltonian(4, 6, rng));
  const double eps = 1e-5;
  for (const DynamicsFunc& f : fs) {
    Tensor z = gaussian_sample(rng, {f.state_dim()}, 0.0, 0.8);
    const double t = 0.4;
    VjpResult g = f.trace_grad(z, t);
    for (int i = 0; i < z.size(); ++i) {
      Tensor zp = z, zm = z;
      zp[i] += eps;
      zm[i] -= eps;
      const double fd = (f.jacobian_trace(zp, t) - f.jacobian_trace(zm, t)) / (2 * eps);
      CHECK(std::fabs(g.vjp_z[i] - fd) < 1e-6 + 1e-6 * std::fabs(fd));
    }
    Tensor theta = f.params();
    DynamicsFunc fp = f;
    for (int i = 0; i < theta.size(); ++i) {
      Tensor tp = theta, tm = theta;
      tp[i] += eps;
      tm[i] -= eps;
      fp.set_params(tp);
      const double hi = fp.jacobian_trace(z, t);
      fp.set_params(tm);
      const double lo = fp.jacobian_trace(z, t);
      const double fd = (hi - lo) / (2 * eps);
      CHECK(std::fabs(g.vjp_theta[i] - fd) < 1e-6 + 1e-6 * std::fabs(fd));
    }
    const double fd_t =
        (f.jacobian_trace(z, t + eps) - f.jacobian_trace(z, t - eps)) / (2 * eps);
    CHECK(std::fabs(g.vjp_t - fd_t) < 1e-6 + 1e-6 * std::fabs(fd_t));
  }

  RngState r2(5);
  DynamicsFunc mlp = build_mlp_dynamics(2, {4}, r2);
  CHECK_THROWS_AS(mlp.trace_grad(Tensor::vec({0.0, 0.0}), 0.0), std::logic_error);
}

TEST_CASE("mlp builder parameter count and determinism") {
  RngState rng(8);
  DynamicsFunc f = build_mlp_dynamics(4, {20}, rng, true);
  CHECK(f.param_count() == (5 * 20 + 20) + (20 * 4 + 4));

  RngState r1(99), r2(99);
  DynamicsFunc a = build_mlp_dynamics(3, {7}, r1);
  DynamicsFunc b = build_mlp_dynamics(3, {7}, r2);
  Tensor ta = a.params(), tb = b.params();
  for (int i = 0; i < ta.size(); ++i) CHECK(ta[i] == tb[i]);

  DynamicsFunc zf = build_mlp_dynamics(3, {7}, r1, true, /*zero_init=*/true);
  Tensor out = zf.eval(Tensor::vec({0.5, -0.2, 1.0}), 0.3);
  CHECK(norm_inf(out) == 0.0);
}

TEST_CASE("gated planar degenerate cases") {
  RngState rng(77);
  DynamicsFunc g = build_gated_planar(2, 1, rng);
  // force the gate fully open: sigmoid(0*t + huge) ~ 1
  Tensor theta = g.params();
  theta[2 * 2 + 1] = 0.0;   // alpha
  theta[2 * 2 + 2] = 50.0;  // beta
  g.set_params(theta);
  DynamicsFunc planar = make_planar(Tensor::vec({theta[0], theta[1]}),
                                    Tensor::vec({theta[2], theta[3]}), theta[4]);
  Tensor z = gaussian_sample(rng, {2}, 0.0, 1.0);
  Tensor a = g.eval(z, 0.7), b = planar.eval(z, 0.7);
  CHECK(norm_inf(a - b) < 1e-12);

  // all gates off
  theta[2 * 2 + 2] = -50.0;
  g.set_params(theta);
  CHECK(norm_inf(g.eval(z, 0.7)) < 1e-18);
}

TEST_CASE("gated sum equals independently summed units") {
  RngState rng(88);
  const int m = 5, d = 3;
  DynamicsFunc g = build_gated_planar(d, m, rng);
  Tensor theta = g.params();
  const int stride = 2 * d + 3;
  Tensor z = gaussian_sample(rng, {d}, 0.0, 1.0);
  const double t = 0.6;
  Tensor sum({d});
  for (int n = 0; n < m; ++n) {
    Tensor u({d}), w({d});
    for (int j = 0; j < d; ++j) {
      u[j] = theta[n * stride + j];
      w[j] = theta[n * stride + d + j];
    }
    const double b = theta[n * stride + 2 * d];
    const double gate = sigmoid_scalar(theta[n * stride + 2 * d + 1] * t +
                                       theta[n * stride + 2 * d + 2]);
    DynamicsFunc unit = make_planar(u, w, b);
    sum.axpy(gate, unit.eval(z, t));
  }
  CHECK(norm_inf(g.eval(z, t) - sum) < 1e-12);

  // per-unit trace sum matches the closed form and finite differences
  double tr_sum = 0.0;
  for (int n = 0; n < m; ++n) {
    Tensor u({d}), w({d});
    for (int j = 0; j < d; ++j) {
      u[j] = theta[n * stride + j];
      w[j] = theta[n * stride + d + j];
    }
    const double b = theta[n * stride + 2 * d];
    const double gate = sigmoid_scalar(theta[n * stride + 2 * d + 1] * t +
                                       theta[n * stride + 2 * d + 2]);
    DynamicsFunc unit = make_planar(u, w, b);
    tr_sum += gate * unit.jacobian_trace(z, t);
  }
  CHECK(std::fabs(g.jacobian_trace(z, t) - tr_sum) < 1e-12);
  CHECK(std::fabs(g.jacobian_trace(z, t) - fd_trace(g, z, t)) < 1e-5);
}

TEST_CASE("checkpoint round-trip preserves the field") {
  RngState rng(13);
  std::vector<DynamicsFunc> fs;
  fs.push_back(build_mlp_dynamics(3, {6, 5}, rng, true));
  fs.push_back(build_gated_planar(2, 4, rng));
  fs.push_back(build_hamiltonian(4, 5, rng));
  for (const DynamicsFunc& f : fs) {
    const std::string path = "dyn_roundtrip.bin";
    save_dynamics(path, f);
    DynamicsFunc g = load_dynamics(path);
    CHECK(g.arch() == f.arch());
    CHECK(g.state_dim() == f.state_dim());
    CHECK(g.param_count() == f.param_count());
    Tensor z = gaussian_sample(rng, {f.state_dim()}, 0.0, 1.0);
    CHECK(norm_inf(f.eval(z, 0.2) - g.eval(z, 0.2)) == 0.0);
    Tensor tf = f.params(), tg = g.params();
    for (int i = 0; i < tf.size(); ++i) CHECK(tf[i] == tg[i]);
  }
}
