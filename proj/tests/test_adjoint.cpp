#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "odegrad/adjoint.hpp"
#include "odegrad/dynamics.hpp"
#include "odegrad/rng.hpp"
#include "odegrad/solver.hpp"

using namespace odegrad;

namespace {

SolveConfig tight(double tol = 1e-10) {
  SolveConfig cfg;
  cfg.method = Method::Dopri5;
  cfg.rtol = tol;
  cfg.atol = tol;
  return cfg;
}

double sq_norm_loss(const Tensor& z) { return dot(z, z); }

// Loss L = |z(t1)|^2 evaluated through a fresh solve; used as the
// finite-difference oracle for every gradient component.
double loss_through_solve(const DynamicsFunc& f, const Tensor& z0, double t0, double t1) {
  Trajectory traj = solve(f, z0, t0, t1, tight());
  return sq_norm_loss(traj.final_state());
}

bool close_rel(double got, double want, double rel, double abs_floor) {
  return std::fabs(got - want) <= abs_floor + rel * std::fabs(want);
}

}  // namespace

TEST_CASE("augmented state pack/unpack round-trips exactly") {
  RngState rng(1);
  AugmentedState s;
  s.z = gaussian_sample(rng, {3}, 0.0, 1.0);
  s.a = gaussian_sample(rng, {3}, 0.0, 1.0);
  s.a_theta = gaussian_sample(rng, {11}, 0.0, 1.0);
  s.a_t = -0.7;
  Tensor flat = pack_augmented(s);
  CHECK(flat.size() == 3 + 3 + 11 + 1);
  AugmentedState r = unpack_augmented(flat, 3, 11);
  CHECK(norm_inf(r.z - s.z) == 0.0);
  CHECK(norm_inf(r.a - s.a) == 0.0);
  CHECK(norm_inf(r.a_theta - s.a_theta) == 0.0);
  CHECK(r.a_t == s.a_t);
}

TEST_CASE("aug_dynamics components") {
  DynamicsFunc f = make_linear(Tensor::matrix(2, 2, {1, 0, 0, 2}));
  AugmentedState s;
  s.z = Tensor::vec({1.0, 1.0});
  s.a = Tensor::vec({1.0, 1.0});
  s.a_theta = Tensor({4});
  s.a_t = 0.0;

  AugmentedState d = aug_dynamics(f, s, 0.0);
  CHECK(d.z[0] == doctest::Approx(1.0));
  CHECK(d.z[1] == doctest::Approx(2.0));
  CHECK(d.a[0] == doctest::Approx(-1.0));
  CHECK(d.a[1] == doctest::Approx(-2.0));
  // -a_i z_j for each matrix entry
  for (int i = 0; i < 4; ++i) CHECK(d.a_theta[i] == doctest::Approx(-1.0));
  CHECK(d.a_t == 0.0);  // time-independent field

  // zero adjoint annihilates every vjp component
  s.a = Tensor({2});
  AugmentedState d0 = aug_dynamics(f, s, 0.0);
  CHECK(norm_inf(d0.a) == 0.0);
  CHECK(norm_inf(d0.a_theta) == 0.0);
  CHECK(d0.a_t == 0.0);
}

TEST_CASE("closed-form exponential sensitivities") {
  // dz/dt = theta*z, z(0)=1, theta=0.5, L = z(1)
  DynamicsFunc f = make_linear(Tensor::matrix(1, 1, {0.5}));
  Tensor z0 = Tensor::vec({1.0});
  Trajectory fwd = solve(f, z0, 0.0, 1.0, tight());
  GradientBundle g =
      backward_gradients(f, fwd.final_state(), 0.0, 1.0, Tensor::vec({1.0}), tight(), &z0);

  const double e_half = std::exp(0.5);
  CHECK(close_rel(g.d_theta[0], e_half, 1e-5, 1e-9));            // t1 * e^{theta t1}
  CHECK(close_rel(g.d_z0[0], e_half, 1e-5, 1e-9));
  CHECK(close_rel(g.d_t1, 0.5 * e_half, 1e-5, 1e-9));
  CHECK(close_rel(g.d_t0, -0.5 * e_half, 1e-5, 1e-9));
  CHECK_FALSE(g.reversal_warning);
  CHECK(norm_inf(g.z0_reconstructed - z0) < 1e-7);
}

TEST_CASE("zero loss gradient gives a zero bundle") {
  RngState rng(4);
  DynamicsFunc f = build_mlp_dynamics(2, {6}, rng);
  Tensor z0 = gaussian_sample(rng, {2}, 0.0, 0.5);
  Trajectory fwd = solve(f, z0, 0.0, 1.0, tight(1e-8));
  GradientBundle g =
      backward_gradients(f, fwd.final_state(), 0.0, 1.0, Tensor({2}), tight(1e-8));
  CHECK(norm_inf(g.d_z0) == 0.0);
  CHECK(norm_inf(g.d_theta) == 0.0);
  CHECK(g.d_t0 == 0.0);
  CHECK(g.d_t1 == 0.0);
}

TEST_CASE("d_t1 equals the seed identity exactly") {
  RngState rng(6);
  DynamicsFunc f = build_mlp_dynamics(2, {8}, rng);
  Tensor z0 = gaussian_sample(rng, {2}, 0.0, 0.5);
  Trajectory fwd = solve(f, z0, 0.0, 0.7, tight(1e-8));
  Tensor seed = gaussian_sample(rng, {2}, 0.0, 1.0);
  GradientBundle g = backward_gradients(f, fwd.final_state(), 0.0, 0.7, seed, tight(1e-8));
  CHECK(g.d_t1 == dot(seed, f.eval(fwd.final_state(), 0.7)));
}

TEST_CASE("gradients match finite differences on MLP dynamics") {
  RngState rng(12);
  DynamicsFunc f = build_mlp_dynamics(2, {20}, rng);
  Tensor z0 = gaussian_sample(rng, {2}, 0.0, 0.6);
  const double t0 = 0.0, t1 = 0.8, eps = 1e-5;

  Trajectory fwd = solve(f, z0, t0, t1, tight());
  Tensor seed = fwd.final_state() * 2.0;  // dL/dz1 of |z|^2
  GradientBundle g = backward_gradients(f, fwd.final_state(), t0, t1, seed, tight(), &z0);
  CHECK_FALSE(g.reversal_warning);

  for (int i = 0; i < z0.size(); ++i) {
    Tensor zp = z0, zm = z0;
    zp[i] += eps;
    zm[i] -= eps;
    const double fd =
        (loss_through_solve(f, zp, t0, t1) - loss_through_solve(f, zm, t0, t1)) / (2 * eps);
    CHECK_MESSAGE(close_rel(g.d_z0[i], fd, 1e-4, 1e-7), "d_z0[" << i << "]");
  }
  Tensor theta = f.params();
  DynamicsFunc fp = f;
  for (int i = 0; i < theta.size(); ++i) {
    Tensor tp = theta, tm = theta;
    tp[i] += eps;
    tm[i] -= eps;
    fp.set_params(tp);
    const double hi = loss_through_solve(fp, z0, t0, t1);
    fp.set_params(tm);
    const double lo = loss_through_solve(fp, z0, t0, t1);
    const double fd = (hi - lo) / (2 * eps);
    CHECK_MESSAGE(close_rel(g.d_theta[i], fd, 1e-4, 1e-7), "d_theta[" << i << "]");
  }
  const double fd_t0 =
      (loss_through_solve(f, z0, t0 + eps, t1) - loss_through_solve(f, z0, t0 - eps, t1)) /
      (2 * eps);
  CHECK(close_rel(g.d_t0, fd_t0, 1e-4, 1e-7));
  const double fd_t1 =
      (loss_through_solve(f, z0, t0, t1 + eps) - loss_through_solve(f, z0, t0, t1 - eps)) /
      (2 * eps);
  CHECK(close_rel(g.d_t1, fd_t1, 1e-4, 1e-7));
}

TEST_CASE("bundle is linear in the loss seed") {
  RngState rng(21);
  DynamicsFunc f = build_mlp_dynamics(2, {10}, rng);
  Tensor z0 = gaussian_sample(rng, {2}, 0.0, 0.5);
  Trajectory fwd = solve(f, z0, 0.0, 1.0, tight());
  Tensor seed = gaussian_sample(rng, {2}, 0.0, 1.0);
  const double alpha = 3.25;
  GradientBundle g1 = backward_gradients(f, fwd.final_state(), 0.0, 1.0, seed, tight());
  GradientBundle ga =
      backward_gradients(f, fwd.final_state(), 0.0, 1.0, seed * alpha, tight());
  CHECK(norm_inf(ga.d_z0 - g1.d_z0 * alpha) <= 1e-8 * std::max(1.0, norm_inf(ga.d_z0)));
  CHECK(norm_inf(ga.d_theta - g1.d_theta * alpha) <=
        1e-8 * std::max(1.0, norm_inf(ga.d_theta)));
  CHECK(close_rel(ga.d_t0, alpha * g1.d_t0, 1e-8, 1e-12));
  CHECK(close_rel(ga.d_t1, alpha * g1.d_t1, 1e-8, 1e-12));
}

TEST_CASE("multi-observation adjoint") {
  DynamicsFunc f = make_linear(Tensor::matrix(1, 1, {1.0}));
  Tensor z0 = Tensor::vec({1.0});

  SUBCASE("sum of exponential sensitivities") {
    Trajectory fwd = solve_at_times(f, z0, {0.0, 0.5, 1.0}, tight());
    std::vector<Tensor> seeds = {Tensor({1}), Tensor::vec({1.0}), Tensor::vec({1.0})};
    GradientBundle g = backward_gradients_multi(f, fwd, seeds, tight());
    CHECK(close_rel(g.d_z0[0], std::exp(0.5) + std::exp(1.0), 1e-5, 1e-9));
    CHECK(g.d_times.size() == 3);
  }

  SUBCASE("final-only observation equals the single-interval path") {
    Trajectory fwd = solve_at_times(f, z0, {0.0, 0.4, 1.0}, tight());
    std::vector<Tensor> seeds = {Tensor({1}), Tensor({1}), Tensor::vec({2.0})};
    GradientBundle multi = backward_gradients_multi(f, fwd, seeds, tight());
    GradientBundle single =
        backward_gradients(f, fwd.final_state(), 0.0, 1.0, Tensor::vec({2.0}), tight());
    CHECK(close_rel(multi.d_z0[0], single.d_z0[0], 1e-8, 1e-12));
    CHECK(close_rel(multi.d_theta[0], single.d_theta[0], 1e-8, 1e-12));
    CHECK(close_rel(multi.d_t0, single.d_t0, 1e-8, 1e-12));
    CHECK(close_rel(multi.d_t1, single.d_t1, 1e-8, 1e-12));
  }

  SUBCASE("all-zero seeds give a zero bundle") {
    Trajectory fwd = solve_at_times(f, z0, {0.0, 0.5, 1.0}, tight());
    std::vector<Tensor> seeds = {Tensor({1}), Tensor({1}), Tensor({1})};
    GradientBundle g = backward_gradients_multi(f, fwd, seeds, tight());
    CHECK(norm_inf(g.d_z0) == 0.0);
    CHECK(norm_inf(g.d_theta) == 0.0);
    CHECK(g.d_t0 == 0.0);
  }

  SUBCASE("length mismatch and duplicate times are rejected") {
    Trajectory fwd = solve_at_times(f, z0, {0.0, 0.5, 1.0}, tight());
    std::vector<Tensor> seeds = {Tensor({1}), Tensor({1})};
    CHECK_THROWS_AS(backward_gradients_multi(f, fwd, seeds, tight()),
                    std::invalid_argument);
    Trajectory dup = fwd;
    dup.times[1] = dup.times[0];
    std::vector<Tensor> seeds3 = {Tensor({1}), Tensor({1}), Tensor({1})};
    CHECK_THROWS_AS(backward_gradients_multi(f, dup, seeds3, tight()),
                    std::invalid_argument);
  }

  SUBCASE("multi gradients match finite differences w.r.t. z0") {
    RngState rng(14);
    DynamicsFunc mlp = build_mlp_dynamics(2, {10}, rng);
    Tensor w0 = gaussian_sample(rng, {2}, 0.0, 0.5);
    const std::vector<double> times = {0.0, 0.3, 0.7, 1.0};
    Trajectory fwd = solve_at_times(mlp, w0, times, tight());
    // L = sum_i |z(t_i)|^2 over the three later observations
    std::vector<Tensor> seeds;
    seeds.push_back(Tensor({2}));
    for (size_t i = 1; i < times.size(); ++i) seeds.push_back(fwd.states[i] * 2.0);
    GradientBundle g = backward_gradients_multi(mlp, fwd, seeds, tight());
    const double eps = 1e-5;
    for (int i = 0; i < 2; ++i) {
      Tensor zp = w0, zm = w0;
      zp[i] += eps;
      zm[i] -= eps;
      double lp = 0.0, lm = 0.0;
      Trajectory tp = solve_at_times(mlp, zp, times, tight());
      Trajectory tm = solve_at_times(mlp, zm, times, tight());
      for (size_t k = 1; k < times.size(); ++k) {
        lp += sq_norm_loss(tp.states[k]);
        lm += sq_norm_loss(tm.states[k]);
      }
      const double fd = (lp - lm) / (2 * eps);
      CHECK(close_rel(g.d_z0[i], fd, 1e-4, 1e-7));
    }
  }
}

TEST_CASE("direct RK4 backprop") {
  SUBCASE("zero field is the identity map") {
    // u = w = 0 makes both the field and all of its Jacobians vanish
    DynamicsFunc f = make_planar(Tensor::vec({0.0, 0.0}), Tensor::vec({0.0, 0.0}), 0.0);
    Tensor seed = Tensor::vec({0.5, -1.5});
    GradientBundle g = direct_backprop_rk4(f, Tensor::vec({1.0, 2.0}), 0.0, 1.0, 0.25, seed);
    CHECK(norm_inf(g.d_z0 - seed) == 0.0);
    CHECK(norm_inf(g.d_theta) == 0.0);

    // a zero *linear* field is still the identity map, but keeps its
    // parameter sensitivity
    DynamicsFunc lin = make_linear(Tensor::zeros({2, 2}));
    GradientBundle gl =
        direct_backprop_rk4(lin, Tensor::vec({1.0, 2.0}), 0.0, 1.0, 0.25, seed);
    CHECK(norm_inf(gl.d_z0 - seed) == 0.0);
  }

  SUBCASE("scalar exponential closed form") {
    DynamicsFunc f = make_linear(Tensor::matrix(1, 1, {0.5}));
    GradientBundle g = direct_backprop_rk4(f, Tensor::vec({1.0}), 0.0, 1.0,
                                           std::pow(2.0, -10), Tensor::vec({1.0}));
    CHECK(std::fabs(g.d_theta[0] - std::exp(0.5)) < 1e-6);
    CHECK(std::fabs(g.d_z0[0] - std::exp(0.5)) < 1e-6);
  }

  SUBCASE("continuous and discrete adjoints agree") {
    RngState rng(33);
    DynamicsFunc f = build_mlp_dynamics(2, {12}, rng);
    Tensor z0 = gaussian_sample(rng, {2}, 0.0, 0.5);
    const double h = std::pow(2.0, -10);
    Trajectory fwd = solve(f, z0, 0.0, 1.0, tight());
    Tensor seed = fwd.final_state() * 2.0;
    GradientBundle cont = backward_gradients(f, fwd.final_state(), 0.0, 1.0, seed, tight());
    GradientBundle disc = direct_backprop_rk4(f, z0, 0.0, 1.0, h, seed);
    for (int i = 0; i < 2; ++i)
      CHECK(close_rel(cont.d_z0[i], disc.d_z0[i], 1e-3, 1e-7));
    for (int i = 0; i < f.param_count(); ++i)
      CHECK(close_rel(cont.d_theta[i], disc.d_theta[i], 1e-3, 1e-7));
  }

  SUBCASE("step must divide the interval") {
    DynamicsFunc f = make_linear(Tensor::matrix(1, 1, {1.0}));
    CHECK_THROWS_AS(
        direct_backprop_rk4(f, Tensor::vec({1.0}), 0.0, 1.0, 0.3, Tensor::vec({1.0})),
        std::invalid_argument);
  }
}

TEST_CASE("reverse pass memory stays flat while NFE grows") {
  RngState rng(61);
  DynamicsFunc f = build_mlp_dynamics(2, {16}, rng);
  Tensor z0 = gaussian_sample(rng, {2}, 0.0, 0.5);
  Trajectory fwd = solve(f, z0, 0.0, 1.0, tight(1e-6));
  Tensor seed = fwd.final_state() * 2.0;

  auto measure = [&](double tol, long& nfe) {
    memstat::reset_peak();
    const long long base = memstat::live_bytes();
    GradientBundle g =
        backward_gradients(f, fwd.final_state(), 0.0, 1.0, seed, tight(tol));
    nfe = g.nfe;
    return memstat::peak_bytes() - base;
  };
  long nfe_loose = 0, nfe_tight = 0;
  const long long peak_loose = measure(1e-5, nfe_loose);
  const long long peak_tight = measure(1e-12, nfe_tight);
  CHECK(nfe_tight > 2 * nfe_loose);
  // adjoint working set is independent of the step count
  CHECK(peak_tight < 2 * peak_loose);

  // the unrolled oracle, by contrast, scales with the step count
  auto measure_direct = [&](double h) {
    memstat::reset_peak();
    const long long base = memstat::live_bytes();
    direct_backprop_rk4(f, z0, 0.0, 1.0, h, seed);
    return memstat::peak_bytes() - base;
  };
  const long long direct_coarse = measure_direct(1.0 / 32);
  const long long direct_fine = measure_direct(1.0 / 1024);
  CHECK(direct_fine > 3 * direct_coarse);
}

TEST_CASE("reversal-consistency warning on a strongly contracting field") {
  DynamicsFunc f = make_linear(Tensor::matrix(1, 1, {-50.0}));
  Tensor z0 = Tensor::vec({1.0});
  SolveConfig loose = tight(1e-3);
  Trajectory fwd = solve(f, z0, 0.0, 1.0, loose);
  GradientBundle g =
      backward_gradients(f, fwd.final_state(), 0.0, 1.0, Tensor::vec({1.0}), loose, &z0);
  CHECK(g.reversal_warning);
}
