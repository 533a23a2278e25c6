#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "experiments.hpp"
#include "odegrad/adjoint.hpp"
#include "odegrad/dynamics.hpp"
#include "odegrad/metrics.hpp"
#include "odegrad/solver.hpp"

namespace odegrad::cli {

namespace {

// Multiplies one vjp component by a constant factor; the check suite must
// catch the discrepancy and name the corrupted path.
class FaultySystem : public DiffSystem {
 public:
  FaultySystem(const DiffSystem& base, const std::string& mode)
      : base_(&base), mode_(mode) {}
  int state_dim() const override { return base_->state_dim(); }
  int param_count() const override { return base_->param_count(); }
  Tensor eval(const Tensor& z, double t) const override { return base_->eval(z, t); }
  VjpResult vjp(const Tensor& z, double t, const Tensor& a) const override {
    VjpResult r = base_->vjp(z, t, a);
    if (mode_ == "vjp_theta") r.vjp_theta *= 1.05;
    if (mode_ == "vjp_z") r.vjp_z *= 1.05;
    if (mode_ == "vjp_t") r.vjp_t *= 1.05;
    return r;
  }

 private:
  const DiffSystem* base_;
  std::string mode_;
};

struct CheckStats {
  long checked = 0;
  long failed = 0;
  double worst_rel = 0.0;
  std::string worst_name;
};

double loss_of(const DiffSystem& sys, const Tensor& z0, double t0, double t1,
               const SolveConfig& cfg) {
  Trajectory traj = solve(sys, z0, t0, t1, cfg);
  return dot(traj.final_state(), traj.final_state());
}

}  // namespace

void declare_gradcheck(ExperimentConfig& cfg) {
  cfg.declare("seed", "");
  cfg.declare("out_dir", "out/gradcheck");
  cfg.declare("rtol", "1e-10");
  cfg.declare("atol", "1e-10");
  cfg.declare("configs_per_arch", "20");
  cfg.declare("fd_eps", "1e-5");
  cfg.declare("tol_rel", "1e-4");
  cfg.declare("tol_abs", "1e-7");
  cfg.declare("t0", "0");
  cfg.declare("t1", "0.8");
  cfg.declare("inject_fault", "none");
  cfg.declare("direct_rk4_steps", "1024");
}

int cmd_gradcheck(const ExperimentConfig& cfg) {
  const uint64_t seed = resolve_seed(cfg);
  RngState rng(seed);
  const std::string out_dir = cfg.get("out_dir");
  ensure_out_dir(out_dir);

  SolveConfig solve_cfg;
  solve_cfg.rtol = cfg.get_double("rtol");
  solve_cfg.atol = cfg.get_double("atol");
  const double t0 = cfg.get_double("t0");
  const double t1 = cfg.get_double("t1");
  const double fd_eps = cfg.get_double("fd_eps");
  const double tol_rel = cfg.get_double("tol_rel");
  const double tol_abs = cfg.get_double("tol_abs");
  const int per_arch = cfg.get_int("configs_per_arch");
  const std::string fault = cfg.get("inject_fault");

  std::ofstream csv(out_dir + "/gradcheck.csv");
  csv << "arch,config,component,adjoint,finite_difference,rel_err,pass\n";
  MetricsWriter metrics(out_dir + "/metrics.csv");

  CheckStats stats;
  std::string first_failure;
  char buf[256];

  auto check_component = [&](const std::string& arch, int config,
                             const std::string& component, double got, double want) {
    const double rel =
        std::fabs(got - want) / std::max(std::fabs(want), tol_abs / tol_rel);
    const bool pass = std::fabs(got - want) <= tol_abs + tol_rel * std::fabs(want);
    ++stats.checked;
    if (!pass) {
      ++stats.failed;
      if (first_failure.empty())
        first_failure = arch + " config " + std::to_string(config) + " component " +
                        component;
    }
    if (rel > stats.worst_rel) {
      stats.worst_rel = rel;
      stats.worst_name = arch + "/" + component;
    }
    std::snprintf(buf, sizeof(buf), "%s,%d,%s,%.12g,%.12g,%.3g,%d\n", arch.c_str(),
                  config, component.c_str(), got, want, rel, pass ? 1 : 0);
    csv << buf;
  };

  auto run_arch = [&](const std::string& name, DynamicsFunc f, int config) {
    const int d = f.state_dim();
    Tensor z0 = gaussian_sample(rng, {d}, 0.0, 0.6);
    const FaultySystem faulty(f, fault);
    const DiffSystem& sys = fault == "none" ? static_cast<const DiffSystem&>(f)
                                            : static_cast<const DiffSystem&>(faulty);

    Trajectory fwd = solve(sys, z0, t0, t1, solve_cfg);
    Tensor seed_vec = fwd.final_state() * 2.0;
    GradientBundle g =
        backward_gradients(sys, fwd.final_state(), t0, t1, seed_vec, solve_cfg, &z0);

    for (int i = 0; i < d; ++i) {
      Tensor zp = z0, zm = z0;
      zp[i] += fd_eps;
      zm[i] -= fd_eps;
      const double fd = (loss_of(sys, zp, t0, t1, solve_cfg) -
                         loss_of(sys, zm, t0, t1, solve_cfg)) /
                        (2 * fd_eps);
      check_component(name, config, "dL_dz0[" + std::to_string(i) + "] (vjp_z path)", g.d_z0[i], fd);
    }
    Tensor theta = f.params();
    DynamicsFunc probe = f;
    for (int i = 0; i < theta.size(); ++i) {
      Tensor tp = theta, tm = theta;
      tp[i] += fd_eps;
      tm[i] -= fd_eps;
      probe.set_params(tp);
      const FaultySystem fp(probe, fault);
      const DiffSystem& sp = fault == "none" ? static_cast<const DiffSystem&>(probe)
                                             : static_cast<const DiffSystem&>(fp);
      const double hi = loss_of(sp, z0, t0, t1, solve_cfg);
      probe.set_params(tm);
      const FaultySystem fm(probe, fault);
      const DiffSystem& sm = fault == "none" ? static_cast<const DiffSystem&>(probe)
                                             : static_cast<const DiffSystem&>(fm);
      const double lo = loss_of(sm, z0, t0, t1, solve_cfg);
      check_component(name, config, "dL_dtheta[" + std::to_string(i) + "] (vjp_theta path)",
                      g.d_theta[i], (hi - lo) / (2 * fd_eps));
    }
    {
      const double hi = loss_of(sys, z0, t0 + fd_eps, t1, solve_cfg);
      const double lo = loss_of(sys, z0, t0 - fd_eps, t1, solve_cfg);
      check_component(name, config, "dL_dt0 (vjp_t path)", g.d_t0, (hi - lo) / (2 * fd_eps));
    }
    {
      Trajectory hi_t = solve(sys, z0, t0, t1 + fd_eps, solve_cfg);
      Trajectory lo_t = solve(sys, z0, t0, t1 - fd_eps, solve_cfg);
      const double hi = dot(hi_t.final_state(), hi_t.final_state());
      const double lo = dot(lo_t.final_state(), lo_t.final_state());
      check_component(name, config, "dL_dt1 (vjp_t path)", g.d_t1, (hi - lo) / (2 * fd_eps));
    }
  };

  for (int c = 0; c < per_arch; ++c) {
    run_arch("linear", make_linear(gaussian_sample(rng, {2, 2}, 0.0, 0.6)), c);
    run_arch("mlp", build_mlp_dynamics(2, {20}, rng, true), c);
    run_arch("planar", build_planar(2, rng), c);
    run_arch("gated_planar_sum", build_gated_planar(2, 4, rng), c);
    run_arch("hamiltonian_split", build_hamiltonian(4, 8, rng), c);
  }

  // continuous vs discrete reverse pass on MLP dynamics
  {
    DynamicsFunc f = build_mlp_dynamics(2, {20}, rng, true);
    Tensor z0 = gaussian_sample(rng, {2}, 0.0, 0.6);
    Trajectory fwd = solve(f, z0, t0, t1, solve_cfg);
    Tensor seed_vec = fwd.final_state() * 2.0;
    GradientBundle cont =
        backward_gradients(f, fwd.final_state(), t0, t1, seed_vec, solve_cfg);
    const double h = (t1 - t0) / cfg.get_double("direct_rk4_steps");
    GradientBundle disc = direct_backprop_rk4(f, z0, t0, t1, h, seed_vec);
    for (int i = 0; i < f.param_count(); ++i)
      check_component("mlp_vs_direct_rk4", 0,
                      "dL_dtheta[" + std::to_string(i) + "] (vjp_theta path)",
                      cont.d_theta[i], disc.d_theta[i]);
    for (int i = 0; i < 2; ++i)
      check_component("mlp_vs_direct_rk4", 0, "dL_dz0[" + std::to_string(i) + "] (vjp_z path)",
                      cont.d_z0[i], disc.d_z0[i]);
  }

  metrics.row("gradcheck", 0, stats.worst_rel, std::nullopt, std::nullopt, std::nullopt,
              std::nullopt);
  std::cout << "gradcheck: " << stats.checked << " components checked, " << stats.failed
            << " failed; worst relative error " << stats.worst_rel << " ("
            << stats.worst_name << ")\n";
  if (stats.failed > 0) {
    std::cout << "gradcheck FAILURE: " << first_failure;
    if (fault != "none") std::cout << " [fault injected: " << fault << "]";
    std::cout << "\n";
    return 1;
  }
  return 0;
}

}  // namespace odegrad::cli
