#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "experiments.hpp"
#include "odegrad/latent_ode.hpp"
#include "odegrad/metrics.hpp"
#include "odegrad/plot.hpp"

namespace odegrad::cli {

namespace {

std::vector<double> homogeneous_events(RngState& rng, double rate, double t_end) {
  std::vector<double> events;
  double t = 0.0;
  while (true) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    t += -std::log(u) / rate;
    if (t >= t_end) break;
    events.push_back(t);
  }
  return events;
}

// sinusoidal intensity, two cycles over the window, sampled by thinning
std::vector<double> sinusoidal_events(RngState& rng, double mean_rate, double t_end,
                                      std::vector<double>* true_rate_grid) {
  auto lambda = [&](double t) {
    return mean_rate * (1.0 + std::sin(4.0 * M_PI * t / t_end));
  };
  const double lambda_max = 2.0 * mean_rate;
  std::vector<double> events;
  double t = 0.0;
  while (true) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    t += -std::log(u) / lambda_max;
    if (t >= t_end) break;
    if (rng.uniform() * lambda_max <= lambda(t)) events.push_back(t);
  }
  if (true_rate_grid)
    for (size_t i = 0; i < true_rate_grid->size(); ++i)
      (*true_rate_grid)[i] = lambda(t_end * static_cast<double>(i) /
                                    (static_cast<double>(true_rate_grid->size()) - 1));
  return events;
}

}  // namespace

void declare_poisson(ExperimentConfig& cfg) {
  cfg.declare("seed", "");
  cfg.declare("out_dir", "out/poisson");
  cfg.declare("mode", "sin");  // sin | homogeneous | empty
  cfg.declare("rate", "5.0");
  cfg.declare("t_end", "10.0");
  cfg.declare("iters", "400");
  cfg.declare("lr", "0.02");
  cfg.declare("hidden", "16");
  cfg.declare("latent_dim", "2");
  cfg.declare("rtol", "1e-6");
  cfg.declare("atol", "1e-6");
  cfg.declare("rate_tolerance", "0.2");
  cfg.declare("curve_points", "201");
}

int cmd_poisson(const ExperimentConfig& cfg) {
  const uint64_t seed = resolve_seed(cfg);
  const std::string out_dir = cfg.get("out_dir");
  ensure_out_dir(out_dir);
  const std::string mode = cfg.get("mode");
  if (mode != "sin" && mode != "homogeneous" && mode != "empty")
    throw std::invalid_argument("poisson: mode must be sin, homogeneous or empty");

  const double t_end = cfg.get_double("t_end");
  const double target_rate = cfg.get_double("rate");
  const int curve_n = cfg.get_int("curve_points");

  RngState event_rng(seed);
  std::vector<double> true_curve(curve_n, target_rate);
  std::vector<double> events;
  if (mode == "homogeneous") {
    events = homogeneous_events(event_rng, target_rate, t_end);
  } else if (mode == "sin") {
    events = sinusoidal_events(event_rng, target_rate, t_end, &true_curve);
  }
  std::cout << "poisson: " << events.size() << " events on [0, " << t_end << "]"
            << (mode != "empty"
                    ? " (empirical rate " + std::to_string(events.size() / t_end) + ")"
                    : "")
            << "\n";

  SolveConfig solve_cfg;
  solve_cfg.rtol = cfg.get_double("rtol");
  solve_cfg.atol = cfg.get_double("atol");

  RngState init_rng(seed + 1);
  const int latent = cfg.get_int("latent_dim");
  DynamicsFunc dynamics =
      build_mlp_dynamics(latent, {cfg.get_int("hidden")}, init_rng, false);
  PoissonRateModel rate(latent, cfg.get_int("hidden"), init_rng);
  Tensor z0 = gaussian_sample(init_rng, {latent}, 0.0, 0.1);

  AdamConfig opt;
  opt.lr = cfg.get_double("lr");
  Tensor dyn_theta = dynamics.params();
  Tensor rate_theta = rate.params();
  AdamState s_dyn = adam_init(opt, dyn_theta);
  AdamState s_rate = adam_init(opt, rate_theta);
  AdamState s_z0 = adam_init(opt, z0);

  MetricsWriter metrics(out_dir + "/metrics.csv");
  const int iters = cfg.get_int("iters");
  double loglik = 0.0;
  for (int it = 0; it < iters; ++it) {
    PoissonGrads g;
    loglik = poisson_loglik(rate, dynamics, z0, events, 0.0, t_end, solve_cfg, &g);
    if (!std::isfinite(loglik))
      throw DivergenceError("poisson fit diverged at iteration " + std::to_string(it));
    // ascend the log-likelihood
    g.d_dynamics *= -1.0;
    g.d_rate *= -1.0;
    g.d_z0 *= -1.0;
    std::tie(s_dyn, dyn_theta) = adam_step(std::move(s_dyn), std::move(dyn_theta),
                                           g.d_dynamics);
    std::tie(s_rate, rate_theta) =
        adam_step(std::move(s_rate), std::move(rate_theta), g.d_rate);
    std::tie(s_z0, z0) = adam_step(std::move(s_z0), std::move(z0), g.d_z0);
    dynamics.set_params(dyn_theta);
    rate.set_params(rate_theta);
    metrics.row("poisson_" + mode, it, -loglik, std::nullopt, std::nullopt, std::nullopt,
                std::nullopt);
  }

  // fitted intensity over a dense grid
  std::vector<double> grid(curve_n);
  for (int i = 0; i < curve_n; ++i) grid[i] = t_end * static_cast<double>(i) / (curve_n - 1);
  Trajectory latent_traj = solve_at_times(dynamics, z0, grid, solve_cfg);
  std::vector<double> fitted(curve_n);
  double mean_rate = 0.0;
  for (int i = 0; i < curve_n; ++i) {
    fitted[i] = rate.rate(latent_traj.states[i]);
    if (i > 0)
      mean_rate += 0.5 * (fitted[i] + fitted[i - 1]) * (grid[i] - grid[i - 1]) / t_end;
  }

  {
    std::ofstream os(out_dir + "/intensity.csv");
    os << "t,lambda_fit,lambda_true\n";
    char buf[128];
    for (int i = 0; i < curve_n; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", grid[i], fitted[i],
                    mode == "empty" ? 0.0 : true_curve[i]);
      os << buf;
    }
    Series fit{"fitted intensity", grid, fitted, {}};
    std::vector<Series> series = {fit};
    if (mode == "sin") series.push_back({"true intensity", grid, true_curve, {}});
    Series rug;
    rug.label = "events";
    for (double e : events) {
      rug.x.push_back(e);
      rug.y.push_back(0.0);
    }
    if (!rug.x.empty()) series.push_back(rug);
    PlotOptions opts;
    opts.title = "Event intensity";
    opts.xlabel = "t";
    opts.ylabel = "lambda(t)";
    emit_svg(series, PlotKind::Line, out_dir + "/fig_intensity.svg", opts);
  }

  std::cout << "poisson: final log-likelihood " << loglik << ", fitted mean rate "
            << mean_rate << "\n";
  metrics.row("poisson_" + mode, iters, -loglik, std::nullopt, std::nullopt, mean_rate,
              std::nullopt);

  if (mode == "homogeneous") {
    const double rel = std::fabs(mean_rate - target_rate) / target_rate;
    if (rel > cfg.get_double("rate_tolerance")) {
      std::cout << "poisson FAILURE: fitted mean rate " << mean_rate << " deviates "
                << rel * 100 << "% from " << target_rate << "\n";
      return 1;
    }
  }
  if (mode == "empty" && mean_rate >= 0.1) {
    std::cout << "poisson FAILURE: empty event set should drive the mean rate below 0.1, "
                 "got "
              << mean_rate << "\n";
    return 1;
  }
  return 0;
}

}  // namespace odegrad::cli
