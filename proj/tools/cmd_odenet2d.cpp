#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "experiments.hpp"
#include "odegrad/adjoint.hpp"
#include "odegrad/cnf.hpp"
#include "odegrad/metrics.hpp"
#include "odegrad/optim.hpp"
#include "odegrad/plot.hpp"
#include "odegrad/solver.hpp"

namespace odegrad::cli {

namespace {

struct OdeClassifier {
  DynamicsFunc dynamics;  // 2-D state, time-dependent
  Tensor head;            // W (2x2) row-major + b (2)
};

Tensor head_logits(const OdeClassifier& model, const Tensor& z) {
  Tensor out({2});
  for (int j = 0; j < 2; ++j)
    out[j] = model.head[j * 2] * z[0] + model.head[j * 2 + 1] * z[1] + model.head[4 + j];
  return out;
}

// returns loss; fills dlogits
double cross_entropy(const Tensor& logits, int label, Tensor* dlogits) {
  const double m = std::max(logits[0], logits[1]);
  const double z = std::exp(logits[0] - m) + std::exp(logits[1] - m);
  const double logp = logits[label] - m - std::log(z);
  if (dlogits) {
    for (int j = 0; j < 2; ++j) {
      const double p = std::exp(logits[j] - m) / z;
      (*dlogits)[j] = p - (j == label ? 1.0 : 0.0);
    }
  }
  return -logp;
}

Tensor batch_states(const Tensor& pts, const std::vector<int>& idx) {
  Tensor out({static_cast<int>(idx.size()) * 2});
  for (size_t i = 0; i < idx.size(); ++i) {
    out[2 * i] = pts.at(idx[i], 0);
    out[2 * i + 1] = pts.at(idx[i], 1);
  }
  return out;
}

double accuracy_of(const OdeClassifier& model, const Tensor& pts,
                   const std::vector<int>& labels, const SolveConfig& cfg) {
  BatchedSystem batched(model.dynamics, pts.rows());
  std::vector<int> all(pts.rows());
  for (int i = 0; i < pts.rows(); ++i) all[i] = i;
  Trajectory traj = solve(batched, batch_states(pts, all), 0.0, 1.0, cfg);
  int correct = 0;
  for (int i = 0; i < pts.rows(); ++i) {
    Tensor z = Tensor::vec({traj.final_state()[2 * i], traj.final_state()[2 * i + 1]});
    Tensor logits = head_logits(model, z);
    const int pred = logits[1] > logits[0] ? 1 : 0;
    if (pred == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / pts.rows();
}

}  // namespace

void declare_odenet2d(ExperimentConfig& cfg) {
  cfg.declare("seed", "");
  cfg.declare("out_dir", "out/odenet2d");
  cfg.declare("iters", "1500");
  cfg.declare("batch", "64");
  cfg.declare("hidden", "48");
  cfg.declare("train_n", "512");
  cfg.declare("test_n", "256");
  cfg.declare("lr", "0.01");
  cfg.declare("rtol", "1e-3");
  cfg.declare("atol", "1e-3");
  cfg.declare("min_accuracy", "0.95");
  cfg.declare("sweep_points", "128");
}

int cmd_odenet2d(const ExperimentConfig& cfg) {
  const uint64_t seed = resolve_seed(cfg);
  RngState rng(seed);
  const std::string out_dir = cfg.get("out_dir");
  ensure_out_dir(out_dir);

  SolveConfig solve_cfg;
  solve_cfg.rtol = cfg.get_double("rtol");
  solve_cfg.atol = cfg.get_double("atol");

  auto [train_pts, train_labels] = make_two_circles_labeled(rng, cfg.get_int("train_n"));
  auto [test_pts, test_labels] = make_two_circles_labeled(rng, cfg.get_int("test_n"));

  OdeClassifier model;
  model.dynamics = build_mlp_dynamics(2, {cfg.get_int("hidden")}, rng, true);
  model.head = Tensor({6});
  for (int i = 0; i < 6; ++i) model.head[i] = rng.uniform(-0.5, 0.5);

  AdamConfig opt;
  opt.lr = cfg.get_double("lr");
  Tensor dyn_theta = model.dynamics.params();
  AdamState s_dyn = adam_init(opt, dyn_theta);
  AdamState s_head = adam_init(opt, model.head);

  const int iters = cfg.get_int("iters");
  const int batch = cfg.get_int("batch");
  const int n = train_pts.rows();

  MetricsWriter metrics(out_dir + "/metrics.csv");
  std::vector<double> it_axis, loss_hist, nfe_f_hist, nfe_b_hist, elapsed_hist;

  for (int it = 0; it < iters; ++it) {
    const auto wall_start = std::chrono::steady_clock::now();
    std::vector<int> idx(batch);
    for (int k = 0; k < batch; ++k) idx[k] = rng.uniform_int(n);

    BatchedSystem batched(model.dynamics, batch);
    Trajectory traj = solve(batched, batch_states(train_pts, idx), 0.0, 1.0, solve_cfg);

    double loss = 0.0;
    Tensor head_grad({6});
    Tensor seed_vec({2 * batch});
    for (int k = 0; k < batch; ++k) {
      Tensor z = Tensor::vec({traj.final_state()[2 * k], traj.final_state()[2 * k + 1]});
      Tensor logits = head_logits(model, z);
      Tensor dl({2});
      loss += cross_entropy(logits, train_labels[idx[k]], &dl) / batch;
      for (int j = 0; j < 2; ++j) {
        head_grad[j * 2] += dl[j] * z[0] / batch;
        head_grad[j * 2 + 1] += dl[j] * z[1] / batch;
        head_grad[4 + j] += dl[j] / batch;
        seed_vec[2 * k] += model.head[j * 2] * dl[j] / batch;
        seed_vec[2 * k + 1] += model.head[j * 2 + 1] * dl[j] / batch;
      }
    }
    if (!std::isfinite(loss))
      throw DivergenceError("odenet2d training diverged at iteration " +
                            std::to_string(it));

    GradientBundle g =
        backward_gradients(batched, traj.final_state(), 0.0, 1.0, seed_vec, solve_cfg);
    std::tie(s_dyn, dyn_theta) = adam_step(std::move(s_dyn), std::move(dyn_theta), g.d_theta);
    std::tie(s_head, model.head) =
        adam_step(std::move(s_head), std::move(model.head), head_grad);
    model.dynamics.set_params(dyn_theta);

    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  wall_start)
            .count();
    metrics.row("odenet2d", it, loss, traj.nfe, g.nfe, std::nullopt, std::nullopt);
    it_axis.push_back(it);
    loss_hist.push_back(loss);
    nfe_f_hist.push_back(static_cast<double>(traj.nfe));
    nfe_b_hist.push_back(static_cast<double>(g.nfe));
    elapsed_hist.push_back(elapsed_ms);
  }

  const double train_acc = accuracy_of(model, train_pts, train_labels, solve_cfg);
  const double test_acc = accuracy_of(model, test_pts, test_labels, solve_cfg);
  std::cout << "odenet2d: train accuracy " << train_acc << ", held-out accuracy "
            << test_acc << "\n";

  // tolerance sweep against a high-accuracy reference
  const int sweep_n = std::min(cfg.get_int("sweep_points"), test_pts.rows());
  std::vector<int> sweep_idx(sweep_n);
  for (int i = 0; i < sweep_n; ++i) sweep_idx[i] = i;
  BatchedSystem sweep_sys(model.dynamics, sweep_n);
  Tensor sweep_z0 = batch_states(test_pts, sweep_idx);
  SolveConfig ref_cfg = solve_cfg;
  ref_cfg.rtol = ref_cfg.atol = 1e-13;
  Trajectory ref = solve(sweep_sys, sweep_z0, 0.0, 1.0, ref_cfg);

  std::ofstream sweep_csv(out_dir + "/tolerance_sweep.csv");
  sweep_csv << "rtol,mean_rel_error,nfe\n";
  std::vector<double> sweep_tols, sweep_errs, sweep_nfes;
  double prev_err = 1e300;
  bool monotone = true;
  for (double tol : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7}) {
    SolveConfig c = solve_cfg;
    c.rtol = c.atol = tol;
    Trajectory got = solve(sweep_sys, sweep_z0, 0.0, 1.0, c);
    double err = 0.0;
    for (int i = 0; i < sweep_n; ++i) {
      const double dx = got.final_state()[2 * i] - ref.final_state()[2 * i];
      const double dy = got.final_state()[2 * i + 1] - ref.final_state()[2 * i + 1];
      const double scale = std::hypot(ref.final_state()[2 * i], ref.final_state()[2 * i + 1]);
      err += std::hypot(dx, dy) / std::max(scale, 1e-12);
    }
    err /= sweep_n;
    if (err > prev_err) monotone = false;
    prev_err = err;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.1e,%.12g,%ld\n", tol, err, got.nfe);
    sweep_csv << buf;
    sweep_tols.push_back(tol);
    sweep_errs.push_back(std::max(err, 1e-18));
    sweep_nfes.push_back(static_cast<double>(got.nfe));
  }

  PlotOptions err_opts;
  err_opts.title = "Solution error vs tolerance";
  err_opts.xlabel = "rtol";
  err_opts.ylabel = "mean relative error";
  err_opts.logx = err_opts.logy = true;
  emit_svg({{"error", sweep_tols, sweep_errs, {}}}, PlotKind::Line,
           out_dir + "/fig_error_vs_tolerance.svg", err_opts);

  PlotOptions time_opts;
  time_opts.title = "Wall time per iteration vs forward NFE";
  time_opts.xlabel = "nfe_forward";
  time_opts.ylabel = "elapsed ms";
  emit_svg({{"iterations", nfe_f_hist, elapsed_hist, {}}}, PlotKind::Scatter,
           out_dir + "/fig_time_vs_nfe.svg", time_opts);

  PlotOptions fb_opts;
  fb_opts.title = "Backward vs forward NFE";
  fb_opts.xlabel = "nfe_forward";
  fb_opts.ylabel = "nfe_backward";
  emit_svg({{"iterations", nfe_f_hist, nfe_b_hist, {}}}, PlotKind::Scatter,
           out_dir + "/fig_nfe_backward_vs_forward.svg", fb_opts);

  PlotOptions depth_opts;
  depth_opts.title = "Forward NFE over training";
  depth_opts.xlabel = "iteration";
  depth_opts.ylabel = "nfe_forward";
  emit_svg({{"nfe", it_axis, nfe_f_hist, {}}}, PlotKind::Line,
           out_dir + "/fig_nfe_over_training.svg", depth_opts);

  std::ofstream report(out_dir + "/report.txt");
  report << "train_accuracy " << train_acc << "\n"
         << "test_accuracy " << test_acc << "\n"
         << "tolerance_sweep_monotone " << (monotone ? 1 : 0) << "\n";

  if (!monotone) {
    std::cout << "odenet2d FAILURE: error vs tolerance is not non-increasing\n";
    return 1;
  }
  if (test_acc < cfg.get_double("min_accuracy")) {
    std::cout << "odenet2d FAILURE: held-out accuracy " << test_acc << " below "
              << cfg.get_double("min_accuracy") << "\n";
    return 1;
  }
  return 0;
}

}  // namespace odegrad::cli
