#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "experiments.hpp"
#include "odegrad/latent_ode.hpp"
#include "odegrad/metrics.hpp"
#include "odegrad/plot.hpp"

namespace odegrad::cli {

namespace {

struct SpiralRunResult {
  double rmse_latent = 0.0;
  double rmse_rnn = 0.0;
  double rmse_rnn_dt = 0.0;
};

void write_reconstructions(const LatentOdeModel& model, const SpiralDataset& data,
                           const SolveConfig& cfg, int how_many, const std::string& out_dir) {
  std::ofstream os(out_dir + "/reconstructions.csv");
  os << "traj,t,kind,x0,x1\n";
  char buf[160];
  std::vector<Series> series;
  for (int k = 0; k < std::min(how_many, data.trajectory_count()); ++k) {
    EncodeResult enc = encode(model, data.obs[k], data.times[k]);
    std::vector<double> all_times = data.times[k];
    for (double t : data.horizon_times) all_times.push_back(t);
    Tensor pred = decode_trajectory(model, enc.mu, all_times, cfg);
    Series recon, extrap, observed;
    const int n_train = static_cast<int>(data.times[k].size());
    for (size_t i = 0; i < all_times.size(); ++i) {
      const char* kind = static_cast<int>(i) < n_train ? "recon" : "extrap";
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%s,%.17g,%.17g\n", k, all_times[i], kind,
                    pred.at(static_cast<int>(i), 0), pred.at(static_cast<int>(i), 1));
      os << buf;
      if (static_cast<int>(i) < n_train) {
        recon.x.push_back(pred.at(static_cast<int>(i), 0));
        recon.y.push_back(pred.at(static_cast<int>(i), 1));
      } else {
        extrap.x.push_back(pred.at(static_cast<int>(i), 0));
        extrap.y.push_back(pred.at(static_cast<int>(i), 1));
      }
    }
    for (int i = 0; i < n_train; ++i) {
      observed.x.push_back(data.obs[k].at(i, 0));
      observed.y.push_back(data.obs[k].at(i, 1));
      std::snprintf(buf, sizeof(buf), "%d,%.17g,obs,%.17g,%.17g\n", k, data.times[k][i],
                    data.obs[k].at(i, 0), data.obs[k].at(i, 1));
      os << buf;
    }
    if (k == 0) {
      recon.label = "reconstruction";
      extrap.label = "extrapolation";
      observed.label = "observations";
      PlotOptions opts;
      opts.title = "Spiral reconstruction and extrapolation";
      opts.xlabel = "x0";
      opts.ylabel = "x1";
      emit_svg({recon, extrap, observed}, PlotKind::Line,
               out_dir + "/fig_reconstruction.svg", opts);
    }
    (void)series;
  }
}

void write_latent_projection(const LatentOdeModel& model, const SpiralDataset& data,
                             const SolveConfig& cfg, const std::string& out_dir) {
  std::ofstream os(out_dir + "/latent_projection.csv");
  os << "traj,t,z0,z1,label\n";
  char buf[160];
  Series cw, ccw;
  for (int k = 0; k < data.trajectory_count(); ++k) {
    EncodeResult enc = encode(model, data.obs[k], data.times[k]);
    Trajectory traj = solve_at_times(model.dynamics, enc.mu, data.times[k], cfg);
    for (size_t i = 0; i < traj.times.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%d\n", k, traj.times[i],
                    traj.states[i][0], traj.states[i][1], data.clockwise[k]);
      os << buf;
      Series& target = data.clockwise[k] ? cw : ccw;
      target.x.push_back(traj.states[i][0]);
      target.y.push_back(traj.states[i][1]);
    }
  }
  cw.label = "clockwise";
  ccw.label = "counter-clockwise";
  PlotOptions opts;
  opts.title = "Latent trajectories (first two dimensions)";
  opts.xlabel = "z0";
  opts.ylabel = "z1";
  emit_svg({cw, ccw}, PlotKind::Scatter, out_dir + "/fig_latent_projection.svg", opts);
}

}  // namespace

void declare_spirals(ExperimentConfig& cfg) {
  cfg.declare("seed", "");
  cfg.declare("out_dir", "out/spirals");
  cfg.declare("n_traj", "100");
  cfg.declare("n_time", "100");
  cfg.declare("n_obs", "30");  // single value or comma list for a sweep
  cfg.declare("noise_std", "0.1");
  cfg.declare("epochs", "120");
  cfg.declare("batch", "4");
  cfg.declare("lr", "0.01");
  cfg.declare("rtol", "1.5e-8");
  cfg.declare("atol", "1.5e-8");
  cfg.declare("rnn_epochs", "150");
  cfg.declare("rnn_lr", "0.01");
  cfg.declare("plot_trajectories", "3");
  cfg.declare("check_ordering", "true");
}

int cmd_spirals(const ExperimentConfig& cfg) {
  const uint64_t seed = resolve_seed(cfg);
  const std::string out_dir = cfg.get("out_dir");
  ensure_out_dir(out_dir);

  SolveConfig solve_cfg;
  solve_cfg.rtol = cfg.get_double("rtol");
  solve_cfg.atol = cfg.get_double("atol");
  AdamConfig opt;
  opt.lr = cfg.get_double("lr");
  AdamConfig rnn_opt;
  rnn_opt.lr = cfg.get_double("rnn_lr");

  const std::vector<int> n_obs_list = parse_int_list(cfg.get("n_obs"));
  MetricsWriter metrics(out_dir + "/metrics.csv");
  std::ofstream table(out_dir + "/rmse_table.csv");
  table << "model";
  for (int k : n_obs_list) table << "," << k << "/" << cfg.get_int("n_time");
  table << "\n";

  std::map<int, SpiralRunResult> results;
  for (int n_obs : n_obs_list) {
    RngState data_rng(seed);
    SpiralDataset full = generate_spirals(data_rng, cfg.get_int("n_traj"),
                                          cfg.get_int("n_time"), cfg.get_double("noise_std"));
    RngState sub_rng(seed + 1);
    SpiralDataset data =
        n_obs == cfg.get_int("n_time") ? full : subsample(full, sub_rng, n_obs);
    spirals_to_csv(data, out_dir + "/dataset_" + std::to_string(n_obs) + ".csv");

    const std::string tag = "spirals_" + std::to_string(n_obs);
    RngState model_rng(seed + 2);
    LatentOdeModel model = make_latent_ode({}, model_rng);
    RngState train_rng(seed + 3);
    // staged schedule: full rate, then two decayed refinement phases
    const int total_epochs = cfg.get_int("epochs");
    const std::vector<std::pair<double, int>> phases = {
        {1.0, (total_epochs * 11) / 20},
        {0.25, (total_epochs * 6) / 20},
        {0.0625, total_epochs - (total_epochs * 11) / 20 - (total_epochs * 6) / 20}};
    int epoch_base = 0;
    for (const auto& [scale, count] : phases) {
      if (count <= 0) continue;
      AdamConfig phase_opt = opt;
      phase_opt.lr = opt.lr * scale;
      LatentTrainLog log = train_latent_ode(model, data, count, cfg.get_int("batch"),
                                            phase_opt, train_rng, solve_cfg);
      for (const EpochRecord& r : log.records)
        metrics.row(tag + "_latent_ode", epoch_base + r.epoch, -r.elbo, r.nfe_f, r.nfe_b,
                    std::nullopt, std::nullopt);
      epoch_base += count;
    }

    SpiralRunResult run;
    run.rmse_latent = predictive_rmse(model, data, solve_cfg);
    metrics.row(tag + "_latent_ode", cfg.get_int("epochs"), std::nullopt, std::nullopt,
                std::nullopt, run.rmse_latent, std::nullopt);

    RngState rnn_rng(seed + 4);
    RnnPredictor rnn_plain = make_rnn_predictor(2, 25, false, rnn_rng);
    RngState rnn_train(seed + 5);
    LatentTrainLog rnn_log =
        train_rnn_baseline(rnn_plain, data, cfg.get_int("rnn_epochs"), rnn_opt, rnn_train);
    run.rmse_rnn = rnn_predictive_rmse(rnn_plain, data);
    for (const EpochRecord& r : rnn_log.records)
      metrics.row(tag + "_rnn", r.epoch, -r.elbo, std::nullopt, std::nullopt, std::nullopt,
                  std::nullopt);
    metrics.row(tag + "_rnn", cfg.get_int("rnn_epochs"), std::nullopt, std::nullopt,
                std::nullopt, run.rmse_rnn, std::nullopt);

    RngState rnn_dt_rng(seed + 6);
    RnnPredictor rnn_dt = make_rnn_predictor(2, 25, true, rnn_dt_rng);
    RngState rnn_dt_train(seed + 7);
    train_rnn_baseline(rnn_dt, data, cfg.get_int("rnn_epochs"), rnn_opt, rnn_dt_train);
    run.rmse_rnn_dt = rnn_predictive_rmse(rnn_dt, data);
    metrics.row(tag + "_rnn_dt", cfg.get_int("rnn_epochs"), std::nullopt, std::nullopt,
                std::nullopt, run.rmse_rnn_dt, std::nullopt);

    std::cout << tag << ": latent ODE RMSE " << run.rmse_latent << ", RNN RMSE "
              << run.rmse_rnn << ", RNN(dt) RMSE " << run.rmse_rnn_dt << "\n";
    results[n_obs] = run;

    if (n_obs == n_obs_list.front()) {
      write_reconstructions(model, data, solve_cfg, cfg.get_int("plot_trajectories"),
                            out_dir);
      write_latent_projection(model, data, solve_cfg, out_dir);
    }
  }

  table << "rnn";
  for (int k : n_obs_list) table << "," << results[k].rmse_rnn;
  table << "\nrnn_dt";
  for (int k : n_obs_list) table << "," << results[k].rmse_rnn_dt;
  table << "\nlatent_ode";
  for (int k : n_obs_list) table << "," << results[k].rmse_latent;
  table << "\n";

  int status = 0;
  if (cfg.get_bool("check_ordering")) {
    const int first = n_obs_list.front();
    if (results[first].rmse_latent >= results[first].rmse_rnn) {
      std::cout << "spirals FAILURE: latent ODE RMSE " << results[first].rmse_latent
                << " not below RNN RMSE " << results[first].rmse_rnn << " at n_obs "
                << first << "\n";
      status = 1;
    }
    double prev = -1.0;
    for (int k : n_obs_list) {
      if (prev >= 0.0 && results[k].rmse_latent > prev) {
        std::cout << "spirals FAILURE: latent ODE RMSE increased from " << prev << " to "
                  << results[k].rmse_latent << " at n_obs " << k << "\n";
        status = 1;
      }
      prev = results[k].rmse_latent;
    }
  }
  return status;
}

}  // namespace odegrad::cli
