#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "experiments.hpp"
#include "odegrad/cnf.hpp"
#include "odegrad/metrics.hpp"
#include "odegrad/plot.hpp"

namespace odegrad::cli {

namespace {

void write_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream os(path);
  os << "iter,loss,nfe_forward,nfe_backward\n";
  char buf[128];
  for (const TrainRecord& r : log.records) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%ld,%ld\n", r.iter, r.loss, r.nfe_f,
                  r.nfe_b);
    os << buf;
  }
}

void write_density_grid(const CnfModel& model, const SolveConfig& cfg, int grid_n,
                        double extent, const std::string& csv_path,
                        const std::string& svg_path, const std::string& title) {
  Tensor pts({grid_n * grid_n, 2});
  for (int iy = 0; iy < grid_n; ++iy)
    for (int ix = 0; ix < grid_n; ++ix) {
      pts.at(iy * grid_n + ix, 0) = -extent + 2.0 * extent * ix / (grid_n - 1);
      pts.at(iy * grid_n + ix, 1) = -extent + 2.0 * extent * iy / (grid_n - 1);
    }
  Tensor logq = log_density(model, pts, cfg);
  std::ofstream os(csv_path);
  os << "x,y,logq\n";
  char buf[128];
  Series heat;
  for (int i = 0; i < pts.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", pts.at(i, 0), pts.at(i, 1),
                  logq[i]);
    os << buf;
    heat.x.push_back(pts.at(i, 0));
    heat.y.push_back(pts.at(i, 1));
    heat.v.push_back(std::exp(logq[i]));
  }
  PlotOptions opts;
  opts.title = title;
  opts.xlabel = "x";
  opts.ylabel = "y";
  emit_svg({heat}, PlotKind::Heatmap, svg_path, opts);
}

double fresh_kl_estimate(const CnfModel& model, const Dataset2D& target,
                         const SolveConfig& cfg, uint64_t seed, int n) {
  RngState rng(seed);
  return kl_density_matching_loss(model, target, rng, n, cfg);
}

}  // namespace

void declare_cnf(ExperimentConfig& cfg) {
  cfg.declare("seed", "");
  cfg.declare("out_dir", "out/cnf");
  cfg.declare("task", "density");  // density | mle
  cfg.declare("dataset", "gaussian_mixture");
  cfg.declare("m", "8");
  cfg.declare("iters", "800");
  cfg.declare("batch", "64");
  cfg.declare("lr", "0.02");
  cfg.declare("rtol", "1e-5");
  cfg.declare("atol", "1e-5");
  cfg.declare("sweep", "false");
  cfg.declare("m_list", "2,8,32");
  cfg.declare("nf_baseline", "false");
  cfg.declare("k_list", "2,8,32");
  cfg.declare("nf_iters", "4000");
  cfg.declare("nf_lr", "1e-3");
  cfg.declare("grid_n", "41");
  cfg.declare("grid_extent", "4.0");
  cfg.declare("sample_n", "1000");
  cfg.declare("eval_n", "2048");
  cfg.declare("roundtrip_tol", "1e-4");
  cfg.declare("mle_min_improvement", "0.5");
}

int cmd_cnf(const ExperimentConfig& cfg) {
  const uint64_t seed = resolve_seed(cfg);
  const std::string out_dir = cfg.get("out_dir");
  ensure_out_dir(out_dir);
  const std::string task_name = cfg.get("task");
  if (task_name != "density" && task_name != "mle")
    throw std::invalid_argument("cnf: task must be density or mle");
  const CnfTask task =
      task_name == "density" ? CnfTask::DensityMatching : CnfTask::Mle;
  Dataset2D data = make_dataset_spec(cfg.get("dataset"));

  SolveConfig solve_cfg;
  solve_cfg.rtol = cfg.get_double("rtol");
  solve_cfg.atol = cfg.get_double("atol");
  AdamConfig opt;
  opt.lr = cfg.get_double("lr");
  const int iters = cfg.get_int("iters");
  const int batch = cfg.get_int("batch");

  MetricsWriter metrics(out_dir + "/metrics.csv");

  auto train_one = [&](int m, const std::string& tag) {
    RngState init_rng(seed);
    RngState train_rng(seed + 1);
    CnfModel model;
    model.dynamics = build_gated_planar(2, m, init_rng);
    TrainLog log = train_cnf(model, task, data, iters, batch, opt, train_rng, solve_cfg);
    for (const TrainRecord& r : log.records)
      metrics.row(tag, r.iter, r.loss, r.nfe_f, r.nfe_b, std::nullopt, std::nullopt);
    write_train_log(log, out_dir + "/train_" + tag + ".csv");
    return std::make_pair(std::move(model), std::move(log));
  };

  if (cfg.get_bool("sweep")) {
    if (task != CnfTask::DensityMatching)
      throw std::invalid_argument("cnf: sweep mode covers the density task only");
    std::ofstream table(out_dir + "/width_depth_table.csv");
    table << "model,size,final_loss\n";
    std::vector<double> ms, losses;
    double prev = 1e300;
    bool ordered = true;
    for (int m : parse_int_list(cfg.get("m_list"))) {
      auto [model, log] = train_one(m, "cnf_m" + std::to_string(m));
      const double final_loss =
          fresh_kl_estimate(model, data, solve_cfg, seed + 99, cfg.get_int("eval_n"));
      table << "cnf," << m << "," << final_loss << "\n";
      std::cout << "cnf sweep: M=" << m << " final KL estimate " << final_loss << "\n";
      if (final_loss > prev) ordered = false;
      prev = final_loss;
      ms.push_back(m);
      losses.push_back(final_loss);
    }
    if (cfg.get_bool("nf_baseline")) {
      RmsPropConfig nf_opt;
      nf_opt.lr = cfg.get_double("nf_lr");
      for (int k : parse_int_list(cfg.get("k_list"))) {
        RngState init_rng(seed);
        RngState train_rng(seed + 1);
        PlanarNf nf(2, k, init_rng);
        TrainLog log =
            train_planar_nf(nf, data, cfg.get_int("nf_iters"), batch, nf_opt, train_rng);
        RngState eval_rng(seed + 99);
        Tensor eps = gaussian_sample(eval_rng, {cfg.get_int("eval_n"), 2}, 0.0, 1.0);
        const double final_loss = nf.kl_loss(data, eps);
        table << "nf," << k << "," << final_loss << "\n";
        std::cout << "nf sweep: K=" << k << " final KL estimate " << final_loss << "\n";
        for (const TrainRecord& r : log.records)
          metrics.row("nf_k" + std::to_string(k), r.iter, r.loss, std::nullopt,
                      std::nullopt, std::nullopt, std::nullopt);
      }
    }
    PlotOptions opts;
    opts.title = "Density-matching loss vs width";
    opts.xlabel = "M";
    opts.ylabel = "final KL estimate";
    emit_svg({{"cnf", ms, losses, {}}}, PlotKind::Line, out_dir + "/fig_loss_vs_width.svg",
             opts);
    if (!ordered) {
      std::cout << "cnf FAILURE: final loss is not non-increasing in M\n";
      return 1;
    }
    return 0;
  }

  const int m = cfg.get_int("m");
  auto [model, log] = train_one(m, "cnf_" + task_name + "_m" + std::to_string(m));

  // sample scatter
  RngState sample_rng(seed + 7);
  SampleResult samples = forward_sample(model, sample_rng, cfg.get_int("sample_n"),
                                        solve_cfg);
  {
    std::ofstream os(out_dir + "/samples.csv");
    os << "x,y,logq\n";
    char buf[128];
    Series sc;
    for (int i = 0; i < samples.samples.rows(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", samples.samples.at(i, 0),
                    samples.samples.at(i, 1), samples.logq[i]);
      os << buf;
      sc.x.push_back(samples.samples.at(i, 0));
      sc.y.push_back(samples.samples.at(i, 1));
    }
    PlotOptions opts;
    opts.title = "Model samples";
    opts.xlabel = "x";
    opts.ylabel = "y";
    emit_svg({sc}, PlotKind::Scatter, out_dir + "/fig_samples.svg", opts);
  }

  write_density_grid(model, solve_cfg, cfg.get_int("grid_n"), cfg.get_double("grid_extent"),
                     out_dir + "/density_grid.csv", out_dir + "/fig_density.svg",
                     "Model density");
  // the transformation shortly after the start of integration
  CnfModel early = model;
  early.t1 = model.t0 + 0.05;
  write_density_grid(early, solve_cfg, cfg.get_int("grid_n"), cfg.get_double("grid_extent"),
                     out_dir + "/density_grid_early.csv", out_dir + "/fig_density_early.svg",
                     "Density after a short integration time");

  int status = 0;
  if (task == CnfTask::Mle) {
    // reversibility: densities recovered at the samples must match their logq
    RngState rt_rng(seed + 13);
    SampleResult fwd = forward_sample(model, rt_rng, 200, solve_cfg);
    Tensor back = log_density(model, fwd.samples, solve_cfg);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) worst = std::max(worst, std::fabs(back[i] - fwd.logq[i]));
    std::cout << "cnf mle: worst forward/reverse log-density gap " << worst << "\n";
    if (worst > cfg.get_double("roundtrip_tol")) {
      std::cout << "cnf FAILURE: reversibility gap " << worst << " above "
                << cfg.get_double("roundtrip_tol") << "\n";
      status = 1;
    }
    const int head = std::min<int>(10, log.records.size());
    double first = 0.0, last = 0.0;
    for (int i = 0; i < head; ++i) {
      first += log.records[i].loss / head;
      last += log.records[log.records.size() - 1 - i].loss / head;
    }
    std::cout << "cnf mle: initial NLL " << first << ", final NLL " << last << "\n";
    if (last > first - cfg.get_double("mle_min_improvement")) {
      std::cout << "cnf FAILURE: NLL improvement below "
                << cfg.get_double("mle_min_improvement") << " nats\n";
      status = 1;
    }
  } else {
    const double final_loss =
        fresh_kl_estimate(model, data, solve_cfg, seed + 99, cfg.get_int("eval_n"));
    std::cout << "cnf density: final KL estimate " << final_loss << "\n";
  }
  return status;
}

}  // namespace odegrad::cli
