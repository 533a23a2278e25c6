#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "odegrad/latent_ode.hpp"

using namespace odegrad;

namespace {

SolveConfig seq_cfg(double tol = 1.5e-8) {
  SolveConfig cfg;
  cfg.rtol = tol;
  cfg.atol = tol;
  return cfg;
}

bool close_rel(double got, double want, double rel, double abs_floor) {
  return std::fabs(got - want) <= abs_floor + rel * std::fabs(want);
}

LatentOdeConfig small_cfg() {
  LatentOdeConfig cfg;
  cfg.obs_dim = 2;
  cfg.latent_dim = 3;
  cfg.rnn_hidden = 6;
  cfg.dyn_hidden = 5;
  cfg.dec_hidden = 4;
  return cfg;
}

}  // namespace

TEST_CASE("gru step gradients match finite differences") {
  RngState rng(3);
  GruSpec spec{3, 5};
  Tensor theta({gru_param_count(spec)});
  gru_init(spec, theta.data(), rng);
  Tensor x = gaussian_sample(rng, {3}, 0.0, 1.0);
  Tensor h = gaussian_sample(rng, {5}, 0.0, 1.0);
  Tensor seed = gaussian_sample(rng, {5}, 0.0, 1.0);

  GruStepCache cache;
  gru_step(spec, theta.data(), x, h, &cache);
  Tensor gtheta({theta.size()});
  Tensor gx;
  Tensor gh = gru_step_backward(spec, theta.data(), cache, seed, gtheta.data(), &gx);

  auto loss = [&](const Tensor& th, const Tensor& xx, const Tensor& hh) {
    return dot(seed, gru_step(spec, th.data(), xx, hh));
  };
  const double eps = 1e-6;
  for (int i = 0; i < theta.size(); ++i) {
    Tensor tp = theta, tm = theta;
    tp[i] += eps;
    tm[i] -= eps;
    const double fd = (loss(tp, x, h) - loss(tm, x, h)) / (2 * eps);
    CHECK_MESSAGE(close_rel(gtheta[i], fd, 1e-5, 1e-8), "gru theta[" << i << "]");
  }
  for (int i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp[i] += eps;
    xm[i] -= eps;
    const double fd = (loss(theta, xp, h) - loss(theta, xm, h)) / (2 * eps);
    CHECK(close_rel(gx[i], fd, 1e-5, 1e-8));
  }
  for (int i = 0; i < h.size(); ++i) {
    Tensor hp = h, hm = h;
    hp[i] += eps;
    hm[i] -= eps;
    const double fd = (loss(theta, x, hp) - loss(theta, x, hm)) / (2 * eps);
    CHECK(close_rel(gh[i], fd, 1e-5, 1e-8));
  }
}

TEST_CASE("spiral generator contracts") {
  RngState a(7), b(7);
  SpiralDataset d1 = generate_spirals(a, 10, 40, 0.1);
  SpiralDataset d2 = generate_spirals(b, 10, 40, 0.1);
  CHECK(norm_inf(d1.obs[3] - d2.obs[3]) == 0.0);

  int cw = 0;
  for (int c : d1.clockwise) cw += c;
  CHECK(cw == 5);

  RngState c(9);
  SpiralDataset clean = generate_spirals(c, 4, 25, 0.0);
  for (int k = 0; k < 4; ++k) CHECK(norm_inf(clean.obs[k] - clean.truth[k]) == 0.0);

  CHECK_THROWS_AS(generate_spirals(c, 3, 25, 0.1), std::invalid_argument);
}

TEST_CASE("subsample keeps sorted distinct subsets") {
  RngState rng(11);
  SpiralDataset d = generate_spirals(rng, 6, 100, 0.05);

  SpiralDataset same = subsample(d, rng, 100);
  CHECK(same.times[0] == d.times[0]);
  CHECK(norm_inf(same.obs[0] - d.obs[0]) == 0.0);

  RngState r1(21), r2(21);
  SpiralDataset s1 = subsample(d, r1, 30);
  SpiralDataset s2 = subsample(d, r2, 30);
  CHECK(s1.times[2] == s2.times[2]);
  for (int k = 0; k < 6; ++k) {
    CHECK(s1.times[k].size() == 30);
    for (size_t i = 1; i < s1.times[k].size(); ++i)
      CHECK(s1.times[k][i] > s1.times[k][i - 1]);
  }
  CHECK(s1.times[0] != s1.times[1]);  // per-trajectory index draws differ

  CHECK_THROWS_AS(subsample(d, rng, 101), std::invalid_argument);
}

TEST_CASE("encoder basics") {
  RngState rng(5);
  LatentOdeModel model = make_latent_ode(small_cfg(), rng);
  Tensor obs = gaussian_sample(rng, {6, 2}, 0.0, 1.0);
  std::vector<double> times = {0.0, 0.2, 0.5, 0.6, 1.1, 1.4};

  SUBCASE("zeroed weights reduce to the readout bias") {
    LatentOdeModel zeroed = model;
    zeroed.enc_theta.fill(0.0);
    const GruSpec spec = zeroed.enc_gru();
    const int L = zeroed.cfg.latent_dim;
    double* readout = zeroed.enc_theta.data() + gru_param_count(spec);
    double* bias = readout + 2 * L * spec.hidden;
    for (int j = 0; j < L; ++j) {
      bias[j] = 0.3 * (j + 1);       // mu rows
      bias[L + j] = -0.2 * (j + 1);  // log sigma rows
    }
    EncodeResult enc = encode(zeroed, obs, times);
    for (int j = 0; j < L; ++j) {
      CHECK(enc.mu[j] == doctest::Approx(0.3 * (j + 1)));
      CHECK(enc.sigma[j] == doctest::Approx(std::exp(-0.2 * (j + 1))));
    }
  }

  SUBCASE("output responds to the data") {
    EncodeResult e1 = encode(model, obs, times);
    Tensor other = obs;
    other.at(2, 0) += 1.0;
    EncodeResult e2 = encode(model, other, times);
    CHECK(norm_inf(e1.mu - e2.mu) > 0.0);
  }

  SUBCASE("pre-reversed input with the flag off matches the standard call") {
    EncodeResult std_call = encode(model, obs, times, true);
    Tensor rev_obs({6, 2});
    std::vector<double> rev_times(6);
    for (int i = 0; i < 6; ++i) {
      rev_times[i] = times[5 - i];
      for (int j = 0; j < 2; ++j) rev_obs.at(i, j) = obs.at(5 - i, j);
    }
    EncodeResult rev_call = encode(model, rev_obs, rev_times, false);
    CHECK(norm_inf(std_call.mu - rev_call.mu) == 0.0);
    CHECK(norm_inf(std_call.sigma - rev_call.sigma) == 0.0);
  }

  SUBCASE("sigma is strictly positive and the empty sequence is rejected") {
    for (int rep = 0; rep < 10; ++rep) {
      Tensor o = gaussian_sample(rng, {4, 2}, 0.0, 3.0);
      EncodeResult e = encode(model, o, {0.0, 0.1, 0.2, 0.3});
      for (int j = 0; j < e.sigma.size(); ++j) CHECK(e.sigma[j] > 0.0);
    }
    CHECK_THROWS_AS(encode(model, Tensor({0, 2}), {}), std::invalid_argument);
  }
}

TEST_CASE("decode_trajectory contracts") {
  RngState rng(8);
  LatentOdeModel model = make_latent_ode(small_cfg(), rng);
  Tensor z0 = gaussian_sample(rng, {3}, 0.0, 1.0);

  SUBCASE("single time skips integration") {
    Tensor one = decode_trajectory(model, z0, {2.5}, seq_cfg());
    Tensor direct = decode_observation(model, z0);
    for (int j = 0; j < 2; ++j) CHECK(one.at(0, j) == direct[j]);
  }

  SUBCASE("frozen dynamics decode to a constant mean") {
    LatentOdeModel frozen = model;
    RngState r2(1);
    frozen.dynamics = build_mlp_dynamics(3, {5}, r2, false, /*zero_init=*/true);
    Tensor out = decode_trajectory(frozen, z0, {0.0, 1.0, 2.0, 5.0}, seq_cfg());
    for (int i = 1; i < 4; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(out.at(i, j) == doctest::Approx(out.at(0, j)).epsilon(1e-10));
  }

  SUBCASE("extrapolation stays finite") {
    Tensor out = decode_trajectory(model, z0, {0.0, 1.0, 30.0}, seq_cfg());
    CHECK(out.all_finite());
  }

  SUBCASE("time-invariance: shifted grids give identical latents") {
    std::vector<double> base = {0.0, 0.7, 1.9};
    std::vector<double> shifted = {10.0, 10.7, 11.9};
    Trajectory a = solve_at_times(model.dynamics, z0, base, seq_cfg());
    Trajectory b = solve_at_times(model.dynamics, z0, shifted, seq_cfg());
    for (int i = 0; i < 3; ++i) CHECK(norm_inf(a.states[i] - b.states[i]) < 1e-7);
  }
}

TEST_CASE("elbo decomposition against hand-computed terms") {
  RngState rng(13);
  LatentOdeModel model = make_latent_ode(small_cfg(), rng);
  // zero the encoder so the posterior is exactly N(bias_mu, exp(bias_ls))
  model.enc_theta.fill(0.0);
  Tensor obs = gaussian_sample(rng, {4, 2}, 0.0, 1.0);
  std::vector<double> times = {0.0, 0.3, 0.8, 1.0};
  Tensor eps = gaussian_sample(rng, {3}, 0.0, 1.0);

  auto manual_loglik = [&](const Tensor& z0) {
    Trajectory traj = solve_at_times(model.dynamics, z0, times, seq_cfg());
    const double sig = std::exp(model.log_obs_std);
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
      Tensor xh = decode_observation(model, traj.states[i]);
      for (int j = 0; j < 2; ++j) {
        const double diff = obs.at(i, j) - xh[j];
        acc += -0.5 * std::log(2.0 * M_PI) - std::log(sig) -
               0.5 * diff * diff / (sig * sig);
      }
    }
    return acc;
  };

  SUBCASE("posterior equal to the prior has zero KL") {
    // bias already zero: mu = 0, sigma = 1
    const double value = elbo_with_noise(model, obs, times, eps, seq_cfg());
    CHECK(value == doctest::Approx(manual_loglik(eps)).epsilon(1e-9));
  }

  SUBCASE("unit mean shift costs 0.5 nats per dimension") {
    const GruSpec spec = model.enc_gru();
    double* bias = model.enc_theta.data() + gru_param_count(spec) + 2 * 3 * spec.hidden;
    for (int j = 0; j < 3; ++j) bias[j] = 1.0;  // mu = 1, sigma = 1
    Tensor z0({3});
    for (int j = 0; j < 3; ++j) z0[j] = 1.0 + eps[j];
    const double value = elbo_with_noise(model, obs, times, eps, seq_cfg());
    CHECK(value == doctest::Approx(manual_loglik(z0) - 1.5).epsilon(1e-9));
  }
}

TEST_CASE("elbo is bounded by the exact marginal when the decoder ignores z") {
  RngState rng(29);
  LatentOdeModel model = make_latent_ode(small_cfg(), rng);
  model.dec_theta.fill(0.0);  // decoder output is identically zero
  Tensor obs = gaussian_sample(rng, {5, 2}, 0.0, 0.5);
  std::vector<double> times = {0.0, 0.2, 0.4, 0.9, 1.3};
  const double sig = std::exp(model.log_obs_std);
  double marginal = 0.0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 2; ++j)
      marginal += -0.5 * std::log(2.0 * M_PI) - std::log(sig) -
                  0.5 * obs.at(i, j) * obs.at(i, j) / (sig * sig);
  for (int rep = 0; rep < 5; ++rep) {
    const double value = elbo(model, obs, times, rng, seq_cfg());
    CHECK(value <= marginal + 1e-9);
  }
}

TEST_CASE("elbo gradient matches finite differences on every block") {
  RngState rng(31);
  LatentOdeModel model = make_latent_ode(small_cfg(), rng);
  Tensor obs = gaussian_sample(rng, {4, 2}, 0.0, 1.0);
  std::vector<double> times = {0.0, 0.4, 0.9, 1.2};
  Tensor eps = gaussian_sample(rng, {3}, 0.0, 1.0);
  SolveConfig cfg = seq_cfg(1e-9);

  LatentOdeGrads g;
  elbo_with_noise(model, obs, times, eps, cfg, &g);

  const double fd_eps = 1e-5;
  auto value_of = [&](const LatentOdeModel& m) {
    return elbo_with_noise(m, obs, times, eps, cfg);
  };

  LatentOdeModel probe = model;
  for (int i = 0; i < model.enc_theta.size(); ++i) {
    probe.enc_theta = model.enc_theta;
    probe.enc_theta[i] += fd_eps;
    const double hi = value_of(probe);
    probe.enc_theta[i] -= 2 * fd_eps;
    const double lo = value_of(probe);
    const double fd = (hi - lo) / (2 * fd_eps);
    CHECK_MESSAGE(close_rel(g.enc[i], fd, 1e-3, 1e-6), "enc[" << i << "]");
  }
  probe.enc_theta = model.enc_theta;

  Tensor dyn = model.dynamics.params();
  for (int i = 0; i < dyn.size(); ++i) {
    Tensor tp = dyn, tm = dyn;
    tp[i] += fd_eps;
    tm[i] -= fd_eps;
    probe.dynamics.set_params(tp);
    const double hi = value_of(probe);
    probe.dynamics.set_params(tm);
    const double lo = value_of(probe);
    const double fd = (hi - lo) / (2 * fd_eps);
    CHECK_MESSAGE(close_rel(g.dyn[i], fd, 1e-3, 1e-6), "dyn[" << i << "]");
  }
  probe.dynamics.set_params(dyn);

  for (int i = 0; i < model.dec_theta.size(); ++i) {
    probe.dec_theta = model.dec_theta;
    probe.dec_theta[i] += fd_eps;
    const double hi = value_of(probe);
    probe.dec_theta[i] -= 2 * fd_eps;
    const double lo = value_of(probe);
    const double fd = (hi - lo) / (2 * fd_eps);
    CHECK_MESSAGE(close_rel(g.dec[i], fd, 1e-3, 1e-6), "dec[" << i << "]");
  }
  probe.dec_theta = model.dec_theta;

  probe.log_obs_std = model.log_obs_std + fd_eps;
  const double hi = value_of(probe);
  probe.log_obs_std = model.log_obs_std - fd_eps;
  const double lo = value_of(probe);
  CHECK(close_rel(g.d_log_obs_std, (hi - lo) / (2 * fd_eps), 1e-3, 1e-6));
}

TEST_CASE("latent ODE training basics") {
  RngState rng(41);
  SpiralDataset data = generate_spirals(rng, 8, 20, 0.05);
  LatentOdeModel model = make_latent_ode(small_cfg(), rng);

  SUBCASE("zero epochs change nothing") {
    Tensor before = model.enc_theta;
    RngState train_rng(1);
    LatentTrainLog log =
        train_latent_ode(model, data, 0, 4, {}, train_rng, seq_cfg(1e-6));
    CHECK(log.records.empty());
    CHECK(norm_inf(model.enc_theta - before) == 0.0);
  }

  SUBCASE("a short run improves the objective") {
    RngState train_rng(2);
    AdamConfig opt;
    opt.lr = 5e-3;
    LatentTrainLog log =
        train_latent_ode(model, data, 12, 4, opt, train_rng, seq_cfg(1e-6));
    CHECK(log.records.back().elbo > log.records.front().elbo);
  }
}

TEST_CASE("predictive rmse closed forms") {
  RngState rng(51);
  SpiralDataset data = generate_spirals(rng, 4, 20, 0.0);
  LatentOdeModel model = make_latent_ode(small_cfg(), rng);
  // zero decoder predicts the origin everywhere
  model.dec_theta.fill(0.0);
  RngState r2(1);
  model.dynamics = build_mlp_dynamics(3, {5}, r2, false, /*zero_init=*/true);

  double rms = 0.0;
  long count = 0;
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < static_cast<int>(data.horizon_times.size()); ++i)
      for (int j = 0; j < 2; ++j) {
        rms += data.horizon_truth[k].at(i, j) * data.horizon_truth[k].at(i, j);
        ++count;
      }
  rms = std::sqrt(rms / count);
  const double got = predictive_rmse(model, data, seq_cfg(1e-6));
  CHECK(got == doctest::Approx(rms).epsilon(1e-9));

  // a dataset whose truth coincides with the predictions scores zero
  SpiralDataset oracle = data;
  for (auto& t : oracle.horizon_truth) t.fill(0.0);
  CHECK(predictive_rmse(model, oracle, seq_cfg(1e-6)) == doctest::Approx(0.0));
}

TEST_CASE("rnn baseline") {
  RngState rng(61);
  SpiralDataset data = generate_spirals(rng, 6, 25, 0.05);

  SUBCASE("nll gradient matches finite differences") {
    RnnPredictor model = make_rnn_predictor(2, 5, true, rng);
    RnnGrads g;
    rnn_nll(model, data.obs[0], data.times[0], &g);
    const double eps = 1e-6;
    RnnPredictor probe = model;
    for (int i = 0; i < model.theta.size(); ++i) {
      probe.theta = model.theta;
      probe.theta[i] += eps;
      const double hi = rnn_nll(probe, data.obs[0], data.times[0]);
      probe.theta[i] -= 2 * eps;
      const double lo = rnn_nll(probe, data.obs[0], data.times[0]);
      const double fd = (hi - lo) / (2 * eps);
      CHECK_MESSAGE(close_rel(g.theta[i], fd, 1e-4, 1e-8), "rnn theta[" << i << "]");
    }
    probe.theta = model.theta;
    probe.log_obs_std = model.log_obs_std + eps;
    const double hi = rnn_nll(probe, data.obs[0], data.times[0]);
    probe.log_obs_std = model.log_obs_std - 2 * eps + eps;
    probe.log_obs_std = model.log_obs_std - eps;
    const double lo = rnn_nll(probe, data.obs[0], data.times[0]);
    CHECK(close_rel(g.d_log_obs_std, (hi - lo) / (2 * eps), 1e-4, 1e-8));
  }

  SUBCASE("training reduces the nll and is reproducible") {
    RngState r1(5), r2(5);
    RnnPredictor m1 = make_rnn_predictor(2, 8, true, r1);
    RnnPredictor m2 = make_rnn_predictor(2, 8, true, r2);
    AdamConfig opt;
    opt.lr = 5e-3;
    RngState t1(9), t2(9);
    LatentTrainLog l1 = train_rnn_baseline(m1, data, 15, opt, t1);
    LatentTrainLog l2 = train_rnn_baseline(m2, data, 15, opt, t2);
    CHECK(l1.records.back().elbo > l1.records.front().elbo);  // stored as -nll
    CHECK(l1.records.back().elbo == l2.records.back().elbo);
    CHECK(rnn_predictive_rmse(m1, data) == rnn_predictive_rmse(m2, data));
  }
}

TEST_CASE("poisson likelihood") {
  RngState rng(71);
  // frozen latent state: zero dynamics in 2-D
  DynamicsFunc frozen = build_mlp_dynamics(2, {4}, rng, false, /*zero_init=*/true);
  Tensor z0 = Tensor::vec({0.3, -0.2});

  auto constant_rate = [&](double lambda) {
    PoissonRateModel rate(2, 4, rng);
    Tensor theta = rate.params();
    theta.fill(0.0);
    // output bias: softplus(b) = lambda
    theta[theta.size() - 1] =
        lambda > 1e-10 ? std::log(std::expm1(lambda)) : std::log(lambda);
    rate.set_params(theta);
    return rate;
  };

  SUBCASE("homogeneous closed forms") {
    PoissonRateModel rate = constant_rate(2.0);
    const double ll =
        poisson_loglik(rate, frozen, z0, {0.25, 0.75}, 0.0, 1.0, seq_cfg(1e-10));
    CHECK(std::fabs(ll - (2.0 * std::log(2.0) - 2.0)) < 1e-6);

    const double empty = poisson_loglik(rate, frozen, z0, {}, 0.0, 1.0, seq_cfg(1e-10));
    CHECK(std::fabs(empty - (-2.0)) < 1e-8);
  }

  SUBCASE("vanishing intensity drives the likelihood to minus infinity") {
    RngState r(1);
    PoissonRateModel rate(2, 4, r);
    Tensor theta = rate.params();
    theta.fill(0.0);
    theta[theta.size() - 1] = -500.0;  // rate = e^-500
    rate.set_params(theta);
    const double ll = poisson_loglik(rate, frozen, z0, {0.5, 0.9}, 0.0, 1.0, seq_cfg());
    CHECK(ll <= -1e3);
  }

  SUBCASE("events outside the interval are rejected") {
    PoissonRateModel rate = constant_rate(1.0);
    CHECK_THROWS_AS(poisson_loglik(rate, frozen, z0, {1.5}, 0.0, 1.0, seq_cfg()),
                    std::invalid_argument);
    CHECK_THROWS_AS(poisson_loglik(rate, frozen, z0, {0.5, 0.5}, 0.0, 1.0, seq_cfg()),
                    std::invalid_argument);
  }

  SUBCASE("gradients match finite differences with live dynamics") {
    RngState r(3);
    DynamicsFunc f = build_mlp_dynamics(2, {4}, r, false);
    PoissonRateModel rate(2, 4, r);
    std::vector<double> events = {0.2, 0.55, 0.8};
    SolveConfig cfg = seq_cfg(1e-10);
    PoissonGrads g;
    poisson_loglik(rate, f, z0, events, 0.0, 1.0, cfg, &g);

    const double eps = 1e-5;
    Tensor ft = f.params();
    DynamicsFunc fp = f;
    for (int i = 0; i < ft.size(); ++i) {
      Tensor tp = ft, tm = ft;
      tp[i] += eps;
      tm[i] -= eps;
      fp.set_params(tp);
      const double hi = poisson_loglik(rate, fp, z0, events, 0.0, 1.0, cfg);
      fp.set_params(tm);
      const double lo = poisson_loglik(rate, fp, z0, events, 0.0, 1.0, cfg);
      CHECK_MESSAGE(close_rel(g.d_dynamics[i], (hi - lo) / (2 * eps), 1e-4, 1e-7),
                    "poisson dyn[" << i << "]");
    }
    Tensor rt = rate.params();
    PoissonRateModel rp = rate;
    for (int i = 0; i < rt.size(); ++i) {
      Tensor tp = rt, tm = rt;
      tp[i] += eps;
      tm[i] -= eps;
      rp.set_params(tp);
      const double hi = poisson_loglik(rp, f, z0, events, 0.0, 1.0, cfg);
      rp.set_params(tm);
      const double lo = poisson_loglik(rp, f, z0, events, 0.0, 1.0, cfg);
      CHECK_MESSAGE(close_rel(g.d_rate[i], (hi - lo) / (2 * eps), 1e-4, 1e-7),
                    "poisson rate[" << i << "]");
    }
    for (int i = 0; i < 2; ++i) {
      Tensor zp = z0, zm = z0;
      zp[i] += eps;
      zm[i] -= eps;
      const double hi = poisson_loglik(rate, f, zp, events, 0.0, 1.0, cfg);
      const double lo = poisson_loglik(rate, f, zm, events, 0.0, 1.0, cfg);
      CHECK(close_rel(g.d_z0[i], (hi - lo) / (2 * eps), 1e-4, 1e-7));
    }
  }

  SUBCASE("integrated intensity agrees with dense quadrature") {
    RngState r(5);
    DynamicsFunc f = build_mlp_dynamics(2, {6}, r, false);
    PoissonRateModel rate(2, 6, r);
    PoissonSystem system(f, rate);
    Tensor s0 = Tensor::vec({z0[0], z0[1], 0.0});
    Trajectory traj = solve(system, s0, 0.0, 1.0, seq_cfg(1e-10));
    const double integral = traj.final_state()[2];

    // trapezoid over a dense latent-state grid
    const int grid_n = 2001;
    std::vector<double> grid(grid_n);
    for (int i = 0; i < grid_n; ++i) grid[i] = static_cast<double>(i) / (grid_n - 1);
    Trajectory dense = solve_at_times(f, z0, grid, seq_cfg(1e-10));
    double quad = 0.0;
    for (int i = 0; i + 1 < grid_n; ++i) {
      const double a = rate.rate(dense.states[i]);
      const double b = rate.rate(dense.states[i + 1]);
      quad += 0.5 * (a + b) * (grid[i + 1] - grid[i]);
    }
    CHECK(std::fabs(integral - quad) < 1e-5);
  }
}
