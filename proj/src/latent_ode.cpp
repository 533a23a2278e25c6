#include "odegrad/latent_ode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace odegrad {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;

Tensor mat_vec(const double* w, int rows, int cols, const Tensor& x) {
  Tensor out({rows});
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    const double* row = w + i * cols;
    for (int j = 0; j < cols; ++j) s += row[j] * x[j];
    out[i] = s;
  }
  return out;
}
}  // namespace

// --- GRU ---------------------------------------------------------------------

int gru_param_count(const GruSpec& spec) {
  return 3 * (spec.hidden * spec.input + spec.hidden * spec.hidden + spec.hidden);
}

void gru_init(const GruSpec& spec, double* theta, RngState& rng) {
  const int gate = spec.hidden * spec.input + spec.hidden * spec.hidden + spec.hidden;
  const double bw = 1.0 / std::sqrt(static_cast<double>(spec.input));
  const double bu = 1.0 / std::sqrt(static_cast<double>(spec.hidden));
  for (int g = 0; g < 3; ++g) {
    double* p = theta + g * gate;
    for (int i = 0; i < spec.hidden * spec.input; ++i) p[i] = rng.uniform(-bw, bw);
    p += spec.hidden * spec.input;
    for (int i = 0; i < spec.hidden * spec.hidden; ++i) p[i] = rng.uniform(-bu, bu);
    p += spec.hidden * spec.hidden;
    for (int i = 0; i < spec.hidden; ++i) p[i] = 0.0;
  }
}

namespace {
struct GateView {
  const double* W;
  const double* U;
  const double* b;
};

GateView gate_view(const GruSpec& spec, const double* theta, int gate) {
  const int block = spec.hidden * spec.input + spec.hidden * spec.hidden + spec.hidden;
  const double* p = theta + gate * block;
  return {p, p + spec.hidden * spec.input, p + spec.hidden * (spec.input + spec.hidden)};
}

Tensor gate_preact(const GruSpec& spec, const GateView& g, const Tensor& x,
                   const Tensor& h) {
  Tensor pre = mat_vec(g.W, spec.hidden, spec.input, x);
  pre += mat_vec(g.U, spec.hidden, spec.hidden, h);
  for (int i = 0; i < spec.hidden; ++i) pre[i] += g.b[i];
  return pre;
}
}  // namespace

Tensor gru_step(const GruSpec& spec, const double* theta, const Tensor& x,
                const Tensor& h_prev, GruStepCache* cache) {
  if (x.size() != spec.input || h_prev.size() != spec.hidden)
    throw DimensionError("gru_step: size mismatch");
  GateView vz = gate_view(spec, theta, 0);
  GateView vr = gate_view(spec, theta, 1);
  GateView vh = gate_view(spec, theta, 2);

  Tensor zg = gate_preact(spec, vz, x, h_prev);
  Tensor rg = gate_preact(spec, vr, x, h_prev);
  for (int i = 0; i < spec.hidden; ++i) {
    zg[i] = sigmoid_scalar(zg[i]);
    rg[i] = sigmoid_scalar(rg[i]);
  }
  Tensor rh = h_prev;
  for (int i = 0; i < spec.hidden; ++i) rh[i] *= rg[i];
  Tensor hh = mat_vec(vh.W, spec.hidden, spec.input, x);
  hh += mat_vec(vh.U, spec.hidden, spec.hidden, rh);
  for (int i = 0; i < spec.hidden; ++i) hh[i] = std::tanh(hh[i] + vh.b[i]);

  Tensor h({spec.hidden});
  for (int i = 0; i < spec.hidden; ++i)
    h[i] = (1.0 - zg[i]) * h_prev[i] + zg[i] * hh[i];
  if (cache) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->zg = std::move(zg);
    cache->rg = std::move(rg);
    cache->hh = std::move(hh);
  }
  return h;
}

Tensor gru_step_backward(const GruSpec& spec, const double* theta, const GruStepCache& c,
                         const Tensor& gh_out, double* gtheta, Tensor* gx) {
  const int H = spec.hidden, I = spec.input;
  const int block = H * I + H * H + H;
  GateView vz = gate_view(spec, theta, 0);
  GateView vr = gate_view(spec, theta, 1);
  GateView vh = gate_view(spec, theta, 2);
  double* gz_params = gtheta;
  double* gr_params = gtheta + block;
  double* gh_params = gtheta + 2 * block;

  Tensor gh_prev({H});
  Tensor gx_local({I});

  Tensor ghh({H}), gzg({H});
  for (int i = 0; i < H; ++i) {
    ghh[i] = gh_out[i] * c.zg[i];
    gzg[i] = gh_out[i] * (c.hh[i] - c.h_prev[i]);
    gh_prev[i] = gh_out[i] * (1.0 - c.zg[i]);
  }

  // candidate block
  Tensor pre_h({H});
  for (int i = 0; i < H; ++i) pre_h[i] = ghh[i] * (1.0 - c.hh[i] * c.hh[i]);
  Tensor rh({H});
  for (int i = 0; i < H; ++i) rh[i] = c.rg[i] * c.h_prev[i];
  for (int i = 0; i < H; ++i) {
    double* wrow = gh_params + i * I;
    for (int j = 0; j < I; ++j) wrow[j] += pre_h[i] * c.x[j];
    double* urow = gh_params + H * I + i * H;
    for (int j = 0; j < H; ++j) urow[j] += pre_h[i] * rh[j];
    gh_params[H * I + H * H + i] += pre_h[i];
  }
  Tensor grh({H});
  for (int i = 0; i < H; ++i) {
    double s = 0.0;
    for (int k = 0; k < H; ++k) s += vh.U[k * H + i] * pre_h[k];
    grh[i] = s;
  }
  Tensor grg({H});
  for (int i = 0; i < H; ++i) {
    grg[i] = grh[i] * c.h_prev[i];
    gh_prev[i] += grh[i] * c.rg[i];
  }
  for (int j = 0; j < I; ++j) {
    double s = 0.0;
    for (int k = 0; k < H; ++k) s += vh.W[k * I + j] * pre_h[k];
    gx_local[j] += s;
  }

  // update and reset gates
  auto gate_backward = [&](const Tensor& ggate, const Tensor& gate, const GateView& v,
                           double* gparams) {
    Tensor pre({H});
    for (int i = 0; i < H; ++i) pre[i] = ggate[i] * gate[i] * (1.0 - gate[i]);
    for (int i = 0; i < H; ++i) {
      double* wrow = gparams + i * I;
      for (int j = 0; j < I; ++j) wrow[j] += pre[i] * c.x[j];
      double* urow = gparams + H * I + i * H;
      for (int j = 0; j < H; ++j) urow[j] += pre[i] * c.h_prev[j];
      gparams[H * I + H * H + i] += pre[i];
    }
    for (int i = 0; i < H; ++i) {
      double s = 0.0;
      for (int k = 0; k < H; ++k) s += v.U[k * H + i] * pre[k];
      gh_prev[i] += s;
    }
    for (int j = 0; j < I; ++j) {
      double s = 0.0;
      for (int k = 0; k < H; ++k) s += v.W[k * I + j] * pre[k];
      gx_local[j] += s;
    }
  };
  gate_backward(gzg, c.zg, vz, gz_params);
  gate_backward(grg, c.rg, vr, gr_params);

  if (gx) *gx = std::move(gx_local);
  return gh_prev;
}

// --- spirals -------------------------------------------------------------------

SpiralDataset generate_spirals(RngState& rng, int n_traj, int n_time, double noise_std) {
  if (n_traj % 2 != 0) throw std::invalid_argument("generate_spirals: n_traj must be even");
  if (n_time < 2) throw std::invalid_argument("generate_spirals: n_time >= 2");
  if (noise_std < 0) throw std::invalid_argument("generate_spirals: noise_std >= 0");

  const double t_train = 5.0, t_end = 10.0;
  const double omega = 4.0 * M_PI / t_end;  // ~2 turns across train + horizon
  const int n_horizon = 100;

  SpiralDataset d;
  d.noise_std = noise_std;
  std::vector<double> grid(n_time);
  for (int i = 0; i < n_time; ++i)
    grid[i] = t_train * static_cast<double>(i) / static_cast<double>(n_time - 1);
  d.horizon_times.resize(n_horizon);
  for (int i = 0; i < n_horizon; ++i)
    d.horizon_times[i] =
        t_train + (t_end - t_train) * static_cast<double>(i + 1) / n_horizon;

  for (int k = 0; k < n_traj; ++k) {
    const int cw = k < n_traj / 2 ? 0 : 1;
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double cx = 0.05 * rng.normal();
    const double cy = 0.05 * rng.normal();
    auto point = [&](double t) {
      const double sweep = omega * t;
      const double ang = cw ? phase - sweep : phase + sweep;
      const double r = 0.3 + 0.3 * sweep;
      return std::pair<double, double>{cx + r * std::cos(ang), cy + r * std::sin(ang)};
    };
    Tensor truth({n_time, 2}), obs({n_time, 2});
    for (int i = 0; i < n_time; ++i) {
      auto [x, y] = point(grid[i]);
      truth.at(i, 0) = x;
      truth.at(i, 1) = y;
      obs.at(i, 0) = x + noise_std * rng.normal();
      obs.at(i, 1) = y + noise_std * rng.normal();
    }
    Tensor horizon({n_horizon, 2});
    for (int i = 0; i < n_horizon; ++i) {
      auto [x, y] = point(d.horizon_times[i]);
      horizon.at(i, 0) = x;
      horizon.at(i, 1) = y;
    }
    d.times.push_back(grid);
    d.obs.push_back(std::move(obs));
    d.truth.push_back(std::move(truth));
    d.horizon_truth.push_back(std::move(horizon));
    d.clockwise.push_back(cw);
  }
  return d;
}

SpiralDataset subsample(const SpiralDataset& data, RngState& rng, int k) {
  SpiralDataset out;
  out.noise_std = data.noise_std;
  out.horizon_times = data.horizon_times;
  out.horizon_truth = data.horizon_truth;
  out.clockwise = data.clockwise;
  for (int traj = 0; traj < data.trajectory_count(); ++traj) {
    const int n = static_cast<int>(data.times[traj].size());
    if (k > n) throw std::invalid_argument("subsample: k exceeds the grid size");
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    // partial Fisher-Yates, then sort the chosen prefix
    for (int i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.uniform_int(n - i)]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    std::vector<double> times(k);
    Tensor obs({k, 2}), truth({k, 2});
    for (int i = 0; i < k; ++i) {
      times[i] = data.times[traj][idx[i]];
      for (int j = 0; j < 2; ++j) {
        obs.at(i, j) = data.obs[traj].at(idx[i], j);
        truth.at(i, j) = data.truth[traj].at(idx[i], j);
      }
    }
    out.times.push_back(std::move(times));
    out.obs.push_back(std::move(obs));
    out.truth.push_back(std::move(truth));
  }
  return out;
}

void spirals_to_csv(const SpiralDataset& data, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("spirals_to_csv: cannot open " + path);
  os << "traj,t,x0,x1,label\n";
  char buf[128];
  for (int k = 0; k < data.trajectory_count(); ++k) {
    for (size_t i = 0; i < data.times[k].size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%d\n", k, data.times[k][i],
                    data.obs[k].at(static_cast<int>(i), 0),
                    data.obs[k].at(static_cast<int>(i), 1), data.clockwise[k]);
      os << buf;
    }
  }
}

// --- latent ODE model -------------------------------------------------------------

int LatentOdeModel::enc_param_count() const {
  const GruSpec g = enc_gru();
  return gru_param_count(g) + 2 * cfg.latent_dim * cfg.rnn_hidden + 2 * cfg.latent_dim;
}

LatentOdeModel make_latent_ode(const LatentOdeConfig& cfg, RngState& rng) {
  LatentOdeModel m;
  m.cfg = cfg;
  m.enc_theta = Tensor({m.enc_param_count()});
  const GruSpec g = m.enc_gru();
  gru_init(g, m.enc_theta.data(), rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.rnn_hidden));
  for (int i = gru_param_count(g); i < m.enc_theta.size(); ++i)
    m.enc_theta[i] = rng.uniform(-bound, bound);
  m.dynamics =
      build_mlp_dynamics(cfg.latent_dim, {cfg.dyn_hidden}, rng, /*time_dependent=*/false);
  MlpSpec dec = m.dec_spec();
  m.dec_theta = Tensor({mlp_param_count(dec)});
  mlp_init(dec, m.dec_theta.data(), rng);
  m.log_obs_std = std::log(cfg.init_obs_std);
  return m;
}

EncodeResult encode(const LatentOdeModel& model, const Tensor& obs,
                    const std::vector<double>& times, bool backwards) {
  const int n = static_cast<int>(times.size());
  if (n < 1) throw std::invalid_argument("encode: empty sequence");
  if (obs.ndim() != 2 || obs.rows() != n || obs.cols() != model.cfg.obs_dim)
    throw DimensionError("encode: observations must be |times| x obs_dim");

  const GruSpec spec = model.enc_gru();
  EncodeResult out;
  out.caches.resize(n);
  Tensor h({spec.hidden});
  double t_prev = 0.0;
  for (int k = 0; k < n; ++k) {
    const int idx = backwards ? n - 1 - k : k;
    Tensor x({spec.input});
    for (int j = 0; j < model.cfg.obs_dim; ++j) x[j] = obs.at(idx, j);
    x[model.cfg.obs_dim] = k == 0 ? 0.0 : std::fabs(times[idx] - t_prev);
    t_prev = times[idx];
    h = gru_step(spec, model.enc_theta.data(), x, h, &out.caches[k]);
  }
  out.h_last = h;

  const int L = model.cfg.latent_dim;
  const double* readout = model.enc_theta.data() + gru_param_count(spec);
  const double* b_out = readout + 2 * L * spec.hidden;
  out.mu = Tensor({L});
  out.sigma = Tensor({L});
  for (int j = 0; j < L; ++j) {
    double mu = b_out[j], ls = b_out[L + j];
    for (int i = 0; i < spec.hidden; ++i) {
      mu += readout[j * spec.hidden + i] * h[i];
      ls += readout[(L + j) * spec.hidden + i] * h[i];
    }
    out.mu[j] = mu;
    out.sigma[j] = std::exp(ls);
  }
  return out;
}

Tensor decode_observation(const LatentOdeModel& model, const Tensor& z) {
  return mlp_forward(model.dec_spec(), model.dec_theta.data(), z);
}

Tensor decode_trajectory(const LatentOdeModel& model, const Tensor& z0,
                         const std::vector<double>& times, const SolveConfig& cfg) {
  if (times.empty()) throw std::invalid_argument("decode_trajectory: no times");
  const int n = static_cast<int>(times.size());
  Tensor out({n, model.cfg.obs_dim});
  if (n == 1) {
    Tensor x = decode_observation(model, z0);
    for (int j = 0; j < x.size(); ++j) out.at(0, j) = x[j];
    return out;
  }
  Trajectory traj = solve_at_times(model.dynamics, z0, times, cfg);
  for (int i = 0; i < n; ++i) {
    Tensor x = decode_observation(model, traj.states[i]);
    for (int j = 0; j < x.size(); ++j) out.at(i, j) = x[j];
  }
  return out;
}

namespace {

// backprop (gmu, glogsigma) through the readout and the GRU unroll
void encoder_backward(const LatentOdeModel& model, const EncodeResult& enc,
                      const Tensor& gmu, const Tensor& glogsig, Tensor* genc) {
  const GruSpec spec = model.enc_gru();
  const int L = model.cfg.latent_dim, H = spec.hidden;
  const int gru_params = gru_param_count(spec);
  const double* readout = model.enc_theta.data() + gru_params;
  double* gread = genc->data() + gru_params;

  Tensor gh({H});
  for (int j = 0; j < L; ++j) {
    for (int i = 0; i < H; ++i) {
      gh[i] += readout[j * H + i] * gmu[j] + readout[(L + j) * H + i] * glogsig[j];
      gread[j * H + i] += gmu[j] * enc.h_last[i];
      gread[(L + j) * H + i] += glogsig[j] * enc.h_last[i];
    }
    gread[2 * L * H + j] += gmu[j];
    gread[2 * L * H + L + j] += glogsig[j];
  }
  for (int k = static_cast<int>(enc.caches.size()) - 1; k >= 0; --k)
    gh = gru_step_backward(spec, model.enc_theta.data(), enc.caches[k], gh, genc->data());
}

}  // namespace

double elbo_with_noise(const LatentOdeModel& model, const Tensor& obs,
                       const std::vector<double>& times, const Tensor& eps,
                       const SolveConfig& cfg, LatentOdeGrads* grads, long* nfe_f,
                       long* nfe_b) {
  const int n = static_cast<int>(times.size());
  const int L = model.cfg.latent_dim;
  if (eps.size() != L) throw DimensionError("elbo: eps must match the latent dim");

  EncodeResult enc = encode(model, obs, times);
  Tensor z0({L});
  for (int j = 0; j < L; ++j) z0[j] = enc.mu[j] + enc.sigma[j] * eps[j];

  Trajectory traj;
  if (n >= 2) {
    traj = solve_at_times(model.dynamics, z0, times, cfg);
  } else {
    traj.times = {times[0]};
    traj.states = {z0};
  }
  if (nfe_f) *nfe_f = traj.nfe;

  const MlpSpec dec = model.dec_spec();
  const double sig = std::exp(model.log_obs_std);
  const double inv_var = 1.0 / (sig * sig);
  double loglik = 0.0;
  std::vector<std::vector<Tensor>> acts(n);
  std::vector<Tensor> xhat(n);
  for (int i = 0; i < n; ++i) {
    xhat[i] = mlp_forward(dec, model.dec_theta.data(), traj.states[i],
                          grads ? &acts[i] : nullptr);
    for (int j = 0; j < model.cfg.obs_dim; ++j) {
      const double diff = obs.at(i, j) - xhat[i][j];
      loglik += -0.5 * kLog2Pi - model.log_obs_std - 0.5 * diff * diff * inv_var;
    }
  }
  double kl = 0.0;
  for (int j = 0; j < L; ++j) {
    const double s2 = enc.sigma[j] * enc.sigma[j];
    kl += 0.5 * (enc.mu[j] * enc.mu[j] + s2 - 1.0) - std::log(enc.sigma[j]);
  }
  const double value = loglik - kl;
  if (!grads) return value;

  grads->enc = Tensor({model.enc_theta.size()});
  grads->dyn = Tensor({model.dynamics.param_count()});
  grads->dec = Tensor({model.dec_theta.size()});
  grads->d_log_obs_std = 0.0;

  std::vector<Tensor> gz(n);
  for (int i = 0; i < n; ++i) {
    Tensor gout({model.cfg.obs_dim});
    for (int j = 0; j < model.cfg.obs_dim; ++j) {
      const double diff = obs.at(i, j) - xhat[i][j];
      gout[j] = diff * inv_var;
      grads->d_log_obs_std += diff * diff * inv_var - 1.0;
    }
    gz[i] = mlp_backward(dec, model.dec_theta.data(), acts[i], gout, grads->dec.data());
  }

  Tensor d_z0;
  if (n >= 2) {
    GradientBundle bundle = backward_gradients_multi(model.dynamics, traj, gz, cfg);
    grads->dyn = std::move(bundle.d_theta);
    d_z0 = std::move(bundle.d_z0);
    if (nfe_b) *nfe_b = bundle.nfe;
  } else {
    d_z0 = gz[0];
  }

  Tensor gmu({L}), glogsig({L});
  for (int j = 0; j < L; ++j) {
    gmu[j] = d_z0[j] - enc.mu[j];
    glogsig[j] = d_z0[j] * eps[j] * enc.sigma[j] -
                 (enc.sigma[j] * enc.sigma[j] - 1.0);
  }
  encoder_backward(model, enc, gmu, glogsig, &grads->enc);
  return value;
}

double elbo(const LatentOdeModel& model, const Tensor& obs,
            const std::vector<double>& times, RngState& rng, const SolveConfig& cfg,
            LatentOdeGrads* grads, long* nfe_f, long* nfe_b) {
  Tensor eps = gaussian_sample(rng, {model.cfg.latent_dim}, 0.0, 1.0);
  return elbo_with_noise(model, obs, times, eps, cfg, grads, nfe_f, nfe_b);
}

LatentTrainLog train_latent_ode(LatentOdeModel& model, const SpiralDataset& data,
                                int epochs, int batch_size, const AdamConfig& opt,
                                RngState& rng, const SolveConfig& cfg) {
  LatentTrainLog log;
  const int n_traj = data.trajectory_count();
  if (n_traj == 0) throw std::invalid_argument("train_latent_ode: empty dataset");
  batch_size = std::min(batch_size, n_traj);

  Tensor enc = model.enc_theta;
  Tensor dyn = model.dynamics.params();
  Tensor dec = model.dec_theta;
  Tensor noise = Tensor::vec({model.log_obs_std});
  AdamState s_enc = adam_init(opt, enc);
  AdamState s_dyn = adam_init(opt, dyn);
  AdamState s_dec = adam_init(opt, dec);
  AdamState s_noise = adam_init(opt, noise);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    double total = 0.0;
    long nfe_f_sum = 0, nfe_b_sum = 0;
    for (int start = 0; start < n_traj; start += batch_size) {
      const int count = std::min(batch_size, n_traj - start);
      Tensor genc({enc.size()}), gdyn({dyn.size()}), gdec({dec.size()});
      double gnoise = 0.0;
      for (int k = 0; k < count; ++k) {
        const int idx = start + k;
        LatentOdeGrads g;
        long nf = 0, nb = 0;
        const double value =
            elbo(model, data.obs[idx], data.times[idx], rng, cfg, &g, &nf, &nb);
        if (!std::isfinite(value))
          throw DivergenceError("latent ODE training diverged at epoch " +
                                std::to_string(epoch));
        total += value;
        nfe_f_sum += nf;
        nfe_b_sum += nb;
        const double w = 1.0 / count;
        genc.axpy(w, g.enc);
        gdyn.axpy(w, g.dyn);
        gdec.axpy(w, g.dec);
        gnoise += w * g.d_log_obs_std;
      }
      // ascend the ELBO
      genc *= -1.0;
      gdyn *= -1.0;
      gdec *= -1.0;
      std::tie(s_enc, enc) = adam_step(std::move(s_enc), std::move(enc), genc);
      std::tie(s_dyn, dyn) = adam_step(std::move(s_dyn), std::move(dyn), gdyn);
      std::tie(s_dec, dec) = adam_step(std::move(s_dec), std::move(dec), gdec);
      std::tie(s_noise, noise) =
          adam_step(std::move(s_noise), std::move(noise), Tensor::vec({-gnoise}));
      model.enc_theta = enc;
      model.dynamics.set_params(dyn);
      model.dec_theta = dec;
      model.log_obs_std = noise[0];
    }
    log.records.push_back({epoch, total / n_traj, nfe_f_sum, nfe_b_sum});
  }
  return log;
}

double predictive_rmse(const LatentOdeModel& model, const SpiralDataset& data,
                       const SolveConfig& cfg) {
  double acc = 0.0;
  long count = 0;
  const int h = static_cast<int>(data.horizon_times.size());
  for (int k = 0; k < data.trajectory_count(); ++k) {
    EncodeResult enc = encode(model, data.obs[k], data.times[k]);
    std::vector<double> eval_times;
    eval_times.push_back(data.times[k].front());
    for (double t : data.horizon_times) eval_times.push_back(t);
    Tensor pred = decode_trajectory(model, enc.mu, eval_times, cfg);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < model.cfg.obs_dim; ++j) {
        const double diff = pred.at(i + 1, j) - data.horizon_truth[k].at(i, j);
        acc += diff * diff;
        ++count;
      }
  }
  return std::sqrt(acc / static_cast<double>(count));
}

// --- RNN baseline -----------------------------------------------------------------

RnnPredictor make_rnn_predictor(int obs_dim, int hidden, bool with_time_gaps,
                                RngState& rng) {
  RnnPredictor m;
  m.obs_dim = obs_dim;
  m.with_time_gaps = with_time_gaps;
  m.gru = {m.input_dim(), hidden};
  const int head = obs_dim * hidden + obs_dim;
  m.theta = Tensor({gru_param_count(m.gru) + head});
  gru_init(m.gru, m.theta.data(), rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int i = gru_param_count(m.gru); i < m.theta.size(); ++i)
    m.theta[i] = rng.uniform(-bound, bound);
  m.log_obs_std = std::log(0.1);
  return m;
}

namespace {
Tensor rnn_input(const RnnPredictor& model, const Tensor& obs, int i, double dt) {
  Tensor x({model.input_dim()});
  for (int j = 0; j < model.obs_dim; ++j) x[j] = obs.at(i, j);
  if (model.with_time_gaps) x[model.obs_dim] = dt;
  return x;
}

Tensor rnn_head(const RnnPredictor& model, const Tensor& h) {
  const double* head = model.theta.data() + model.head_offset();
  const int H = model.gru.hidden;
  Tensor out({model.obs_dim});
  for (int j = 0; j < model.obs_dim; ++j) {
    double s = head[model.obs_dim * H + j];
    for (int i = 0; i < H; ++i) s += head[j * H + i] * h[i];
    out[j] = s;
  }
  return out;
}
}  // namespace

double rnn_nll(const RnnPredictor& model, const Tensor& obs,
               const std::vector<double>& times, RnnGrads* grads) {
  const int n = static_cast<int>(times.size());
  if (n < 2) throw std::invalid_argument("rnn_nll: need at least two observations");
  const int H = model.gru.hidden;
  const double sig = std::exp(model.log_obs_std);
  const double inv_var = 1.0 / (sig * sig);

  std::vector<GruStepCache> caches(n - 1);
  std::vector<Tensor> hs(n - 1);
  Tensor h({H});
  double nll = 0.0;
  const double norm = 1.0 / ((n - 1) * model.obs_dim);
  for (int i = 0; i < n - 1; ++i) {
    Tensor x = rnn_input(model, obs, i, times[i + 1] - times[i]);
    h = gru_step(model.gru, model.theta.data(), x, h, &caches[i]);
    hs[i] = h;
    Tensor pred = rnn_head(model, h);
    for (int j = 0; j < model.obs_dim; ++j) {
      const double diff = obs.at(i + 1, j) - pred[j];
      nll += norm * (0.5 * kLog2Pi + model.log_obs_std + 0.5 * diff * diff * inv_var);
    }
  }
  if (!grads) return nll;

  grads->theta = Tensor({model.theta.size()});
  grads->d_log_obs_std = 0.0;
  double* ghead = grads->theta.data() + model.head_offset();
  const double* head = model.theta.data() + model.head_offset();
  Tensor gh({H});
  for (int i = n - 2; i >= 0; --i) {
    Tensor pred = rnn_head(model, hs[i]);
    for (int j = 0; j < model.obs_dim; ++j) {
      const double diff = obs.at(i + 1, j) - pred[j];
      const double gout = -norm * diff * inv_var;  // d nll / d pred_j
      for (int k = 0; k < H; ++k) {
        ghead[j * H + k] += gout * hs[i][k];
        gh[k] += gout * head[j * H + k];
      }
      ghead[model.obs_dim * H + j] += gout;
      grads->d_log_obs_std += norm * (1.0 - diff * diff * inv_var);
    }
    gh = gru_step_backward(model.gru, model.theta.data(), caches[i], gh,
                           grads->theta.data());
  }
  return nll;
}

LatentTrainLog train_rnn_baseline(RnnPredictor& model, const SpiralDataset& data,
                                  int epochs, const AdamConfig& opt, RngState& rng) {
  (void)rng;  // deterministic pass order; kept for interface symmetry
  LatentTrainLog log;
  Tensor theta = model.theta;
  Tensor noise = Tensor::vec({model.log_obs_std});
  AdamState s_theta = adam_init(opt, theta);
  AdamState s_noise = adam_init(opt, noise);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    double total = 0.0;
    for (int k = 0; k < data.trajectory_count(); ++k) {
      RnnGrads g;
      const double nll = rnn_nll(model, data.obs[k], data.times[k], &g);
      if (!std::isfinite(nll))
        throw DivergenceError("rnn training diverged at epoch " + std::to_string(epoch));
      total += nll;
      std::tie(s_theta, theta) = adam_step(std::move(s_theta), std::move(theta), g.theta);
      std::tie(s_noise, noise) = adam_step(std::move(s_noise), std::move(noise),
                                           Tensor::vec({g.d_log_obs_std}));
      model.theta = theta;
      model.log_obs_std = noise[0];
    }
    log.records.push_back({epoch, -total / data.trajectory_count(), 0, 0});
  }
  return log;
}

double rnn_predictive_rmse(const RnnPredictor& model, const SpiralDataset& data) {
  double acc = 0.0;
  long count = 0;
  const int hN = static_cast<int>(data.horizon_times.size());
  for (int k = 0; k < data.trajectory_count(); ++k) {
    const auto& times = data.times[k];
    const int n = static_cast<int>(times.size());
    Tensor h({model.gru.hidden});
    // warm up on the observed prefix
    for (int i = 0; i < n; ++i) {
      const double dt = (i + 1 < n ? times[i + 1] : data.horizon_times.front()) - times[i];
      Tensor x = rnn_input(model, data.obs[k], i, dt);
      h = gru_step(model.gru, model.theta.data(), x, h);
    }
    // roll out over the horizon feeding predictions back
    Tensor cur = rnn_head(model, h);
    for (int i = 0; i < hN; ++i) {
      for (int j = 0; j < model.obs_dim; ++j) {
        const double diff = cur[j] - data.horizon_truth[k].at(i, j);
        acc += diff * diff;
        ++count;
      }
      if (i + 1 < hN) {
        Tensor x({model.input_dim()});
        for (int j = 0; j < model.obs_dim; ++j) x[j] = cur[j];
        if (model.with_time_gaps)
          x[model.obs_dim] = data.horizon_times[i + 1] - data.horizon_times[i];
        h = gru_step(model.gru, model.theta.data(), x, h);
        cur = rnn_head(model, h);
      }
    }
  }
  return std::sqrt(acc / static_cast<double>(count));
}

// --- Poisson rate -------------------------------------------------------------------

PoissonRateModel::PoissonRateModel(int latent_dim, int hidden, RngState& rng) {
  spec_.sizes = {latent_dim, hidden, 1};
  theta_ = Tensor({mlp_param_count(spec_)});
  mlp_init(spec_, theta_.data(), rng);
}

void PoissonRateModel::set_params(const Tensor& theta) {
  if (theta.size() != theta_.size())
    throw DimensionError("PoissonRateModel: param size mismatch");
  theta_ = theta;
}

double PoissonRateModel::rate(const Tensor& z) const {
  Tensor raw = mlp_forward(spec_, theta_.data(), z);
  return softplus_scalar(raw[0]);
}

Tensor PoissonRateModel::rate_vjp(const Tensor& z, double a, double* gtheta) const {
  std::vector<Tensor> acts;
  Tensor raw = mlp_forward(spec_, theta_.data(), z, &acts);
  const double gout = a * sigmoid_scalar(raw[0]);  // softplus' = sigmoid
  return mlp_backward(spec_, theta_.data(), acts, Tensor::vec({gout}), gtheta);
}

Tensor PoissonSystem::eval(const Tensor& s, double t) const {
  const int d = f_->state_dim();
  if (s.size() != d + 1) throw DimensionError("PoissonSystem: state size mismatch");
  Tensor z({d});
  for (int i = 0; i < d; ++i) z[i] = s[i];
  Tensor dz = f_->eval(z, t);
  Tensor out({d + 1});
  for (int i = 0; i < d; ++i) out[i] = dz[i];
  out[d] = rate_->rate(z);
  return out;
}

VjpResult PoissonSystem::vjp(const Tensor& s, double t, const Tensor& a) const {
  const int d = f_->state_dim();
  if (s.size() != d + 1 || a.size() != d + 1)
    throw DimensionError("PoissonSystem: vjp size mismatch");
  Tensor z({d}), az({d});
  for (int i = 0; i < d; ++i) {
    z[i] = s[i];
    az[i] = a[i];
  }
  VjpResult v = f_->vjp(z, t, az);
  VjpResult r;
  r.vjp_z = Tensor({d + 1});
  r.vjp_theta = Tensor({param_count()});
  for (int i = 0; i < f_->param_count(); ++i) r.vjp_theta[i] = v.vjp_theta[i];
  Tensor gz_rate = rate_->rate_vjp(z, a[d], r.vjp_theta.data() + f_->param_count());
  for (int i = 0; i < d; ++i) r.vjp_z[i] = v.vjp_z[i] + gz_rate[i];
  r.vjp_z[d] = 0.0;  // the field ignores the accumulated integral
  r.vjp_t = v.vjp_t;
  return r;
}

double poisson_loglik(const PoissonRateModel& rate, const DynamicsFunc& f,
                      const Tensor& z0, const std::vector<double>& events, double t_start,
                      double t_end, const SolveConfig& cfg, PoissonGrads* grads) {
  if (!(t_end > t_start)) throw std::invalid_argument("poisson_loglik: t_end > t_start");
  for (size_t i = 0; i < events.size(); ++i) {
    if (events[i] < t_start || events[i] > t_end)
      throw std::invalid_argument("poisson_loglik: event outside the interval");
    if (i > 0 && !(events[i] > events[i - 1]))
      throw std::invalid_argument("poisson_loglik: events must be strictly ascending");
  }
  const int d = f.state_dim();
  if (z0.size() != d) throw DimensionError("poisson_loglik: z0 size mismatch");

  // merged solve grid: start, events, end (deduplicated)
  std::vector<double> grid;
  std::vector<int> event_pos(events.size());
  grid.push_back(t_start);
  for (size_t i = 0; i < events.size(); ++i) {
    if (events[i] > grid.back()) grid.push_back(events[i]);
    event_pos[i] = static_cast<int>(grid.size()) - 1;
  }
  if (t_end > grid.back()) grid.push_back(t_end);

  PoissonSystem system(f, rate);
  Tensor s0({d + 1});
  for (int i = 0; i < d; ++i) s0[i] = z0[i];

  double loglik = 0.0;
  Trajectory traj = solve_at_times(system, s0, grid, cfg);
  const double integral = traj.final_state()[d];

  std::vector<Tensor> seeds;
  if (grads) seeds.assign(grid.size(), Tensor({d + 1}));
  Tensor d_rate_direct({rate.param_count()});

  for (size_t i = 0; i < events.size(); ++i) {
    const Tensor& s = traj.states[event_pos[i]];
    Tensor z({d});
    for (int j = 0; j < d; ++j) z[j] = s[j];
    const double lam = rate.rate(z);
    loglik += std::log(lam);
    if (grads) {
      Tensor gz = rate.rate_vjp(z, 1.0 / lam, d_rate_direct.data());
      for (int j = 0; j < d; ++j) seeds[event_pos[i]][j] += gz[j];
    }
  }
  loglik -= integral;

  if (grads) {
    seeds.back()[d] = -1.0;  // d loglik / d Lambda(t_end)
    GradientBundle bundle = backward_gradients_multi(system, traj, seeds, cfg);
    grads->d_dynamics = Tensor({f.param_count()});
    grads->d_rate = d_rate_direct;
    for (int i = 0; i < f.param_count(); ++i) grads->d_dynamics[i] = bundle.d_theta[i];
    for (int i = 0; i < rate.param_count(); ++i)
      grads->d_rate[i] += bundle.d_theta[f.param_count() + i];
    grads->d_z0 = Tensor({d});
    for (int i = 0; i < d; ++i) grads->d_z0[i] = bundle.d_z0[i];
  }
  return loglik;
}

}  // namespace odegrad
