#pragma once

#include <string>
#include <vector>

#include "odegrad/adjoint.hpp"
#include "odegrad/dynamics.hpp"
#include "odegrad/nn.hpp"
#include "odegrad/optim.hpp"
#include "odegrad/rng.hpp"
#include "odegrad/solver.hpp"

namespace odegrad {

// --- GRU cell ---------------------------------------------------------------

// Parameters in a flat slice, per gate: W (H x I), U (H x H), b (H);
// update gate, reset gate, candidate — in that order.
struct GruSpec {
  int input = 0;
  int hidden = 0;
};

int gru_param_count(const GruSpec& spec);
void gru_init(const GruSpec& spec, double* theta, RngState& rng);

struct GruStepCache {
  Tensor x, h_prev, zg, rg, hh;
};

Tensor gru_step(const GruSpec& spec, const double* theta, const Tensor& x,
                const Tensor& h_prev, GruStepCache* cache = nullptr);

// Returns dL/dh_prev; accumulates parameter gradients into gtheta and,
// when requested, dL/dx into *gx.
Tensor gru_step_backward(const GruSpec& spec, const double* theta, const GruStepCache& c,
                         const Tensor& gh_out, double* gtheta, Tensor* gx = nullptr);

// --- spiral data --------------------------------------------------------------

// Bi-directional 2-D spirals on per-trajectory observation grids, with the
// noise-free ground truth kept for RMSE evaluation, plus a shared
// extrapolation grid past the training range.
struct SpiralDataset {
  std::vector<std::vector<double>> times;  // per trajectory, ascending
  std::vector<Tensor> obs;                 // |times_i| x 2, noisy
  std::vector<Tensor> truth;               // same grid, noise-free
  std::vector<int> clockwise;              // 1 = clockwise sweep
  std::vector<double> horizon_times;       // shared, beyond the training range
  std::vector<Tensor> horizon_truth;       // per trajectory, |horizon| x 2
  double noise_std = 0.0;

  int trajectory_count() const { return static_cast<int>(obs.size()); }
};

// n_time equally spaced observations per trajectory; half the trajectories
// sweep clockwise. Archimedean radius r = 0.3 + 0.3 * angle, ~2 turns across
// train + horizon, random phase and small center jitter per trajectory.
SpiralDataset generate_spirals(RngState& rng, int n_traj, int n_time, double noise_std);

// Per-trajectory sorted k-subsets of the observation grid, without
// replacement; the horizon block is carried over unchanged.
SpiralDataset subsample(const SpiralDataset& data, RngState& rng, int k);

void spirals_to_csv(const SpiralDataset& data, const std::string& path);

// --- generative model ---------------------------------------------------------

struct LatentOdeConfig {
  int obs_dim = 2;
  int latent_dim = 4;
  int rnn_hidden = 25;
  int dyn_hidden = 20;
  int dec_hidden = 20;
  double init_obs_std = 0.1;
};

// Sequence VAE: GRU recognition over (x, |dt|) consumed last-to-first,
// time-invariant latent dynamics, MLP decoder, learned scalar observation
// noise.
struct LatentOdeModel {
  LatentOdeConfig cfg;
  Tensor enc_theta;        // GRU block + linear readout to (mu, log sigma)
  DynamicsFunc dynamics;   // latent -> latent, no time input
  Tensor dec_theta;
  double log_obs_std = 0.0;

  GruSpec enc_gru() const { return {cfg.obs_dim + 1, cfg.rnn_hidden}; }
  MlpSpec dec_spec() const { return {{cfg.latent_dim, cfg.dec_hidden, cfg.obs_dim}}; }
  int enc_param_count() const;
};

LatentOdeModel make_latent_ode(const LatentOdeConfig& cfg, RngState& rng);

struct EncodeResult {
  Tensor mu;
  Tensor sigma;  // strictly positive
  // forward internals for the backward pass
  std::vector<GruStepCache> caches;
  Tensor h_last;
};

// Posterior parameters from the observation sequence. With backwards=true the
// sequence is consumed from the last observation to the first.
EncodeResult encode(const LatentOdeModel& model, const Tensor& obs,
                    const std::vector<double>& times, bool backwards = true);

Tensor decode_observation(const LatentOdeModel& model, const Tensor& z);

// Latent trajectory through the shared dynamics, decoded pointwise. A single
// time decodes z0 directly; times may extend past the training range.
Tensor decode_trajectory(const LatentOdeModel& model, const Tensor& z0,
                         const std::vector<double>& times, const SolveConfig& cfg);

struct LatentOdeGrads {
  Tensor enc;
  Tensor dyn;
  Tensor dec;
  double d_log_obs_std = 0.0;
};

// Single-sample reparameterized ELBO with a closed-form Gaussian KL term.
// Gradients (of the ELBO, ascent direction) cover every parameter block; the
// dynamics block flows through the multi-observation reverse solve.
double elbo(const LatentOdeModel& model, const Tensor& obs,
            const std::vector<double>& times, RngState& rng, const SolveConfig& cfg,
            LatentOdeGrads* grads = nullptr, long* nfe_f = nullptr, long* nfe_b = nullptr);
double elbo_with_noise(const LatentOdeModel& model, const Tensor& obs,
                       const std::vector<double>& times, const Tensor& eps,
                       const SolveConfig& cfg, LatentOdeGrads* grads = nullptr,
                       long* nfe_f = nullptr, long* nfe_b = nullptr);

struct EpochRecord {
  int epoch = 0;
  double elbo = 0.0;
  long nfe_f = 0;
  long nfe_b = 0;
};

struct LatentTrainLog {
  std::vector<EpochRecord> records;
};

LatentTrainLog train_latent_ode(LatentOdeModel& model, const SpiralDataset& data,
                                int epochs, int batch_size, const AdamConfig& opt,
                                RngState& rng, const SolveConfig& cfg);

// RMSE of decoded means against the noise-free truth on the horizon grid,
// encoding each trajectory from its (possibly irregular) training
// observations via the posterior mean.
double predictive_rmse(const LatentOdeModel& model, const SpiralDataset& data,
                       const SolveConfig& cfg);

// --- next-step RNN baseline ----------------------------------------------------

struct RnnPredictor {
  int obs_dim = 2;
  bool with_time_gaps = true;  // append dt-to-next-observation to the input
  GruSpec gru;
  Tensor theta;  // GRU block + linear head + log sigma handled separately
  double log_obs_std = 0.0;

  int input_dim() const { return obs_dim + (with_time_gaps ? 1 : 0); }
  int head_offset() const { return gru_param_count(gru); }
};

RnnPredictor make_rnn_predictor(int obs_dim, int hidden, bool with_time_gaps,
                                RngState& rng);

struct RnnGrads {
  Tensor theta;
  double d_log_obs_std = 0.0;
};

// Mean next-step negative Gaussian log-likelihood over the sequence.
double rnn_nll(const RnnPredictor& model, const Tensor& obs,
               const std::vector<double>& times, RnnGrads* grads = nullptr);

LatentTrainLog train_rnn_baseline(RnnPredictor& model, const SpiralDataset& data,
                                  int epochs, const AdamConfig& opt, RngState& rng);

// Warm up on the training observations, then predict the horizon grid
// autoregressively; RMSE against the noise-free truth.
double rnn_predictive_rmse(const RnnPredictor& model, const SpiralDataset& data);

// --- event-time likelihood -------------------------------------------------------

// Positive intensity over the latent state: softplus of a small MLP.
class PoissonRateModel {
 public:
  PoissonRateModel() = default;
  PoissonRateModel(int latent_dim, int hidden, RngState& rng);

  int latent_dim() const { return spec_.sizes.empty() ? 0 : spec_.sizes[0]; }
  int param_count() const { return theta_.size(); }
  Tensor params() const { return theta_; }
  void set_params(const Tensor& theta);

  double rate(const Tensor& z) const;
  // accumulate a * d(rate)/d(theta) into gtheta and return a * d(rate)/dz
  Tensor rate_vjp(const Tensor& z, double a, double* gtheta) const;

 private:
  MlpSpec spec_;
  Tensor theta_;
};

// [z, Lambda] with dLambda/dt = rate(z); parameters are the dynamics block
// followed by the rate block.
class PoissonSystem : public DiffSystem {
 public:
  PoissonSystem(const DynamicsFunc& f, const PoissonRateModel& rate)
      : f_(&f), rate_(&rate) {}
  int state_dim() const override { return f_->state_dim() + 1; }
  int param_count() const override { return f_->param_count() + rate_->param_count(); }
  Tensor eval(const Tensor& s, double t) const override;
  VjpResult vjp(const Tensor& s, double t, const Tensor& a) const override;

 private:
  const DynamicsFunc* f_;
  const PoissonRateModel* rate_;
};

struct PoissonGrads {
  Tensor d_dynamics;
  Tensor d_rate;
  Tensor d_z0;
};

// Event-set log-likelihood sum_i log rate(z(t_i)) - integral of the rate,
// with the integral carried as an extra ODE coordinate in the same solve.
// Gradients (of the log-likelihood) are optional.
double poisson_loglik(const PoissonRateModel& rate, const DynamicsFunc& f,
                      const Tensor& z0, const std::vector<double>& events, double t_start,
                      double t_end, const SolveConfig& cfg, PoissonGrads* grads = nullptr);

}  // namespace odegrad
