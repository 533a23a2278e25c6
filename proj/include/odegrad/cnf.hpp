#pragma once

#include <string>
#include <vector>

#include "odegrad/adjoint.hpp"
#include "odegrad/dynamics.hpp"
#include "odegrad/optim.hpp"
#include "odegrad/rng.hpp"
#include "odegrad/solver.hpp"

namespace odegrad {

// (z, accumulated log-density change) pair carried through the flow solve.
// delta_logp is zero at the start of integration.
struct FlowState {
  Tensor z;
  double delta_logp = 0.0;
};

// Density model: a standard-normal base pushed through a vector field over a
// fixed interval, with the log-density correction integrated alongside.
struct CnfModel {
  DynamicsFunc dynamics;
  double t0 = 0.0;
  double t1 = 1.0;

  int dim() const { return dynamics.state_dim(); }
};

// Derivative of the flow state: [f(z,t), -tr(df/dz)].
FlowState flow_dynamics(const CnfModel& model, const FlowState& s, double t);

// The (D+1)-dimensional [z, delta_logp] system as a differentiable field, so
// the standard reverse pass trains through the density correction. Requires
// a dynamics architecture with closed-form trace gradients.
class FlowSystem : public DiffSystem {
 public:
  explicit FlowSystem(const DynamicsFunc& f) : f_(&f) {}
  int state_dim() const override { return f_->state_dim() + 1; }
  int param_count() const override { return f_->param_count(); }
  Tensor eval(const Tensor& s, double t) const override;
  VjpResult vjp(const Tensor& s, double t, const Tensor& a) const override;

 private:
  const DynamicsFunc* f_;
};

double log_std_normal(const Tensor& z);

struct SampleResult {
  Tensor samples;  // n x D
  Tensor logq;     // n
  long nfe = 0;
};

// Draw base noise, integrate t0 -> t1; logq = base log-density + delta_logp.
SampleResult forward_sample(const CnfModel& model, RngState& rng, int n,
                            const SolveConfig& cfg);
SampleResult forward_sample_from(const CnfModel& model, const Tensor& eps,
                                 const SolveConfig& cfg);

// Integrate x backwards t1 -> t0; log q(x) = base log-density at the
// recovered start minus the accumulated change.
Tensor log_density(const CnfModel& model, const Tensor& x, const SolveConfig& cfg,
                   long* nfe = nullptr);

// --- 2-D targets ---------------------------------------------------------

struct GaussianMixture {
  std::vector<double> weights;  // sum to 1
  std::vector<Tensor> means;
  std::vector<double> stds;  // isotropic per component

  int dim() const { return means.empty() ? 0 : means[0].size(); }
  double log_density(const Tensor& x) const;
  Tensor log_density_grad(const Tensor& x) const;
  Tensor sample(RngState& rng, int n) const;
};

enum class DatasetKind { TwoCircles, TwoMoons, Mixture };

struct Dataset2D {
  std::string name;
  DatasetKind kind = DatasetKind::Mixture;
  GaussianMixture mixture;  // exact density available only here

  bool has_exact_density() const { return kind == DatasetKind::Mixture; }
  double log_density(const Tensor& x) const;
  Tensor log_density_grad(const Tensor& x) const;
  Tensor sample(RngState& rng, int n) const;  // n x 2 (or n x dim for mixtures)
};

// two_circles | two_moons | gaussian_mixture (a fixed 3-component default)
Dataset2D make_dataset_spec(const std::string& name);
Dataset2D make_mixture_dataset(GaussianMixture mixture);
Tensor make_dataset(const std::string& name, RngState& rng, int n);
// two_circles points plus which-circle labels (inner = 0, outer = 1)
std::pair<Tensor, std::vector<int>> make_two_circles_labeled(RngState& rng, int n);

// --- losses and training --------------------------------------------------

// Monte-Carlo KL(q || target) up to the target's constant: mean of
// [logq(sample) - log target(sample)] over base draws eps (n x D). Gradients
// flow through a single batched reverse solve.
double kl_density_matching_loss(const CnfModel& model, const Dataset2D& target,
                                const Tensor& eps, const SolveConfig& cfg,
                                Tensor* grad_theta = nullptr, long* nfe_f = nullptr,
                                long* nfe_b = nullptr);
double kl_density_matching_loss(const CnfModel& model, const Dataset2D& target,
                                RngState& rng, int n, const SolveConfig& cfg);

// -mean log q(batch); gradients through the batched reverse solve.
double mle_loss(const CnfModel& model, const Tensor& batch, const SolveConfig& cfg,
                Tensor* grad_theta = nullptr, long* nfe_f = nullptr, long* nfe_b = nullptr);

enum class CnfTask { DensityMatching, Mle };

struct TrainRecord {
  int iter = 0;
  double loss = 0.0;
  long nfe_f = 0;
  long nfe_b = 0;
};

struct TrainLog {
  std::vector<TrainRecord> records;

  double final_loss() const { return records.empty() ? 0.0 : records.back().loss; }
};

// Adam on the dynamics parameters; deterministic under the caller's rng.
// Throws DivergenceError (naming the iteration) if the loss leaves the reals.
TrainLog train_cnf(CnfModel& model, CnfTask task, const Dataset2D& data, int iters,
                   int batch_size, const AdamConfig& opt, RngState& rng,
                   const SolveConfig& cfg);

// --- discrete planar-stack baseline ----------------------------------------

// K stacked planar layers z + u h(w.z + b) with the u-hat reparameterization
// keeping every layer invertible; per-layer log-det in closed form.
class PlanarNf {
 public:
  PlanarNf(int dim, int layers, RngState& rng);

  int dim() const { return dim_; }
  int layer_count() const { return layers_; }
  int param_count() const { return theta_.size(); }
  Tensor params() const { return theta_; }
  void set_params(const Tensor& theta);

  struct Result {
    Tensor samples;  // n x D
    Tensor logq;     // n
  };
  Result forward(const Tensor& eps) const;

  // KL(q || target) via base draws, with reverse-mode gradients.
  double kl_loss(const Dataset2D& target, const Tensor& eps, Tensor* grad = nullptr) const;

 private:
  int dim_ = 0;
  int layers_ = 0;
  Tensor theta_;  // per layer: u (D), w (D), b
};

TrainLog train_planar_nf(PlanarNf& model, const Dataset2D& target, int iters,
                         int batch_size, const RmsPropConfig& opt, RngState& rng);

}  // namespace odegrad
