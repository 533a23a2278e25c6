#include "odegrad/cnf.hpp"

#include <cmath>

namespace odegrad {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

Tensor row(const Tensor& m, int r) {
  const int d = m.cols();
  Tensor out({d});
  for (int j = 0; j < d; ++j) out[j] = m.at(r, j);
  return out;
}

}  // namespace

double log_std_normal(const Tensor& z) {
  return -0.5 * z.size() * kLog2Pi - 0.5 * dot(z, z);
}

FlowState flow_dynamics(const CnfModel& model, const FlowState& s, double t) {
  FlowState d;
  d.z = model.dynamics.eval(s.z, t);
  d.delta_logp = -model.dynamics.jacobian_trace(s.z, t);
  return d;
}

Tensor FlowSystem::eval(const Tensor& s, double t) const {
  const int d = f_->state_dim();
  if (s.size() != d + 1) throw DimensionError("FlowSystem: state size mismatch");
  Tensor z({d});
  for (int i = 0; i < d; ++i) z[i] = s[i];
  Tensor dz = f_->eval(z, t);
  Tensor out({d + 1});
  for (int i = 0; i < d; ++i) out[i] = dz[i];
  out[d] = -f_->jacobian_trace(z, t);
  return out;
}

VjpResult FlowSystem::vjp(const Tensor& s, double t, const Tensor& a) const {
  const int d = f_->state_dim();
  if (s.size() != d + 1 || a.size() != d + 1)
    throw DimensionError("FlowSystem: vjp size mismatch");
  Tensor z({d}), az({d});
  for (int i = 0; i < d; ++i) {
    z[i] = s[i];
    az[i] = a[i];
  }
  const double al = a[d];
  VjpResult v = f_->vjp(z, t, az);
  VjpResult tg = f_->trace_grad(z, t);
  VjpResult r;
  r.vjp_z = Tensor({d + 1});
  for (int i = 0; i < d; ++i) r.vjp_z[i] = v.vjp_z[i] - al * tg.vjp_z[i];
  // the field does not depend on the accumulated delta_logp
  r.vjp_z[d] = 0.0;
  r.vjp_theta = std::move(v.vjp_theta);
  r.vjp_theta.axpy(-al, tg.vjp_theta);
  r.vjp_t = v.vjp_t - al * tg.vjp_t;
  return r;
}

SampleResult forward_sample(const CnfModel& model, RngState& rng, int n,
                            const SolveConfig& cfg) {
  if (n < 1) throw std::invalid_argument("forward_sample: n >= 1");
  Tensor eps = gaussian_sample(rng, {n, model.dim()}, 0.0, 1.0);
  return forward_sample_from(model, eps, cfg);
}

SampleResult forward_sample_from(const CnfModel& model, const Tensor& eps,
                                 const SolveConfig& cfg) {
  const int d = model.dim();
  if (eps.ndim() != 2 || eps.cols() != d)
    throw DimensionError("forward_sample_from: eps must be n x dim");
  const int n = eps.rows();
  FlowSystem flow(model.dynamics);
  SampleResult out;
  out.samples = Tensor({n, d});
  out.logq = Tensor({n});
  for (int i = 0; i < n; ++i) {
    Tensor s0({d + 1});
    for (int j = 0; j < d; ++j) s0[j] = eps.at(i, j);
    Trajectory traj = solve(flow, s0, model.t0, model.t1, cfg);
    out.nfe += traj.nfe;
    const Tensor& end = traj.final_state();
    for (int j = 0; j < d; ++j) out.samples.at(i, j) = end[j];
    out.logq[i] = log_std_normal(row(eps, i)) + end[d];
  }
  return out;
}

Tensor log_density(const CnfModel& model, const Tensor& x, const SolveConfig& cfg,
                   long* nfe) {
  const int d = model.dim();
  if (x.ndim() != 2 || x.cols() != d)
    throw DimensionError("log_density: x must be n x dim");
  ensure_finite(x, "log_density input");
  const int n = x.rows();
  FlowSystem flow(model.dynamics);
  Tensor out({n});
  long evals = 0;
  for (int i = 0; i < n; ++i) {
    Tensor s0({d + 1});
    for (int j = 0; j < d; ++j) s0[j] = x.at(i, j);
    Trajectory traj = solve(flow, s0, model.t1, model.t0, cfg);
    evals += traj.nfe;
    const Tensor& end = traj.final_state();
    Tensor z0({d});
    for (int j = 0; j < d; ++j) z0[j] = end[j];
    out[i] = log_std_normal(z0) - end[d];
  }
  if (nfe) *nfe = evals;
  return out;
}

// --- targets ---------------------------------------------------------------

double GaussianMixture::log_density(const Tensor& x) const {
  const int d = dim();
  double best = -1e300;
  std::vector<double> logs(weights.size());
  for (size_t k = 0; k < weights.size(); ++k) {
    const double s2 = stds[k] * stds[k];
    double q = 0.0;
    for (int j = 0; j < d; ++j) {
      const double diff = x[j] - means[k][j];
      q += diff * diff;
    }
    logs[k] = std::log(weights[k]) - 0.5 * d * kLog2Pi - d * std::log(stds[k]) -
              0.5 * q / s2;
    best = std::max(best, logs[k]);
  }
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - best);
  return best + std::log(acc);
}

Tensor GaussianMixture::log_density_grad(const Tensor& x) const {
  const int d = dim();
  const double total = log_density(x);
  Tensor grad({d});
  for (size_t k = 0; k < weights.size(); ++k) {
    const double s2 = stds[k] * stds[k];
    double q = 0.0;
    for (int j = 0; j < d; ++j) {
      const double diff = x[j] - means[k][j];
      q += diff * diff;
    }
    const double logk = std::log(weights[k]) - 0.5 * d * kLog2Pi -
                        d * std::log(stds[k]) - 0.5 * q / s2;
    const double resp = std::exp(logk - total);
    for (int j = 0; j < d; ++j) grad[j] += resp * (-(x[j] - means[k][j]) / s2);
  }
  return grad;
}

Tensor GaussianMixture::sample(RngState& rng, int n) const {
  const int d = dim();
  Tensor out({n, d});
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    size_t k = 0;
    double acc = 0.0;
    for (; k + 1 < weights.size(); ++k) {
      acc += weights[k];
      if (u < acc) break;
    }
    for (int j = 0; j < d; ++j) out.at(i, j) = means[k][j] + stds[k] * rng.normal();
  }
  return out;
}

double Dataset2D::log_density(const Tensor& x) const {
  if (!has_exact_density())
    throw std::invalid_argument("dataset '" + name + "' has no exact density");
  return mixture.log_density(x);
}

Tensor Dataset2D::log_density_grad(const Tensor& x) const {
  if (!has_exact_density())
    throw std::invalid_argument("dataset '" + name + "' has no exact density");
  return mixture.log_density_grad(x);
}

Tensor Dataset2D::sample(RngState& rng, int n) const {
  if (n < 1) throw std::invalid_argument("dataset sample: n >= 1");
  switch (kind) {
    case DatasetKind::Mixture:
      return mixture.sample(rng, n);
    case DatasetKind::TwoCircles: {
      Tensor out({n, 2});
      for (int i = 0; i < n; ++i) {
        const double base = rng.uniform() < 0.5 ? 1.0 : 2.5;
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        const double r = base + 0.08 * rng.normal();
        out.at(i, 0) = r * std::cos(phi);
        out.at(i, 1) = r * std::sin(phi);
      }
      return out;
    }
    case DatasetKind::TwoMoons: {
      Tensor out({n, 2});
      for (int i = 0; i < n; ++i) {
        const bool second = rng.uniform() < 0.5;
        const double phi = rng.uniform(0.0, M_PI);
        double x = std::cos(phi), y = std::sin(phi);
        if (second) {
          x = 1.0 - x;
          y = 0.5 - y;
        }
        out.at(i, 0) = x + 0.08 * rng.normal();
        out.at(i, 1) = y + 0.08 * rng.normal();
      }
      return out;
    }
  }
  throw std::logic_error("unreachable dataset kind");
}

Dataset2D make_dataset_spec(const std::string& name) {
  Dataset2D d;
  d.name = name;
  if (name == "two_circles") {
    d.kind = DatasetKind::TwoCircles;
  } else if (name == "two_moons") {
    d.kind = DatasetKind::TwoMoons;
  } else if (name == "gaussian_mixture") {
    d.kind = DatasetKind::Mixture;
    d.mixture.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    d.mixture.means = {Tensor::vec({2.0, 0.0}), Tensor::vec({-1.0, 1.5}),
                       Tensor::vec({-1.0, -1.5})};
    d.mixture.stds = {0.5, 0.5, 0.5};
  } else {
    throw std::invalid_argument("unknown dataset: " + name);
  }
  return d;
}

Dataset2D make_mixture_dataset(GaussianMixture mixture) {
  Dataset2D d;
  d.name = "gaussian_mixture";
  d.kind = DatasetKind::Mixture;
  d.mixture = std::move(mixture);
  return d;
}

Tensor make_dataset(const std::string& name, RngState& rng, int n) {
  return make_dataset_spec(name).sample(rng, n);
}

std::pair<Tensor, std::vector<int>> make_two_circles_labeled(RngState& rng, int n) {
  Tensor pts({n, 2});
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    const bool outer = rng.uniform() < 0.5;
    const double base = outer ? 2.5 : 1.0;
    const double phi = rng.uniform(0.0, 2.0 * M_PI);
    const double r = base + 0.08 * rng.normal();
    pts.at(i, 0) = r * std::cos(phi);
    pts.at(i, 1) = r * std::sin(phi);
    labels[i] = outer ? 1 : 0;
  }
  return {std::move(pts), std::move(labels)};
}

// --- losses -----------------------------------------------------------------

double kl_density_matching_loss(const CnfModel& model, const Dataset2D& target,
                                const Tensor& eps, const SolveConfig& cfg,
                                Tensor* grad_theta, long* nfe_f, long* nfe_b) {
  if (!target.has_exact_density())
    throw std::invalid_argument("density matching needs a target with an exact density");
  const int d = model.dim();
  if (eps.ndim() != 2 || eps.cols() != d)
    throw DimensionError("kl loss: eps must be n x dim");
  const int n = eps.rows();
  FlowSystem flow(model.dynamics);
  BatchedSystem batched(flow, n);

  Tensor s0({n * (d + 1)});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) s0[i * (d + 1) + j] = eps.at(i, j);
  Trajectory traj = solve(batched, s0, model.t0, model.t1, cfg);
  if (nfe_f) *nfe_f = traj.nfe;

  const Tensor& end = traj.final_state();
  double loss = 0.0;
  Tensor seed({n * (d + 1)});
  for (int i = 0; i < n; ++i) {
    Tensor z1({d});
    for (int j = 0; j < d; ++j) z1[j] = end[i * (d + 1) + j];
    const double dlp = end[i * (d + 1) + d];
    loss += log_std_normal(row(eps, i)) + dlp - target.log_density(z1);
    if (grad_theta) {
      Tensor pg = target.log_density_grad(z1);
      for (int j = 0; j < d; ++j) seed[i * (d + 1) + j] = -pg[j] / n;
      seed[i * (d + 1) + d] = 1.0 / n;
    }
  }
  loss /= n;
  if (grad_theta) {
    GradientBundle bundle = backward_gradients(batched, end, model.t0, model.t1, seed, cfg);
    *grad_theta = std::move(bundle.d_theta);
    if (nfe_b) *nfe_b = bundle.nfe;
  }
  return loss;
}

double kl_density_matching_loss(const CnfModel& model, const Dataset2D& target,
                                RngState& rng, int n, const SolveConfig& cfg) {
  Tensor eps = gaussian_sample(rng, {n, model.dim()}, 0.0, 1.0);
  return kl_density_matching_loss(model, target, eps, cfg);
}

double mle_loss(const CnfModel& model, const Tensor& batch, const SolveConfig& cfg,
                Tensor* grad_theta, long* nfe_f, long* nfe_b) {
  const int d = model.dim();
  if (batch.ndim() != 2 || batch.cols() != d)
    throw DimensionError("mle_loss: batch must be n x dim");
  const int n = batch.rows();
  FlowSystem flow(model.dynamics);
  BatchedSystem batched(flow, n);

  Tensor s0({n * (d + 1)});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) s0[i * (d + 1) + j] = batch.at(i, j);
  // data -> base direction
  Trajectory traj = solve(batched, s0, model.t1, model.t0, cfg);
  if (nfe_f) *nfe_f = traj.nfe;

  const Tensor& end = traj.final_state();
  double loss = 0.0;
  Tensor seed({n * (d + 1)});
  for (int i = 0; i < n; ++i) {
    Tensor z0({d});
    for (int j = 0; j < d; ++j) z0[j] = end[i * (d + 1) + j];
    const double acc = end[i * (d + 1) + d];
    loss += -(log_std_normal(z0) - acc);
    if (grad_theta) {
      for (int j = 0; j < d; ++j) seed[i * (d + 1) + j] = z0[j] / n;
      seed[i * (d + 1) + d] = 1.0 / n;
    }
  }
  loss /= n;
  if (grad_theta) {
    GradientBundle bundle = backward_gradients(batched, end, model.t1, model.t0, seed, cfg);
    *grad_theta = std::move(bundle.d_theta);
    if (nfe_b) *nfe_b = bundle.nfe;
  }
  return loss;
}

TrainLog train_cnf(CnfModel& model, CnfTask task, const Dataset2D& data, int iters,
                   int batch_size, const AdamConfig& opt, RngState& rng,
                   const SolveConfig& cfg) {
  TrainLog log;
  Tensor theta = model.dynamics.params();
  AdamState state = adam_init(opt, theta);
  for (int it = 0; it < iters; ++it) {
    Tensor grad;
    long nfe_f = 0, nfe_b = 0;
    double loss = 0.0;
    if (task == CnfTask::DensityMatching) {
      Tensor eps = gaussian_sample(rng, {batch_size, model.dim()}, 0.0, 1.0);
      loss = kl_density_matching_loss(model, data, eps, cfg, &grad, &nfe_f, &nfe_b);
    } else {
      Tensor batch = data.sample(rng, batch_size);
      loss = mle_loss(model, batch, cfg, &grad, &nfe_f, &nfe_b);
    }
    if (!std::isfinite(loss))
      throw DivergenceError("cnf training diverged at iteration " + std::to_string(it));
    std::tie(state, theta) = adam_step(std::move(state), std::move(theta), grad);
    model.dynamics.set_params(theta);
    log.records.push_back({it, loss, nfe_f, nfe_b});
  }
  return log;
}

// --- planar stack baseline ---------------------------------------------------

PlanarNf::PlanarNf(int dim, int layers, RngState& rng) : dim_(dim), layers_(layers) {
  if (layers < 1) throw std::invalid_argument("PlanarNf: layers >= 1");
  const int stride = 2 * dim_ + 1;
  theta_ = Tensor({layers_ * stride});
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim_));
  for (int k = 0; k < layers_; ++k) {
    for (int j = 0; j < 2 * dim_; ++j)
      theta_[k * stride + j] = rng.uniform(-bound, bound);
    theta_[k * stride + 2 * dim_] = 0.0;
  }
}

void PlanarNf::set_params(const Tensor& theta) {
  if (theta.size() != theta_.size()) throw DimensionError("PlanarNf: param size mismatch");
  theta_ = theta;
}

namespace {

// per-layer forward cache for the planar stack backward pass
struct NfLayerCache {
  Tensor z;     // layer input
  Tensor uhat;
  double s = 0.0, h = 0.0, r = 0.0;
  double mprime = 0.0, msw = 0.0, wn2 = 0.0;
};

void nf_layer_forward(const double* p, int d, const Tensor& z, NfLayerCache& c,
                      Tensor& z_out, double& logdet) {
  const double* u = p;
  const double* w = p + d;
  const double b = p[2 * d];
  double suw = 0.0, wn2 = 0.0, s = b;
  for (int j = 0; j < d; ++j) {
    suw += w[j] * u[j];
    wn2 += w[j] * w[j];
    s += w[j] * z[j];
  }
  wn2 = std::max(wn2, 1e-12);  // keep the reparameterization finite at w = 0
  const double m = -1.0 + softplus_scalar(suw);
  c.mprime = sigmoid_scalar(suw);
  c.msw = m - suw;
  c.wn2 = wn2;
  c.z = z;
  c.uhat = Tensor({d});
  for (int j = 0; j < d; ++j) c.uhat[j] = u[j] + c.msw * w[j] / wn2;
  c.s = s;
  c.h = std::tanh(s);
  const double hp = 1.0 - c.h * c.h;
  double uw = 0.0;
  for (int j = 0; j < d; ++j) uw += c.uhat[j] * w[j];
  c.r = 1.0 + hp * uw;
  z_out = z;
  for (int j = 0; j < d; ++j) z_out[j] += c.uhat[j] * c.h;
  logdet = std::log(std::max(std::fabs(c.r), 1e-12));
}

// reverse through one layer; g = dL/dz_out, dlr = dL/dlogdet
Tensor nf_layer_backward(const double* p, int d, const NfLayerCache& c, const Tensor& g,
                         double dlr, double* gp) {
  const double* u = p;
  const double* w = p + d;
  const double hp = 1.0 - c.h * c.h;
  const double hpp = -2.0 * c.h * hp;
  double uw = 0.0;
  for (int j = 0; j < d; ++j) uw += c.uhat[j] * w[j];
  const double inv_r = 1.0 / c.r;

  Tensor guhat({d});
  double g_dot_uhat = 0.0;
  for (int j = 0; j < d; ++j) g_dot_uhat += g[j] * c.uhat[j];
  for (int j = 0; j < d; ++j) guhat[j] = c.h * g[j] + dlr * inv_r * hp * w[j];
  const double gs = g_dot_uhat * hp + dlr * inv_r * hpp * uw;

  Tensor gz = g;
  for (int j = 0; j < d; ++j) gz[j] += gs * w[j];

  // u-hat reparameterization pullback
  double wt_guhat = 0.0;  // (w / |w|^2) . guhat
  for (int j = 0; j < d; ++j) wt_guhat += w[j] * guhat[j] / c.wn2;
  double w_dot_guhat = 0.0;
  for (int j = 0; j < d; ++j) w_dot_guhat += w[j] * guhat[j];

  for (int j = 0; j < d; ++j) {
    const double gu = guhat[j] + (c.mprime - 1.0) * wt_guhat * w[j];
    double gw = dlr * inv_r * hp * c.uhat[j];  // r's direct w dependence
    gw += gs * c.z[j];                         // through s
    gw += (c.mprime - 1.0) * wt_guhat * u[j];  // m - s_uw term
    gw += c.msw * (guhat[j] / c.wn2 - 2.0 * w[j] * w_dot_guhat / (c.wn2 * c.wn2));
    gp[j] += gu;
    gp[d + j] += gw;
  }
  gp[2 * d] += gs;
  return gz;
}

}  // namespace

PlanarNf::Result PlanarNf::forward(const Tensor& eps) const {
  if (eps.ndim() != 2 || eps.cols() != dim_)
    throw DimensionError("PlanarNf::forward: eps must be n x dim");
  const int n = eps.rows();
  const int stride = 2 * dim_ + 1;
  Result out;
  out.samples = Tensor({n, dim_});
  out.logq = Tensor({n});
  for (int i = 0; i < n; ++i) {
    Tensor z = row(eps, i);
    double logq = log_std_normal(z);
    for (int k = 0; k < layers_; ++k) {
      NfLayerCache c;
      Tensor z_next({dim_});
      double logdet = 0.0;
      nf_layer_forward(theta_.data() + k * stride, dim_, z, c, z_next, logdet);
      logq -= logdet;
      z = std::move(z_next);
    }
    for (int j = 0; j < dim_; ++j) out.samples.at(i, j) = z[j];
    out.logq[i] = logq;
  }
  return out;
}

double PlanarNf::kl_loss(const Dataset2D& target, const Tensor& eps, Tensor* grad) const {
  if (!target.has_exact_density())
    throw std::invalid_argument("planar stack: target needs an exact density");
  const int n = eps.rows();
  const int stride = 2 * dim_ + 1;
  if (grad) *grad = Tensor(theta_.shape());
  double loss = 0.0;
  std::vector<NfLayerCache> caches(layers_);
  for (int i = 0; i < n; ++i) {
    Tensor z = row(eps, i);
    double logq = log_std_normal(z);
    for (int k = 0; k < layers_; ++k) {
      Tensor z_next({dim_});
      double logdet = 0.0;
      nf_layer_forward(theta_.data() + k * stride, dim_, z, caches[k], z_next, logdet);
      logq -= logdet;
      z = std::move(z_next);
    }
    loss += logq - target.log_density(z);
    if (grad) {
      Tensor g = target.log_density_grad(z) * (-1.0 / n);
      const double dlr = -1.0 / n;  // each -logdet contributes at weight 1/n
      for (int k = layers_ - 1; k >= 0; --k)
        g = nf_layer_backward(theta_.data() + k * stride, dim_, caches[k], g, dlr,
                              grad->data() + k * stride);
    }
  }
  return loss / n;
}

TrainLog train_planar_nf(PlanarNf& model, const Dataset2D& target, int iters,
                         int batch_size, const RmsPropConfig& opt, RngState& rng) {
  TrainLog log;
  Tensor theta = model.params();
  RmsPropState state = rmsprop_init(opt, theta);
  for (int it = 0; it < iters; ++it) {
    Tensor eps = gaussian_sample(rng, {batch_size, model.dim()}, 0.0, 1.0);
    Tensor grad;
    const double loss = model.kl_loss(target, eps, &grad);
    if (!std::isfinite(loss))
      throw DivergenceError("planar stack training diverged at iteration " +
                            std::to_string(it));
    std::tie(state, theta) = rmsprop_step(std::move(state), std::move(theta), grad);
    model.set_params(theta);
    log.records.push_back({it, loss, 0, 0});
  }
  return log;
}

}  // namespace odegrad
