#include "odegrad/adjoint.hpp"

#include <cmath>

namespace odegrad {

namespace {

// Reverse-time field over the flat augmented layout.
OdeField make_aug_field(const DiffSystem& f) {
  const int d = f.state_dim();
  const int p = f.param_count();
  return [&f, d, p](const Tensor& flat, double t) {
    Tensor z({d}), a({d});
    for (int i = 0; i < d; ++i) {
      z[i] = flat[i];
      a[i] = flat[d + i];
    }
    Tensor dz = f.eval(z, t);
    VjpResult v = f.vjp(z, t, a);
    Tensor out({2 * d + p + 1});
    for (int i = 0; i < d; ++i) {
      out[i] = dz[i];
      out[d + i] = -v.vjp_z[i];
    }
    for (int i = 0; i < p; ++i) out[2 * d + i] = -v.vjp_theta[i];
    out[2 * d + p] = -v.vjp_t;
    return out;
  };
}

}  // namespace

Tensor pack_augmented(const AugmentedState& s) {
  const int d = s.z.size();
  const int p = s.a_theta.size();
  if (s.a.size() != d) throw DimensionError("pack_augmented: adjoint size mismatch");
  Tensor flat({2 * d + p + 1});
  for (int i = 0; i < d; ++i) {
    flat[i] = s.z[i];
    flat[d + i] = s.a[i];
  }
  for (int i = 0; i < p; ++i) flat[2 * d + i] = s.a_theta[i];
  flat[2 * d + p] = s.a_t;
  return flat;
}

AugmentedState unpack_augmented(const Tensor& flat, int state_dim, int param_count) {
  if (flat.size() != 2 * state_dim + param_count + 1)
    throw DimensionError("unpack_augmented: flat length mismatch");
  AugmentedState s;
  s.z = Tensor({state_dim});
  s.a = Tensor({state_dim});
  s.a_theta = Tensor({param_count});
  for (int i = 0; i < state_dim; ++i) {
    s.z[i] = flat[i];
    s.a[i] = flat[state_dim + i];
  }
  for (int i = 0; i < param_count; ++i) s.a_theta[i] = flat[2 * state_dim + i];
  s.a_t = flat[2 * state_dim + param_count];
  return s;
}

AugmentedState aug_dynamics(const DiffSystem& f, const AugmentedState& s, double t) {
  AugmentedState d;
  d.z = f.eval(s.z, t);
  VjpResult v = f.vjp(s.z, t, s.a);
  d.a = v.vjp_z * -1.0;
  d.a_theta = v.vjp_theta * -1.0;
  d.a_t = -v.vjp_t;
  return d;
}

GradientBundle backward_gradients(const DiffSystem& f, const Tensor& z_t1, double t0,
                                  double t1, const Tensor& dL_dz1, const SolveConfig& cfg,
                                  const Tensor* z0_known) {
  const int d = f.state_dim();
  const int p = f.param_count();
  if (z_t1.size() != d) throw DimensionError("backward_gradients: state size mismatch");
  if (dL_dz1.size() != d)
    throw DimensionError("backward_gradients: loss gradient size mismatch");

  GradientBundle out;
  // dL/dt1 is read off directly, not integrated
  Tensor f1 = f.eval(z_t1, t1);
  out.nfe += 1;
  out.d_t1 = dot(dL_dz1, f1);

  AugmentedState s0;
  s0.z = z_t1;
  s0.a = dL_dz1;
  s0.a_theta = Tensor({p});
  s0.a_t = -out.d_t1;

  Trajectory traj = solve(make_aug_field(f), pack_augmented(s0), t1, t0, cfg);
  out.nfe += traj.nfe;
  AugmentedState end = unpack_augmented(traj.final_state(), d, p);
  out.d_z0 = std::move(end.a);
  out.d_theta = std::move(end.a_theta);
  out.d_t0 = end.a_t;
  out.z0_reconstructed = std::move(end.z);

  if (z0_known != nullptr) {
    const double tol = 100.0 * (cfg.atol + cfg.rtol * norm_inf(*z0_known));
    if (norm_inf(out.z0_reconstructed - *z0_known) > tol) out.reversal_warning = true;
  }
  return out;
}

GradientBundle backward_gradients_multi(const DiffSystem& f, const Trajectory& forward,
                                        const std::vector<Tensor>& dL_dzi,
                                        const SolveConfig& cfg) {
  const int d = f.state_dim();
  const int p = f.param_count();
  const size_t n = forward.times.size();
  if (n < 1) throw std::invalid_argument("backward_gradients_multi: empty trajectory");
  if (dL_dzi.size() != n)
    throw std::invalid_argument(
        "backward_gradients_multi: one loss gradient per observation time required");
  for (size_t i = 1; i < n; ++i)
    if (!(forward.times[i] > forward.times[i - 1]))
      throw std::invalid_argument(
          "backward_gradients_multi: observation times must be strictly ascending");

  GradientBundle out;
  out.d_times.assign(n, 0.0);

  AugmentedState s;
  s.a = dL_dzi[n - 1];
  s.a_theta = Tensor({p});
  s.a_t = 0.0;

  OdeField aug = make_aug_field(f);
  for (size_t i = n - 1; i >= 1; --i) {
    // direct effect of moving observation time t_i
    Tensor fi = f.eval(forward.states[i], forward.times[i]);
    out.nfe += 1;
    out.d_times[i] = dot(fi, dL_dzi[i]);
    s.a_t -= out.d_times[i];
    // restart from the stored forward state, not the reconstruction
    s.z = forward.states[i];
    Trajectory leg =
        solve(aug, pack_augmented(s), forward.times[i], forward.times[i - 1], cfg);
    out.nfe += leg.nfe;
    s = unpack_augmented(leg.final_state(), d, p);
    s.a += dL_dzi[i - 1];
  }
  out.d_times[0] = s.a_t;
  out.d_z0 = std::move(s.a);
  out.d_theta = std::move(s.a_theta);
  out.d_t0 = out.d_times[0];
  out.d_t1 = n >= 2 ? out.d_times[n - 1] : 0.0;
  out.z0_reconstructed = std::move(s.z);
  return out;
}

GradientBundle direct_backprop_rk4(const DiffSystem& f, const Tensor& z0, double t0,
                                   double t1, double h, const Tensor& dL_dz1) {
  if (h <= 0.0) throw std::invalid_argument("direct_backprop_rk4: h must be positive");
  const double span = t1 - t0;
  const long n = std::max<long>(1, static_cast<long>(std::llround(span / h)));
  if (std::fabs(n * h - span) > 1e-9 * std::max(1.0, std::fabs(span)))
    throw std::invalid_argument("direct_backprop_rk4: h must divide t1 - t0");
  const double hs = span / static_cast<double>(n);
  const int d = f.state_dim();
  if (z0.size() != d || dL_dz1.size() != d)
    throw DimensionError("direct_backprop_rk4: size mismatch");

  // unrolled forward pass, all states retained
  std::vector<Tensor> zs;
  zs.reserve(n + 1);
  zs.push_back(z0);
  for (long i = 0; i < n; ++i) {
    const double t = t0 + hs * static_cast<double>(i);
    const Tensor& y = zs.back();
    Tensor k1 = f.eval(y, t);
    Tensor k2 = f.eval(y + k1 * (hs / 2), t + hs / 2);
    Tensor k3 = f.eval(y + k2 * (hs / 2), t + hs / 2);
    Tensor k4 = f.eval(y + k3 * hs, t + hs);
    Tensor next = y;
    next.axpy(hs / 6, k1);
    next.axpy(hs / 3, k2);
    next.axpy(hs / 3, k3);
    next.axpy(hs / 6, k4);
    zs.push_back(std::move(next));
  }

  GradientBundle out;
  Tensor g = dL_dz1;
  Tensor gtheta({f.param_count()});
  for (long i = n - 1; i >= 0; --i) {
    const double t = t0 + hs * static_cast<double>(i);
    const Tensor& y = zs[static_cast<size_t>(i)];
    // recompute the stage geometry of this step
    Tensor k1 = f.eval(y, t);
    Tensor y2 = y + k1 * (hs / 2);
    Tensor k2 = f.eval(y2, t + hs / 2);
    Tensor y3 = y + k2 * (hs / 2);
    Tensor k3 = f.eval(y3, t + hs / 2);
    Tensor y4 = y + k3 * hs;

    Tensor gy = g;
    Tensor gk1 = g * (hs / 6);
    Tensor gk2 = g * (hs / 3);
    Tensor gk3 = g * (hs / 3);
    Tensor gk4 = g * (hs / 6);

    VjpResult v4 = f.vjp(y4, t + hs, gk4);
    gtheta += v4.vjp_theta;
    gy += v4.vjp_z;
    gk3.axpy(hs, v4.vjp_z);

    VjpResult v3 = f.vjp(y3, t + hs / 2, gk3);
    gtheta += v3.vjp_theta;
    gy += v3.vjp_z;
    gk2.axpy(hs / 2, v3.vjp_z);

    VjpResult v2 = f.vjp(y2, t + hs / 2, gk2);
    gtheta += v2.vjp_theta;
    gy += v2.vjp_z;
    gk1.axpy(hs / 2, v2.vjp_z);

    VjpResult v1 = f.vjp(y, t, gk1);
    gtheta += v1.vjp_theta;
    gy += v1.vjp_z;

    g = std::move(gy);
  }
  out.d_z0 = std::move(g);
  out.d_theta = std::move(gtheta);
  out.z0_reconstructed = z0;
  out.nfe = 7 * n;  // 4 forward + 3 recomputed stage evaluations per step
  return out;
}

NfeReport nfe_report(const Trajectory& forward, const Trajectory& backward) {
  return nfe_report(forward.nfe, backward.nfe);
}

NfeReport nfe_report(long nfe_forward, long nfe_backward) {
  NfeReport r;
  r.nfe_forward = nfe_forward;
  r.nfe_backward = nfe_backward;
  r.ratio = nfe_forward > 0
                ? static_cast<double>(nfe_backward) / static_cast<double>(nfe_forward)
                : 0.0;
  return r;
}

}  // namespace odegrad
