#include "odegrad/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace odegrad {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// y5 - y4 coefficients against the seven stages.
constexpr double kErr[7] = {71.0 / 57600,  0.0,          -71.0 / 16695, 71.0 / 1920,
                            -17253.0 / 339200, 22.0 / 525, -1.0 / 40};

Tensor euler_step(const OdeField& f, const Tensor& y, double t, double h, long& nfe) {
  Tensor k = f(y, t);
  ++nfe;
  return y + k * h;
}

Tensor rk4_step(const OdeField& f, const Tensor& y, double t, double h, long& nfe) {
  Tensor k1 = f(y, t);
  Tensor k2 = f(y + k1 * (h / 2), t + h / 2);
  Tensor k3 = f(y + k2 * (h / 2), t + h / 2);
  Tensor k4 = f(y + k3 * h, t + h);
  nfe += 4;
  Tensor out = y;
  out.axpy(h / 6, k1);
  out.axpy(h / 3, k2);
  out.axpy(h / 3, k3);
  out.axpy(h / 6, k4);
  return out;
}

// One fifth-order Dormand-Prince advance (all stages fresh; used by
// convergence_order's fixed-accepted-steps mode).
Tensor dopri5_advance(const OdeField& f, const Tensor& y, double t, double h, long& nfe) {
  Tensor k[7];
  k[0] = f(y, t);
  for (int s = 1; s < 7; ++s) {
    Tensor ys = y;
    for (int j = 0; j < s; ++j)
      if (kA[s][j] != 0.0) ys.axpy(h * kA[s][j], k[j]);
    k[s] = f(ys, t + kC[s] * h);
  }
  nfe += 7;
  Tensor out = y;
  for (int s = 0; s < 6; ++s)
    if (kA[6][s] != 0.0) out.axpy(h * kA[6][s], k[s]);
  return out;
}

double scaled_rms(const Tensor& e, const Tensor& y_old, const Tensor& y_new, double atol,
                  double rtol) {
  double acc = 0.0;
  for (int i = 0; i < e.size(); ++i) {
    const double scale = atol + rtol * std::max(std::fabs(y_old[i]), std::fabs(y_new[i]));
    const double q = e[i] / scale;
    acc += q * q;
  }
  return std::sqrt(acc / e.size());
}

// Automatic initial step (Hairer-style): balance the size of f against the
// tolerance scale, then refine with one Euler trial point.
double initial_step(const OdeField& f, const Tensor& y0, const Tensor& f0, double t0,
                    double dir, double span, double atol, double rtol, long& nfe) {
  auto weighted = [&](const Tensor& v, const Tensor& ref) {
    double acc = 0.0;
    for (int i = 0; i < v.size(); ++i) {
      const double scale = atol + rtol * std::fabs(ref[i]);
      const double q = v[i] / scale;
      acc += q * q;
    }
    return std::sqrt(acc / v.size());
  };
  const double d0 = weighted(y0, y0);
  const double d1 = weighted(f0, y0);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  Tensor y1 = y0 + f0 * (h0 * dir);
  Tensor f1 = f(y1, t0 + h0 * dir);
  ++nfe;
  const double d2 = weighted(f1 - f0, y0) / h0;
  double h1;
  if (std::max(d1, d2) <= 1e-15) {
    h1 = std::max(1e-6, h0 * 1e-3);
  } else {
    h1 = std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
  }
  return std::min({100.0 * h0, h1, span});
}

void check_fixed_cfg(const SolveConfig& cfg) {
  if (cfg.h <= 0.0)
    throw std::invalid_argument("solve: fixed-step method needs cfg.h > 0");
}

Trajectory solve_fixed(const OdeField& f, const Tensor& z0, double t0, double t1,
                       const SolveConfig& cfg) {
  check_fixed_cfg(cfg);
  const double span = std::fabs(t1 - t0);
  long n = static_cast<long>(std::ceil(span / cfg.h - 1e-12));
  n = std::max<long>(n, 1);
  if (n > cfg.max_steps)
    throw DivergenceError("solve: fixed-step count " + std::to_string(n) +
                          " exceeds max_steps");
  const double h = (t1 - t0) / static_cast<double>(n);
  Trajectory traj;
  traj.times.push_back(t0);
  traj.states.push_back(z0);
  Tensor y = z0;
  for (long i = 0; i < n; ++i) {
    const double t = t0 + h * static_cast<double>(i);
    y = (cfg.method == Method::Euler) ? euler_step(f, y, t, h, traj.nfe)
                                      : rk4_step(f, y, t, h, traj.nfe);
    if (!y.all_finite()) throw NumericError("solve: state became non-finite");
    if (cfg.record_steps || i == n - 1) {
      traj.times.push_back(i == n - 1 ? t1 : t + h);
      traj.states.push_back(y);
    }
  }
  return traj;
}

Trajectory solve_dopri5(const OdeField& f, const Tensor& z0, double t0, double t1,
                        const SolveConfig& cfg) {
  if (cfg.rtol <= 0.0 || cfg.atol <= 0.0)
    throw std::invalid_argument("solve: dopri5 needs rtol > 0 and atol > 0");
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::fabs(t1 - t0);

  Trajectory traj;
  traj.times.push_back(t0);
  traj.states.push_back(z0);

  Tensor y = z0;
  double t = t0;
  Tensor k[7];
  k[0] = f(y, t);
  ++traj.nfe;
  if (!k[0].all_finite()) throw NumericError("solve: dynamics returned non-finite values");

  double h = cfg.h_init > 0.0
                 ? std::min(cfg.h_init, span)
                 : initial_step(f, y, k[0], t0, dir, span, cfg.atol, cfg.rtol, traj.nfe);

  long attempts = 0;
  while (dir * (t1 - t) > 0.0) {
    const double remaining = std::fabs(t1 - t);
    h = std::min(h, remaining);
    if (++attempts > cfg.max_steps)
      throw DivergenceError("solve: dopri5 exceeded max_steps = " +
                            std::to_string(cfg.max_steps));
    const double hs = h * dir;
    for (int s = 1; s < 7; ++s) {
      Tensor ys = y;
      for (int j = 0; j < s; ++j)
        if (kA[s][j] != 0.0) ys.axpy(hs * kA[s][j], k[j]);
      k[s] = f(ys, t + kC[s] * hs);
    }
    traj.nfe += 6;
    Tensor y_new = y;
    for (int s = 0; s < 6; ++s)
      if (kA[6][s] != 0.0) y_new.axpy(hs * kA[6][s], k[s]);
    if (!y_new.all_finite()) throw NumericError("solve: state became non-finite");
    Tensor err({y.size()});
    for (int s = 0; s < 7; ++s)
      if (kErr[s] != 0.0) err.axpy(hs * kErr[s], k[s]);
    const double err_norm = scaled_rms(err, y, y_new, cfg.atol, cfg.rtol);

    double factor = err_norm <= 1e-300 ? 5.0
                                       : cfg.safety * std::pow(err_norm, -0.2);
    factor = std::clamp(factor, 0.2, 5.0);

    if (cfg.audit) {
      cfg.audit->attempted_h.push_back(h);
      cfg.audit->err_norm.push_back(err_norm);
      cfg.audit->accepted.push_back(err_norm <= 1.0);
    }

    if (err_norm <= 1.0) {
      t = (remaining <= h * (1.0 + 1e-12)) ? t1 : t + hs;
      y = std::move(y_new);
      k[0] = k[6];  // first-same-as-last
      if (cfg.record_steps || !(dir * (t1 - t) > 0.0)) {
        traj.times.push_back(t);
        traj.states.push_back(y);
      }
      h *= factor;
    } else {
      // rejected: retry from the same point with a strictly smaller step
      h *= std::min(factor, 0.9);
    }
  }
  return traj;
}

}  // namespace

Method method_from_name(const std::string& name) {
  if (name == "euler") return Method::Euler;
  if (name == "rk4") return Method::Rk4;
  if (name == "dopri5") return Method::Dopri5;
  throw std::invalid_argument("unknown solver method: " + name);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Euler: return "euler";
    case Method::Rk4: return "rk4";
    case Method::Dopri5: return "dopri5";
  }
  return "?";
}

Trajectory solve(const OdeField& f, const Tensor& z0, double t0, double t1,
                 const SolveConfig& cfg) {
  if (t0 == t1) throw std::invalid_argument("solve: t0 and t1 must differ");
  ensure_finite(z0, "solve: initial state");
  if (cfg.max_steps < 1) throw std::invalid_argument("solve: max_steps >= 1");
  if (cfg.method == Method::Dopri5) return solve_dopri5(f, z0, t0, t1, cfg);
  return solve_fixed(f, z0, t0, t1, cfg);
}

Trajectory solve(const DiffSystem& f, const Tensor& z0, double t0, double t1,
                 const SolveConfig& cfg) {
  return solve([&f](const Tensor& z, double t) { return f.eval(z, t); }, z0, t0, t1, cfg);
}

Trajectory solve_at_times(const OdeField& f, const Tensor& z0,
                          const std::vector<double>& times, const SolveConfig& cfg) {
  if (times.size() < 2) throw std::invalid_argument("solve_at_times: need >= 2 times");
  const bool increasing = times[1] > times[0];
  for (size_t i = 1; i < times.size(); ++i) {
    const bool step_up = times[i] > times[i - 1];
    if (times[i] == times[i - 1] || step_up != increasing)
      throw std::invalid_argument("solve_at_times: times must be strictly monotone");
  }
  Trajectory out;
  out.times.push_back(times[0]);
  out.states.push_back(z0);
  Tensor y = z0;
  for (size_t i = 1; i < times.size(); ++i) {
    Trajectory leg = solve(f, y, times[i - 1], times[i], cfg);
    out.nfe += leg.nfe;
    y = leg.states.back();
    out.times.push_back(times[i]);
    out.states.push_back(y);
  }
  return out;
}

Trajectory solve_at_times(const DiffSystem& f, const Tensor& z0,
                          const std::vector<double>& times, const SolveConfig& cfg) {
  return solve_at_times([&f](const Tensor& z, double t) { return f.eval(z, t); }, z0, times,
                        cfg);
}

double convergence_order(const OdeField& f, const Tensor& z0, double t0, double t1,
                         Method method, const std::vector<double>& step_sizes,
                         const Tensor& z_ref) {
  if (step_sizes.size() < 2)
    throw std::invalid_argument("convergence_order: need >= 2 step sizes");
  std::vector<double> lx, ly;
  for (double h : step_sizes) {
    const long n = std::max<long>(1, static_cast<long>(std::llround((t1 - t0) / h)));
    const double hh = (t1 - t0) / static_cast<double>(n);
    Tensor y = z0;
    long nfe = 0;
    double t = t0;
    for (long i = 0; i < n; ++i, t = t0 + hh * static_cast<double>(i)) {
      switch (method) {
        case Method::Euler: y = euler_step(f, y, t, hh, nfe); break;
        case Method::Rk4: y = rk4_step(f, y, t, hh, nfe); break;
        case Method::Dopri5: y = dopri5_advance(f, y, t, hh, nfe); break;
      }
    }
    const double err = norm_inf(y - z_ref);
    if (err <= 0.0) continue;  // exact to roundoff; unusable for the fit
    lx.push_back(std::log(std::fabs(hh)));
    ly.push_back(std::log(err));
  }
  if (lx.size() < 2) throw NumericError("convergence_order: too few usable error samples");
  // least-squares slope
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= ly.size();
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return num / den;
}

void trajectory_to_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("trajectory_to_csv: cannot open " + path);
  const int d = traj.states.empty() ? 0 : traj.states[0].size();
  os << "t";
  for (int i = 0; i < d; ++i) os << ",z_" << i;
  os << "\n";
  char buf[64];
  for (size_t r = 0; r < traj.times.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%.17g", traj.times[r]);
    os << buf;
    for (int i = 0; i < d; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj.states[r][i]);
      os << "," << buf;
    }
    os << "\n";
  }
}

}  // namespace odegrad
