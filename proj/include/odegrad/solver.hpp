#pragma once

#include <functional>
#include <string>
#include <vector>

#include "odegrad/dynamics.hpp"
#include "odegrad/tensor.hpp"

namespace odegrad {

enum class Method { Euler, Rk4, Dopri5 };

Method method_from_name(const std::string& name);
std::string method_name(Method m);

// Per-attempt record of the adaptive controller, for tests that pin the
// acceptance/retry behaviour.
struct StepAudit {
  std::vector<double> attempted_h;
  std::vector<double> err_norm;
  std::vector<bool> accepted;
};

struct SolveConfig {
  Method method = Method::Dopri5;
  double rtol = 1e-6;
  double atol = 1e-6;
  double h = 0.0;        // fixed-step size (Euler/Rk4); must be > 0 there
  double h_init = 0.0;   // Dopri5 initial step; 0 selects automatically
  long max_steps = 100000;
  double safety = 0.9;
  bool record_steps = false;  // keep interior accepted points in the trajectory
  StepAudit* audit = nullptr;
};

// Times and states of one integration, plus the number of dynamics evaluations
// the solver spent producing it.
struct Trajectory {
  std::vector<double> times;
  std::vector<Tensor> states;
  long nfe = 0;

  const Tensor& final_state() const { return states.back(); }
};

using OdeField = std::function<Tensor(const Tensor&, double)>;

// Integrate dz/dt = f(z, t) from t0 to t1 (either direction). The trajectory
// always contains the endpoints; interior accepted steps when
// cfg.record_steps. Dopri5 keeps the scaled RMS error estimate <= 1 at every
// accepted step. Throws DivergenceError past cfg.max_steps and NumericError
// on non-finite states.
Trajectory solve(const OdeField& f, const Tensor& z0, double t0, double t1,
                 const SolveConfig& cfg);
Trajectory solve(const DiffSystem& f, const Tensor& z0, double t0, double t1,
                 const SolveConfig& cfg);

// States at exactly the requested times (strictly monotone, >= 2 entries);
// integration restarts at each requested time.
Trajectory solve_at_times(const OdeField& f, const Tensor& z0,
                          const std::vector<double>& times, const SolveConfig& cfg);
Trajectory solve_at_times(const DiffSystem& f, const Tensor& z0,
                          const std::vector<double>& times, const SolveConfig& cfg);

// Least-squares slope of log(error) vs log(h) against a reference solution.
// Dopri5 here means the fifth-order advance with every step accepted.
double convergence_order(const OdeField& f, const Tensor& z0, double t0, double t1,
                         Method method, const std::vector<double>& step_sizes,
                         const Tensor& z_ref);

// CSV with header t,z_0,...,z_{D-1}; 17 significant digits per value.
void trajectory_to_csv(const Trajectory& traj, const std::string& path);

}  // namespace odegrad
