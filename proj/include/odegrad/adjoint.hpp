#pragma once

#include <vector>

#include "odegrad/dynamics.hpp"
#include "odegrad/solver.hpp"
#include "odegrad/tensor.hpp"

namespace odegrad {

// State of the reverse-time system: the recomputed trajectory z, the loss
// sensitivity a = dL/dz(t), and the running parameter / time sensitivities.
struct AugmentedState {
  Tensor z;
  Tensor a;
  Tensor a_theta;
  double a_t = 0.0;
};

// Flat layout [z, a, a_theta, a_t], length 2D + P + 1; pack/unpack round-trip
// exactly.
Tensor pack_augmented(const AugmentedState& s);
AugmentedState unpack_augmented(const Tensor& flat, int state_dim, int param_count);

// Time derivative of the augmented state: [f, -a^T df/dz, -a^T df/dtheta,
// -a^T df/dt]. One eval and one vjp per call.
AugmentedState aug_dynamics(const DiffSystem& f, const AugmentedState& s, double t);

struct GradientBundle {
  Tensor d_z0;
  Tensor d_theta;
  double d_t0 = 0.0;
  double d_t1 = 0.0;
  // per-observation time gradients (multi-observation path only)
  std::vector<double> d_times;
  // trajectory endpoint recomputed by the reverse solve
  Tensor z0_reconstructed;
  // set when the recomputed initial state drifted past 100x tolerance from
  // the known forward one
  bool reversal_warning = false;
  long nfe = 0;
};

// Gradients of a scalar loss read at z(t1) with respect to z(t0), theta, t0
// and t1, obtained from a single reverse-time solve of the augmented system.
// z is recomputed backwards alongside the adjoint; pass the known initial
// state to arm the reversal-consistency check.
GradientBundle backward_gradients(const DiffSystem& f, const Tensor& z_t1, double t0,
                                  double t1, const Tensor& dL_dz1, const SolveConfig& cfg,
                                  const Tensor* z0_known = nullptr);

// Loss touching several observation times: runs the reverse solve interval by
// interval, injecting each dL/dz(t_i) at its boundary. forward.times must be
// strictly ascending with one loss-gradient tensor per time. d_times[i] holds
// dL/dt_i; d_times[0] is the initial-time gradient.
GradientBundle backward_gradients_multi(const DiffSystem& f, const Trajectory& forward,
                                        const std::vector<Tensor>& dL_dzi,
                                        const SolveConfig& cfg);

// Discrete-adjoint oracle: exact reverse-mode differentiation of the unrolled
// fixed-step classical Runge-Kutta recursion (stores every step; memory grows
// with step count). Only d_z0 and d_theta are produced.
GradientBundle direct_backprop_rk4(const DiffSystem& f, const Tensor& z0, double t0,
                                   double t1, double h, const Tensor& dL_dz1);

struct NfeReport {
  long nfe_forward = 0;
  long nfe_backward = 0;
  double ratio = 0.0;  // backward / forward
};

NfeReport nfe_report(const Trajectory& forward, const Trajectory& backward);
NfeReport nfe_report(long nfe_forward, long nfe_backward);

}  // namespace odegrad
