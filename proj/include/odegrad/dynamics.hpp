#pragma once

#include <string>
#include <vector>

#include "odegrad/rng.hpp"
#include "odegrad/tensor.hpp"

namespace odegrad {

// Reverse-mode products of a vector a against the Jacobians of a field
// f(z, t, theta): a^T df/dz, a^T df/dtheta, a^T df/dt.
struct VjpResult {
  Tensor vjp_z;
  Tensor vjp_theta;
  double vjp_t = 0.0;
};

// Minimal contract the reverse-pass machinery needs from a vector field:
// evaluation plus exact vector-Jacobian products against state, parameters
// and time.
class DiffSystem {
 public:
  virtual ~DiffSystem() = default;
  virtual int state_dim() const = 0;
  virtual int param_count() const = 0;
  virtual Tensor eval(const Tensor& z, double t) const = 0;
  virtual VjpResult vjp(const Tensor& z, double t, const Tensor& a) const = 0;
};

// n independent copies of a system advancing as one concatenated state, so a
// whole minibatch moves through the solver in a single call. Parameters are
// shared: vjp_theta and vjp_t sum over copies.
class BatchedSystem : public DiffSystem {
 public:
  BatchedSystem(const DiffSystem& base, int copies);
  int state_dim() const override { return base_->state_dim() * copies_; }
  int param_count() const override { return base_->param_count(); }
  Tensor eval(const Tensor& z, double t) const override;
  VjpResult vjp(const Tensor& z, double t, const Tensor& a) const override;

 private:
  const DiffSystem* base_;
  int copies_;
};

enum class Arch { Linear, Mlp, Planar, GatedPlanarSum, HamiltonianSplit };

std::string arch_name(Arch a);

// A parameterized vector field dz/dt = f(z, t, theta) with a fixed, shallow
// topology. All derivatives are hand-derived per architecture, so eval, vjp
// and the Jacobian trace stay allocation-light and exact.
//
// Parameter layouts (row-major):
//   Linear            A (D x D)
//   Mlp               per layer: W (out x in), b (out); tanh hidden, linear
//                     output; when time_dependent, t is appended to the input
//   Planar            u (D), w (D), b (1); f = u * tanh(w.z + b)
//   GatedPlanarSum    per unit: u (D), w (D), b, alpha, beta;
//                     gate_n(t) = sigmoid(alpha_n * t + beta_n)
//   HamiltonianSplit  two tanh MLPs (d -> hidden -> d) acting on the opposite
//                     halves of the state; D must be even
class DynamicsFunc : public DiffSystem {
 public:
  DynamicsFunc() = default;

  Arch arch() const { return arch_; }
  bool time_dependent() const { return time_dependent_; }
  const std::vector<int>& hidden_dims() const { return hidden_; }
  int units() const { return units_; }

  int state_dim() const override { return dim_; }
  int param_count() const override { return theta_.size(); }
  Tensor params() const { return theta_; }
  void set_params(const Tensor& theta);

  Tensor eval(const Tensor& z, double t) const override;
  VjpResult vjp(const Tensor& z, double t, const Tensor& a) const override;

  // Exact tr(df/dz). Closed forms for Linear / Planar / GatedPlanarSum;
  // basis-vector vjp sweep otherwise.
  double jacobian_trace(const Tensor& z, double t) const;

  // Gradients of jacobian_trace w.r.t. (z, theta, t). Available for every
  // architecture with a closed-form trace plus HamiltonianSplit (identically
  // zero); throws std::logic_error for Mlp.
  VjpResult trace_grad(const Tensor& z, double t) const;

  friend DynamicsFunc make_linear(const Tensor& A);
  friend DynamicsFunc make_planar(const Tensor& u, const Tensor& w, double b);
  friend DynamicsFunc build_mlp_dynamics(int input_dim, const std::vector<int>& hidden_dims,
                                         RngState& rng, bool time_dependent, bool zero_init);
  friend DynamicsFunc build_planar(int dim, RngState& rng);
  friend DynamicsFunc build_gated_planar(int dim, int units, RngState& rng);
  friend DynamicsFunc build_hamiltonian(int dim, int hidden, RngState& rng);
  friend void save_dynamics(const std::string& path, const DynamicsFunc& f);
  friend DynamicsFunc load_dynamics(const std::string& path);

 private:
  Tensor eval_mlp(const Tensor& input) const;            // full mlp input (z or [z,t])
  void mlp_layer_sizes(std::vector<int>& sizes) const;   // input..output sizes

  Arch arch_ = Arch::Linear;
  int dim_ = 0;                // state dimension D
  std::vector<int> hidden_;    // Mlp / HamiltonianSplit hidden widths
  int units_ = 0;              // GatedPlanarSum unit count M
  bool time_dependent_ = false;
  Tensor theta_;
};

DynamicsFunc make_linear(const Tensor& A);
DynamicsFunc make_planar(const Tensor& u, const Tensor& w, double b);

// tanh MLP field on R^input_dim; weights uniform in +-1/sqrt(fan_in)
// (zero_init keeps biases/weights at zero for degenerate-case tests).
DynamicsFunc build_mlp_dynamics(int input_dim, const std::vector<int>& hidden_dims,
                                RngState& rng, bool time_dependent = true,
                                bool zero_init = false);
DynamicsFunc build_planar(int dim, RngState& rng);
DynamicsFunc build_gated_planar(int dim, int units, RngState& rng);
DynamicsFunc build_hamiltonian(int dim, int hidden, RngState& rng);

// Central-difference Jacobian, column i = (f(z+eps e_i) - f(z-eps e_i)) / 2eps.
Tensor fd_jacobian(const DiffSystem& f, const Tensor& z, double t, double eps = 1e-5);

// Flat binary checkpoint: little-endian header (tag, flags, dims) + theta.
void save_dynamics(const std::string& path, const DynamicsFunc& f);
DynamicsFunc load_dynamics(const std::string& path);

}  // namespace odegrad
