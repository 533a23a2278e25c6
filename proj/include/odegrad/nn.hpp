#pragma once

#include <vector>

#include "odegrad/rng.hpp"
#include "odegrad/tensor.hpp"

namespace odegrad {

// Fully-connected tanh stack with a linear output layer, parameters viewed
// through a flat slice (per layer: W row-major, then b). Stateless; the
// caller carries activations between forward and backward.
struct MlpSpec {
  std::vector<int> sizes;  // sizes[0] = input dim, sizes.back() = output dim
};

int mlp_param_count(const MlpSpec& spec);

// Weights and biases uniform in +-1/sqrt(fan_in).
void mlp_init(const MlpSpec& spec, double* theta, RngState& rng);

// acts, when given, receives [input, hidden activations..., output].
Tensor mlp_forward(const MlpSpec& spec, const double* theta, const Tensor& input,
                   std::vector<Tensor>* acts = nullptr);

// Accumulates dL/dtheta into gtheta (same layout as theta, may be pre-filled)
// and returns dL/dinput. `acts` must come from mlp_forward on the same input.
Tensor mlp_backward(const MlpSpec& spec, const double* theta,
                    const std::vector<Tensor>& acts, const Tensor& gout, double* gtheta);

}  // namespace odegrad
