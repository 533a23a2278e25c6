#pragma once

#include <utility>

#include "odegrad/tensor.hpp"

namespace odegrad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second-moment accumulators shaped like the parameter tensor.
struct AdamState {
  AdamConfig cfg;
  long step = 0;
  Tensor m;
  Tensor v;
};

AdamState adam_init(const AdamConfig& cfg, const Tensor& theta_like);

// One bias-corrected update; returns the advanced state and new parameters.
std::pair<AdamState, Tensor> adam_step(AdamState state, Tensor theta, const Tensor& grad);

struct RmsPropConfig {
  double lr = 1e-4;
  double decay = 0.99;
  double eps = 1e-8;
};

struct RmsPropState {
  RmsPropConfig cfg;
  Tensor sq;  // running mean of squared gradients
};

RmsPropState rmsprop_init(const RmsPropConfig& cfg, const Tensor& theta_like);

std::pair<RmsPropState, Tensor> rmsprop_step(RmsPropState state, Tensor theta,
                                             const Tensor& grad);

}  // namespace odegrad
