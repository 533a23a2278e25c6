#include "odegrad/optim.hpp"

#include <cmath>

namespace odegrad {

AdamState adam_init(const AdamConfig& cfg, const Tensor& theta_like) {
  AdamState s;
  s.cfg = cfg;
  s.m = Tensor::zeros(theta_like.shape());
  s.v = Tensor::zeros(theta_like.shape());
  return s;
}

std::pair<AdamState, Tensor> adam_step(AdamState state, Tensor theta, const Tensor& grad) {
  ensure_same_shape(theta, grad, "adam_step");
  ensure_same_shape(state.m, theta, "adam_step: accumulator");
  ++state.step;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (int i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    theta[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
  }
  return {std::move(state), std::move(theta)};
}

RmsPropState rmsprop_init(const RmsPropConfig& cfg, const Tensor& theta_like) {
  RmsPropState s;
  s.cfg = cfg;
  s.sq = Tensor::zeros(theta_like.shape());
  return s;
}

std::pair<RmsPropState, Tensor> rmsprop_step(RmsPropState state, Tensor theta,
                                             const Tensor& grad) {
  ensure_same_shape(theta, grad, "rmsprop_step");
  for (int i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    state.sq[i] = state.cfg.decay * state.sq[i] + (1.0 - state.cfg.decay) * g * g;
    theta[i] -= state.cfg.lr * g / (std::sqrt(state.sq[i]) + state.cfg.eps);
  }
  return {std::move(state), std::move(theta)};
}

}  // namespace odegrad
