#include "odegrad/nn.hpp"

#include <cmath>

namespace odegrad {

int mlp_param_count(const MlpSpec& spec) {
  int n = 0;
  for (size_t l = 0; l + 1 < spec.sizes.size(); ++l)
    n += spec.sizes[l + 1] * spec.sizes[l] + spec.sizes[l + 1];
  return n;
}

void mlp_init(const MlpSpec& spec, double* theta, RngState& rng) {
  int off = 0;
  for (size_t l = 0; l + 1 < spec.sizes.size(); ++l) {
    const int fan_in = spec.sizes[l];
    const int fan_out = spec.sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int i = 0; i < fan_out * fan_in + fan_out; ++i)
      theta[off + i] = rng.uniform(-bound, bound);
    off += fan_out * fan_in + fan_out;
  }
}

Tensor mlp_forward(const MlpSpec& spec, const double* theta, const Tensor& input,
                   std::vector<Tensor>* acts) {
  const int layers = static_cast<int>(spec.sizes.size()) - 1;
  if (input.size() != spec.sizes[0]) throw DimensionError("mlp_forward: input size mismatch");
  if (acts) {
    acts->clear();
    acts->push_back(input);
  }
  Tensor x = input;
  int off = 0;
  for (int l = 0; l < layers; ++l) {
    const int in = spec.sizes[l], out = spec.sizes[l + 1];
    Tensor y({out});
    for (int i = 0; i < out; ++i) {
      double s = theta[off + out * in + i];  // bias
      const double* wrow = theta + off + i * in;
      for (int j = 0; j < in; ++j) s += wrow[j] * x[j];
      y[i] = (l + 1 < layers) ? std::tanh(s) : s;
    }
    off += out * in + out;
    x = std::move(y);
    if (acts) acts->push_back(x);
  }
  return x;
}

Tensor mlp_backward(const MlpSpec& spec, const double* theta,
                    const std::vector<Tensor>& acts, const Tensor& gout, double* gtheta) {
  const int layers = static_cast<int>(spec.sizes.size()) - 1;
  std::vector<int> offsets(layers);
  int off = 0;
  for (int l = 0; l < layers; ++l) {
    offsets[l] = off;
    off += spec.sizes[l + 1] * spec.sizes[l] + spec.sizes[l + 1];
  }
  Tensor g = gout;  // gradient w.r.t. the layer's pre-activation
  for (int l = layers - 1; l >= 0; --l) {
    const int in = spec.sizes[l], out = spec.sizes[l + 1];
    const Tensor& x = acts[l];
    double* gW = gtheta + offsets[l];
    double* gb = gtheta + offsets[l] + out * in;
    for (int i = 0; i < out; ++i) {
      const double gi = g[i];
      gb[i] += gi;
      double* grow = gW + i * in;
      for (int j = 0; j < in; ++j) grow[j] += gi * x[j];
    }
    Tensor gx({in});
    const double* W = theta + offsets[l];
    for (int i = 0; i < out; ++i) {
      const double gi = g[i];
      const double* wrow = W + i * in;
      for (int j = 0; j < in; ++j) gx[j] += gi * wrow[j];
    }
    if (l > 0) {
      // acts[l] holds tanh outputs for hidden layers
      for (int j = 0; j < in; ++j) gx[j] *= 1.0 - acts[l][j] * acts[l][j];
    }
    g = std::move(gx);
  }
  return g;
}

}  // namespace odegrad
