#include "odegrad/dynamics.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "odegrad/nn.hpp"

namespace odegrad {

namespace {

// per-unit parameter block of GatedPlanarSum: u (D), w (D), b, alpha, beta
int gated_unit_params(int dim) { return 2 * dim + 3; }

void check_state(const DynamicsFunc& f, const Tensor& z) {
  if (z.size() != f.state_dim())
    throw DimensionError("dynamics: state has size " + std::to_string(z.size()) +
                         ", expected " + std::to_string(f.state_dim()));
}

}  // namespace

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::Linear: return "linear";
    case Arch::Mlp: return "mlp";
    case Arch::Planar: return "planar";
    case Arch::GatedPlanarSum: return "gated_planar_sum";
    case Arch::HamiltonianSplit: return "hamiltonian_split";
  }
  return "?";
}

void DynamicsFunc::set_params(const Tensor& theta) {
  if (theta.size() != theta_.size())
    throw DimensionError("set_params: expected " + std::to_string(theta_.size()) +
                         " parameters, got " + std::to_string(theta.size()));
  theta_ = theta;
}

void DynamicsFunc::mlp_layer_sizes(std::vector<int>& sizes) const {
  sizes.clear();
  sizes.push_back(dim_ + (time_dependent_ ? 1 : 0));
  for (int h : hidden_) sizes.push_back(h);
  sizes.push_back(dim_);
}

Tensor DynamicsFunc::eval(const Tensor& z, double t) const {
  check_state(*this, z);
  Tensor out({dim_});
  switch (arch_) {
    case Arch::Linear: {
      for (int i = 0; i < dim_; ++i) {
        double s = 0.0;
        const double* row = theta_.data() + i * dim_;
        for (int j = 0; j < dim_; ++j) s += row[j] * z[j];
        out[i] = s;
      }
      break;
    }
    case Arch::Mlp: {
      MlpSpec spec;
      mlp_layer_sizes(spec.sizes);
      Tensor input({spec.sizes[0]});
      for (int i = 0; i < dim_; ++i) input[i] = z[i];
      if (time_dependent_) input[dim_] = t;
      out = mlp_forward(spec, theta_.data(), input);
      break;
    }
    case Arch::Planar: {
      const double* u = theta_.data();
      const double* w = theta_.data() + dim_;
      const double b = theta_[2 * dim_];
      double s = b;
      for (int j = 0; j < dim_; ++j) s += w[j] * z[j];
      const double h = std::tanh(s);
      for (int i = 0; i < dim_; ++i) out[i] = u[i] * h;
      break;
    }
    case Arch::GatedPlanarSum: {
      const int stride = gated_unit_params(dim_);
      for (int n = 0; n < units_; ++n) {
        const double* u = theta_.data() + n * stride;
        const double* w = u + dim_;
        const double b = u[2 * dim_];
        const double alpha = u[2 * dim_ + 1];
        const double beta = u[2 * dim_ + 2];
        const double gate = sigmoid_scalar(alpha * t + beta);
        double s = b;
        for (int j = 0; j < dim_; ++j) s += w[j] * z[j];
        const double gh = gate * std::tanh(s);
        for (int i = 0; i < dim_; ++i) out[i] += u[i] * gh;
      }
      break;
    }
    case Arch::HamiltonianSplit: {
      const int d = dim_ / 2;
      MlpSpec half{{d, hidden_[0], d}};
      const int block = mlp_param_count(half);
      Tensor z1({d}), z2({d});
      for (int i = 0; i < d; ++i) {
        z1[i] = z[i];
        z2[i] = z[d + i];
      }
      Tensor top = mlp_forward(half, theta_.data(), z2);
      Tensor bot = mlp_forward(half, theta_.data() + block, z1);
      for (int i = 0; i < d; ++i) {
        out[i] = top[i];
        out[d + i] = bot[i];
      }
      break;
    }
  }
  ensure_finite(out, "dynamics eval");
  return out;
}

VjpResult DynamicsFunc::vjp(const Tensor& z, double t, const Tensor& a) const {
  check_state(*this, z);
  if (a.size() != dim_) throw DimensionError("vjp: adjoint vector size mismatch");
  VjpResult r;
  r.vjp_z = Tensor({dim_});
  r.vjp_theta = Tensor(theta_.shape());
  r.vjp_t = 0.0;
  switch (arch_) {
    case Arch::Linear: {
      // f = A z: a^T df/dz = A^T a, d/dA_ij = a_i z_j
      for (int j = 0; j < dim_; ++j) {
        double s = 0.0;
        for (int i = 0; i < dim_; ++i) s += theta_[i * dim_ + j] * a[i];
        r.vjp_z[j] = s;
      }
      for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j) r.vjp_theta[i * dim_ + j] = a[i] * z[j];
      break;
    }
    case Arch::Mlp: {
      MlpSpec spec;
      mlp_layer_sizes(spec.sizes);
      Tensor input({spec.sizes[0]});
      for (int i = 0; i < dim_; ++i) input[i] = z[i];
      if (time_dependent_) input[dim_] = t;
      std::vector<Tensor> acts;
      mlp_forward(spec, theta_.data(), input, &acts);
      Tensor gin = mlp_backward(spec, theta_.data(), acts, a, r.vjp_theta.data());
      for (int i = 0; i < dim_; ++i) r.vjp_z[i] = gin[i];
      if (time_dependent_) r.vjp_t = gin[dim_];
      break;
    }
    case Arch::Planar: {
      const double* u = theta_.data();
      const double* w = theta_.data() + dim_;
      const double b = theta_[2 * dim_];
      double s = b;
      for (int j = 0; j < dim_; ++j) s += w[j] * z[j];
      const double h = std::tanh(s);
      const double hp = 1.0 - h * h;
      double au = 0.0;
      for (int i = 0; i < dim_; ++i) au += a[i] * u[i];
      for (int j = 0; j < dim_; ++j) {
        r.vjp_z[j] = au * hp * w[j];
        r.vjp_theta[j] = h * a[j];               // d/du
        r.vjp_theta[dim_ + j] = au * hp * z[j];  // d/dw
      }
      r.vjp_theta[2 * dim_] = au * hp;  // d/db
      break;
    }
    case Arch::GatedPlanarSum: {
      const int stride = gated_unit_params(dim_);
      for (int n = 0; n < units_; ++n) {
        const int off = n * stride;
        const double* u = theta_.data() + off;
        const double* w = u + dim_;
        const double b = u[2 * dim_];
        const double alpha = u[2 * dim_ + 1];
        const double beta = u[2 * dim_ + 2];
        const double gate = sigmoid_scalar(alpha * t + beta);
        const double gated = gate * (1.0 - gate);
        double s = b;
        for (int j = 0; j < dim_; ++j) s += w[j] * z[j];
        const double h = std::tanh(s);
        const double hp = 1.0 - h * h;
        double au = 0.0;
        for (int i = 0; i < dim_; ++i) au += a[i] * u[i];
        const double a_fn = au * h;  // a . (u_n h_n), the unit's ungated output
        for (int j = 0; j < dim_; ++j) {
          r.vjp_z[j] += gate * au * hp * w[j];
          r.vjp_theta[off + j] = gate * h * a[j];
          r.vjp_theta[off + dim_ + j] = gate * au * hp * z[j];
        }
        r.vjp_theta[off + 2 * dim_] = gate * au * hp;
        r.vjp_theta[off + 2 * dim_ + 1] = a_fn * gated * t;
        r.vjp_theta[off + 2 * dim_ + 2] = a_fn * gated;
        r.vjp_t += a_fn * gated * alpha;
      }
      break;
    }
    case Arch::HamiltonianSplit: {
      const int d = dim_ / 2;
      MlpSpec half{{d, hidden_[0], d}};
      const int block = mlp_param_count(half);
      Tensor z1({d}), z2({d}), a1({d}), a2({d});
      for (int i = 0; i < d; ++i) {
        z1[i] = z[i];
        z2[i] = z[d + i];
        a1[i] = a[i];
        a2[i] = a[d + i];
      }
      std::vector<Tensor> acts;
      mlp_forward(half, theta_.data(), z2, &acts);
      Tensor gz2 = mlp_backward(half, theta_.data(), acts, a1, r.vjp_theta.data());
      mlp_forward(half, theta_.data() + block, z1, &acts);
      Tensor gz1 =
          mlp_backward(half, theta_.data() + block, acts, a2, r.vjp_theta.data() + block);
      for (int i = 0; i < d; ++i) {
        r.vjp_z[i] = gz1[i];
        r.vjp_z[d + i] = gz2[i];
      }
      break;
    }
  }
  return r;
}

double DynamicsFunc::jacobian_trace(const Tensor& z, double t) const {
  check_state(*this, z);
  switch (arch_) {
    case Arch::Linear: {
      double tr = 0.0;
      for (int i = 0; i < dim_; ++i) tr += theta_[i * dim_ + i];
      return tr;
    }
    case Arch::Planar: {
      const double* u = theta_.data();
      const double* w = theta_.data() + dim_;
      double s = theta_[2 * dim_];
      double uw = 0.0;
      for (int j = 0; j < dim_; ++j) {
        s += w[j] * z[j];
        uw += u[j] * w[j];
      }
      const double h = std::tanh(s);
      return (1.0 - h * h) * uw;
    }
    case Arch::GatedPlanarSum: {
      // trace is linear: sum of per-unit closed forms
      const int stride = gated_unit_params(dim_);
      double tr = 0.0;
      for (int n = 0; n < units_; ++n) {
        const double* u = theta_.data() + n * stride;
        const double* w = u + dim_;
        double s = u[2 * dim_];
        double uw = 0.0;
        for (int j = 0; j < dim_; ++j) {
          s += w[j] * z[j];
          uw += u[j] * w[j];
        }
        const double gate = sigmoid_scalar(u[2 * dim_ + 1] * t + u[2 * dim_ + 2]);
        const double h = std::tanh(s);
        tr += gate * (1.0 - h * h) * uw;
      }
      return tr;
    }
    case Arch::Mlp:
    case Arch::HamiltonianSplit: {
      // sum_i e_i^T (df/dz) e_i via one basis vjp per coordinate
      double tr = 0.0;
      Tensor e({dim_});
      for (int i = 0; i < dim_; ++i) {
        e.fill(0.0);
        e[i] = 1.0;
        tr += vjp(z, t, e).vjp_z[i];
      }
      return tr;
    }
  }
  return 0.0;
}

VjpResult DynamicsFunc::trace_grad(const Tensor& z, double t) const {
  check_state(*this, z);
  VjpResult r;
  r.vjp_z = Tensor({dim_});
  r.vjp_theta = Tensor(theta_.shape());
  r.vjp_t = 0.0;
  switch (arch_) {
    case Arch::Linear: {
      for (int i = 0; i < dim_; ++i) r.vjp_theta[i * dim_ + i] = 1.0;
      break;
    }
    case Arch::HamiltonianSplit:
      // trace identically zero
      break;
    case Arch::Planar: {
      const double* u = theta_.data();
      const double* w = theta_.data() + dim_;
      double s = theta_[2 * dim_];
      double uw = 0.0;
      for (int j = 0; j < dim_; ++j) {
        s += w[j] * z[j];
        uw += u[j] * w[j];
      }
      const double h = std::tanh(s);
      const double hp = 1.0 - h * h;
      const double hpp = -2.0 * h * hp;
      for (int j = 0; j < dim_; ++j) {
        r.vjp_z[j] = hpp * uw * w[j];
        r.vjp_theta[j] = hp * w[j];                          // d/du
        r.vjp_theta[dim_ + j] = hp * u[j] + hpp * uw * z[j];  // d/dw
      }
      r.vjp_theta[2 * dim_] = hpp * uw;  // d/db
      break;
    }
    case Arch::GatedPlanarSum: {
      const int stride = gated_unit_params(dim_);
      for (int n = 0; n < units_; ++n) {
        const int off = n * stride;
        const double* u = theta_.data() + off;
        const double* w = u + dim_;
        const double alpha = u[2 * dim_ + 1];
        const double beta = u[2 * dim_ + 2];
        const double gate = sigmoid_scalar(alpha * t + beta);
        const double gated = gate * (1.0 - gate);
        double s = u[2 * dim_];
        double uw = 0.0;
        for (int j = 0; j < dim_; ++j) {
          s += w[j] * z[j];
          uw += u[j] * w[j];
        }
        const double h = std::tanh(s);
        const double hp = 1.0 - h * h;
        const double hpp = -2.0 * h * hp;
        const double tau = hp * uw;  // the unit's ungated trace
        for (int j = 0; j < dim_; ++j) {
          r.vjp_z[j] += gate * hpp * uw * w[j];
          r.vjp_theta[off + j] = gate * hp * w[j];
          r.vjp_theta[off + dim_ + j] = gate * (hp * u[j] + hpp * uw * z[j]);
        }
        r.vjp_theta[off + 2 * dim_] = gate * hpp * uw;
        r.vjp_theta[off + 2 * dim_ + 1] = gated * t * tau;
        r.vjp_theta[off + 2 * dim_ + 2] = gated * tau;
        r.vjp_t += gated * alpha * tau;
      }
      break;
    }
    case Arch::Mlp:
      throw std::logic_error("trace_grad: not available for mlp dynamics");
  }
  return r;
}

DynamicsFunc make_linear(const Tensor& A) {
  if (A.ndim() != 2 || A.rows() != A.cols())
    throw DimensionError("make_linear: A must be square");
  DynamicsFunc f;
  f.arch_ = Arch::Linear;
  f.dim_ = A.rows();
  f.theta_ = Tensor({f.dim_ * f.dim_}, A.values());
  return f;
}

DynamicsFunc make_planar(const Tensor& u, const Tensor& w, double b) {
  ensure_same_shape(u, w, "make_planar");
  DynamicsFunc f;
  f.arch_ = Arch::Planar;
  f.dim_ = u.size();
  Tensor theta({2 * f.dim_ + 1});
  for (int i = 0; i < f.dim_; ++i) {
    theta[i] = u[i];
    theta[f.dim_ + i] = w[i];
  }
  theta[2 * f.dim_] = b;
  f.theta_ = std::move(theta);
  return f;
}

DynamicsFunc build_mlp_dynamics(int input_dim, const std::vector<int>& hidden_dims,
                                RngState& rng, bool time_dependent, bool zero_init) {
  if (input_dim < 1) throw std::invalid_argument("build_mlp_dynamics: input_dim >= 1");
  for (int h : hidden_dims)
    if (h < 1) throw std::invalid_argument("build_mlp_dynamics: hidden dims >= 1");
  DynamicsFunc f;
  f.arch_ = Arch::Mlp;
  f.dim_ = input_dim;
  f.hidden_ = hidden_dims;
  f.time_dependent_ = time_dependent;
  MlpSpec spec;
  f.mlp_layer_sizes(spec.sizes);
  f.theta_ = Tensor({mlp_param_count(spec)});
  if (!zero_init) mlp_init(spec, f.theta_.data(), rng);
  return f;
}

DynamicsFunc build_planar(int dim, RngState& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  Tensor u({dim}), w({dim});
  for (int i = 0; i < dim; ++i) u[i] = rng.uniform(-bound, bound);
  for (int i = 0; i < dim; ++i) w[i] = rng.uniform(-bound, bound);
  return make_planar(u, w, 0.0);
}

DynamicsFunc build_gated_planar(int dim, int units, RngState& rng) {
  if (units < 1) throw std::invalid_argument("build_gated_planar: units >= 1");
  DynamicsFunc f;
  f.arch_ = Arch::GatedPlanarSum;
  f.dim_ = dim;
  f.units_ = units;
  f.time_dependent_ = true;
  const int stride = gated_unit_params(dim);
  f.theta_ = Tensor({units * stride});
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int n = 0; n < units; ++n) {
    const int off = n * stride;
    for (int j = 0; j < dim; ++j) f.theta_[off + j] = rng.uniform(-bound, bound);
    for (int j = 0; j < dim; ++j) f.theta_[off + dim + j] = rng.uniform(-bound, bound);
    f.theta_[off + 2 * dim] = 0.0;
    f.theta_[off + 2 * dim + 1] = rng.uniform(-0.5, 0.5);
    f.theta_[off + 2 * dim + 2] = rng.uniform(-0.5, 0.5);
  }
  return f;
}

DynamicsFunc build_hamiltonian(int dim, int hidden, RngState& rng) {
  if (dim % 2 != 0) throw std::invalid_argument("build_hamiltonian: dim must be even");
  DynamicsFunc f;
  f.arch_ = Arch::HamiltonianSplit;
  f.dim_ = dim;
  f.hidden_ = {hidden};
  MlpSpec half{{dim / 2, hidden, dim / 2}};
  const int block = mlp_param_count(half);
  f.theta_ = Tensor({2 * block});
  mlp_init(half, f.theta_.data(), rng);
  mlp_init(half, f.theta_.data() + block, rng);
  return f;
}

BatchedSystem::BatchedSystem(const DiffSystem& base, int copies)
    : base_(&base), copies_(copies) {
  if (copies < 1) throw std::invalid_argument("BatchedSystem: copies >= 1");
}

Tensor BatchedSystem::eval(const Tensor& z, double t) const {
  const int d = base_->state_dim();
  if (z.size() != d * copies_) throw DimensionError("BatchedSystem: state size mismatch");
  Tensor out({d * copies_});
  Tensor zi({d});
  for (int c = 0; c < copies_; ++c) {
    for (int i = 0; i < d; ++i) zi[i] = z[c * d + i];
    Tensor fi = base_->eval(zi, t);
    for (int i = 0; i < d; ++i) out[c * d + i] = fi[i];
  }
  return out;
}

VjpResult BatchedSystem::vjp(const Tensor& z, double t, const Tensor& a) const {
  const int d = base_->state_dim();
  if (z.size() != d * copies_ || a.size() != d * copies_)
    throw DimensionError("BatchedSystem: vjp size mismatch");
  VjpResult r;
  r.vjp_z = Tensor({d * copies_});
  r.vjp_theta = Tensor({base_->param_count()});
  Tensor zi({d}), ai({d});
  for (int c = 0; c < copies_; ++c) {
    for (int i = 0; i < d; ++i) {
      zi[i] = z[c * d + i];
      ai[i] = a[c * d + i];
    }
    VjpResult ri = base_->vjp(zi, t, ai);
    for (int i = 0; i < d; ++i) r.vjp_z[c * d + i] = ri.vjp_z[i];
    r.vjp_theta += ri.vjp_theta;
    r.vjp_t += ri.vjp_t;
  }
  return r;
}

Tensor fd_jacobian(const DiffSystem& f, const Tensor& z, double t, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("fd_jacobian: eps must be positive");
  const int d = f.state_dim();
  Tensor jac({d, d});
  Tensor zp = z, zm = z;
  for (int j = 0; j < d; ++j) {
    zp[j] = z[j] + eps;
    zm[j] = z[j] - eps;
    Tensor fp = f.eval(zp, t);
    Tensor fm = f.eval(zm, t);
    for (int i = 0; i < d; ++i) jac.at(i, j) = (fp[i] - fm[i]) / (2.0 * eps);
    zp[j] = z[j];
    zm[j] = z[j];
  }
  return jac;
}

namespace {

constexpr uint32_t kMagic = 0x4F444746;  // "ODGF"

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_dynamics(const std::string& path, const DynamicsFunc& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_dynamics: cannot open " + path);
  write_u32(os, kMagic);
  write_u32(os, static_cast<uint32_t>(f.arch_));
  write_u32(os, f.time_dependent_ ? 1 : 0);
  write_u32(os, static_cast<uint32_t>(f.dim_));
  write_u32(os, static_cast<uint32_t>(f.hidden_.size()));
  for (int h : f.hidden_) write_u32(os, static_cast<uint32_t>(h));
  write_u32(os, static_cast<uint32_t>(f.units_));
  write_u32(os, static_cast<uint32_t>(f.theta_.size()));
  for (int i = 0; i < f.theta_.size(); ++i) write_f64(os, f.theta_[i]);
  if (!os) throw std::runtime_error("save_dynamics: write failed for " + path);
}

DynamicsFunc load_dynamics(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_dynamics: cannot open " + path);
  if (read_u32(is) != kMagic) throw std::runtime_error("load_dynamics: bad magic in " + path);
  DynamicsFunc f;
  f.arch_ = static_cast<Arch>(read_u32(is));
  f.time_dependent_ = read_u32(is) != 0;
  f.dim_ = static_cast<int>(read_u32(is));
  const uint32_t nh = read_u32(is);
  f.hidden_.resize(nh);
  for (uint32_t i = 0; i < nh; ++i) f.hidden_[i] = static_cast<int>(read_u32(is));
  f.units_ = static_cast<int>(read_u32(is));
  const uint32_t np = read_u32(is);
  f.theta_ = Tensor({static_cast<int>(np)});
  for (uint32_t i = 0; i < np; ++i) f.theta_[i] = read_f64(is);
  if (!is) throw std::runtime_error("load_dynamics: truncated file " + path);
  return f;
}

}  // namespace odegrad
