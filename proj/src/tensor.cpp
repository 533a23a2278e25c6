#include "odegrad/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>

namespace odegrad {

namespace {
std::atomic<long long> g_live_bytes{0};
std::atomic<long long> g_peak_bytes{0};

void track_alloc(long long bytes) {
  long long live = g_live_bytes.fetch_add(bytes) + bytes;
  long long peak = g_peak_bytes.load();
  while (live > peak && !g_peak_bytes.compare_exchange_weak(peak, live)) {
  }
}

void track_free(long long bytes) { g_live_bytes.fetch_sub(bytes); }

long long payload_bytes(const std::vector<double>& v) {
  return static_cast<long long>(v.size()) * static_cast<long long>(sizeof(double));
}

size_t shape_product(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw DimensionError("negative dimension in tensor shape");
    n *= static_cast<size_t>(d);
  }
  return n;
}
}  // namespace

namespace memstat {
long long live_bytes() { return g_live_bytes.load(); }
long long peak_bytes() { return g_peak_bytes.load(); }
void reset_peak() { g_peak_bytes.store(g_live_bytes.load()); }
}  // namespace memstat

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), values_(shape_product(shape_), 0.0) {
  track_alloc(payload_bytes(values_));
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_product(shape_) != values_.size())
    throw DimensionError("tensor shape does not match value count");
  track_alloc(payload_bytes(values_));
}

Tensor::Tensor(const Tensor& o) : shape_(o.shape_), values_(o.values_) {
  track_alloc(payload_bytes(values_));
}

Tensor::Tensor(Tensor&& o) noexcept
    : shape_(std::move(o.shape_)), values_(std::move(o.values_)) {
  o.shape_.clear();
  o.values_.clear();
}

Tensor& Tensor::operator=(const Tensor& o) {
  if (this == &o) return *this;
  track_free(payload_bytes(values_));
  shape_ = o.shape_;
  values_ = o.values_;
  track_alloc(payload_bytes(values_));
  return *this;
}

Tensor& Tensor::operator=(Tensor&& o) noexcept {
  if (this == &o) return *this;
  track_free(payload_bytes(values_));
  shape_ = std::move(o.shape_);
  values_ = std::move(o.values_);
  o.shape_.clear();
  o.values_.clear();
  return *this;
}

Tensor::~Tensor() { track_free(payload_bytes(values_)); }

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::vec(std::vector<double> values) {
  int n = static_cast<int>(values.size());
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

int Tensor::rows() const {
  if (ndim() != 2) throw DimensionError("rows(): tensor is not 2-D");
  return shape_[0];
}

int Tensor::cols() const {
  if (ndim() != 2) throw DimensionError("cols(): tensor is not 2-D");
  return shape_[1];
}

double& Tensor::at(int r, int c) {
  return values_[static_cast<size_t>(r) * shape_[1] + c];
}

double Tensor::at(int r, int c) const {
  return values_[static_cast<size_t>(r) * shape_[1] + c];
}

bool Tensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor& Tensor::operator+=(const Tensor& o) {
  ensure_same_shape(*this, o, "operator+=");
  for (size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
  ensure_same_shape(*this, o, "operator-=");
  for (size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

Tensor& Tensor::axpy(double alpha, const Tensor& x) {
  ensure_same_shape(*this, x, "axpy");
  for (size_t i = 0; i < values_.size(); ++i) values_[i] += alpha * x.values_[i];
  return *this;
}

void Tensor::fill(double v) {
  for (double& e : values_) e = v;
}

Tensor operator+(Tensor a, const Tensor& b) {
  a += b;
  return a;
}

Tensor operator-(Tensor a, const Tensor& b) {
  a -= b;
  return a;
}

Tensor operator*(Tensor a, double s) {
  a *= s;
  return a;
}

Tensor operator*(double s, Tensor a) {
  a *= s;
  return a;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2)
    throw DimensionError("matmul: operands must be 2-D");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions disagree (" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = a.at(i, p);
      if (aip == 0.0) continue;
      for (int j = 0; j < n; ++j) out.at(i, j) += aip * b.at(p, j);
    }
  }
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  ensure_same_shape(a, b, "dot");
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_inf(const Tensor& a) {
  double m = 0.0;
  for (int i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i]));
  return m;
}

double norm_l2(const Tensor& a) { return std::sqrt(dot(a, a)); }

double sigmoid_scalar(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) {
  // log(1 + e^x), stable at both tails
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

Tensor elementwise(Elt op, const Tensor& x) {
  Tensor out = x;
  switch (op) {
    case Elt::Tanh:
      for (int i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
      break;
    case Elt::Relu:
      for (int i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
      break;
    case Elt::Sigmoid:
      for (int i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(out[i]);
      break;
    case Elt::Exp:
      for (int i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
      break;
    case Elt::Log:
      for (int i = 0; i < out.size(); ++i) {
        if (!(out[i] > 0.0))
          throw NumericError("elementwise log: input must be strictly positive");
        out[i] = std::log(out[i]);
      }
      break;
  }
  return out;
}

void ensure_finite(const Tensor& t, const char* what) {
  if (!t.all_finite())
    throw NumericError(std::string(what) + ": non-finite value encountered");
}

void ensure_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(what) + ": shape mismatch");
}

}  // namespace odegrad
