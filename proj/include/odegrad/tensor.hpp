#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace odegrad {

// Shape disagreement between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf or a domain violation (log of a non-positive value, ...).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solver or training loop failed to make progress.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Live/peak heap accounting for Tensor payloads. Used by tests that pin the
// memory behaviour of the reverse pass; negligible overhead otherwise.
namespace memstat {
long long live_bytes();
long long peak_bytes();
void reset_peak();
}  // namespace memstat

// Dense row-major array of 64-bit floats. The only value type that crosses
// module boundaries.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero-filled
  Tensor(std::vector<int> shape, std::vector<double> values);
  Tensor(const Tensor& o);
  Tensor(Tensor&& o) noexcept;
  Tensor& operator=(const Tensor& o);
  Tensor& operator=(Tensor&& o) noexcept;
  ~Tensor();

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v);
  static Tensor vec(std::vector<double> values);  // 1-D
  static Tensor matrix(int rows, int cols, std::vector<double> values);

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int size() const { return static_cast<int>(values_.size()); }
  int rows() const;
  int cols() const;

  double& operator[](int i) { return values_[i]; }
  double operator[](int i) const { return values_[i]; }
  double& at(int r, int c);
  double at(int r, int c) const;
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

  Tensor& operator+=(const Tensor& o);
  Tensor& operator-=(const Tensor& o);
  Tensor& operator*=(double s);
  // this += alpha * x
  Tensor& axpy(double alpha, const Tensor& x);
  void fill(double v);

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, double s);
Tensor operator*(double s, Tensor a);

// Standard matrix product; inner dimensions must agree.
Tensor matmul(const Tensor& a, const Tensor& b);

double dot(const Tensor& a, const Tensor& b);
double norm_inf(const Tensor& a);
double norm_l2(const Tensor& a);

enum class Elt { Tanh, Relu, Sigmoid, Exp, Log };

// op applied entrywise; shape preserved. Log requires strictly positive input.
Tensor elementwise(Elt op, const Tensor& x);

double sigmoid_scalar(double x);
double softplus_scalar(double x);

// Throws NumericError naming `what` if any entry is NaN/Inf.
void ensure_finite(const Tensor& t, const char* what);
void ensure_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace odegrad
