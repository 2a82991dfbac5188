#pragma once

// Common aliases, error types and the complex structure of flat C^m.
//
// Points of C^m are stored as real vectors in R^{2m} with interleaved
// coordinates (x1, y1, x2, y2, ...), so that z_k = x_k + i y_k and the
// complex structure J acts as multiplication by i in every factor.

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace lmcf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Complex = std::complex<double>;
using Index = Eigen::Index;

inline constexpr double kPi = std::numbers::pi;
inline constexpr char kVersion[] = "0.1.0";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input (scenario fields, mesh files, parameters).
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Degenerate or unsupported discrete geometry.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// CFL violation, mesh degeneration, expired soliton flow, solver failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The operation's mathematical precondition does not hold for this input
/// (non f-minimal base for the second variation, wrong potential kind, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// J v: multiplication by i in each complex coordinate.
template <class Derived>
Vec apply_J(const Eigen::MatrixBase<Derived>& v) {
  Vec out(v.size());
  for (Index k = 0; k + 1 < v.size(); k += 2) {
    out[k] = -v[k + 1];
    out[k + 1] = v[k];
  }
  return out;
}

inline Eigen::Vector2d rot90(const Eigen::Vector2d& v) { return {-v.y(), v.x()}; }

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

/// Standard Kähler form of C^m, omega(X, Y) = <JX, Y> = sum dx_k ^ dy_k.
template <class A, class B>
double kahler_form(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  double s = 0.0;
  for (Index k = 0; k + 1 < x.size(); k += 2) s += x[k] * y[k + 1] - x[k + 1] * y[k];
  return s;
}

/// Complex coordinate z_k of a real vector.
template <class Derived>
Complex complex_coord(const Eigen::MatrixBase<Derived>& v, Index k) {
  return {v[2 * k], v[2 * k + 1]};
}

/// Wrap an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

}  // namespace lmcf
