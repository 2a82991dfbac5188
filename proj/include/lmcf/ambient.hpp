#pragma once

// Flat Kähler ambient spaces C^m with a real holomorphy potential.
//
// Supported potentials (m = 1, 2):
//   shrinker    f(z) =  |z|^2 / 2        c = +1
//   expander    f(z) = -|z|^2 / 2        c = -1
//   translator  f(z) = 2 <z, T>, |T| = 1 c =  0
//   constant    f(z) = 0                 c =  0
//   custom      f(z) = <Az, z>/2 + <b, z>  with A symmetric and J-invariant
//
// The translator uses the normalisation f = 2<z, T>, for which grad f = 2T
// and the f-minimal equation is H + T^perp = 0.

#include "lmcf/types.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace lmcf {

enum class PotentialKind { Shrinker, Expander, Translator, Constant, Custom };

inline std::string_view to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::Shrinker: return "shrinker";
    case PotentialKind::Expander: return "expander";
    case PotentialKind::Translator: return "translator";
    case PotentialKind::Constant: return "constant";
    case PotentialKind::Custom: return "custom";
  }
  return "unknown";
}

class AmbientSpace {
 public:
  static AmbientSpace shrinker(int m) { return {m, PotentialKind::Shrinker, Mat::Identity(2 * m, 2 * m), Vec::Zero(2 * m)}; }
  static AmbientSpace expander(int m) { return {m, PotentialKind::Expander, -Mat::Identity(2 * m, 2 * m), Vec::Zero(2 * m)}; }
  static AmbientSpace constant(int m) { return {m, PotentialKind::Constant, Mat::Zero(2 * m, 2 * m), Vec::Zero(2 * m)}; }

  static AmbientSpace translator(const Vec& T) {
    if (T.size() != 2 && T.size() != 4) throw ValidationError("T", "translation vector must have 2 or 4 entries");
    if (!T.allFinite() || std::abs(T.norm() - 1.0) > 1e-12)
      throw ValidationError("T", "translation vector must be a unit vector");
    const int m = static_cast<int>(T.size() / 2);
    AmbientSpace a{m, PotentialKind::Translator, Mat::Zero(2 * m, 2 * m), 2.0 * T};
    a.T_ = T;
    return a;
  }

  /// Quadratic-plus-linear potential f(z) = <Az, z>/2 + <b, z>.
  static AmbientSpace custom(const Mat& hessian, const Vec& linear) {
    const Index n = hessian.rows();
    if (n != 2 && n != 4) throw ValidationError("hessian", "must be 2x2 or 4x4");
    if (hessian.cols() != n || linear.size() != n) throw ValidationError("linear", "dimension mismatch");
    if (!hessian.allFinite() || !linear.allFinite()) throw ValidationError("hessian", "entries must be finite");
    if ((hessian - hessian.transpose()).norm() > 1e-12) throw ValidationError("hessian", "must be symmetric");
    Mat Jm = Mat::Zero(n, n);
    for (Index k = 0; k < n; k += 2) {
      Jm(k, k + 1) = -1.0;
      Jm(k + 1, k) = 1.0;
    }
    if ((Jm.transpose() * hessian * Jm - hessian).norm() > 1e-12)
      throw ValidationError("hessian", "must be J-invariant (real holomorphy potential)");
    return {static_cast<int>(n / 2), PotentialKind::Custom, hessian, linear};
  }

  int m() const { return m_; }
  int real_dim() const { return 2 * m_; }
  PotentialKind kind() const { return kind_; }

  /// True when Ric + Hess f = c g holds for some constant c.
  bool is_soliton() const {
    return (hess_ - hess_(0, 0) * Mat::Identity(hess_.rows(), hess_.cols())).norm() <= 1e-14;
  }

  double soliton_constant() const {
    if (!is_soliton()) throw PreconditionError("potential is not a gradient Kähler-Ricci soliton");
    return hess_(0, 0);
  }

  bool is_steady() const { return is_soliton() && hess_(0, 0) == 0.0; }

  /// Unit translation vector T (translator potential only).
  const Vec& translation() const {
    if (kind_ != PotentialKind::Translator) throw PreconditionError("ambient has no translation vector");
    return T_;
  }

  template <class D>
  double potential(const Eigen::MatrixBase<D>& z) const {
    return 0.5 * z.dot(hess_ * z) + lin_.dot(z);
  }

  template <class D>
  Vec gradient(const Eigen::MatrixBase<D>& z) const {
    return hess_ * z + lin_;
  }

  /// Ambient Hessian; constant on flat C^m for every supported potential.
  const Mat& hessian() const { return hess_; }

  /// Bakry-Emery tensor Ric + Hess f (flat ambient: Ric = 0).
  template <class A, class B>
  double bakry_emery(const Eigen::MatrixBase<A>& xi, const Eigen::MatrixBase<B>& eta) const {
    return xi.dot(hess_ * eta);
  }

  double sigma(double t) const { return 1.0 - soliton_constant() * t; }
  bool flow_expired(double t) const { return !(sigma(t) > 0.0); }

  /// s(t) = int_0^t dtau / sigma(tau).
  double reparametrized_time(double t) const {
    require_alive(t);
    const double c = soliton_constant();
    if (c == 0.0) return t;
    return -std::log1p(-c * t) / c;
  }

  /// phi_t(z): the flow of grad f / (2 sigma(t)) starting at the identity.
  template <class D>
  Vec flow_map(double t, const Eigen::MatrixBase<D>& z) const {
    require_alive(t);
    switch (kind_) {
      case PotentialKind::Shrinker: return z / std::sqrt(1.0 - t);
      case PotentialKind::Expander: return z / std::sqrt(1.0 + t);
      case PotentialKind::Translator: return z + t * T_;
      case PotentialKind::Constant: return z;
      case PotentialKind::Custom: break;
    }
    return integrate_flow(0.0, t, z);
  }

  template <class D>
  Vec flow_map_inverse(double t, const Eigen::MatrixBase<D>& z) const {
    require_alive(t);
    switch (kind_) {
      case PotentialKind::Shrinker: return z * std::sqrt(1.0 - t);
      case PotentialKind::Expander: return z * std::sqrt(1.0 + t);
      case PotentialKind::Translator: return z - t * T_;
      case PotentialKind::Constant: return z;
      case PotentialKind::Custom: break;
    }
    return integrate_flow(t, 0.0, z);
  }

 private:
  AmbientSpace(int m, PotentialKind kind, Mat hess, Vec lin)
      : m_(m), kind_(kind), hess_(std::move(hess)), lin_(std::move(lin)) {
    if (m != 1 && m != 2) throw ValidationError("m", "complex dimension must be 1 or 2");
  }

  void require_alive(double t) const {
    if (flow_expired(t)) throw NumericalError("soliton flow expired: sigma(t) <= 0 at t = " + std::to_string(t));
  }

  // Classical RK4 on dphi/dt = grad f(phi) / (2 sigma(t)), from time t0 to t1.
  template <class D>
  Vec integrate_flow(double t0, double t1, const Eigen::MatrixBase<D>& z) const {
    constexpr int kSteps = 4000;
    const double h = (t1 - t0) / kSteps;
    auto rhs = [&](double t, const Vec& y) -> Vec { return gradient(y) / (2.0 * sigma(t)); };
    Vec y = z;
    double t = t0;
    for (int i = 0; i < kSteps; ++i) {
      const Vec k1 = rhs(t, y);
      const Vec k2 = rhs(t + h / 2, y + h / 2 * k1);
      const Vec k3 = rhs(t + h / 2, y + h / 2 * k2);
      const Vec k4 = rhs(t + h, y + h * k3);
      y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
    }
    return y;
  }

  int m_;
  PotentialKind kind_;
  Mat hess_;
  Vec lin_;
  Vec T_;
};

/// Holomorphic volume form Omega_f of a steady (or trivial) soliton, rotated
/// by a phase: e^{-i theta0} Omega_f. For the translator
/// Omega_f = e^{-f/2 - i<z, JT>} dz^1 ^ ... ^ dz^m.
class HoloVolumeForm {
 public:
  explicit HoloVolumeForm(AmbientSpace ambient, double phase = 0.0) : ambient_(std::move(ambient)), phase_(phase) {
    const auto k = ambient_.kind();
    if (k != PotentialKind::Translator && k != PotentialKind::Constant)
      throw PreconditionError("Omega_f is only built for the translator and constant potentials");
  }

  const AmbientSpace& ambient() const { return ambient_; }
  double phase() const { return phase_; }
  HoloVolumeForm with_phase(double phase) const { return HoloVolumeForm(ambient_, phase); }

  /// Scalar factor multiplying dz^1 ^ ... ^ dz^m at z (phase rotation included).
  template <class D>
  Complex prefactor(const Eigen::MatrixBase<D>& z) const {
    double re = 0.0, im = -phase_;
    if (ambient_.kind() == PotentialKind::Translator) {
      re = -0.5 * ambient_.potential(z);
      im -= z.dot(apply_J(ambient_.translation()));
    }
    return std::exp(Complex(re, im));
  }

  /// Omega evaluated on m real vectors (columns of frame), i.e. the complex
  /// determinant of the frame times the prefactor.
  template <class D>
  Complex evaluate(const Eigen::MatrixBase<D>& z, const Mat& frame) const {
    const int m = ambient_.m();
    if (frame.rows() != 2 * m || frame.cols() != m) throw GeometryError("frame must be 2m x m");
    const Mat gram = frame.transpose() * frame;
    if (gram.determinant() <= 1e-24 * gram.diagonal().prod()) throw GeometryError("degenerate frame");
    return prefactor(z) * complex_determinant(frame);
  }

  static Complex complex_determinant(const Mat& frame) {
    const Index m = frame.cols();
    if (m == 1) return complex_coord(frame.col(0), 0);
    if (m == 2) {
      return complex_coord(frame.col(0), 0) * complex_coord(frame.col(1), 1) -
             complex_coord(frame.col(1), 0) * complex_coord(frame.col(0), 1);
    }
    throw GeometryError("complex dimension must be 1 or 2");
  }

 private:
  AmbientSpace ambient_;
  double phase_;
};

/// Both sides of the almost Calabi-Yau compatibility identity
///   e^{-f} omega^m / m! = (-1)^{m(m-1)/2} (i/2)^m Omega_f ^ conj(Omega_f)
/// evaluated on 2m real vectors (columns of frame) at z.
struct AcyEvaluation {
  double lhs;
  Complex rhs;
};

template <class D>
AcyEvaluation acy_sides(const HoloVolumeForm& form, const Eigen::MatrixBase<D>& z, const Mat& frame) {
  const int m = form.ambient().m();
  const Index n = 2 * m;
  if (frame.rows() != n || frame.cols() != n) throw GeometryError("frame must be 2m x 2m");

  // omega^m / m! is the Pfaffian of the Gram matrix of omega.
  Mat w(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b) w(a, b) = kahler_form(frame.col(a), frame.col(b));
  const double pf = (m == 1) ? w(0, 1) : w(0, 1) * w(2, 3) - w(0, 2) * w(1, 3) + w(0, 3) * w(1, 2);
  const double lhs = std::exp(-form.ambient().potential(z)) * pf;

  // dz^1 ^ .. ^ dz^m ^ dzbar^1 ^ .. ^ dzbar^m on the frame = det[a_r(v_j)].
  Eigen::MatrixXcd C(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < m; ++k) {
      const Complex zk = complex_coord(frame.col(j), k);
      C(k, j) = zk;
      C(m + k, j) = std::conj(zk);
    }
  const Complex g = form.prefactor(z);
  const double sign = ((m * (m - 1) / 2) % 2 == 0) ? 1.0 : -1.0;
  const Complex rhs = sign * std::pow(Complex(0.0, 0.5), m) * std::norm(g) * C.determinant();
  return {lhs, rhs};
}

}  // namespace lmcf
