#pragma once

// The f-volume V_f = int e^{-(p/2m) f} dV_g, its first variation
//   delta V_f(xi) = -int <H + (p/2m) grad f, xi> e^{-(p/2m) f} dV_g,
// the second variation quadratic form at f-minimal Lagrangians
//   Q_f(xi) = int (|d alpha|^2 + |d*_f alpha|^2 - Ric_f(xi, xi)) e^{-f/2} dV_g,
// alpha = omega~(xi), and finite-difference oracles for both.
//
// Finite differences displace vertices along straight lines F + h xi. At a
// critical point the second derivative along any path with initial velocity
// xi equals Q_f(xi): the acceleration term is a first variation, which
// vanishes there.

#include "lmcf/ambient.hpp"
#include "lmcf/lagrangian.hpp"
#include "lmcf/spectral.hpp"
#include "lmcf/types.hpp"

#include <optional>
#include <random>
#include <string>

namespace lmcf {

inline double f_volume(const DiscreteLagrangian& L, const AmbientSpace& ambient) {
  const double q = weight_exponent(L, ambient);
  const Measure mu = induced_measure(L);
  double v = 0.0;
  for (Index i = 0; i < L.size(); ++i) v += std::exp(-q * ambient.potential(L.point(i))) * mu.dual[i];
  return v;
}

inline double first_variation(const DiscreteLagrangian& L, const AmbientSpace& ambient, const NormalField& xi) {
  if (xi.values.rows() != L.size() || xi.values.cols() != L.vertices().cols())
    throw GeometryError("normal field shape does not match mesh");
  const double q = weight_exponent(L, ambient);
  const Measure mu = induced_measure(L);
  const Points H = mean_curvature(L);
  double acc = 0.0;
  for (Index i = 0; i < L.size(); ++i) {
    const Vec z = L.point(i);
    const Vec k = H.row(i).transpose() + q * ambient.gradient(z);
    acc += k.dot(xi.values.row(i).transpose()) * std::exp(-q * ambient.potential(z)) * mu.dual[i];
  }
  return -acc;
}

/// Fourth-order parameter derivatives of a normal field on a jet curve, so
/// that displaced meshes keep exact-quality jets.
inline NormalField with_parameter_jets(const DiscreteLagrangian& L, NormalField xi) {
  if (!L.is_curve() || !L.has_jets()) throw PreconditionError("parameter jets need a curve with jets");
  CurveSampler S;
  S.h = L.param_step_u();
  S.periodic = L.is_closed_curve();
  xi.du = S.derivative(xi.values);
  xi.duu = S.derivative(*xi.du);
  return xi;
}

/// F + h xi. Jets survive when both the mesh and the field carry them.
inline DiscreteLagrangian displaced(const DiscreteLagrangian& L, const NormalField& xi, double h) {
  DiscreteLagrangian out = L.with_positions(L.vertices() + h * xi.values);
  if (L.has_jets() && L.is_curve() && xi.du && xi.duu) {
    Jets J = L.jets();
    J.du += h * *xi.du;
    J.duu += h * *xi.duu;
    out = out.with_jets(std::move(J), L.param_step_u());
  }
  return out;
}

namespace detail {

inline void check_step(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("h", "finite-difference step must be positive");
  if (h < 1e-9) throw NumericalError("finite-difference step below the round-off floor (1e-9)");
}

// Both sides of a difference quotient must use the same backend: jets are
// kept only when the field carries parameter jets too.
inline DiscreteLagrangian fd_base(const DiscreteLagrangian& L, const NormalField& xi) {
  return (L.has_jets() && L.is_curve() && xi.du && xi.duu) ? L : L.without_jets();
}

}  // namespace detail

inline double first_variation_fd(const DiscreteLagrangian& L, const AmbientSpace& ambient, const NormalField& xi,
                                 double h) {
  detail::check_step(h);
  const DiscreteLagrangian B = detail::fd_base(L, xi);
  return (f_volume(displaced(B, xi, h), ambient) - f_volume(displaced(B, xi, -h), ambient)) / (2.0 * h);
}

/// Richardson extrapolation of the central difference from steps h and h/2.
inline double first_variation_richardson(const DiscreteLagrangian& L, const AmbientSpace& ambient,
                                         const NormalField& xi, double h) {
  const double a = first_variation_fd(L, ambient, xi, h);
  const double b = first_variation_fd(L, ambient, xi, 0.5 * h);
  return (4.0 * b - a) / 3.0;
}

struct QuadraticTerms {
  double d_alpha = 0.0;       ///< ||d alpha||_w^2
  double d_star_alpha = 0.0;  ///< ||d*_f alpha||_w^2
  double ricci = 0.0;         ///< int Ric_f(xi, xi) e^{-f/2} dV
};

struct VariationReport {
  double f_volume = 0.0;
  double first_variation_analytic = 0.0;
  double first_variation_fd = 0.0;
  double Q_f = 0.0;
  QuadraticTerms terms;
  double Q_f_fd = 0.0;
  double residual_f_minimality = 0.0;
};

/// Default f-minimality tolerance: 1e-6 with jets, 10 h^2 on polylines.
inline double default_minimality_tolerance(const DiscreteLagrangian& L) {
  if (L.has_jets()) return 1e-6;
  const double h = mesh_size(L);
  return 10.0 * h * h;
}

inline void require_f_minimal(const DiscreteLagrangian& L, const AmbientSpace& ambient, std::optional<double> tol) {
  if (L.p() != L.m()) throw PreconditionError("second variation needs a Lagrangian (p = m)");
  const double tau = tol.value_or(default_minimality_tolerance(L));
  const double r = f_minimality_residual(L, ambient).max;
  if (r > tau)
    throw PreconditionError("base is not f-minimal: residual " + std::to_string(r) + " > " + std::to_string(tau));
}

/// Assembled Q_f with an explicitly supplied 1-form alpha = omega~(xi)
/// (for Hamiltonian fields the exact du is the natural choice).
inline QuadraticTerms second_variation_terms(const DiscreteLagrangian& L, const AmbientSpace& ambient,
                                            const NormalField& xi, const OneForm& alpha) {
  const WeightedComplex C = build_complex(L, ambient);
  QuadraticTerms t;
  if (!L.is_curve()) {
    const Vec da = d_edge(C, alpha.edge_values);
    t.d_alpha = inner_face(C, da, da);
  }
  const Vec ds = d_star(C, alpha.edge_values);
  for (Index i = 0; i < L.size(); ++i) {
    if (!C.boundary[static_cast<size_t>(i)]) t.d_star_alpha += C.mass[i] * ds[i] * ds[i];
    const Vec x = xi.values.row(i).transpose();
    t.ricci += C.mass[i] * ambient.bakry_emery(x, x);
  }
  return t;
}

inline double quadratic_form(const QuadraticTerms& t) { return t.d_alpha + t.d_star_alpha - t.ricci; }

inline QuadraticTerms second_variation(const DiscreteLagrangian& L, const AmbientSpace& ambient, const NormalField& xi,
                                       std::optional<double> tol = std::nullopt) {
  require_f_minimal(L, ambient, tol);
  return second_variation_terms(L, ambient, xi, omega_tilde(L, xi));
}

inline double second_variation_fd(const DiscreteLagrangian& L, const AmbientSpace& ambient, const NormalField& xi,
                                  double h, std::optional<double> tol = std::nullopt) {
  require_f_minimal(L, ambient, tol);
  detail::check_step(h);
  const DiscreteLagrangian B = detail::fd_base(L, xi);
  const double v0 = f_volume(B, ambient);
  return (f_volume(displaced(B, xi, h), ambient) - 2.0 * v0 + f_volume(displaced(B, xi, -h), ambient)) / (h * h);
}

inline VariationReport variation_report(const DiscreteLagrangian& L, const AmbientSpace& ambient,
                                        const NormalField& xi, double h, std::optional<double> tol = std::nullopt) {
  VariationReport r;
  r.f_volume = f_volume(L, ambient);
  r.first_variation_analytic = first_variation(L, ambient, xi);
  r.first_variation_fd = first_variation_fd(L, ambient, xi, h);
  r.residual_f_minimality = f_minimality_residual(L, ambient).max;
  r.terms = second_variation(L, ambient, xi, tol);
  r.Q_f = quadratic_form(r.terms);
  r.Q_f_fd = second_variation_fd(L, ambient, xi, h, tol);
  return r;
}

/// Hamiltonian normal field omega~^{-1}(du). u must vanish on the boundary
/// of open meshes.
inline NormalField hamiltonian_field(const DiscreteLagrangian& L, const Vec& u) {
  for (Index i = 0; i < L.size(); ++i)
    if (L.is_boundary(i) && u[i] != 0.0) throw ValidationError("u", "Hamiltonian must vanish on clamped boundary vertices");
  return omega_tilde_inv(L, exact_form(L, u));
}

/// Q_f(omega~^{-1}(du)) using du itself as the 1-form.
inline QuadraticTerms hamiltonian_second_variation(const DiscreteLagrangian& L, const AmbientSpace& ambient,
                                                   const Vec& u, std::optional<double> tol = std::nullopt) {
  require_f_minimal(L, ambient, tol);
  return second_variation_terms(L, ambient, hamiltonian_field(L, u), exact_form(L, u));
}

struct StabilityReport {
  double c = 0.0;
  double lambda1 = 0.0;
  bool f_stable = false;
  bool hamiltonian_f_stable = false;
  std::string classification;
  SpectrumResult spectrum;
  std::optional<Vec> witness;  ///< lowest eigenfunction when unstable
  double witness_Q = 0.0;
};

/// c <= 0: f-stable (strictly for c < 0). c > 0: Hamiltonian f-stable iff
/// lambda_1(Delta_f) >= c - tau_spec.
inline StabilityReport stability_report(const DiscreteLagrangian& L, const AmbientSpace& ambient,
                                        double tau_spec = 1e-3, std::optional<double> tol = std::nullopt) {
  require_f_minimal(L, ambient, tol);
  StabilityReport r;
  r.c = ambient.soliton_constant();
  const WeightedComplex C = build_complex(L, ambient);
  r.spectrum = spectrum(C, C.closed() ? 6 : 4);
  r.lambda1 = r.spectrum.lambda1();
  if (r.c <= 0.0) {
    r.f_stable = true;
    r.hamiltonian_f_stable = true;
    r.classification = r.c < 0.0 ? "strictly f-stable" : "f-stable";
    return r;
  }
  r.hamiltonian_f_stable = r.lambda1 >= r.c - tau_spec;
  r.f_stable = false;  // c > 0: the Ricci term alone gives no sign
  if (r.hamiltonian_f_stable) {
    r.classification = "hamiltonian f-stable";
    return r;
  }
  r.classification = "hamiltonian f-unstable";
  r.witness = r.spectrum.lambda1_function();
  r.witness_Q = quadratic_form(hamiltonian_second_variation(L, ambient, *r.witness, tol));
  return r;
}

/// Random smooth clamped normal field: sum of a few sine modes in the
/// parameter times the unit normal (curves only).
inline NormalField random_clamped_field(const DiscreteLagrangian& L, std::mt19937_64& rng, int modes = 6) {
  if (!L.is_curve()) throw PreconditionError("random_clamped_field is implemented on curves only");
  std::normal_distribution<double> gauss;
  const TangentFrames T = tangent_frames(L);
  const Index n = L.size();
  Vec coef(modes);
  for (int k = 0; k < modes; ++k) coef[k] = gauss(rng) / (1.0 + k);
  NormalField xi;
  xi.values = Points::Zero(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n - 1);
    double a = 0.0;
    if (L.is_closed_curve()) {
      for (int k = 0; k < modes; ++k) a += coef[k] * std::cos(2.0 * kPi * k * x + k);
    } else {
      for (int k = 0; k < modes; ++k) a += coef[k] * std::sin(kPi * (k + 1) * x);
    }
    if (L.is_boundary(i)) a = 0.0;
    xi.values.row(i) = (a * rot90(T.e1.row(i).transpose())).transpose();
  }
  return xi;
}

/// u * nu on a curve (nu = J tau), zero on clamped vertices.
inline NormalField normal_field(const DiscreteLagrangian& L, const Vec& u) {
  if (!L.is_curve()) throw PreconditionError("normal_field is implemented on curves only");
  const TangentFrames T = tangent_frames(L);
  NormalField xi;
  xi.values = Points::Zero(L.size(), 2);
  for (Index i = 0; i < L.size(); ++i)
    if (!L.is_boundary(i)) xi.values.row(i) = (u[i] * rot90(T.e1.row(i).transpose())).transpose();
  return xi;
}

/// Weighted L2 norm squared of a normal field, int |xi|^2 e^{-q f} dV.
inline double weighted_norm2(const DiscreteLagrangian& L, const AmbientSpace& ambient, const NormalField& xi) {
  const double q = weight_exponent(L, ambient);
  const Measure mu = induced_measure(L);
  double acc = 0.0;
  for (Index i = 0; i < L.size(); ++i)
    acc += xi.values.row(i).squaredNorm() * std::exp(-q * ambient.potential(L.point(i))) * mu.dual[i];
  return acc;
}

}  // namespace lmcf
