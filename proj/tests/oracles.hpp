#pragma once

// Independent reference values: closed forms and adaptive quadrature that do
// not touch the library's discretisation.

#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                           double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

/// Adaptive Simpson quadrature.
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, b, fa, fm, fb, whole, tol, 50);
}

// Circle of radius r in C under the Gaussian shrinker weight exp(-|z|^2/4).
inline double shrinker_circle_volume(double r) { return 2.0 * pi * r * std::exp(-r * r / 4.0); }

/// d/dr of the f-volume, i.e. the first variation along the outward normal.
inline double shrinker_circle_first_variation(double r) {
  return 2.0 * pi * std::exp(-r * r / 4.0) * (1.0 - r * r / 2.0);
}

/// Q_f for xi = omega~^{-1}(d sin(s / sqrt 2)) on the circle of radius sqrt 2.
inline double shrinker_circle_sin_mode_Q() { return -(pi * std::sqrt(2.0) / 4.0) * std::exp(-0.5); }

/// Eigenvalues of Delta_f on the shrinker circle of radius r: k^2 / r^2.
inline double circle_eigenvalue(int k, double r) { return k * k / (r * r); }

/// Grim reaper (x, -ln cos x) with T = (0, -1): e^{-f/2} = sec x, ds = sec x dx.
inline double grim_reaper_volume(double half_width) {
  return integrate([](double x) { return 1.0 / (std::cos(x) * std::cos(x)); }, -half_width, half_width);
}

/// Curve shortening of a circle.
inline double mcf_circle_radius(double r0, double t) { return std::sqrt(r0 * r0 - 2.0 * t); }

/// s(t) = int_0^t dtau / (1 - c tau).
inline double reparam_quadrature(double c, double t) {
  return integrate([c](double tau) { return 1.0 / (1.0 - c * tau); }, 0.0, t, 1e-14);
}

}  // namespace oracle
