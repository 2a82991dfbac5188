#pragma once

// f-calibrations Re(e^{-i theta0} Omega_f), the f-SLag phase residual, the
// translator equation theta - <F, JT> = theta0, and the f-harmonic 1-form
// residual of infinitesimal f-SLag deformations.

#include "lmcf/ambient.hpp"
#include "lmcf/lagrangian.hpp"
#include "lmcf/spectral.hpp"
#include "lmcf/types.hpp"

#include <Eigen/QR>

#include <limits>
#include <random>

namespace lmcf {

struct CalibrationSample {
  Vec z;
  Mat plane;  ///< orthonormal spanning vectors (columns)
  double lhs = 0.0, rhs = 0.0, slack = 0.0;
};

struct CalibrationResult {
  double min_slack = std::numeric_limits<double>::infinity();
  CalibrationSample worst;
  std::size_t samples = 0;
};

/// Evaluate one oriented m-plane: lhs = Re(e^{-i theta0} Omega_f)|_P,
/// rhs = e^{-f/2} vol_P.
inline CalibrationSample calibration_sample(const HoloVolumeForm& form, const Vec& z, const Mat& plane) {
  CalibrationSample s;
  s.z = z;
  s.plane = plane;
  s.lhs = form.evaluate(z, plane).real();
  const double vol = std::sqrt((plane.transpose() * plane).determinant());
  s.rhs = std::exp(-0.5 * form.ambient().potential(z)) * vol;
  s.slack = s.rhs - s.lhs;
  return s;
}

/// Random points in [-radius, radius]^{2m} and random oriented m-planes
/// (QR of Gaussian frames). For m = 2 every other plane is Lagrangian.
inline CalibrationResult calibration_inequality_sample(const HoloVolumeForm& form, std::size_t n, std::uint64_t seed,
                                                       double radius = 3.0) {
  const int m = form.ambient().m();
  const Index d = 2 * m;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> box(-radius, radius);
  CalibrationResult out;
  out.samples = n;
  for (std::size_t k = 0; k < n; ++k) {
    Vec z(d);
    for (Index i = 0; i < d; ++i) z[i] = box(rng);
    Mat P(d, m);
    if (m == 2 && k % 2 == 1) {
      // U(2) image of the real plane: columns of a random unitary.
      Eigen::MatrixXcd G(2, 2);
      for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) G(i, j) = Complex(gauss(rng), gauss(rng));
      const Eigen::MatrixXcd U = Eigen::HouseholderQR<Eigen::MatrixXcd>(G).householderQ();
      for (Index j = 0; j < 2; ++j)
        for (Index i = 0; i < 2; ++i) {
          P(2 * i, j) = U(i, j).real();
          P(2 * i + 1, j) = U(i, j).imag();
        }
    } else {
      Mat G(d, m);
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < m; ++j) G(i, j) = gauss(rng);
      Eigen::HouseholderQR<Mat> qr(G);
      P = qr.householderQ() * Mat::Identity(d, m);
    }
    const CalibrationSample s = calibration_sample(form, z, P);
    if (s.slack < out.min_slack) {
      out.min_slack = s.slack;
      out.worst = s;
    }
  }
  return out;
}

/// Largest calibration slack over the tangent planes of L.
inline double tangent_plane_slack(const DiscreteLagrangian& L, const HoloVolumeForm& form) {
  const TangentFrames T = tangent_frames(L);
  double worst = 0.0;
  for (Index i = 0; i < L.size(); ++i)
    worst = std::max(worst, std::abs(calibration_sample(form, L.point(i), T.frame(i)).slack));
  return worst;
}

struct FslagResidual {
  double phase = 0.0;            ///< mean unwrapped phase theta0
  double max_phase_deviation = 0.0;
  double max_imaginary = 0.0;    ///< max |Im(e^{-i theta0} F*Omega_f)| / (e^{-f/2} dV_g)
  Vec phases;
};

inline FslagResidual fslag_residual(const DiscreteLagrangian& L, const HoloVolumeForm& form) {
  const AngleField a = lagrangian_angle(L, form.with_phase(0.0));
  FslagResidual r;
  r.phases = a.theta;
  r.phase = a.theta.mean();
  for (Index i = 0; i < a.theta.size(); ++i) {
    const double dev = a.theta[i] - r.phase;
    r.max_phase_deviation = std::max(r.max_phase_deviation, std::abs(dev));
    r.max_imaginary = std::max(r.max_imaginary, std::abs(std::sin(dev)));
  }
  return r;
}

struct TranslatorEquation {
  double theta0 = 0.0;
  double deviation = 0.0;  ///< max - min of theta - <F, JT>
  Vec values;
};

inline TranslatorEquation translator_equation_check(const DiscreteLagrangian& L, const AmbientSpace& ambient) {
  const Vec JT = apply_J(ambient.translation());
  const AngleField a = lagrangian_angle(L);
  TranslatorEquation r;
  r.values.resize(L.size());
  for (Index i = 0; i < L.size(); ++i) r.values[i] = a.theta[i] - L.point(i).dot(JT);
  // Branch: bring the first value into (-pi, pi], keep the rest continuous.
  const double shift = wrap_angle(r.values[0]) - r.values[0];
  r.values.array() += shift;
  r.theta0 = r.values.mean();
  r.deviation = r.values.maxCoeff() - r.values.minCoeff();
  return r;
}

struct DeformationResidual {
  double d_alpha = 0.0;       ///< ||d omega~(xi)||_w
  double d_star_alpha = 0.0;  ///< ||d*_f omega~(xi)||_w
};

/// Infinitesimal f-SLag deformations satisfy d alpha = d*_f alpha = 0 for
/// alpha = omega~(xi). Jet curves are evaluated pointwise over the
/// diagnostic window; other meshes through the weighted complex.
inline DeformationResidual fslag_deformation_residual(const DiscreteLagrangian& L, const AmbientSpace& ambient,
                                                      const NormalField& xi) {
  const WeightedComplex C = build_complex(L, ambient);
  const OneForm alpha = omega_tilde(L, xi);
  DeformationResidual r;
  if (L.is_curve() && L.has_jets()) {
    const Vec ds = codifferential_pointwise(L, ambient, alpha.vertex_values.col(0));
    const auto mask = diagnostic_mask(L);
    double acc = 0.0;
    for (Index i = 0; i < L.size(); ++i)
      if (mask[static_cast<size_t>(i)]) acc += C.mass[i] * ds[i] * ds[i];
    r.d_star_alpha = std::sqrt(acc);
    return r;
  }
  if (!L.is_curve()) {
    const Vec da = d_edge(C, alpha.edge_values);
    r.d_alpha = std::sqrt(inner_face(C, da, da));
  }
  const Vec ds = d_star(C, alpha.edge_values);
  double acc = 0.0;
  for (Index i = 0; i < L.size(); ++i)
    if (!C.boundary[static_cast<size_t>(i)]) acc += C.mass[i] * ds[i] * ds[i];
  r.d_star_alpha = std::sqrt(acc);
  return r;
}

}  // namespace lmcf
