#pragma once

// Weighted discrete exterior calculus on curves and product grids.
//
// The weighted inner products use w = e^{-q f} with q = p/2m (e^{-f/2} in the
// Lagrangian case). With lumped vertex mass M, edge weights W and incidence
// d0, the Witten Laplacian on functions is the positive operator
//   Delta_f = d*_f d = M^{-1} d0^T W d0,
// i.e. Delta_f u = -(Delta u - 1/2 <grad f, grad u>). The analyst-sign
// operator is its negation.
//
// Pointwise operators on smooth curves (jets or a fourth-order position
// reconstruction) live at the end of this header; they back the identity
// checks that need accuracy beyond the O(h^2) matrix discretisation.

#include "lmcf/ambient.hpp"
#include "lmcf/lagrangian.hpp"
#include "lmcf/types.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace lmcf {

using SpMat = Eigen::SparseMatrix<double>;

struct WeightedComplex {
  DiscreteLagrangian mesh;
  AmbientSpace ambient;
  double q = 0.5;
  Vec vertex_weight;  ///< e^{-q f(F_i)}
  Vec mass;           ///< weighted lumped mass
  std::vector<Edge> edge_list;
  Vec edge_length, edge_dual, edge_weight;
  std::vector<Face> face_list;
  Vec face_area, face_weight;
  SpMat d0, d1, stiffness;
  std::vector<char> boundary;

  Index vertex_count() const { return mass.size(); }
  Index edge_count() const { return edge_length.size(); }
  bool closed() const { return !mesh.has_boundary(); }
};

inline WeightedComplex build_complex(const DiscreteLagrangian& L, const AmbientSpace& ambient) {
  WeightedComplex C{L, ambient};
  C.q = weight_exponent(L, ambient);
  const Points& X = L.vertices();
  const Index n = L.size();
  if (n < 3) throw GeometryError("mesh too small for a weighted complex");

  C.vertex_weight.resize(n);
  for (Index i = 0; i < n; ++i) C.vertex_weight[i] = std::exp(-C.q * ambient.potential(L.point(i)));
  C.boundary.resize(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) C.boundary[static_cast<size_t>(i)] = L.is_boundary(i);

  C.edge_list = edges(L);
  const Index ne = static_cast<Index>(C.edge_list.size());
  C.edge_length.resize(ne);
  for (Index e = 0; e < ne; ++e) {
    const auto& E = C.edge_list[static_cast<size_t>(e)];
    C.edge_length[e] = (X.row(E.b) - X.row(E.a)).norm();
    if (!(C.edge_length[e] > 0.0)) throw GeometryError("degenerate edge " + std::to_string(e));
  }

  // Dual lengths in each parameter direction.
  Vec lu = Vec::Zero(n), lv = Vec::Zero(n);
  const Index neu = edge_count_u(L);
  for (Index e = 0; e < ne; ++e) {
    const auto& E = C.edge_list[static_cast<size_t>(e)];
    Vec& target = (e < neu) ? lu : lv;
    target[E.a] += 0.5 * C.edge_length[e];
    target[E.b] += 0.5 * C.edge_length[e];
  }

  C.edge_dual = Vec::Ones(ne);
  if (L.is_curve()) {
    C.mass = C.vertex_weight.cwiseProduct(lu);
  } else {
    C.mass = C.vertex_weight.cwiseProduct(lu).cwiseProduct(lv);
    for (Index e = 0; e < ne; ++e) {
      const auto& E = C.edge_list[static_cast<size_t>(e)];
      C.edge_dual[e] = (e < neu) ? 0.5 * (lv[E.a] + lv[E.b]) : 0.5 * (lu[E.a] + lu[E.b]);
    }
  }

  C.edge_weight.resize(ne);
  for (Index e = 0; e < ne; ++e) {
    const auto& E = C.edge_list[static_cast<size_t>(e)];
    const Vec mid = 0.5 * (X.row(E.a) + X.row(E.b)).transpose();
    C.edge_weight[e] = std::exp(-C.q * ambient.potential(mid)) * C.edge_dual[e] / C.edge_length[e];
  }

  std::vector<Eigen::Triplet<double>> t0;
  t0.reserve(static_cast<size_t>(2 * ne));
  for (Index e = 0; e < ne; ++e) {
    t0.emplace_back(e, C.edge_list[static_cast<size_t>(e)].a, -1.0);
    t0.emplace_back(e, C.edge_list[static_cast<size_t>(e)].b, 1.0);
  }
  C.d0.resize(ne, n);
  C.d0.setFromTriplets(t0.begin(), t0.end());

  C.face_list = faces(L);
  const Index nf = static_cast<Index>(C.face_list.size());
  C.face_area.resize(nf);
  C.face_weight.resize(nf);
  std::vector<Eigen::Triplet<double>> t1;
  for (Index f = 0; f < nf; ++f) {
    const Face& F = C.face_list[static_cast<size_t>(f)];
    const double a = 0.25 * (C.edge_length[F.edges[0]] + C.edge_length[F.edges[2]]) *
                     (C.edge_length[F.edges[1]] + C.edge_length[F.edges[3]]);
    Vec centroid = Vec::Zero(X.cols());
    for (Index v : F.vertices) centroid += 0.25 * X.row(v).transpose();
    C.face_area[f] = a;
    C.face_weight[f] = std::exp(-C.q * ambient.potential(centroid)) / a;
    for (int k = 0; k < 4; ++k) t1.emplace_back(f, F.edges[static_cast<size_t>(k)], F.signs[static_cast<size_t>(k)]);
  }
  C.d1.resize(nf, ne);
  C.d1.setFromTriplets(t1.begin(), t1.end());

  C.stiffness = SpMat(C.d0.transpose() * C.edge_weight.asDiagonal() * C.d0);
  return C;
}

inline double inner_vertex(const WeightedComplex& C, const Vec& u, const Vec& v) {
  return (C.mass.array() * u.array() * v.array()).sum();
}

inline double inner_edge(const WeightedComplex& C, const Vec& a, const Vec& b) {
  return (C.edge_weight.array() * a.array() * b.array()).sum();
}

inline double inner_face(const WeightedComplex& C, const Vec& a, const Vec& b) {
  return (C.face_weight.array() * a.array() * b.array()).sum();
}

inline Vec d_vertex(const WeightedComplex& C, const Vec& u) { return C.d0 * u; }
inline Vec d_edge(const WeightedComplex& C, const Vec& a) { return C.d1 * a; }

/// Weighted codifferential of an edge 1-form, the adjoint of d under the
/// weighted inner products.
inline Vec d_star(const WeightedComplex& C, const Vec& alpha) {
  if (alpha.size() != C.edge_count()) throw GeometryError("1-form size does not match edge count");
  return (C.d0.transpose() * C.edge_weight.cwiseProduct(alpha)).cwiseQuotient(C.mass);
}

inline Vec witten_apply(const WeightedComplex& C, const Vec& u) {
  if (u.size() != C.vertex_count()) throw GeometryError("function size does not match vertex count");
  return (C.stiffness * u).cwiseQuotient(C.mass);
}

/// The operator Delta u - 1/2 <grad f, grad u> (negative semidefinite).
inline Vec witten_apply_analyst(const WeightedComplex& C, const Vec& u) { return -witten_apply(C, u); }

/// Delta_f on 1-forms of a curve: d d*_f alpha (d alpha = 0 in one dimension).
inline Vec witten_1form_apply(const WeightedComplex& C, const Vec& alpha) {
  if (!C.mesh.is_curve()) throw PreconditionError("1-form Witten Laplacian is implemented on curves only");
  return C.d0 * d_star(C, alpha);
}

// ---------------------------------------------------------------------------
// Spectrum

struct SpectrumResult {
  Vec eigenvalues;
  Mat eigenfunctions;  ///< columns, M-orthonormal, zero on clamped vertices
  Vec residuals;       ///< ||K u - lambda M u|| per pair
  bool dirichlet = false;
  std::string solver;
  int iterations = 0;

  double lambda1() const { return dirichlet ? eigenvalues[0] : eigenvalues[1]; }
  Vec lambda1_function() const { return dirichlet ? eigenfunctions.col(0) : eigenfunctions.col(1); }
};

namespace detail {

inline constexpr Index kDenseLimit = 1500;

// Block shift-invert subspace iteration with Rayleigh-Ritz on (K, M).
inline void subspace_iteration(const SpMat& K, const Vec& M, Index k, SpectrumResult& out) {
  const Index n = K.rows();
  const Index p = std::min(n, std::max<Index>(2 * k, k + 8));
  const Vec ratio = K.diagonal().cwiseQuotient(M);
  const double shift = 1e-6 * ratio.maxCoeff() + 1e-12;

  SpMat A = K;
  for (Index i = 0; i < n; ++i) A.coeffRef(i, i) += shift * M[i];
  Eigen::SimplicialLDLT<SpMat> solver(A);
  if (solver.info() != Eigen::Success) throw NumericalError("sparse factorisation failed");

  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> gauss;
  Mat X(n, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) X(i, j) = gauss(rng);

  Vec lambda;
  Mat V;
  Vec res(k);
  for (int it = 1; it <= 2000; ++it) {
    Mat Y = solver.solve(M.asDiagonal() * X);
    // M-orthonormalise: Householder QR of M^{1/2} Y.
    const Vec sq = M.cwiseSqrt();
    Eigen::HouseholderQR<Mat> qr(sq.asDiagonal() * Y);
    Y = sq.cwiseInverse().asDiagonal() * (qr.householderQ() * Mat::Identity(n, p));
    const Mat Kp = Y.transpose() * (K * Y);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Kp + Kp.transpose()));
    X = Y * es.eigenvectors();
    lambda = es.eigenvalues();
    for (Index j = 0; j < k; ++j) res[j] = (K * X.col(j) - lambda[j] * M.cwiseProduct(X.col(j))).norm();
    out.iterations = it;
    if (res.maxCoeff() <= 1e-10) break;
  }
  out.eigenvalues = lambda.head(k);
  V = X.leftCols(k);
  out.eigenfunctions = V;
  out.residuals = res;
  out.solver = "shift-invert subspace iteration";
}

}  // namespace detail

/// Lowest k eigenpairs of K u = lambda M u. Closed meshes use every vertex;
/// meshes with boundary give the Dirichlet spectrum on interior vertices.
inline SpectrumResult spectrum(const WeightedComplex& C, Index k) {
  std::vector<Index> free;
  for (Index i = 0; i < C.vertex_count(); ++i)
    if (!C.boundary[static_cast<size_t>(i)]) free.push_back(i);
  const Index nf = static_cast<Index>(free.size());
  if (k < 1) throw ValidationError("k", "need at least one eigenvalue");
  if (!C.closed() && nf < 1) throw GeometryError("no interior vertices");
  if (C.closed() && k < 2) k = 2;
  k = std::min(k, nf);

  std::vector<Index> pos(static_cast<size_t>(C.vertex_count()), -1);
  for (Index i = 0; i < nf; ++i) pos[static_cast<size_t>(free[static_cast<size_t>(i)])] = i;
  std::vector<Eigen::Triplet<double>> trip;
  for (int o = 0; o < C.stiffness.outerSize(); ++o)
    for (SpMat::InnerIterator it(C.stiffness, o); it; ++it) {
      const Index r = pos[static_cast<size_t>(it.row())], c = pos[static_cast<size_t>(it.col())];
      if (r >= 0 && c >= 0) trip.emplace_back(r, c, it.value());
    }
  SpMat K(nf, nf);
  K.setFromTriplets(trip.begin(), trip.end());
  Vec M(nf);
  for (Index i = 0; i < nf; ++i) M[i] = C.mass[free[static_cast<size_t>(i)]];

  SpectrumResult R;
  R.dirichlet = !C.closed();
  if (nf <= detail::kDenseLimit) {
    const Vec s = M.cwiseSqrt().cwiseInverse();
    const Mat A = s.asDiagonal() * Mat(K) * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()));
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver did not converge");
    R.eigenvalues = es.eigenvalues().head(k);
    R.eigenfunctions = s.asDiagonal() * es.eigenvectors().leftCols(k);
    R.residuals.resize(k);
    for (Index j = 0; j < k; ++j)
      R.residuals[j] =
          (K * R.eigenfunctions.col(j) - R.eigenvalues[j] * M.cwiseProduct(R.eigenfunctions.col(j))).norm();
    R.solver = "dense symmetric (tridiagonal QL)";
  } else {
    detail::subspace_iteration(K, M, k, R);
  }
  if (R.residuals.maxCoeff() > 1e-8) throw NumericalError("eigensolver residual above 1e-8");

  // Scatter back to full vertex vectors; fix the sign so the largest entry is positive.
  Mat full = Mat::Zero(C.vertex_count(), k);
  for (Index j = 0; j < k; ++j) {
    Index arg = 0;
    R.eigenfunctions.col(j).cwiseAbs().maxCoeff(&arg);
    const double sgn = R.eigenfunctions(arg, j) < 0 ? -1.0 : 1.0;
    for (Index i = 0; i < nf; ++i) full(free[static_cast<size_t>(i)], j) = sgn * R.eigenfunctions(i, j);
  }
  R.eigenfunctions = std::move(full);
  return R;
}

inline SpectrumResult lambda1(const WeightedComplex& C) { return spectrum(C, C.closed() ? 2 : 1); }

// ---------------------------------------------------------------------------
// Pointwise operators on curves

/// Fourth-order parameter derivatives of a sampled curve. Exact jets are used
/// when present; otherwise positions are differentiated with vertex index as
/// parameter.
struct CurveSampler {
  double h = 1.0;
  bool periodic = false;
  Points d1, d2;
  Vec speed, kappa;
  Points tau;

  Vec derivative(const Vec& g) const {
    const Index n = g.size();
    Vec out(n);
    const double c = 1.0 / (12.0 * h);
    if (periodic) {
      for (Index i = 0; i < n; ++i) {
        auto at = [&](Index k) { return g[((i + k) % n + n) % n]; };
        out[i] = c * (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2));
      }
      return out;
    }
    if (n < 5) throw GeometryError("need at least 5 samples for fourth-order differences");
    out[0] = c * (-25.0 * g[0] + 48.0 * g[1] - 36.0 * g[2] + 16.0 * g[3] - 3.0 * g[4]);
    out[1] = c * (-3.0 * g[0] - 10.0 * g[1] + 18.0 * g[2] - 6.0 * g[3] + g[4]);
    for (Index i = 2; i < n - 2; ++i) out[i] = c * (-g[i + 2] + 8.0 * g[i + 1] - 8.0 * g[i - 1] + g[i - 2]);
    out[n - 2] = -c * (-3.0 * g[n - 1] - 10.0 * g[n - 2] + 18.0 * g[n - 3] - 6.0 * g[n - 4] + g[n - 5]);
    out[n - 1] = -c * (-25.0 * g[n - 1] + 48.0 * g[n - 2] - 36.0 * g[n - 3] + 16.0 * g[n - 4] - 3.0 * g[n - 5]);
    return out;
  }

  Points derivative(const Points& P) const {
    Points out(P.rows(), P.cols());
    for (Index c = 0; c < P.cols(); ++c) out.col(c) = derivative(Vec(P.col(c)));
    return out;
  }

  /// d/ds along arc length.
  Vec arc_derivative(const Vec& g) const { return derivative(g).cwiseQuotient(speed); }
};

inline CurveSampler sample_curve(const DiscreteLagrangian& L) {
  if (!L.is_curve()) throw PreconditionError("pointwise operators are implemented on curves only");
  CurveSampler S;
  S.periodic = L.is_closed_curve();
  if (L.has_jets()) {
    S.h = L.param_step_u();
    S.d1 = L.jets().du;
    S.d2 = L.jets().duu;
  } else {
    S.h = 1.0;
    S.d1 = S.derivative(L.vertices());
    S.d2 = S.derivative(S.d1);
  }
  const Index n = L.size();
  S.speed.resize(n);
  S.kappa.resize(n);
  S.tau.resize(n, 2);
  for (Index i = 0; i < n; ++i) {
    const Eigen::Vector2d a = S.d1.row(i).transpose(), b = S.d2.row(i).transpose();
    S.speed[i] = a.norm();
    if (!(S.speed[i] > 0.0)) throw GeometryError("degenerate tangent at vertex " + std::to_string(i));
    S.tau.row(i) = (a / S.speed[i]).transpose();
    S.kappa[i] = cross2(a, b) / (S.speed[i] * S.speed[i] * S.speed[i]);
  }
  return S;
}

/// Pointwise Delta_f u = -e^{qf} (e^{-qf} u_s)_s on a curve.
inline Vec witten_apply_pointwise(const DiscreteLagrangian& L, const AmbientSpace& ambient, const Vec& u) {
  const CurveSampler S = sample_curve(L);
  const double q = weight_exponent(L, ambient);
  Vec rho(L.size());
  for (Index i = 0; i < L.size(); ++i) rho[i] = std::exp(-q * ambient.potential(L.point(i)));
  const Vec flux = rho.cwiseProduct(S.arc_derivative(u));
  return -S.arc_derivative(flux).cwiseQuotient(rho);
}

/// Pointwise d*_f alpha for alpha = a ds on a curve: -e^{qf} (e^{-qf} a)_s.
inline Vec codifferential_pointwise(const DiscreteLagrangian& L, const AmbientSpace& ambient, const Vec& a) {
  const CurveSampler S = sample_curve(L);
  const double q = weight_exponent(L, ambient);
  Vec rho(L.size());
  for (Index i = 0; i < L.size(); ++i) rho[i] = std::exp(-q * ambient.potential(L.point(i)));
  return -S.arc_derivative(rho.cwiseProduct(a)).cwiseQuotient(rho);
}

/// Residual fields of the translating-soliton identities, pointwise.
struct TranslatorIdentities {
  Vec laplace_f_plus_2H2;  ///< Delta f + 2|H|^2
  Vec energy;              ///< |H|^2 + |grad f|^2 / 4 - 1
  Vec steady;              ///< Delta f - |grad f|^2 / 2 + 2
  Vec eigen_bound;         ///< Delta_f e^{f/4} + e^{f/4} / 4 (analyst sign), <= 0 expected
  std::vector<char> mask;  ///< diagnostic vertices

  static double max_abs(const Vec& v, const std::vector<char>& m) {
    double r = 0.0;
    for (Index i = 0; i < v.size(); ++i)
      if (m[static_cast<size_t>(i)]) r = std::max(r, std::abs(v[i]));
    return r;
  }
  static double max_value(const Vec& v, const std::vector<char>& m) {
    double r = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < v.size(); ++i)
      if (m[static_cast<size_t>(i)]) r = std::max(r, v[i]);
    return r;
  }
};

namespace detail {

struct RestrictedPotential {
  Vec f, fs, lap;  // F*f, its arc derivative, its Laplace-Beltrami (analyst sign)
  Vec H2;          // |H|^2
};

inline RestrictedPotential restrict_potential(const DiscreteLagrangian& L, const AmbientSpace& ambient) {
  const CurveSampler S = sample_curve(L);
  RestrictedPotential R;
  R.f.resize(L.size());
  for (Index i = 0; i < L.size(); ++i) R.f[i] = ambient.potential(L.point(i));
  R.fs = S.arc_derivative(R.f);
  R.lap = S.arc_derivative(R.fs);
  R.H2 = S.kappa.cwiseAbs2();
  return R;
}

}  // namespace detail

inline TranslatorIdentities translator_identities(const DiscreteLagrangian& L, const AmbientSpace& ambient) {
  if (ambient.kind() != PotentialKind::Translator) throw PreconditionError("translator identities need a translator potential");
  const auto R = detail::restrict_potential(L, ambient);
  TranslatorIdentities out;
  out.laplace_f_plus_2H2 = R.lap + 2.0 * R.H2;
  out.energy = R.H2 + 0.25 * R.fs.cwiseAbs2() - Vec::Ones(L.size());
  out.steady = R.lap - 0.5 * R.fs.cwiseAbs2() + 2.0 * Vec::Ones(L.size());
  const Vec e = (0.25 * R.f.array()).exp().matrix();
  out.eigen_bound = -witten_apply_pointwise(L, ambient, e) + 0.25 * e;
  out.mask = diagnostic_mask(L);
  return out;
}

struct SteadyIdentity {
  double constant = 0.0;   ///< mean of Delta f - |grad f|^2 / 2 over the window
  double deviation = 0.0;  ///< max - min over the window
};

inline SteadyIdentity steady_identity(const DiscreteLagrangian& L, const AmbientSpace& ambient) {
  if (!ambient.is_steady()) throw PreconditionError("steady identity needs a steady soliton potential");
  const auto R = detail::restrict_potential(L, ambient);
  const Vec g = R.lap - 0.5 * R.fs.cwiseAbs2();
  const auto mask = diagnostic_mask(L);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
  int count = 0;
  for (Index i = 0; i < g.size(); ++i) {
    if (!mask[static_cast<size_t>(i)]) continue;
    lo = std::min(lo, g[i]);
    hi = std::max(hi, g[i]);
    sum += g[i];
    ++count;
  }
  return {sum / count, hi - lo};
}

}  // namespace lmcf
