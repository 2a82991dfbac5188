#pragma once

// Discrete Lagrangian immersions: closed/open polylines in C, product tori
// and product parametric grids in C^2.
//
// Two backends share one type. A mesh built from an analytic family carries
// exact first and second parameter derivatives ("jets"); every operation
// prefers them. A mesh without jets (imported polylines, evolved flows,
// displaced meshes) is handled by finite differences on positions.
//
// Conventions: nu = J tau for curves; omega~(xi)(X) = <xi, JX>, which gives
// omega~(J grad u) = du, hence omega~(H) = d theta for H = J grad theta.

#include "lmcf/ambient.hpp"
#include "lmcf/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lmcf {

enum class MeshKind { ClosedCurve, OpenCurve, ProductTorus, ParametricGrid };

inline std::string_view to_string(MeshKind k) {
  switch (k) {
    case MeshKind::ClosedCurve: return "closed_curve";
    case MeshKind::OpenCurve: return "open_curve";
    case MeshKind::ProductTorus: return "product_torus";
    case MeshKind::ParametricGrid: return "parametric_grid";
  }
  return "unknown";
}

/// Exact parameter derivatives of the immersion at every sample.
/// Curves use du and duu only.
struct Jets {
  Points du, duu;
  Points dv, duv, dvv;
};

/// Analytic family that generated a mesh; enough to regenerate its jets.
struct Family {
  std::string name;
  std::map<std::string, double> params;
};

struct Edge {
  Index a, b;
};

/// Oriented quad of a grid: boundary = e0 + e1 - e2 - e3.
struct Face {
  std::array<Index, 4> vertices;
  std::array<Index, 4> edges;
  std::array<int, 4> signs;
};

class DiscreteLagrangian {
 public:
  static DiscreteLagrangian closed_curve(Points X) {
    DiscreteLagrangian L(MeshKind::ClosedCurve, std::move(X), 0, 1, true, true);
    L.validate();
    return L;
  }

  static DiscreteLagrangian open_curve(Points X) {
    DiscreteLagrangian L(MeshKind::OpenCurve, std::move(X), 0, 1, false, true);
    L.validate();
    return L;
  }

  /// Grid with vertex (i, j) stored at row i * nv + j.
  static DiscreteLagrangian grid(MeshKind kind, Points X, Index nu, Index nv, bool periodic_u, bool periodic_v) {
    if (kind != MeshKind::ProductTorus && kind != MeshKind::ParametricGrid)
      throw GeometryError("grid() requires a surface kind");
    DiscreteLagrangian L(kind, std::move(X), nu, nv, periodic_u, periodic_v);
    L.validate();
    return L;
  }

  DiscreteLagrangian with_jets(Jets jets, double du, double dv = 0.0) const {
    DiscreteLagrangian L = *this;
    auto check = [&](const Points& P, const char* name) {
      if (P.rows() != X_.rows() || P.cols() != X_.cols()) throw GeometryError(std::string("jet shape mismatch: ") + name);
    };
    check(jets.du, "du");
    check(jets.duu, "duu");
    if (!is_curve()) {
      check(jets.dv, "dv");
      check(jets.duv, "duv");
      check(jets.dvv, "dvv");
    }
    L.jets_ = std::move(jets);
    L.du_ = du;
    L.dv_ = dv;
    return L;
  }

  DiscreteLagrangian without_jets() const {
    DiscreteLagrangian L = *this;
    L.jets_.reset();
    return L;
  }

  /// Same topology, new positions; jets are dropped.
  DiscreteLagrangian with_positions(Points X) const {
    if (X.rows() != X_.rows() || X.cols() != X_.cols()) throw GeometryError("position array shape mismatch");
    DiscreteLagrangian L = *this;
    L.X_ = std::move(X);
    L.jets_.reset();
    L.validate_positions();
    return L;
  }

  DiscreteLagrangian with_family(Family family) const {
    DiscreteLagrangian L = *this;
    L.family_ = std::move(family);
    return L;
  }

  MeshKind kind() const { return kind_; }
  bool is_curve() const { return kind_ == MeshKind::ClosedCurve || kind_ == MeshKind::OpenCurve; }
  bool is_closed_curve() const { return kind_ == MeshKind::ClosedCurve; }
  int p() const { return is_curve() ? 1 : 2; }
  int m() const { return static_cast<int>(X_.cols() / 2); }
  Index size() const { return X_.rows(); }
  Index nu() const { return nu_; }
  Index nv() const { return nv_; }
  bool periodic_u() const { return per_u_; }
  bool periodic_v() const { return per_v_; }
  Index index(Index i, Index j) const { return i * nv_ + j; }

  const Points& vertices() const { return X_; }
  auto point(Index i) const { return X_.row(i).transpose(); }

  bool has_jets() const { return jets_.has_value(); }
  const Jets& jets() const { return *jets_; }
  double param_step_u() const { return du_; }
  double param_step_v() const { return dv_; }
  const std::optional<Family>& family() const { return family_; }

  bool is_boundary(Index k) const {
    if (is_curve()) return !per_u_ && (k == 0 || k == size() - 1);
    const Index i = k / nv_, j = k % nv_;
    return (!per_u_ && (i == 0 || i == nu_ - 1)) || (!per_v_ && (j == 0 || j == nv_ - 1));
  }

  bool has_boundary() const { return !(per_u_ && per_v_); }

 private:
  DiscreteLagrangian(MeshKind kind, Points X, Index nu, Index nv, bool pu, bool pv)
      : kind_(kind), X_(std::move(X)), nu_(nu == 0 ? X_.rows() : nu), nv_(nv), per_u_(pu), per_v_(pv) {}

  void validate() const {
    if (X_.cols() != 2 && X_.cols() != 4) throw GeometryError("points must live in R^2 or R^4");
    if (is_curve()) {
      if (X_.cols() != 2) throw GeometryError("curves are supported in C^1 only");
      const Index min_n = kind_ == MeshKind::ClosedCurve ? 8 : 3;
      if (X_.rows() < min_n)
        throw GeometryError(std::string(to_string(kind_)) + " needs at least " + std::to_string(min_n) + " vertices");
    } else {
      if (X_.cols() != 4) throw GeometryError("surfaces are supported in C^2 only");
      if (nu_ * nv_ != X_.rows()) throw GeometryError("grid shape does not match vertex count");
      if (nu_ < 4 || nv_ < 4) throw GeometryError("grids need at least 4 samples per direction");
    }
    validate_positions();
  }

  void validate_positions() const {
    if (!X_.allFinite()) throw GeometryError("non-finite vertex coordinates");
    if (!is_curve()) return;
    const Index n = X_.rows();
    const Index ne = per_u_ ? n : n - 1;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (Index i = 0; i < ne; ++i) {
      const double len = (X_.row((i + 1) % n) - X_.row(i)).norm();
      if (!(len > 0.0)) throw GeometryError("repeated consecutive vertices at index " + std::to_string(i));
      lo = std::min(lo, len);
      hi = std::max(hi, len);
    }
    if (kind_ == MeshKind::ClosedCurve && hi > 10.0 * lo)
      throw GeometryError("closed curve sampling is not quasi-uniform (edge ratio > 10)");
  }

  MeshKind kind_;
  Points X_;
  Index nu_, nv_;
  bool per_u_, per_v_;
  std::optional<Jets> jets_;
  double du_ = 0.0, dv_ = 0.0;
  std::optional<Family> family_;
};

// ---------------------------------------------------------------------------
// Topology

inline Index edge_count_u(const DiscreteLagrangian& L) {
  if (L.is_curve()) return L.periodic_u() ? L.size() : L.size() - 1;
  return (L.periodic_u() ? L.nu() : L.nu() - 1) * L.nv();
}

inline std::vector<Edge> edges(const DiscreteLagrangian& L) {
  std::vector<Edge> out;
  if (L.is_curve()) {
    const Index n = L.size();
    const Index ne = edge_count_u(L);
    out.reserve(static_cast<size_t>(ne));
    for (Index i = 0; i < ne; ++i) out.push_back({i, (i + 1) % n});
    return out;
  }
  const Index nu = L.nu(), nv = L.nv();
  const Index iu = L.periodic_u() ? nu : nu - 1;
  const Index jv = L.periodic_v() ? nv : nv - 1;
  for (Index i = 0; i < iu; ++i)
    for (Index j = 0; j < nv; ++j) out.push_back({L.index(i, j), L.index((i + 1) % nu, j)});
  for (Index i = 0; i < nu; ++i)
    for (Index j = 0; j < jv; ++j) out.push_back({L.index(i, j), L.index(i, (j + 1) % nv)});
  return out;
}

inline std::vector<Face> faces(const DiscreteLagrangian& L) {
  std::vector<Face> out;
  if (L.is_curve()) return out;
  const Index nu = L.nu(), nv = L.nv();
  const Index iu = L.periodic_u() ? nu : nu - 1;
  const Index jv = L.periodic_v() ? nv : nv - 1;
  const Index offset_v = edge_count_u(L);
  auto ue = [&](Index i, Index j) { return i * nv + j; };
  auto ve = [&](Index i, Index j) { return offset_v + i * jv + j; };
  for (Index i = 0; i < iu; ++i)
    for (Index j = 0; j < jv; ++j) {
      const Index i1 = (i + 1) % nu, j1 = (j + 1) % nv;
      Face f;
      f.vertices = {L.index(i, j), L.index(i1, j), L.index(i1, j1), L.index(i, j1)};
      f.edges = {ue(i, j), ve(i1, j), ue(i, j1), ve(i, j)};
      f.signs = {1, 1, -1, -1};
      out.push_back(f);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter derivatives

namespace detail {

// Index-based (unit step) central differences on a grid, second order,
// one-sided second order at non-periodic borders.
inline Jets grid_fd_derivatives(const DiscreteLagrangian& L) {
  const Index nu = L.nu(), nv = L.nv(), n = L.size(), d = L.vertices().cols();
  const Points& X = L.vertices();
  Jets J;
  J.du = J.duu = J.dv = J.duv = J.dvv = Points::Zero(n, d);
  auto at = [&](Index i, Index j) { return X.row(L.index(i, j)); };

  auto first = [&](Index k, Index len, bool periodic, auto&& sample) -> Eigen::RowVectorXd {
    if (periodic) return 0.5 * (sample((k + 1) % len) - sample((k + len - 1) % len));
    if (k == 0) return -1.5 * sample(0) + 2.0 * sample(1) - 0.5 * sample(2);
    if (k == len - 1) return 1.5 * sample(len - 1) - 2.0 * sample(len - 2) + 0.5 * sample(len - 3);
    return 0.5 * (sample(k + 1) - sample(k - 1));
  };
  auto second = [&](Index k, Index len, bool periodic, auto&& sample) -> Eigen::RowVectorXd {
    if (periodic) return sample((k + 1) % len) - 2.0 * sample(k) + sample((k + len - 1) % len);
    if (k == 0) return 2.0 * sample(0) - 5.0 * sample(1) + 4.0 * sample(2) - sample(3);
    if (k == len - 1) return 2.0 * sample(len - 1) - 5.0 * sample(len - 2) + 4.0 * sample(len - 3) - sample(len - 4);
    return sample(k + 1) - 2.0 * sample(k) + sample(k - 1);
  };

  for (Index i = 0; i < nu; ++i)
    for (Index j = 0; j < nv; ++j) {
      const Index k = L.index(i, j);
      auto along_u = [&](Index a) -> Eigen::RowVectorXd { return at(a, j); };
      auto along_v = [&](Index b) -> Eigen::RowVectorXd { return at(i, b); };
      J.du.row(k) = first(i, nu, L.periodic_u(), along_u);
      J.dv.row(k) = first(j, nv, L.periodic_v(), along_v);
      J.duu.row(k) = second(i, nu, L.periodic_u(), along_u);
      J.dvv.row(k) = second(j, nv, L.periodic_v(), along_v);
    }
  // Mixed derivative as the u-difference of the v-derivative.
  for (Index i = 0; i < nu; ++i)
    for (Index j = 0; j < nv; ++j) {
      auto dv_along_u = [&](Index a) -> Eigen::RowVectorXd { return J.dv.row(L.index(a, j)); };
      J.duv.row(L.index(i, j)) = first(i, nu, L.periodic_u(), dv_along_u);
    }
  return J;
}

}  // namespace detail

/// Parameter derivatives of a grid: exact jets when present, else index-step
/// finite differences (the geometric quantities built from them are
/// parametrisation invariant).
inline Jets grid_derivatives(const DiscreteLagrangian& L) {
  if (L.is_curve()) throw GeometryError("grid_derivatives requires a surface mesh");
  return L.has_jets() ? L.jets() : detail::grid_fd_derivatives(L);
}

// ---------------------------------------------------------------------------
// Frames, measure, curvature

/// Oriented orthonormal tangent frame at every vertex (e2 empty for curves).
struct TangentFrames {
  Points e1, e2;

  Mat frame(Index i) const {
    Mat F(e1.cols(), e2.rows() > 0 ? 2 : 1);
    F.col(0) = e1.row(i).transpose();
    if (e2.rows() > 0) F.col(1) = e2.row(i).transpose();
    return F;
  }

  template <class D>
  Vec normal_part(Index i, const Eigen::MatrixBase<D>& v) const {
    Vec out = v;
    out -= v.dot(e1.row(i).transpose()) * e1.row(i).transpose();
    if (e2.rows() > 0) out -= v.dot(e2.row(i).transpose()) * e2.row(i).transpose();
    return out;
  }
};

inline TangentFrames tangent_frames(const DiscreteLagrangian& L) {
  const Index n = L.size();
  const Points& X = L.vertices();
  TangentFrames T;
  T.e1.resize(n, X.cols());
  if (L.is_curve()) {
    if (L.has_jets()) {
      for (Index i = 0; i < n; ++i) T.e1.row(i) = L.jets().du.row(i).normalized();
      return T;
    }
    const bool closed = L.is_closed_curve();
    for (Index i = 0; i < n; ++i) {
      Eigen::RowVector2d t = Eigen::RowVector2d::Zero();
      if (closed || i > 0) t += (X.row(i) - X.row((i + n - 1) % n)).normalized();
      if (closed || i < n - 1) t += (X.row((i + 1) % n) - X.row(i)).normalized();
      if (t.norm() < 1e-14) throw GeometryError("degenerate tangent (cusp) at vertex " + std::to_string(i));
      T.e1.row(i) = t.normalized();
    }
    return T;
  }
  const Jets D = grid_derivatives(L);
  T.e2.resize(n, X.cols());
  for (Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd a = D.du.row(i);
    const double na = a.norm();
    if (!(na > 0.0)) throw GeometryError("degenerate tangent at vertex " + std::to_string(i));
    const Eigen::RowVectorXd e1 = a / na;
    Eigen::RowVectorXd b = D.dv.row(i);
    b -= b.dot(e1) * e1;
    const double nb = b.norm();
    if (!(nb > 1e-14 * D.dv.row(i).norm())) throw GeometryError("degenerate tangent plane at vertex " + std::to_string(i));
    T.e1.row(i) = e1;
    T.e2.row(i) = b / nb;
  }
  return T;
}

struct Measure {
  Vec dual;  ///< per-vertex length (curves) or area (surfaces)
  double total = 0.0;
};

/// Discretisation of dV_g. Curves: dual lengths (|e_{i-1}| + |e_i|)/2, or
/// trapezoidal |F'| du with jets. Surfaces: trapezoidal sqrt(det g) du dv.
inline Measure induced_measure(const DiscreteLagrangian& L) {
  const Index n = L.size();
  const Points& X = L.vertices();
  Measure M;
  M.dual = Vec::Zero(n);
  if (L.is_curve()) {
    const bool closed = L.is_closed_curve();
    if (L.has_jets()) {
      for (Index i = 0; i < n; ++i) M.dual[i] = L.jets().du.row(i).norm() * L.param_step_u();
      if (!closed) {
        M.dual[0] *= 0.5;
        M.dual[n - 1] *= 0.5;
      }
    } else {
      for (const Edge& e : edges(L)) {
        const double len = (X.row(e.b) - X.row(e.a)).norm();
        if (!(len > 0.0)) throw GeometryError("degenerate edge");
        M.dual[e.a] += 0.5 * len;
        M.dual[e.b] += 0.5 * len;
      }
    }
  } else {
    const Jets D = grid_derivatives(L);
    const double cell = L.has_jets() ? L.param_step_u() * L.param_step_v() : 1.0;
    for (Index i = 0; i < L.nu(); ++i)
      for (Index j = 0; j < L.nv(); ++j) {
        const Index k = L.index(i, j);
        const double guu = D.du.row(k).squaredNorm(), gvv = D.dv.row(k).squaredNorm();
        const double guv = D.du.row(k).dot(D.dv.row(k));
        double w = std::sqrt(std::max(0.0, guu * gvv - guv * guv)) * cell;
        if (!L.periodic_u() && (i == 0 || i == L.nu() - 1)) w *= 0.5;
        if (!L.periodic_v() && (j == 0 || j == L.nv() - 1)) w *= 0.5;
        M.dual[k] = w;
      }
  }
  M.total = M.dual.sum();
  return M;
}

/// Mean curvature vector at every vertex. Polyline curves use the turning
/// angle over the dual length along nu = J tau; jets give the exact trace of
/// the second fundamental form. Boundary vertices of open meshes get zero.
inline Points mean_curvature(const DiscreteLagrangian& L) {
  const Index n = L.size();
  const Points& X = L.vertices();
  Points H = Points::Zero(n, X.cols());
  if (L.is_curve()) {
    if (L.has_jets()) {
      for (Index i = 0; i < n; ++i) {
        if (L.is_boundary(i)) continue;
        const Eigen::RowVector2d d1 = L.jets().du.row(i), d2 = L.jets().duu.row(i);
        const double s2 = d1.squaredNorm();
        if (!(s2 > 0.0)) throw GeometryError("degenerate tangent at vertex " + std::to_string(i));
        H.row(i) = (d2 - (d2.dot(d1) / s2) * d1) / s2;
      }
      return H;
    }
    const Measure mu = induced_measure(L);
    const TangentFrames T = tangent_frames(L);
    for (Index i = 0; i < n; ++i) {
      if (L.is_boundary(i)) continue;
      const Eigen::Vector2d a = (X.row(i) - X.row((i + n - 1) % n)).transpose().normalized();
      const Eigen::Vector2d b = (X.row((i + 1) % n) - X.row(i)).transpose().normalized();
      const double turn = std::atan2(cross2(a, b), a.dot(b));
      const Eigen::Vector2d nu = rot90(T.e1.row(i).transpose());
      H.row(i) = (turn / mu.dual[i]) * nu.transpose();
    }
    return H;
  }
  const Jets D = grid_derivatives(L);
  const TangentFrames T = tangent_frames(L);
  for (Index k = 0; k < n; ++k) {
    if (L.is_boundary(k)) continue;
    const Vec Fu = D.du.row(k).transpose(), Fv = D.dv.row(k).transpose();
    Eigen::Matrix2d g;
    g << Fu.dot(Fu), Fu.dot(Fv), Fu.dot(Fv), Fv.dot(Fv);
    const Eigen::Matrix2d gi = g.inverse();
    const Vec B = gi(0, 0) * D.duu.row(k).transpose() + 2.0 * gi(0, 1) * D.duv.row(k).transpose() +
                  gi(1, 1) * D.dvv.row(k).transpose();
    H.row(k) = T.normal_part(k, B).transpose();
  }
  return H;
}

/// max |omega(e1, e2)| over the orthonormal tangent frames; 0 for curves.
inline double lagrangian_defect(const DiscreteLagrangian& L) {
  if (L.is_curve()) return 0.0;
  const TangentFrames T = tangent_frames(L);
  double worst = 0.0;
  for (Index k = 0; k < L.size(); ++k)
    worst = std::max(worst, std::abs(kahler_form(T.e1.row(k).transpose(), T.e2.row(k).transpose())));
  return worst;
}

// ---------------------------------------------------------------------------
// Lagrangian angle

struct AngleField {
  Vec theta;        ///< continuously unwrapped
  int winding = 0;  ///< closed curves only
};

namespace detail {

inline double nearest_branch(double previous, double raw) { return previous + wrap_angle(raw - previous); }

}  // namespace detail

/// Phase of the pull-back of the given holomorphic volume form against
/// e^{-f/2} dV_g. With the constant-potential form this is the classical
/// Lagrangian angle (for curves: the direction angle of the tangent).
inline AngleField lagrangian_angle(const DiscreteLagrangian& L, const HoloVolumeForm& form) {
  if (L.p() != form.ambient().m() || L.m() != form.ambient().m())
    throw PreconditionError("Lagrangian angle needs p = m");
  const TangentFrames T = tangent_frames(L);
  const Index n = L.size();
  Vec raw(n);
  for (Index i = 0; i < n; ++i) {
    const Complex v = form.evaluate(L.point(i), T.frame(i));
    const double scale = std::abs(form.prefactor(L.point(i)));
    if (std::abs(v) < 1e-10 * scale) throw PreconditionError("vanishing pull-back of Omega at vertex " + std::to_string(i));
    raw[i] = std::arg(v);
  }
  AngleField out;
  out.theta = raw;
  if (L.is_curve()) {
    for (Index i = 1; i < n; ++i) out.theta[i] = detail::nearest_branch(out.theta[i - 1], raw[i]);
    if (L.is_closed_curve()) {
      const double closing = detail::nearest_branch(out.theta[n - 1], raw[0]);
      out.winding = static_cast<int>(std::lround((closing - out.theta[0]) / (2.0 * kPi)));
    }
    return out;
  }
  for (Index i = 1; i < L.nu(); ++i)
    out.theta[L.index(i, 0)] = detail::nearest_branch(out.theta[L.index(i - 1, 0)], raw[L.index(i, 0)]);
  for (Index i = 0; i < L.nu(); ++i)
    for (Index j = 1; j < L.nv(); ++j)
      out.theta[L.index(i, j)] = detail::nearest_branch(out.theta[L.index(i, j - 1)], raw[L.index(i, j)]);
  return out;
}

inline AngleField lagrangian_angle(const DiscreteLagrangian& L) {
  return lagrangian_angle(L, HoloVolumeForm(AmbientSpace::constant(L.m())));
}

// ---------------------------------------------------------------------------
// Normal fields and 1-forms

struct NormalField {
  Points values;
  /// Optional parameter derivatives (curves only); when present a displaced
  /// mesh F + h xi keeps exact jets.
  std::optional<Points> du, duu;
};

/// A discrete 1-form: integrals over the oriented edges of the mesh plus the
/// pointwise covector at each vertex in its orthonormal tangent frame.
struct OneForm {
  Vec edge_values;
  Points vertex_values;  ///< n x p: alpha(e_k) at each vertex
};

inline NormalField project_normal(const DiscreteLagrangian& L, const Points& v) {
  const TangentFrames T = tangent_frames(L);
  NormalField out;
  out.values.resize(v.rows(), v.cols());
  for (Index i = 0; i < v.rows(); ++i) out.values.row(i) = T.normal_part(i, v.row(i).transpose()).transpose();
  return out;
}

/// Largest tangential component relative to the vector norm.
inline double tangential_defect(const DiscreteLagrangian& L, const NormalField& xi) {
  const TangentFrames T = tangent_frames(L);
  double worst = 0.0;
  for (Index i = 0; i < L.size(); ++i) {
    const Vec v = xi.values.row(i).transpose();
    const double nv = v.norm();
    if (nv == 0.0) continue;
    worst = std::max(worst, (v - T.normal_part(i, v)).norm() / nv);
  }
  return worst;
}

inline OneForm omega_tilde(const DiscreteLagrangian& L, const NormalField& xi) {
  const Points& X = L.vertices();
  const auto E = edges(L);
  const TangentFrames T = tangent_frames(L);
  OneForm a;
  a.edge_values.resize(static_cast<Index>(E.size()));
  for (size_t k = 0; k < E.size(); ++k) {
    const Vec mid = 0.5 * (xi.values.row(E[k].a) + xi.values.row(E[k].b)).transpose();
    const Vec t = (X.row(E[k].b) - X.row(E[k].a)).transpose();
    a.edge_values[static_cast<Index>(k)] = mid.dot(apply_J(t));
  }
  a.vertex_values.resize(L.size(), L.p());
  for (Index i = 0; i < L.size(); ++i) {
    const Vec v = xi.values.row(i).transpose();
    a.vertex_values(i, 0) = v.dot(apply_J(T.e1.row(i).transpose()));
    if (L.p() == 2) a.vertex_values(i, 1) = v.dot(apply_J(T.e2.row(i).transpose()));
  }
  return a;
}

/// xi = J alpha^sharp, built from the pointwise covectors.
inline NormalField omega_tilde_inv(const DiscreteLagrangian& L, const OneForm& alpha) {
  const TangentFrames T = tangent_frames(L);
  Points raw(L.size(), L.vertices().cols());
  for (Index i = 0; i < L.size(); ++i) {
    Vec v = alpha.vertex_values(i, 0) * apply_J(T.e1.row(i).transpose());
    if (L.p() == 2) v += alpha.vertex_values(i, 1) * apply_J(T.e2.row(i).transpose());
    raw.row(i) = v.transpose();
  }
  return project_normal(L, raw);
}

/// du for a vertex function u: exact edge differences, vertex covectors from
/// the length-weighted average of the adjacent edge derivatives.
inline OneForm exact_form(const DiscreteLagrangian& L, const Vec& u) {
  if (u.size() != L.size()) throw GeometryError("function size does not match vertex count");
  const Points& X = L.vertices();
  const auto E = edges(L);
  OneForm a;
  a.edge_values.resize(static_cast<Index>(E.size()));
  for (size_t k = 0; k < E.size(); ++k) a.edge_values[static_cast<Index>(k)] = u[E[k].b] - u[E[k].a];
  a.vertex_values = Points::Zero(L.size(), L.p());

  const Index n = L.size();
  auto directional = [&](Index prev, Index here, Index next) {
    // derivative of u along the chord direction, second order for smooth spacing
    double num = 0.0, den = 0.0;
    if (prev >= 0) {
      num += u[here] - u[prev];
      den += (X.row(here) - X.row(prev)).norm();
    }
    if (next >= 0) {
      num += u[next] - u[here];
      den += (X.row(next) - X.row(here)).norm();
    }
    return num / den;
  };

  if (L.is_curve()) {
    const bool closed = L.is_closed_curve();
    for (Index i = 0; i < n; ++i) {
      const Index prev = (closed || i > 0) ? (i + n - 1) % n : -1;
      const Index next = (closed || i < n - 1) ? (i + 1) % n : -1;
      a.vertex_values(i, 0) = directional(prev, i, next);
    }
    return a;
  }
  const Jets D = grid_derivatives(L);
  const TangentFrames T = tangent_frames(L);
  for (Index i = 0; i < L.nu(); ++i)
    for (Index j = 0; j < L.nv(); ++j) {
      const Index k = L.index(i, j);
      const Index pu = (L.periodic_u() || i > 0) ? L.index((i + L.nu() - 1) % L.nu(), j) : -1;
      const Index nu_ = (L.periodic_u() || i < L.nu() - 1) ? L.index((i + 1) % L.nu(), j) : -1;
      const Index pv = (L.periodic_v() || j > 0) ? L.index(i, (j + L.nv() - 1) % L.nv()) : -1;
      const Index nv_ = (L.periodic_v() || j < L.nv() - 1) ? L.index(i, (j + 1) % L.nv()) : -1;
      const double du_dir = directional(pu, k, nu_);
      const double dv_dir = directional(pv, k, nv_);
      const Vec tv = D.dv.row(k).transpose().normalized();
      const double c1 = tv.dot(T.e1.row(k).transpose()), c2 = tv.dot(T.e2.row(k).transpose());
      a.vertex_values(k, 0) = du_dir;
      a.vertex_values(k, 1) = (dv_dir - c1 * du_dir) / c2;
    }
  return a;
}

// ---------------------------------------------------------------------------
// f-minimality

/// Exponent p / (2m) of the f-volume weight.
inline double weight_exponent(const DiscreteLagrangian& L, const AmbientSpace& ambient) {
  if (L.m() != ambient.m()) throw PreconditionError("mesh and ambient live in different C^m");
  return static_cast<double>(L.p()) / (2.0 * ambient.m());
}

/// K = H + (p/2m) (grad f)^perp.
inline Points generalized_mean_curvature(const DiscreteLagrangian& L, const AmbientSpace& ambient) {
  const double q = weight_exponent(L, ambient);
  const TangentFrames T = tangent_frames(L);
  Points K = mean_curvature(L);
  for (Index i = 0; i < L.size(); ++i) {
    if (L.is_boundary(i)) continue;
    K.row(i) += q * T.normal_part(i, ambient.gradient(L.point(i))).transpose();
  }
  return K;
}

struct ResidualReport {
  double max = 0.0;          ///< max over non-boundary vertices of |K|
  double weighted_l2 = 0.0;  ///< (sum |K|^2 e^{-(p/2m) f} dV)^{1/2}
};

inline ResidualReport f_minimality_residual(const DiscreteLagrangian& L, const AmbientSpace& ambient) {
  const Points K = generalized_mean_curvature(L, ambient);
  const Measure mu = induced_measure(L);
  const double q = weight_exponent(L, ambient);
  ResidualReport r;
  double acc = 0.0;
  for (Index i = 0; i < L.size(); ++i) {
    if (L.is_boundary(i)) continue;
    const double k2 = K.row(i).squaredNorm();
    r.max = std::max(r.max, std::sqrt(k2));
    acc += k2 * std::exp(-q * ambient.potential(L.point(i))) * mu.dual[i];
  }
  r.weighted_l2 = std::sqrt(acc);
  return r;
}

/// Largest edge length (curves) or grid spacing (surfaces), the mesh size h.
inline double mesh_size(const DiscreteLagrangian& L) {
  double h = 0.0;
  for (const Edge& e : edges(L)) h = std::max(h, (L.vertices().row(e.b) - L.vertices().row(e.a)).norm());
  return h;
}

inline double min_edge_length(const DiscreteLagrangian& L) {
  double h = std::numeric_limits<double>::infinity();
  for (const Edge& e : edges(L)) h = std::min(h, (L.vertices().row(e.b) - L.vertices().row(e.a)).norm());
  return h;
}

// ---------------------------------------------------------------------------
// Analytic families

/// Circle of radius r about center, counter-clockwise, n samples.
inline DiscreteLagrangian circle(double r, Index n, bool with_jets = true,
                                 const Eigen::Vector2d& center = Eigen::Vector2d::Zero()) {
  if (!(r > 0.0)) throw GeometryError("circle radius must be positive");
  Points X(n, 2), d1(n, 2), d2(n, 2);
  const double du = 2.0 * kPi / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    const double u = du * static_cast<double>(i);
    X.row(i) << center.x() + r * std::cos(u), center.y() + r * std::sin(u);
    d1.row(i) << -r * std::sin(u), r * std::cos(u);
    d2.row(i) << -r * std::cos(u), -r * std::sin(u);
  }
  auto L = DiscreteLagrangian::closed_curve(X).with_family({"circle", {{"r", r}, {"cx", center.x()}, {"cy", center.y()}}});
  if (!with_jets) return L;
  Jets J;
  J.du = d1;
  J.duu = d2;
  return L.with_jets(std::move(J), du);
}

/// Segment {offset + s (cos angle, sin angle) : s in [-half_length, half_length]}.
inline DiscreteLagrangian line(double angle, double half_length, Index n, bool with_jets = true,
                               const Eigen::Vector2d& offset = Eigen::Vector2d::Zero()) {
  if (!(half_length > 0.0)) throw GeometryError("line half_length must be positive");
  const Eigen::Vector2d d(std::cos(angle), std::sin(angle));
  const double ds = 2.0 * half_length / static_cast<double>(n - 1);
  Points X(n, 2), d1(n, 2), d2 = Points::Zero(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double s = -half_length + ds * static_cast<double>(i);
    X.row(i) = (offset + s * d).transpose();
    d1.row(i) = d.transpose();
  }
  auto L = DiscreteLagrangian::open_curve(X).with_family(
      {"line", {{"angle", angle}, {"half_length", half_length}, {"ox", offset.x()}, {"oy", offset.y()}}});
  if (!with_jets) return L;
  Jets J;
  J.du = d1;
  J.duu = d2;
  return L.with_jets(std::move(J), ds);
}

/// Rotation taking (0, -1) to the unit vector T.
inline Eigen::Matrix2d reaper_rotation(const Eigen::Vector2d& T) {
  Eigen::Matrix2d R;
  R << -T.y(), -T.x(), T.x(), -T.y();
  return R;
}

/// Grim reaper R (x, -ln cos x), x in [-half_width, half_width]: the
/// translating soliton with H + T^perp = 0 for the unit vector T.
inline DiscreteLagrangian grim_reaper(const Eigen::Vector2d& T, double half_width, Index n, bool with_jets = true) {
  if (!(half_width > 0.0 && half_width < kPi / 2)) throw GeometryError("grim reaper half_width must lie in (0, pi/2)");
  if (std::abs(T.norm() - 1.0) > 1e-12) throw GeometryError("grim reaper direction must be a unit vector");
  const Eigen::Matrix2d R = reaper_rotation(T);
  const double dx = 2.0 * half_width / static_cast<double>(n - 1);
  Points X(n, 2), d1(n, 2), d2(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double x = -half_width + dx * static_cast<double>(i);
    const double c = std::cos(x);
    X.row(i) = (R * Eigen::Vector2d(x, -std::log(c))).transpose();
    d1.row(i) = (R * Eigen::Vector2d(1.0, std::tan(x))).transpose();
    d2.row(i) = (R * Eigen::Vector2d(0.0, 1.0 / (c * c))).transpose();
  }
  auto L = DiscreteLagrangian::open_curve(X).with_family(
      {"grim_reaper", {{"Tx", T.x()}, {"Ty", T.y()}, {"half_width", half_width}}});
  if (!with_jets) return L;
  Jets J;
  J.du = d1;
  J.duu = d2;
  return L.with_jets(std::move(J), dx);
}

/// Product gamma1 x gamma2 in C x C; always Lagrangian. Jets are kept when
/// both factors carry them.
inline DiscreteLagrangian product(const DiscreteLagrangian& a, const DiscreteLagrangian& b) {
  if (!a.is_curve() || !b.is_curve()) throw GeometryError("product needs two curves");
  const Index nu = a.size(), nv = b.size();
  Points X(nu * nv, 4);
  for (Index i = 0; i < nu; ++i)
    for (Index j = 0; j < nv; ++j) X.row(i * nv + j) << a.vertices().row(i), b.vertices().row(j);
  const bool torus = a.is_closed_curve() && b.is_closed_curve();
  auto L = DiscreteLagrangian::grid(torus ? MeshKind::ProductTorus : MeshKind::ParametricGrid, std::move(X), nu, nv,
                                    a.is_closed_curve(), b.is_closed_curve());
  if (!(a.has_jets() && b.has_jets())) return L;
  Jets J;
  J.du = J.duu = J.dv = J.duv = J.dvv = Points::Zero(nu * nv, 4);
  for (Index i = 0; i < nu; ++i)
    for (Index j = 0; j < nv; ++j) {
      const Index k = i * nv + j;
      J.du.row(k).head<2>() = a.jets().du.row(i);
      J.duu.row(k).head<2>() = a.jets().duu.row(i);
      J.dv.row(k).tail<2>() = b.jets().du.row(j);
      J.dvv.row(k).tail<2>() = b.jets().duu.row(j);
    }
  return L.with_jets(std::move(J), a.param_step_u(), b.param_step_u());
}

inline DiscreteLagrangian product_torus(double r1, double r2, Index nu, Index nv, bool with_jets = true) {
  return product(circle(r1, nu, with_jets), circle(r2, nv, with_jets))
      .with_family({"product_torus", {{"r1", r1}, {"r2", r2}}});
}

/// Uniform arc-length resampling of a closed polyline to n vertices, keeping
/// vertex 0 fixed.
inline DiscreteLagrangian resample_closed(const DiscreteLagrangian& L, Index n) {
  if (!L.is_closed_curve()) throw GeometryError("resample_closed needs a closed curve");
  const Points& X = L.vertices();
  const Index m = L.size();
  std::vector<double> cum(static_cast<size_t>(m + 1), 0.0);
  for (Index i = 0; i < m; ++i)
    cum[static_cast<size_t>(i + 1)] = cum[static_cast<size_t>(i)] + (X.row((i + 1) % m) - X.row(i)).norm();
  const double total = cum.back();
  Points Y(n, 2);
  Index seg = 0;
  for (Index k = 0; k < n; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(n);
    while (seg + 1 < m && cum[static_cast<size_t>(seg + 1)] <= s) ++seg;
    const double len = cum[static_cast<size_t>(seg + 1)] - cum[static_cast<size_t>(seg)];
    const double t = (s - cum[static_cast<size_t>(seg)]) / len;
    Y.row(k) = (1.0 - t) * X.row(seg) + t * X.row((seg + 1) % m);
  }
  return DiscreteLagrangian::closed_curve(std::move(Y));
}

/// Cumulative arc length at every vertex (curves), starting from 0.
inline Vec arc_length(const DiscreteLagrangian& L) {
  if (!L.is_curve()) throw GeometryError("arc_length needs a curve");
  Vec s = Vec::Zero(L.size());
  for (Index i = 1; i < L.size(); ++i) s[i] = s[i - 1] + (L.vertices().row(i) - L.vertices().row(i - 1)).norm();
  return s;
}

/// Vertices used for diagnostics: everything on closed meshes, the interior
/// two-thirds (per open direction) elsewhere, away from clamped boundary layers.
inline std::vector<char> diagnostic_mask(const DiscreteLagrangian& L) {
  auto window = [](Index k, Index len, bool periodic) {
    if (periodic) return true;
    const double c = 0.5 * static_cast<double>(len - 1);
    return std::abs(static_cast<double>(k) - c) <= static_cast<double>(len - 1) / 3.0;
  };
  std::vector<char> mask(static_cast<size_t>(L.size()), 0);
  for (Index k = 0; k < L.size(); ++k) {
    if (L.is_curve()) {
      mask[static_cast<size_t>(k)] = window(k, L.size(), L.periodic_u());
    } else {
      mask[static_cast<size_t>(k)] = window(k / L.nv(), L.nu(), L.periodic_u()) && window(k % L.nv(), L.nv(), L.periodic_v());
    }
  }
  return mask;
}

}  // namespace lmcf
