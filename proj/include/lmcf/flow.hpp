#pragma once

// Explicit time stepping of the generalized Lagrangian mean curvature flow
//   dF/dt = H + (p/2m) (grad f)^perp
// (plain MCF for f = 0), the map from a GLMCF trace to a KR-MCF trace
// C_t = phi_t^{-1} o F_{s(t)}, and perturbation experiments.
//
// Flows always run on the position backend: jets describe the initial
// family only.

#include "lmcf/ambient.hpp"
#include "lmcf/lagrangian.hpp"
#include "lmcf/types.hpp"
#include "lmcf/variation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace lmcf {

struct FlowOptions {
  double dt = 1e-4;
  int steps = 1000;
  double cfl = 0.25;
  bool redistribute = false;  ///< uniform arc-length resampling, closed curves
  int redistribute_every = 10;
  int record_every = 1;  ///< snapshot stride; diagnostics are kept for every step
  /// Position of a clamped vertex at time t given its initial position.
  std::function<Vec(double t, const Vec& initial)> boundary;
};

struct FlowDiagnostics {
  double t = 0.0;
  double soliton_residual = 0.0;  ///< max |K| over the diagnostic window
  double f_volume = 0.0;
  double lagrangian_defect = 0.0;
  double min_edge = 0.0;
};

struct FlowSnapshot {
  double t;
  DiscreteLagrangian mesh;
};

struct FlowTrace {
  std::vector<FlowSnapshot> snapshots;
  std::vector<FlowDiagnostics> diagnostics;  ///< one per step, including t = 0

  const DiscreteLagrangian& final_mesh() const { return snapshots.back().mesh; }
  double final_time() const { return snapshots.back().t; }
};

inline FlowDiagnostics flow_diagnostics(const DiscreteLagrangian& L, const AmbientSpace& ambient, double t) {
  FlowDiagnostics d;
  d.t = t;
  const Points K = generalized_mean_curvature(L, ambient);
  const auto mask = diagnostic_mask(L);
  for (Index i = 0; i < L.size(); ++i)
    if (mask[static_cast<size_t>(i)] && !L.is_boundary(i)) d.soliton_residual = std::max(d.soliton_residual, K.row(i).norm());
  d.f_volume = f_volume(L, ambient);
  d.lagrangian_defect = lagrangian_defect(L);
  d.min_edge = min_edge_length(L);
  return d;
}

inline FlowTrace glmcf_evolve(const DiscreteLagrangian& L0, const AmbientSpace& ambient, const FlowOptions& opt) {
  if (!(opt.dt > 0.0) || !std::isfinite(opt.dt)) throw ValidationError("dt", "time step must be positive");
  if (opt.steps < 0) throw ValidationError("steps", "must be nonnegative");
  if (opt.record_every < 1) throw ValidationError("record_every", "must be at least 1");
  DiscreteLagrangian L = L0.without_jets();
  const Points X0 = L.vertices();
  const double h0 = min_edge_length(L);

  FlowTrace trace;
  trace.snapshots.push_back({0.0, L});
  trace.diagnostics.push_back(flow_diagnostics(L, ambient, 0.0));

  for (int step = 1; step <= opt.steps; ++step) {
    const double hmin = min_edge_length(L);
    if (hmin < 1e-3 * h0) throw NumericalError("mesh degenerated at step " + std::to_string(step));
    if (opt.dt > opt.cfl * hmin * hmin)
      throw NumericalError("CFL violated at step " + std::to_string(step) + ": dt = " + std::to_string(opt.dt) +
                           " > " + std::to_string(opt.cfl) + " h_min^2 = " + std::to_string(opt.cfl * hmin * hmin));
    const double t = step * opt.dt;
    Points X = L.vertices() + opt.dt * generalized_mean_curvature(L, ambient);
    for (Index i = 0; i < L.size(); ++i) {
      if (!L.is_boundary(i)) continue;
      const Vec init = X0.row(i).transpose();
      X.row(i) = (opt.boundary ? opt.boundary(t, init) : init).transpose();
    }
    L = L.with_positions(std::move(X));
    if (opt.redistribute && L.is_closed_curve() && step % opt.redistribute_every == 0) L = resample_closed(L, L.size());
    trace.diagnostics.push_back(flow_diagnostics(L, ambient, t));
    if (step % opt.record_every == 0 || step == opt.steps) trace.snapshots.push_back({t, L});
  }
  return trace;
}

inline FlowTrace mcf_evolve(const DiscreteLagrangian& L0, const FlowOptions& opt) {
  return glmcf_evolve(L0, AmbientSpace::constant(L0.m()), opt);
}

/// Largest per-step increase of V_f along a trace (0 for a monotone trace).
inline double max_volume_increase(const FlowTrace& trace) {
  double worst = 0.0;
  for (size_t k = 1; k < trace.diagnostics.size(); ++k)
    worst = std::max(worst, trace.diagnostics[k].f_volume - trace.diagnostics[k - 1].f_volume);
  return worst;
}

// ---------------------------------------------------------------------------
// GLMCF -> KR-MCF

namespace detail {

/// Positions of the trace at time s, linear in s between snapshots.
inline Points interpolate_trace(const FlowTrace& trace, double s) {
  const auto& S = trace.snapshots;
  if (s < -1e-12 || s > S.back().t + 1e-12)
    throw NumericalError("s(t) = " + std::to_string(s) + " lies outside the trace range");
  size_t k = 0;
  size_t lo = 0, hi = S.size() - 1;
  while (hi - lo > 1) {
    const size_t mid = (lo + hi) / 2;
    (S[mid].t <= s ? lo : hi) = mid;
  }
  k = lo;
  if (S.size() == 1 || k + 1 >= S.size()) return S.back().mesh.vertices();
  const double a = (s - S[k].t) / (S[k + 1].t - S[k].t);
  const double w = std::clamp(a, 0.0, 1.0);
  return (1.0 - w) * S[k].mesh.vertices() + w * S[k + 1].mesh.vertices();
}

}  // namespace detail

/// C_t = phi_t^{-1}(F_{s(t)}) at the requested times.
inline FlowTrace krmcf_from_glmcf(const FlowTrace& glmcf, const AmbientSpace& ambient, const std::vector<double>& times) {
  FlowTrace out;
  for (double t : times) {
    const double s = ambient.reparametrized_time(t);
    Points X = detail::interpolate_trace(glmcf, s);
    for (Index i = 0; i < X.rows(); ++i) X.row(i) = ambient.flow_map_inverse(t, Vec(X.row(i).transpose())).transpose();
    const auto& base = glmcf.snapshots.front().mesh;
    DiscreteLagrangian C = base.with_positions(std::move(X));
    FlowDiagnostics d;
    d.t = t;
    d.min_edge = min_edge_length(C);
    out.diagnostics.push_back(d);
    out.snapshots.push_back({t, std::move(C)});
  }
  return out;
}

/// Symmetric Hausdorff distance between two vertex sets; optional masks
/// restrict each set.
inline double hausdorff(const Points& A, const Points& B, const std::vector<char>* mask = nullptr) {
  auto one_sided = [&](const Points& P, const Points& Q) {
    double worst = 0.0;
    for (Index i = 0; i < P.rows(); ++i) {
      if (mask && !(*mask)[static_cast<size_t>(i)]) continue;
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < Q.rows(); ++j) {
        if (mask && !(*mask)[static_cast<size_t>(j)]) continue;
        best = std::min(best, (P.row(i) - Q.row(j)).squaredNorm());
      }
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(one_sided(A, B), one_sided(B, A));
}

/// Symmetric distance between two open polylines: masked vertices of each
/// curve against every segment of the other.
inline double polyline_distance(const Points& A, const Points& B, const std::vector<char>& mask) {
  auto one_sided = [&](const Points& P, const Points& Q) {
    double worst = 0.0;
    for (Index i = 0; i < P.rows(); ++i) {
      if (!mask[static_cast<size_t>(i)]) continue;
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j + 1 < Q.rows(); ++j) {
        const Eigen::RowVectorXd e = Q.row(j + 1) - Q.row(j);
        const double ee = e.squaredNorm();
        const double s = ee > 0.0 ? std::clamp((P.row(i) - Q.row(j)).dot(e) / ee, 0.0, 1.0) : 0.0;
        best = std::min(best, (P.row(i) - Q.row(j) - s * e).squaredNorm());
      }
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(one_sided(A, B), one_sided(B, A));
}

struct CorrespondenceReport {
  std::vector<double> t;
  std::vector<double> discrepancy;
  double max_discrepancy = 0.0;
  double s_horizon = 0.0;
};

/// Runs GLMCF from L0 up to s(horizon) and MCF from L0 up to horizon and
/// compares MCF with phi_t^{-1} F_{s(t)}. On open curves the MCF boundary
/// follows phi_t^{-1} of the initial boundary and the comparison measures
/// the diagnostic window against the other polyline, since MCF lets vertices
/// slide along the curve.
inline CorrespondenceReport correspondence_check(const DiscreteLagrangian& L0, const AmbientSpace& ambient,
                                                 double horizon, double dt, int checkpoints = 50) {
  if (!(horizon > 0.0)) throw ValidationError("horizon", "must be positive");
  require_f_minimal(L0, ambient, std::nullopt);
  CorrespondenceReport rep;
  rep.s_horizon = ambient.reparametrized_time(horizon);

  FlowOptions g;
  g.dt = dt;
  g.steps = static_cast<int>(std::ceil(rep.s_horizon / dt - 1e-9));
  const FlowTrace gl = glmcf_evolve(L0, ambient, g);

  FlowOptions m;
  m.dt = dt;
  m.steps = static_cast<int>(std::lround(horizon / dt));
  m.record_every = std::max(1, m.steps / checkpoints);
  m.boundary = [&ambient](double t, const Vec& z) { return ambient.flow_map_inverse(t, z); };
  const FlowTrace mc = mcf_evolve(L0, m);

  std::vector<double> times;
  for (const auto& snap : mc.snapshots) times.push_back(snap.t);
  const FlowTrace kr = krmcf_from_glmcf(gl, ambient, times);
  const auto mask = diagnostic_mask(L0);
  for (size_t k = 0; k < times.size(); ++k) {
    const Points& A = mc.snapshots[k].mesh.vertices();
    const Points& B = kr.snapshots[k].mesh.vertices();
    const double d = L0.is_closed_curve() ? hausdorff(A, B) : polyline_distance(A, B, mask);
    rep.t.push_back(times[k]);
    rep.discrepancy.push_back(d);
    rep.max_discrepancy = std::max(rep.max_discrepancy, d);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Perturbation experiments

struct PerturbationReport {
  std::vector<double> t;
  std::vector<double> norm;  ///< ||delta F^perp||_w against L0's normals and mass
  double log_slope = 0.0;    ///< least-squares slope of log norm over the second half
  double growth = 0.0;       ///< final norm / initial norm
  bool monotone_after_transient = false;
  double max_volume_increase = 0.0;
  std::string observation;
};

/// Flows L0 + eps u nu and L0 under GLMCF and tracks the weighted normal
/// size of their difference. Evidence only: the report says what was observed.
inline PerturbationReport perturbation_experiment(const DiscreteLagrangian& L0, const AmbientSpace& ambient,
                                                  const Vec& u, double eps, double horizon, double dt,
                                                  int checkpoints = 100) {
  if (!L0.is_curve()) throw PreconditionError("perturbation experiments are implemented on curves only");
  if (u.size() != L0.size()) throw ValidationError("u", "profile size does not match vertex count");
  require_f_minimal(L0, ambient, std::nullopt);
  const Points H = mean_curvature(L0);
  double hmax = 0.0;
  for (Index i = 0; i < H.rows(); ++i) hmax = std::max(hmax, H.row(i).norm());
  if (hmax > 0.0 && std::abs(eps) > 0.1 / hmax)
    throw PreconditionError("perturbation too large: eps must be at most 0.1 / max|H|");

  const NormalField xi = normal_field(L0, u);
  const DiscreteLagrangian Lp = displaced(L0.without_jets(), xi, eps);

  FlowOptions opt;
  opt.dt = dt;
  opt.steps = static_cast<int>(std::lround(horizon / dt));
  opt.record_every = std::max(1, opt.steps / checkpoints);
  const FlowTrace a = glmcf_evolve(Lp, ambient, opt);
  const FlowTrace b = glmcf_evolve(L0, ambient, opt);

  const TangentFrames T0 = tangent_frames(L0);
  const WeightedComplex C0 = build_complex(L0, ambient);
  PerturbationReport r;
  for (size_t k = 0; k < a.snapshots.size(); ++k) {
    const Points D = a.snapshots[k].mesh.vertices() - b.snapshots[k].mesh.vertices();
    double acc = 0.0;
    for (Index i = 0; i < D.rows(); ++i) {
      const double dn = D.row(i).dot(rot90(T0.e1.row(i).transpose()).transpose());
      acc += C0.mass[i] * dn * dn;
    }
    r.t.push_back(a.snapshots[k].t);
    r.norm.push_back(std::sqrt(acc));
  }
  r.max_volume_increase = max_volume_increase(a);
  const size_t n = r.norm.size();
  r.growth = r.norm.front() > 0.0 ? r.norm.back() / r.norm.front() : 0.0;

  // Slope of log norm over the second half of the run.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (size_t k = n / 2; k < n; ++k) {
    if (!(r.norm[k] > 0.0)) continue;
    const double x = r.t[k], y = std::log(r.norm[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  if (cnt >= 2) r.log_slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);

  r.monotone_after_transient = true;
  for (size_t k = std::max<size_t>(1, n / 10); k < n; ++k)
    if (r.norm[k] > r.norm[k - 1] * (1.0 + 1e-9) + 1e-15) r.monotone_after_transient = false;

  if (eps == 0.0)
    r.observation = "observed: unperturbed run, difference identically zero";
  else if (r.growth > 1.0)
    r.observation = "observed growth of the perturbation over the horizon";
  else
    r.observation = r.monotone_after_transient ? "observed monotone decay of the perturbation after the transient"
                                               : "observed net decay of the perturbation (not monotone)";
  return r;
}

}  // namespace lmcf
