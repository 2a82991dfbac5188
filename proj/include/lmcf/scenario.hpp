#pragma once

// Scenario files: parsing, validation, the built-in catalogue, and execution
// into a manifest plus CSV/SVG artifacts.
//
// {
//   "name": "shrinker-circle-spectrum",
//   "seed": 1,
//   "ambient":  { "m": 1, "potential": "shrinker" },
//   "geometry": { "family": "circle", "params": { "r": 1.4142135623730951 }, "resolution": 512 },
//   "task":     { "type": "spectrum", "k": 6 },
//   "output":   { "dir": "lmcf-out/shrinker-circle-spectrum", "svg": true }
// }

#include "lmcf/ambient.hpp"
#include "lmcf/calibration.hpp"
#include "lmcf/flow.hpp"
#include "lmcf/io.hpp"
#include "lmcf/lagrangian.hpp"
#include "lmcf/spectral.hpp"
#include "lmcf/variation.hpp"

#include <Eigen/Core>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace lmcf {

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  json ambient;
  json geometry;
  json task;
  json output;
  json raw;
};

inline const std::vector<std::string>& task_types() {
  static const std::vector<std::string> t = {"secondvar", "spectrum", "flow", "calibrate", "residual", "correspond"};
  return t;
}

namespace detail {

inline double number(const json& block, const std::string& scope, const std::string& key, double fallback) {
  if (!block.contains(key)) return fallback;
  const auto& v = block.at(key);
  if (!v.is_number()) throw ValidationError(scope + "." + key, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(scope + "." + key, "must be finite");
  return d;
}

inline long integer(const json& block, const std::string& scope, const std::string& key, long fallback) {
  if (!block.contains(key)) return fallback;
  const auto& v = block.at(key);
  if (!v.is_number_integer()) throw ValidationError(scope + "." + key, "must be an integer");
  return v.get<long>();
}

inline bool boolean(const json& block, const std::string& scope, const std::string& key, bool fallback) {
  if (!block.contains(key)) return fallback;
  if (!block.at(key).is_boolean()) throw ValidationError(scope + "." + key, "must be a boolean");
  return block.at(key).get<bool>();
}

inline std::string text(const json& block, const std::string& scope, const std::string& key, const std::string& fallback) {
  if (!block.contains(key)) return fallback;
  if (!block.at(key).is_string()) throw ValidationError(scope + "." + key, "must be a string");
  return block.at(key).get<std::string>();
}

inline const std::set<std::string>& families() {
  static const std::set<std::string> f = {"circle", "line", "grim_reaper", "product_torus", "mesh_file"};
  return f;
}

}  // namespace detail

inline AmbientSpace make_ambient(const json& a) {
  if (!a.is_object()) throw ValidationError("ambient", "must be an object");
  const long m = detail::integer(a, "ambient", "m", 1);
  if (m != 1 && m != 2) throw ValidationError("ambient.m", "complex dimension must be 1 or 2");
  const std::string pot = detail::text(a, "ambient", "potential", "");
  const int mi = static_cast<int>(m);
  if (pot == "shrinker") return AmbientSpace::shrinker(mi);
  if (pot == "expander") return AmbientSpace::expander(mi);
  if (pot == "constant") return AmbientSpace::constant(mi);
  if (pot == "translator") {
    if (!a.contains("T") || !a.at("T").is_array()) throw ValidationError("ambient.T", "translator needs a vector T");
    Vec T(static_cast<Index>(a.at("T").size()));
    for (Index i = 0; i < T.size(); ++i) {
      if (!a.at("T").at(static_cast<size_t>(i)).is_number()) throw ValidationError("ambient.T", "entries must be numbers");
      T[i] = a.at("T").at(static_cast<size_t>(i)).get<double>();
    }
    if (T.size() != 2 * m) throw ValidationError("ambient.T", "must have 2m entries");
    try {
      return AmbientSpace::translator(T);
    } catch (const ValidationError& e) {
      throw ValidationError("ambient.T", e.what());
    }
  }
  if (pot == "custom") {
    const Index d = 2 * m;
    if (!a.contains("hessian") || !a.contains("linear")) throw ValidationError("ambient.hessian", "custom needs hessian and linear");
    Mat A(d, d);
    Vec b(d);
    try {
      for (Index i = 0; i < d; ++i) {
        b[i] = a.at("linear").at(static_cast<size_t>(i)).get<double>();
        for (Index j = 0; j < d; ++j) A(i, j) = a.at("hessian").at(static_cast<size_t>(i)).at(static_cast<size_t>(j)).get<double>();
      }
    } catch (const json::exception&) {
      throw ValidationError("ambient.hessian", "custom potential needs a 2m x 2m hessian and a 2m linear term");
    }
    try {
      return AmbientSpace::custom(A, b);
    } catch (const ValidationError& e) {
      throw ValidationError("ambient." + e.field(), e.what());
    }
  }
  throw ValidationError("ambient.potential", "unknown potential '" + pot + "'");
}

inline DiscreteLagrangian make_geometry(const json& g, const AmbientSpace& ambient) {
  if (!g.is_object()) throw ValidationError("geometry", "must be an object");
  const std::string fam = detail::text(g, "geometry", "family", "");
  if (!detail::families().count(fam)) throw ValidationError("geometry.family", "unknown family '" + fam + "'");
  if (fam == "mesh_file") return read_mesh(detail::text(g, "geometry", "path", ""));

  const bool jets = detail::boolean(g, "geometry", "jets", true);
  Family F{fam, {}};
  if (g.contains("params")) {
    if (!g.at("params").is_object()) throw ValidationError("geometry.params", "must be an object");
    for (const auto& [k, v] : g.at("params").items()) F.params[k] = detail::number(g.at("params"), "geometry.params", k, 0.0);
  }
  if (fam == "grim_reaper" && ambient.kind() == PotentialKind::Translator && !F.params.count("Tx")) {
    F.params["Tx"] = ambient.translation()[0];
    F.params["Ty"] = ambient.translation()[1];
  }

  Index nu = 0, nv = 0;
  if (fam == "product_torus") {
    const auto& r = g.contains("resolution") ? g.at("resolution") : json(64);
    if (r.is_array() && r.size() == 2 && r.at(0).is_number_integer() && r.at(1).is_number_integer()) {
      nu = r.at(0).get<Index>();
      nv = r.at(1).get<Index>();
    } else if (r.is_number_integer()) {
      nu = nv = r.get<Index>();
    } else {
      throw ValidationError("geometry.resolution", "must be an integer or [nu, nv]");
    }
    if (nu < 4 || nv < 4 || nu > 256 || nv > 256)
      throw ValidationError("geometry.resolution", "torus resolution must lie in [4, 256] per direction");
  } else {
    nu = detail::integer(g, "geometry", "resolution", 256);
    if (nu < 8 || nu > 65536) throw ValidationError("geometry.resolution", "curve resolution must lie in [8, 65536]");
  }
  try {
    return make_family(F, nu, nv, jets);
  } catch (const GeometryError& e) {
    throw ValidationError("geometry.params", e.what());
  }
}

inline Scenario parse_scenario(const json& j) {
  if (!j.is_object()) throw ValidationError("scenario", "must be a JSON object");
  Scenario s;
  s.raw = j;
  s.name = detail::text(j, "scenario", "name", "");
  if (s.name.empty()) throw ValidationError("name", "scenario needs a nonempty name");
  for (char c : s.name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'))
      throw ValidationError("name", "only letters, digits, '-' and '_' are allowed");
  const long seed = detail::integer(j, "scenario", "seed", 0);
  if (seed < 0) throw ValidationError("seed", "must be nonnegative");
  s.seed = static_cast<std::uint64_t>(seed);
  for (const char* key : {"ambient", "geometry", "task"})
    if (!j.contains(key) || !j.at(key).is_object()) throw ValidationError(key, "missing or not an object");
  s.ambient = j.at("ambient");
  s.geometry = j.at("geometry");
  s.task = j.at("task");
  s.output = j.contains("output") ? j.at("output") : json::object();
  const std::string type = detail::text(s.task, "task", "type", "");
  if (std::find(task_types().begin(), task_types().end(), type) == task_types().end())
    throw ValidationError("task.type", "unknown task '" + type + "'");
  // Eager checks of the ambient and geometry blocks.
  const AmbientSpace amb = make_ambient(s.ambient);
  (void)make_geometry(s.geometry, amb);
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("scenario", "cannot open " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ValidationError("scenario", std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario(j);
}

// ---------------------------------------------------------------------------
// Built-in catalogue

inline std::vector<json> builtin_scenarios() {
  const double r2 = std::sqrt(2.0);
  auto make = [](std::string name, json ambient, json geometry, json task, std::uint64_t seed = 1) {
    json j;
    j["name"] = name;
    j["seed"] = seed;
    j["ambient"] = std::move(ambient);
    j["geometry"] = std::move(geometry);
    j["task"] = std::move(task);
    j["output"] = {{"dir", "lmcf-out/" + name}, {"svg", true}};
    return j;
  };
  const json shrinker1 = {{"m", 1}, {"potential", "shrinker"}};
  const json shrinker2 = {{"m", 2}, {"potential", "shrinker"}};
  const json expander1 = {{"m", 1}, {"potential", "expander"}};
  const json constant1 = {{"m", 1}, {"potential", "constant"}};
  const json translator1 = {{"m", 1}, {"potential", "translator"}, {"T", {0.0, -1.0}}};
  auto circle_geo = [](double r, int n) { return json{{"family", "circle"}, {"params", {{"r", r}}}, {"resolution", n}}; };
  const json reaper = {{"family", "grim_reaper"}, {"params", {{"half_width", 1.2}}}, {"resolution", 401}};
  const json coarse_reaper = {{"family", "grim_reaper"}, {"params", {{"half_width", 1.2}}}, {"resolution", 161}};
  const json torus = {{"family", "product_torus"}, {"params", {{"r1", r2}, {"r2", r2}}}, {"resolution", {64, 64}}};
  const json expline = {{"family", "line"}, {"params", {{"angle", 0.3}, {"half_length", 3.0}}}, {"resolution", 241}};

  return {
      make("shrinker-circle-residual", shrinker1, circle_geo(r2, 512), {{"type", "residual"}, {"refine", true}}),
      make("shrinker-circle-spectrum", shrinker1, circle_geo(r2, 512), {{"type", "spectrum"}, {"k", 6}}),
      make("shrinker-circle-secondvar", shrinker1, circle_geo(r2, 512),
           {{"type", "secondvar"}, {"mode", "both"}, {"step", 1e-3}, {"modes", 4}}),
      make("shrinker-circle-correspond", shrinker1, circle_geo(r2, 256),
           {{"type", "correspond"}, {"horizon", 0.5}, {"dt", 1e-4}}),
      make("shrinker-circle-perturb", shrinker1, circle_geo(r2, 256),
           {{"type", "flow"}, {"dt", 1e-4}, {"steps", 5000}, {"perturb", {{"profile", "cos1"}, {"eps", 0.01}}}}),
      make("shrinker-unit-circle-firstvar", shrinker1, circle_geo(1.0, 512), {{"type", "residual"}, {"step", 1e-4}}),
      make("expander-line", expander1, expline,
           {{"type", "secondvar"}, {"mode", "both"}, {"step", 1e-3}, {"modes", 4}, {"random", 200}}),
      make("grim-reaper-residual", translator1, reaper, {{"type", "residual"}}),
      make("grim-reaper-translator-eq", translator1, reaper, {{"type", "calibrate"}, {"samples", 100000}}),
      make("grim-reaper-identities", translator1, reaper, {{"type", "residual"}, {"identities", true}}),
      make("grim-reaper-secondvar", translator1, reaper,
           {{"type", "secondvar"}, {"mode", "both"}, {"step", 1e-3}, {"modes", 4}, {"random", 200}}),
      make("grim-reaper-spectrum", translator1, reaper, {{"type", "spectrum"}, {"k", 4}}),
      make("grim-reaper-perturb", translator1, coarse_reaper,
           {{"type", "flow"}, {"dt", 2e-5}, {"steps", 10000}, {"perturb", {{"profile", "bump"}, {"eps", 0.01}}}}),
      make("clifford-torus-shrinker-residual", shrinker2, torus, {{"type", "residual"}}),
      make("clifford-torus-shrinker-spectrum", shrinker2, torus, {{"type", "spectrum"}, {"k", 6}}),
      make("mcf-circle-benchmark", constant1, circle_geo(r2, 256),
           {{"type", "flow"}, {"dt", 1e-4}, {"steps", 4000}, {"redistribute", false}}),
  };
}

inline std::optional<json> find_builtin(const std::string& name) {
  for (auto& j : builtin_scenarios())
    if (j.at("name") == name) return j;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Execution

struct RunResult {
  int exit_code = 0;
  std::string message;
  std::string out_dir;
  json manifest;
};

namespace detail {

inline json vec_json(const Vec& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json vec_json(const std::vector<double>& v) { return json(v); }

/// Composite Simpson rule for int_0^t dtau / sigma(tau).
inline double simpson_reparam(const AmbientSpace& amb, double t, int panels = 2000) {
  const double h = t / panels;
  double acc = 0.0;
  for (int k = 0; k <= panels; ++k) {
    const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w / amb.sigma(k * h);
  }
  return acc * h / 3.0;
}

inline Vec profile(const DiscreteLagrangian& L, const std::string& name) {
  const Index n = L.size();
  Vec u(n);
  for (Index i = 0; i < n; ++i) {
    const double x = L.is_closed_curve() ? 2.0 * kPi * i / n : static_cast<double>(i) / (n - 1);
    if (name == "cos1")
      u[i] = L.is_closed_curve() ? std::cos(x) : std::sin(kPi * x);
    else if (name == "sin1")
      u[i] = L.is_closed_curve() ? std::sin(x) : std::sin(2.0 * kPi * x);
    else if (name == "const")
      u[i] = 1.0;
    else if (name == "bump") {
      const double c = L.is_closed_curve() ? std::remainder(x, 2.0 * kPi) : (x - 0.5) * 2.0;
      u[i] = std::exp(-c * c / (2.0 * 0.15 * 0.15));
    } else
      throw ValidationError("task.perturb.profile", "unknown profile '" + name + "'");
    if (L.is_boundary(i)) u[i] = 0.0;
  }
  return u;
}

inline std::vector<Points> curve_snapshots(const FlowTrace& trace, size_t count) {
  std::vector<Points> out;
  const size_t n = trace.snapshots.size();
  for (size_t k = 0; k < count && n > 0; ++k) {
    const size_t idx = count == 1 ? n - 1 : k * (n - 1) / (count - 1);
    out.push_back(trace.snapshots[idx].mesh.vertices());
  }
  return out;
}

struct Context {
  const Scenario& sc;
  AmbientSpace amb;
  DiscreteLagrangian L;
  std::string dir;
  bool svg;
  json results = json::object();
  json artifacts = json::array();

  void csv(const std::string& file, const CsvTable& t) {
    t.write(dir + "/" + file);
    artifacts.push_back(file);
  }
  void svg_file(const std::string& file, const std::string& content) {
    if (!svg) return;
    write_text(dir + "/" + file, content);
    artifacts.push_back(file);
  }
};

inline NormalField first_variation_field(const DiscreteLagrangian& L) {
  if (!L.is_curve()) {
    NormalField xi = project_normal(L, L.vertices());
    return xi;
  }
  const TangentFrames T = tangent_frames(L);
  NormalField xi;
  xi.values = Points::Zero(L.size(), 2);
  for (Index i = 0; i < L.size(); ++i) {
    // Outward normal of a counter-clockwise closed curve is -J tau; open
    // curves get a clamped sine profile along J tau.
    const Eigen::Vector2d nu = rot90(T.e1.row(i).transpose());
    const double a = L.is_closed_curve() ? -1.0 : std::sin(kPi * i / static_cast<double>(L.size() - 1));
    xi.values.row(i) = (a * nu).transpose();
  }
  if (L.has_jets()) xi = with_parameter_jets(L, xi);
  return xi;
}

inline void task_residual(Context& c) {
  const auto& L = c.L;
  const auto r = f_minimality_residual(L, c.amb);
  c.results["residual_max"] = r.max;
  c.results["residual_weighted_l2"] = r.weighted_l2;
  c.results["f_volume"] = f_volume(L, c.amb);
  c.results["lagrangian_defect"] = lagrangian_defect(L);
  c.results["vertices"] = L.size();
  c.results["backend"] = L.has_jets() ? "analytic" : "polyline";

  const double h = number(c.sc.task, "task", "step", 1e-4);
  if (L.is_curve()) {
    const NormalField xi = first_variation_field(L);
    json fv;
    fv["field"] = L.is_closed_curve() ? "outward unit normal" : "clamped sine profile times J tau";
    fv["analytic"] = first_variation(L, c.amb, xi);
    fv["fd"] = first_variation_fd(L, c.amb, xi, h);
    fv["richardson"] = first_variation_richardson(L, c.amb, xi, h);
    fv["step"] = h;
    c.results["first_variation"] = fv;
  }

  if (boolean(c.sc.task, "task", "refine", false) && L.is_curve() && L.family()) {
    json ref = json::array();
    CsvTable t({"N", "residual_max"});
    double prev = 0.0, order = 0.0;
    for (Index n : {64, 128, 256, 512}) {
      const auto P = make_family(*L.family(), n, 0, false);
      const double res = f_minimality_residual(P, c.amb).max;
      if (prev > 0.0) order = std::log2(prev / res);
      prev = res;
      ref.push_back({{"N", n}, {"residual_max", res}});
      t.add_row({static_cast<double>(n), res});
    }
    c.results["polyline_refinement"] = ref;
    c.results["polyline_observed_order"] = order;
    c.csv("refinement.csv", t);
  }

  if (boolean(c.sc.task, "task", "identities", false)) {
    if (c.amb.kind() != PotentialKind::Translator) throw ValidationError("task.identities", "needs a translator ambient");
    const auto id = translator_identities(L, c.amb);
    const auto st = steady_identity(L, c.amb);
    const auto te = translator_equation_check(L, c.amb);
    const AngleField th = lagrangian_angle(L);
    const Vec dth = witten_apply_pointwise(L, c.amb, th.theta);
    c.results["translator_equation_deviation"] = te.deviation;
    c.results["translator_equation_theta0"] = te.theta0;
    c.results["identity_laplace_f_plus_2H2"] = TranslatorIdentities::max_abs(id.laplace_f_plus_2H2, id.mask);
    c.results["identity_H2_plus_quarter_gradf2_minus_1"] = TranslatorIdentities::max_abs(id.energy, id.mask);
    c.results["identity_steady_plus_2"] = TranslatorIdentities::max_abs(id.steady, id.mask);
    c.results["steady_constant"] = st.constant;
    c.results["steady_deviation"] = st.deviation;
    c.results["witten_theta_max"] = TranslatorIdentities::max_abs(dth, id.mask);
    c.results["eigen_bound_max"] = TranslatorIdentities::max_value(id.eigen_bound, id.mask);
    CsvTable t({"vertex", "laplace_f_plus_2H2", "H2_plus_quarter_gradf2_minus_1", "steady_plus_2", "witten_theta",
                "eigen_bound", "interior"});
    for (Index i = 0; i < L.size(); ++i)
      t.add_row({static_cast<double>(i), id.laplace_f_plus_2H2[i], id.energy[i], id.steady[i], dth[i], id.eigen_bound[i],
                 id.mask[static_cast<size_t>(i)] ? 1.0 : 0.0});
    c.csv("identities.csv", t);
  }

  // Per-vertex fields.
  const Points H = mean_curvature(L);
  const Points K = generalized_mean_curvature(L, c.amb);
  std::vector<std::string> header = {"vertex"};
  for (Index k = 0; k < L.vertices().cols(); ++k) header.push_back("x" + std::to_string(k));
  header.insert(header.end(), {"theta", "H_norm", "K_norm"});
  CsvTable t(header);
  Vec theta = Vec::Zero(L.size());
  if (L.p() == L.m()) theta = lagrangian_angle(L).theta;
  for (Index i = 0; i < L.size(); ++i) {
    std::vector<double> row = {static_cast<double>(i)};
    for (Index k = 0; k < L.vertices().cols(); ++k) row.push_back(L.vertices()(i, k));
    row.insert(row.end(), {theta[i], H.row(i).norm(), K.row(i).norm()});
    t.add_row(row);
  }
  c.csv("fields.csv", t);
  if (L.is_curve()) c.svg_file("curve.svg", svg_curves({L.vertices()}, {L.is_closed_curve()}, c.sc.name));
}

inline void task_spectrum(Context& c) {
  const long k = integer(c.sc.task, "task", "k", 6);
  if (k < 1 || k > 64) throw ValidationError("task.k", "must lie in [1, 64]");
  const WeightedComplex C = build_complex(c.L, c.amb);
  const SpectrumResult S = spectrum(C, k);
  c.results["eigenvalues"] = vec_json(S.eigenvalues);
  c.results["lambda1"] = S.lambda1();
  c.results["dirichlet"] = S.dirichlet;
  c.results["solver"] = S.solver;
  c.results["max_residual"] = S.residuals.maxCoeff();
  if (c.amb.is_soliton()) {
    try {
      const StabilityReport R = stability_report(c.L, c.amb);
      json st;
      st["c"] = R.c;
      st["lambda1"] = R.lambda1;
      st["classification"] = R.classification;
      st["f_stable"] = R.f_stable;
      st["hamiltonian_f_stable"] = R.hamiltonian_f_stable;
      if (R.witness) st["witness_Q_f"] = R.witness_Q;
      c.results["stability"] = st;
    } catch (const PreconditionError& e) {
      c.results["stability"] = {{"skipped", e.what()}};
    }
  }
  CsvTable ev({"index", "lambda", "residual"});
  for (Index j = 0; j < S.eigenvalues.size(); ++j) ev.add_row({static_cast<double>(j), S.eigenvalues[j], S.residuals[j]});
  c.csv("eigenvalues.csv", ev);
  std::vector<std::string> header = {"vertex"};
  for (Index j = 0; j < S.eigenfunctions.cols(); ++j) header.push_back("u" + std::to_string(j));
  CsvTable ef(header);
  for (Index i = 0; i < S.eigenfunctions.rows(); ++i) {
    std::vector<double> row = {static_cast<double>(i)};
    for (Index j = 0; j < S.eigenfunctions.cols(); ++j) row.push_back(S.eigenfunctions(i, j));
    ef.add_row(row);
  }
  c.csv("eigenfunctions.csv", ef);
  std::vector<double> idx, lam;
  for (Index j = 0; j < S.eigenvalues.size(); ++j) {
    idx.push_back(static_cast<double>(j));
    lam.push_back(S.eigenvalues[j]);
  }
  c.svg_file("eigenvalues.svg", svg_series(idx, {lam}, {"lambda_j"}, c.sc.name + ": spectrum of Delta_f"));
}

inline void task_secondvar(Context& c) {
  const std::string mode = text(c.sc.task, "task", "mode", "both");
  if (mode != "analytic" && mode != "fd" && mode != "both") throw ValidationError("task.mode", "must be analytic, fd or both");
  const double h = number(c.sc.task, "task", "step", 1e-3);
  const long modes = integer(c.sc.task, "task", "modes", 4);
  const long nrand = integer(c.sc.task, "task", "random", 0);
  if (modes < 1 || modes > 64) throw ValidationError("task.modes", "must lie in [1, 64]");
  if (nrand < 0 || nrand > 100000) throw ValidationError("task.random", "must lie in [0, 100000]");
  const bool do_a = mode != "fd", do_fd = mode != "analytic";
  const auto& L = c.L;
  require_f_minimal(L, c.amb, std::nullopt);

  CsvTable t({"mode", "Q_f_analytic", "Q_f_fd", "weighted_norm2"});
  json list = json::array();
  const Index n = L.size();
  for (long k = 1; k <= modes; ++k) {
    NormalField xi;
    std::string kind;
    if (L.is_closed_curve() || !L.is_curve()) {
      Vec u(n);
      for (Index i = 0; i < n; ++i) {
        const Index iu = L.is_curve() ? i : i / L.nv();
        const Index nn = L.is_curve() ? n : L.nu();
        u[i] = std::sin(2.0 * kPi * k * iu / static_cast<double>(nn));
      }
      xi = hamiltonian_field(L, u);
      kind = "hamiltonian sin(k u)";
    } else {
      Vec u(n);
      for (Index i = 0; i < n; ++i) u[i] = std::sin(kPi * k * i / static_cast<double>(n - 1));
      xi = normal_field(L, u);
      kind = "clamped normal sin(k pi x)";
    }
    json e;
    e["mode"] = k;
    e["field"] = kind;
    double qa = std::nan(""), qf = std::nan("");
    if (do_a) {
      const QuadraticTerms q = second_variation(L, c.amb, xi);
      qa = quadratic_form(q);
      e["Q_f"] = qa;
      e["terms"] = {{"d_alpha", q.d_alpha}, {"d_star_alpha", q.d_star_alpha}, {"ricci", q.ricci}};
    }
    if (do_fd) {
      qf = second_variation_fd(L, c.amb, xi, h);
      e["Q_f_fd"] = qf;
    }
    const double w2 = weighted_norm2(L, c.amb, xi);
    e["weighted_norm2"] = w2;
    if (k == 1) {
      VariationReport r;
      r.f_volume = f_volume(L, c.amb);
      r.first_variation_analytic = first_variation(L, c.amb, xi);
      r.first_variation_fd = first_variation_fd(L, c.amb, xi, h);
      r.residual_f_minimality = f_minimality_residual(L, c.amb).max;
      c.results["report"] = {{"V_f", r.f_volume},
                             {"first_variation_analytic", r.first_variation_analytic},
                             {"first_variation_fd", r.first_variation_fd},
                             {"Q_f", qa},
                             {"Q_f_fd", qf},
                             {"residual_f_minimality", r.residual_f_minimality}};
    }
    list.push_back(e);
    t.add_row({static_cast<double>(k), qa, qf, w2});
  }
  c.results["modes"] = list;
  c.results["step"] = h;
  c.csv("secondvar_modes.csv", t);

  if (nrand > 0) {
    std::mt19937_64 rng(c.sc.seed);
    double qmin = std::numeric_limits<double>::infinity(), wmin = qmin, ratio_min = qmin;
    CsvTable rt({"sample", "Q_f", "weighted_norm2"});
    for (long s = 0; s < nrand; ++s) {
      const NormalField xi = random_clamped_field(L, rng);
      const double q = quadratic_form(second_variation(L, c.amb, xi));
      const double w = weighted_norm2(L, c.amb, xi);
      qmin = std::min(qmin, q);
      wmin = std::min(wmin, w);
      ratio_min = std::min(ratio_min, q / w);
      rt.add_row({static_cast<double>(s), q, w});
    }
    c.results["random"] = {{"count", nrand}, {"min_Q_f", qmin}, {"min_weighted_norm2", wmin}, {"min_ratio", ratio_min}};
    c.csv("secondvar_random.csv", rt);
  }
}

inline void task_flow(Context& c) {
  FlowOptions opt;
  opt.dt = number(c.sc.task, "task", "dt", 1e-4);
  const long steps = integer(c.sc.task, "task", "steps", 1000);
  if (steps < 0 || steps > 10000000) throw ValidationError("task.steps", "must lie in [0, 1e7]");
  opt.steps = static_cast<int>(steps);
  opt.cfl = number(c.sc.task, "task", "cfl", 0.25);
  opt.redistribute = boolean(c.sc.task, "task", "redistribute", false);
  opt.record_every = static_cast<int>(integer(c.sc.task, "task", "record_every", std::max(1L, steps / 200)));
  if (opt.record_every < 1) throw ValidationError("task.record_every", "must be positive");
  const auto& L = c.L;

  if (c.sc.task.contains("perturb")) {
    const json& p = c.sc.task.at("perturb");
    const double eps = number(p, "task.perturb", "eps", 0.01);
    const Vec u = profile(L, text(p, "task.perturb", "profile", "cos1"));
    const double horizon = opt.dt * opt.steps;
    const auto rep = perturbation_experiment(L, c.amb, u, eps, horizon, opt.dt);
    c.results["perturbation"] = {{"eps", eps},
                                 {"initial_norm", rep.norm.front()},
                                 {"final_norm", rep.norm.back()},
                                 {"growth", rep.growth},
                                 {"log_slope", rep.log_slope},
                                 {"monotone_after_transient", rep.monotone_after_transient},
                                 {"max_volume_increase", rep.max_volume_increase},
                                 {"observation", rep.observation}};
    CsvTable t({"t", "perturbation_norm"});
    for (size_t k = 0; k < rep.t.size(); ++k) t.add_row({rep.t[k], rep.norm[k]});
    c.csv("perturbation.csv", t);
    c.svg_file("perturbation.svg", svg_series(rep.t, {rep.norm}, {"||dF perp||_w"}, c.sc.name, true));
  }

  const FlowTrace tr = glmcf_evolve(L, c.amb, opt);
  c.results["final_time"] = tr.final_time();
  c.results["max_volume_increase"] = max_volume_increase(tr);
  c.results["final_residual"] = tr.diagnostics.back().soliton_residual;
  c.results["final_f_volume"] = tr.diagnostics.back().f_volume;
  c.results["min_edge"] = tr.diagnostics.back().min_edge;
  double drift = 0.0;
  const auto mask = diagnostic_mask(L);
  for (Index i = 0; i < L.size(); ++i)
    if (mask[static_cast<size_t>(i)])
      drift = std::max(drift, (tr.final_mesh().vertices().row(i) - L.vertices().row(i)).norm());
  c.results["max_vertex_drift"] = drift;

  // Circle under plain MCF: radius against sqrt(r0^2 - 2t).
  if (L.family() && L.family()->name == "circle" && c.amb.kind() == PotentialKind::Constant) {
    const double r0 = L.family()->params.at("r");
    double worst = 0.0;
    CsvTable rt({"t", "radius", "closed_form"});
    for (const auto& s : tr.snapshots) {
      const Points& X = s.mesh.vertices();
      const Eigen::RowVector2d ctr = X.colwise().mean();
      const double r = (X.rowwise() - ctr).rowwise().norm().mean();
      const double exact = std::sqrt(r0 * r0 - 2.0 * s.t);
      worst = std::max(worst, std::abs(r - exact));
      rt.add_row({s.t, r, exact});
    }
    c.results["radius_max_error"] = worst;
    c.csv("radius.csv", rt);
  }

  CsvTable t({"t", "soliton_residual", "f_volume", "lagrangian_defect", "min_edge"});
  for (const auto& d : tr.diagnostics) t.add_row({d.t, d.soliton_residual, d.f_volume, d.lagrangian_defect, d.min_edge});
  c.csv("diagnostics.csv", t);
  if (L.is_curve()) {
    const auto snaps = curve_snapshots(tr, 6);
    c.svg_file("snapshots.svg", svg_curves(snaps, std::vector<bool>(snaps.size(), L.is_closed_curve()), c.sc.name));
  }
  std::vector<double> ts, vs;
  for (const auto& d : tr.diagnostics) {
    ts.push_back(d.t);
    vs.push_back(d.f_volume);
  }
  c.svg_file("f_volume.svg", svg_series(ts, {vs}, {"V_f"}, c.sc.name + ": f-volume"));
}

inline void task_calibrate(Context& c) {
  const long n = integer(c.sc.task, "task", "samples", 100000);
  if (n < 1 || n > 10000000) throw ValidationError("task.samples", "must lie in [1, 1e7]");
  const double phase = number(c.sc.task, "task", "phase", 0.0);
  const double radius = number(c.sc.task, "task", "radius", 3.0);
  const HoloVolumeForm form(c.amb, phase);
  const auto res = calibration_inequality_sample(form, static_cast<size_t>(n), c.sc.seed, radius);
  c.results["samples"] = n;
  c.results["min_slack"] = res.min_slack;
  c.results["worst_sample"] = {{"z", vec_json(res.worst.z)},
                               {"plane", vec_json(Vec(Eigen::Map<const Vec>(res.worst.plane.data(), res.worst.plane.size())))},
                               {"lhs", res.worst.lhs},
                               {"rhs", res.worst.rhs}};

  // Compatibility identity at random points and frames.
  std::mt19937_64 rng(c.sc.seed + 1);
  std::normal_distribution<double> gauss;
  const Index d = 2 * c.amb.m();
  double acy = 0.0;
  for (int s = 0; s < 1000; ++s) {
    Vec z(d);
    Mat F(d, d);
    for (Index i = 0; i < d; ++i) z[i] = gauss(rng);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) F(i, j) = gauss(rng);
    const auto e = acy_sides(form, z, F);
    acy = std::max(acy, std::abs(e.rhs - e.lhs) / std::max(std::abs(e.lhs), 1e-300));
  }
  c.results["acy_max_relative_error"] = acy;

  const auto& L = c.L;
  if (L.p() == L.m()) {
    c.results["tangent_plane_slack"] = tangent_plane_slack(L, form);
    const auto fr = fslag_residual(L, form);
    c.results["fslag_phase"] = fr.phase;
    c.results["fslag_max_phase_deviation"] = fr.max_phase_deviation;
    c.results["fslag_max_imaginary"] = fr.max_imaginary;
    if (c.amb.kind() == PotentialKind::Translator) {
      const auto te = translator_equation_check(L, c.amb);
      c.results["translator_equation_theta0"] = te.theta0;
      c.results["translator_equation_deviation"] = te.deviation;
    }
    CsvTable t({"vertex", "phase"});
    for (Index i = 0; i < L.size(); ++i) t.add_row({static_cast<double>(i), fr.phases[i]});
    c.csv("phases.csv", t);
  }
}

inline void task_correspond(Context& c) {
  const double horizon = number(c.sc.task, "task", "horizon", 0.5);
  const double dt = number(c.sc.task, "task", "dt", 1e-4);
  if (!(dt > 0.0)) throw ValidationError("task.dt", "must be positive");
  const auto rep = correspondence_check(c.L, c.amb, horizon, dt);
  c.results["max_discrepancy"] = rep.max_discrepancy;
  c.results["s_horizon"] = rep.s_horizon;
  const double quad = simpson_reparam(c.amb, horizon);
  c.results["s_quadrature"] = quad;
  c.results["s_closed_form_vs_quadrature"] = std::abs(quad - rep.s_horizon);
  CsvTable t({"t", "s", "discrepancy"});
  for (size_t k = 0; k < rep.t.size(); ++k) t.add_row({rep.t[k], c.amb.reparametrized_time(rep.t[k]), rep.discrepancy[k]});
  c.csv("correspondence.csv", t);
  c.svg_file("correspondence.svg", svg_series(rep.t, {rep.discrepancy}, {"Hausdorff distance"}, c.sc.name));
}

}  // namespace detail

/// Output directory: an explicit root (command line or LMCF_OUT_DIR) joined
/// with the scenario name, else output.dir, else lmcf-out/<name>.
inline std::string resolve_out_dir(const Scenario& sc, const std::string& root_override) {
  if (!root_override.empty()) return root_override + "/" + sc.name;
  if (const char* env = std::getenv("LMCF_OUT_DIR"); env && *env) return std::string(env) + "/" + sc.name;
  if (sc.output.contains("dir") && sc.output.at("dir").is_string()) return sc.output.at("dir").get<std::string>();
  return "lmcf-out/" + sc.name;
}

inline RunResult run_scenario(const Scenario& sc, const std::string& root_override = "") {
  RunResult rr;
  rr.out_dir = resolve_out_dir(sc, root_override);
  json manifest;
  manifest["scenario"] = sc.raw;
  manifest["version"] = kVersion;
  manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
  try {
    std::filesystem::create_directories(rr.out_dir);
    detail::Context ctx{sc, make_ambient(sc.ambient), make_geometry(sc.geometry, make_ambient(sc.ambient)), rr.out_dir,
                        detail::boolean(sc.output, "output", "svg", true)};
    const std::string type = sc.task.at("type").get<std::string>();
    if (type == "residual") detail::task_residual(ctx);
    else if (type == "spectrum") detail::task_spectrum(ctx);
    else if (type == "secondvar") detail::task_secondvar(ctx);
    else if (type == "flow") detail::task_flow(ctx);
    else if (type == "calibrate") detail::task_calibrate(ctx);
    else if (type == "correspond") detail::task_correspond(ctx);
    manifest["status"] = "ok";
    manifest["results"] = ctx.results;
    manifest["artifacts"] = ctx.artifacts;
  } catch (const ValidationError& e) {
    rr.exit_code = 2;
    rr.message = std::string("validation error: ") + e.what();
  } catch (const json::exception& e) {
    rr.exit_code = 2;
    rr.message = std::string("validation error: ") + e.what();
  } catch (const GeometryError& e) {
    rr.exit_code = 3;
    rr.message = std::string("geometry error: ") + e.what();
  } catch (const NumericalError& e) {
    rr.exit_code = 3;
    rr.message = std::string("numerical error: ") + e.what();
  } catch (const PreconditionError& e) {
    rr.exit_code = 3;
    rr.message = std::string("precondition failed: ") + e.what();
  }
  if (rr.exit_code != 0) {
    manifest["status"] = "error";
    manifest["exit_code"] = rr.exit_code;
    manifest["message"] = rr.message;
  }
  rr.manifest = manifest;
  std::error_code ec;
  if (std::filesystem::is_directory(rr.out_dir, ec)) {
    std::ofstream f(rr.out_dir + "/manifest.json", std::ios::binary);
    f << manifest.dump(2) << '\n';
  }
  return rr;
}

}  // namespace lmcf
