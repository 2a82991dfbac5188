// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "lmcf/lmcf.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace lmcf;
namespace fs = std::filesystem;

namespace {

const double r2 = std::sqrt(2.0);
const Eigen::Vector2d kT(0.0, -1.0);

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4))) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    if (!detail.empty()) detail += "; ";
    detail += buf;
    if (!ok) {
      detail += " [x]";
      pass = false;
    }
  }
};

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  std::function<void(Outcome&)> body;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

NormalField outward(const DiscreteLagrangian& C) {
  NormalField xi;
  xi.values = C.vertices().rowwise().normalized();
  return with_parameter_jets(C, xi);
}

void critical_points(Outcome& o) {
  const double rc = f_minimality_residual(circle(r2, 512), AmbientSpace::shrinker(1)).max;
  const double rg = f_minimality_residual(grim_reaper(kT, 1.2, 401), AmbientSpace::translator(Vec(kT))).max;
  const double rl = f_minimality_residual(line(0.3, 3.0, 241), AmbientSpace::expander(1)).max;
  o.require(rc <= 1e-8, "circle %.2e", rc);
  o.require(rg <= 1e-8, "reaper %.2e", rg);
  o.require(rl <= 1e-8, "line %.2e", rl);
  std::vector<double> res;
  for (Index n : {64, 128, 256, 512})
    res.push_back(f_minimality_residual(circle(r2, n, false), AmbientSpace::shrinker(1)).max);
  double worst = 1e300;
  for (size_t k = 1; k < res.size(); ++k) worst = std::min(worst, std::log2(res[k - 1] / res[k]));
  o.require(worst >= 1.9, "polyline order %.3f (N=512 residual %.2e)", worst, res.back());
}

void first_variation_oracle(Outcome& o) {
  const auto amb = AmbientSpace::shrinker(1);
  const auto C = circle(1.0, 512);
  const auto xi = outward(C);
  const double exact = oracle::shrinker_circle_first_variation(1.0);
  const double a = first_variation(C, amb, xi);
  const double fd = first_variation_fd(C, amb, xi, 1e-4);
  const double rich = first_variation_richardson(C, amb, xi, 1e-4);
  o.require(std::abs(a - exact) <= 1e-4, "analytic %.10f vs pi e^{-1/4} %.10f", a, exact);
  o.require(std::abs(a - fd) <= 1e-4, "|analytic - fd| %.2e", std::abs(a - fd));
  o.require(std::abs(a - rich) <= 1e-6, "|analytic - richardson| %.2e", std::abs(a - rich));
}

void second_variation_oracle(Outcome& o) {
  const auto amb = AmbientSpace::shrinker(1);
  const auto C = circle(r2, 512);
  Vec u(C.size());
  for (Index i = 0; i < C.size(); ++i) u[i] = std::sin(2.0 * oracle::pi * i / C.size());
  const NormalField xi = hamiltonian_field(C, u);
  const double target = oracle::shrinker_circle_sin_mode_Q();
  const double q = quadratic_form(second_variation(C, amb, xi));
  const double qfd = second_variation_fd(C, amb, xi, 1e-3);
  o.require(std::abs(q - target) <= 1e-2, "Q_f %.6f vs %.6f", q, target);
  o.require(std::abs(qfd - target) <= 5e-2, "Q_f fd %.6f", qfd);
}

void spectral_criterion(Outcome& o) {
  const auto sc = stability_report(circle(r2, 512), AmbientSpace::shrinker(1));
  o.require(std::abs(sc.lambda1 - 0.5) <= 1e-3, "circle lambda1 %.7f", sc.lambda1);
  o.require(sc.classification == "hamiltonian f-unstable" && sc.witness && sc.witness_Q < 0.0,
            "circle %s, witness Q_f %.4f", sc.classification.c_str(), sc.witness_Q);
  const auto st = stability_report(product_torus(r2, r2, 64, 64), AmbientSpace::shrinker(2));
  o.require(std::abs(st.lambda1 - 0.5) <= 2e-3, "torus lambda1 %.7f", st.lambda1);
  o.require(st.classification == "hamiltonian f-unstable" && st.witness && st.witness_Q < 0.0,
            "torus %s, witness Q_f %.4f", st.classification.c_str(), st.witness_Q);
}

void stability_corollaries(Outcome& o) {
  std::mt19937_64 rng(2024);
  const auto G = grim_reaper(kT, 1.2, 401);
  const auto tr = AmbientSpace::translator(Vec(kT));
  double qmin = 1e300;
  for (int s = 0; s < 200; ++s) qmin = std::min(qmin, quadratic_form(second_variation(G, tr, random_clamped_field(G, rng))));
  o.require(qmin >= -1e-6, "reaper min Q_f %.4e", qmin);

  const auto E = line(0.3, 3.0, 241);
  const auto ex = AmbientSpace::expander(1);
  double emin = 1e300, wmin = 1e300;
  for (int s = 0; s < 200; ++s) {
    const auto xi = random_clamped_field(E, rng);
    emin = std::min(emin, quadratic_form(second_variation(E, ex, xi)));
    wmin = std::min(wmin, weighted_norm2(E, ex, xi));
  }
  o.require(emin >= 0.9 * wmin, "expander min Q_f %.4f vs 0.9 min|xi|^2_w %.4f", emin, 0.9 * wmin);
}

void translator_package(Outcome& o) {
  const auto G = grim_reaper(kT, 1.2, 401);
  const auto amb = AmbientSpace::translator(Vec(kT));
  const auto te = translator_equation_check(G, amb);
  const auto id = translator_identities(G, amb);
  const Vec dth = witten_apply_pointwise(G, amb, lagrangian_angle(G).theta);
  const double a = te.deviation;
  const double b = TranslatorIdentities::max_abs(id.laplace_f_plus_2H2, id.mask);
  const double c = TranslatorIdentities::max_abs(id.energy, id.mask);
  const double d = TranslatorIdentities::max_abs(id.steady, id.mask);
  const double e = TranslatorIdentities::max_abs(dth, id.mask);
  o.require(a <= 1e-6, "(a) %.1e", a);
  o.require(b <= 1e-6, "(b) %.1e", b);
  o.require(c <= 1e-6, "(c) %.1e", c);
  o.require(d <= 1e-6, "(d) %.1e", d);
  o.require(e <= 1e-6, "(e) %.1e", e);
}

void correspondence(Outcome& o) {
  const auto amb = AmbientSpace::shrinker(1);
  const auto rep = correspondence_check(circle(r2, 256), amb, 0.5, 1e-4);
  o.require(rep.max_discrepancy <= 1e-3, "Hausdorff %.2e", rep.max_discrepancy);
  const double quad = oracle::reparam_quadrature(1.0, 0.5);
  const double err = std::abs(amb.reparametrized_time(0.5) - quad);
  o.require(err <= 1e-8, "|s(0.5) - quadrature| %.1e", err);
}

void calibration(Outcome& o) {
  const auto amb = AmbientSpace::translator(Vec(kT));
  const HoloVolumeForm form(amb);
  const auto r = calibration_inequality_sample(form, 100000, 1);
  o.require(r.min_slack >= -1e-12, "min slack %.2e", r.min_slack);
  const double ts = tangent_plane_slack(grim_reaper(kT, 1.2, 401), form);
  o.require(ts <= 1e-10, "tangent slack %.1e", ts);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  double acy = 0.0;
  for (int s = 0; s < 1000; ++s) {
    Vec z(2);
    Mat F(2, 2);
    z << g(rng), g(rng);
    F << g(rng), g(rng), g(rng), g(rng);
    const auto e = acy_sides(form, z, F);
    acy = std::max(acy, std::abs(e.rhs - e.lhs) / std::abs(e.lhs));
  }
  o.require(acy <= 1e-12, "ACY rel %.1e", acy);
}

void flow_sanity(Outcome& o) {
  FlowOptions opt;
  opt.dt = 1e-4;
  opt.steps = 4000;
  opt.record_every = 100;
  const auto tr = mcf_evolve(circle(r2, 256), opt);
  double worst = 0.0;
  for (const auto& s : tr.snapshots) {
    const Points& X = s.mesh.vertices();
    const Eigen::RowVector2d c = X.colwise().mean();
    const double r = (X.rowwise() - c).rowwise().norm().mean();
    worst = std::max(worst, std::abs(r - oracle::mcf_circle_radius(r2, s.t)));
  }
  o.require(worst <= 1e-3, "radius error %.2e (r0 = sqrt 2)", worst);

  // V_f along GLMCF from every built-in geometry.
  double vmax = -1.0;
  std::string where;
  for (const auto& j : builtin_scenarios()) {
    const Scenario s = parse_scenario(j);
    const AmbientSpace amb = make_ambient(s.ambient);
    const DiscreteLagrangian L = make_geometry(s.geometry, amb);
    FlowOptions g;
    const double h = min_edge_length(L);
    g.dt = 0.2 * h * h;
    g.steps = 200;
    g.record_every = 200;
    const double inc = max_volume_increase(glmcf_evolve(L, amb, g));
    if (inc > vmax) {
      vmax = inc;
      where = s.name;
    }
  }
  o.require(vmax <= 1e-8, "max V_f step increase %.1e over built-ins (%s)", vmax, where.c_str());
}

void determinism(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / "lmcf-acceptance";
  fs::remove_all(root);
  int files = 0, mismatched = 0, failed = 0;
  for (const auto& j : builtin_scenarios()) {
    const Scenario s = parse_scenario(j);
    const auto a = run_scenario(s, (root / "a").string());
    const auto b = run_scenario(s, (root / "b").string());
    if (a.exit_code != 0 || b.exit_code != 0) {
      ++failed;
      continue;
    }
    for (const auto& e : fs::directory_iterator(a.out_dir)) {
      if (e.path().extension() != ".csv") continue;
      ++files;
      if (slurp(e.path()) != slurp(fs::path(b.out_dir) / e.path().filename())) ++mismatched;
    }
  }
  o.require(failed == 0, "%d scenario runs failed", failed);
  o.require(files > 0 && mismatched == 0, "%d CSV files compared, %d differ", files, mismatched);
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "critical-point certificate", 3.0, critical_points},
      {2, "first-variation oracle", 1.0, first_variation_oracle},
      {3, "second-variation oracle", 5.0, second_variation_oracle},
      {4, "spectral criterion", 30.0, spectral_criterion},
      {5, "stability corollaries", 10.0, stability_corollaries},
      {6, "translator package", 1.0, translator_package},
      {7, "GLMCF / KR-MCF correspondence", 60.0, correspondence},
      {8, "calibration", 5.0, calibration},
      {9, "flow sanity", 60.0, flow_sanity},
      {10, "determinism", 0.0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail += std::string(o.detail.empty() ? "" : "; ") + "exception: " + e.what();
    }
    const double dt = seconds_since(t0);
    if (c.budget_s > 0.0 && dt > c.budget_s) {
      o.pass = false;
      char buf[96];
      std::snprintf(buf, sizeof buf, "; over runtime budget %.0f s", c.budget_s);
      o.detail += buf;
    }
    if (!o.pass) ++failures;
    std::printf("%s  %2d  %-30s  %s  (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), dt);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
