#include "lmcf/spectral.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace lmcf;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const double r2 = std::sqrt(2.0);
const Eigen::Vector2d kT(0.0, -1.0);

AmbientSpace translator() { return AmbientSpace::translator(Vec(kT)); }

/// Discrete lambda_k of the regular N-gon of radius r under the shrinker
/// weight: vertex weights sit on the circle, edge weights at chord midpoints.
double ngon_shrinker_eigenvalue(int k, double r, int n) {
  const double s = std::sin(oracle::pi / n);
  const double chord = 2.0 * r * s;
  const double ratio = std::exp(r * r * s * s / 4.0);
  return 4.0 * std::pow(std::sin(oracle::pi * k / n), 2) / (chord * chord) * ratio;
}

}  // namespace

TEST_CASE("constant weight factors out of the complex", "[spectral]") {
  const auto C = circle(r2, 64, false);
  const auto Wc = build_complex(C, AmbientSpace::constant(1));
  const auto Ws = build_complex(C, AmbientSpace::shrinker(1));
  const double w = std::exp(-0.5);
  CHECK((Ws.mass - w * Wc.mass).cwiseAbs().maxCoeff() < 1e-15);
  // Edge weights are evaluated at chord midpoints, slightly inside the circle.
  const double wm = std::exp(-0.25 * r2 * r2 * std::pow(std::cos(oracle::pi / 64), 2));
  CHECK((Ws.edge_weight - wm * Wc.edge_weight).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THAT(Wc.mass.sum(), WithinRel(64 * 2 * r2 * std::sin(oracle::pi / 64), 1e-14));
}

TEST_CASE("weighted Laplacian kills constants and is symmetric", "[spectral]") {
  for (const auto& W : {build_complex(circle(1.3, 50), AmbientSpace::shrinker(1)),
                        build_complex(product_torus(1.0, 1.2, 10, 12), AmbientSpace::shrinker(2))}) {
    CHECK(witten_apply(W, Vec::Ones(W.vertex_count())).cwiseAbs().maxCoeff() < 1e-12);
    const Mat K = Mat(W.stiffness);
    CHECK((K - K.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    const Vec u = Vec::LinSpaced(W.vertex_count(), -1.0, 2.0).array().sin();
    const Vec v = Vec::LinSpaced(W.vertex_count(), 0.0, 3.0).array().cos();
    CHECK_THAT(inner_vertex(W, witten_apply(W, u), v), WithinAbs(inner_vertex(W, u, witten_apply(W, v)), 1e-12));
  }
}

TEST_CASE("degenerate complex input", "[spectral]") {
  Points two(2, 2);
  two << 0, 0, 1, 0;
  CHECK_THROWS(build_complex(DiscreteLagrangian::open_curve(two), AmbientSpace::constant(1)));
}

TEST_CASE("Fourier modes on the shrinker circle", "[spectral]") {
  const int n = 512;
  const auto C = circle(r2, n, false);
  const auto W = build_complex(C, AmbientSpace::shrinker(1));
  Vec u(n);
  for (int i = 0; i < n; ++i) u[i] = std::sin(2.0 * oracle::pi * i / n);
  const Vec Lu = witten_apply(W, u);
  CHECK((Lu - ngon_shrinker_eigenvalue(1, r2, n) * u).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((Lu - 0.5 * u).cwiseAbs().maxCoeff() < 1e-4);
  CHECK((witten_apply_analyst(W, u) + Lu).norm() == 0.0);
}

TEST_CASE("dense spectrum of the shrinker circle", "[spectral]") {
  const auto W = build_complex(circle(r2, 512, false), AmbientSpace::shrinker(1));
  const auto S = spectrum(W, 6);
  CHECK_FALSE(S.dirichlet);
  CHECK(std::abs(S.eigenvalues[0]) < 1e-10);
  CHECK_THAT(S.lambda1(), WithinAbs(ngon_shrinker_eigenvalue(1, r2, 512), 1e-10));
  CHECK_THAT(S.lambda1(), WithinAbs(0.5, 1e-3));
  CHECK_THAT(S.eigenvalues[3], WithinAbs(ngon_shrinker_eigenvalue(2, r2, 512), 1e-9));
  CHECK(S.residuals.maxCoeff() < 1e-8);
}

TEST_CASE("round circle spectrum", "[spectral]") {
  const auto S = lambda1(build_complex(circle(1.0, 400), AmbientSpace::constant(1)));
  CHECK_THAT(S.lambda1(), WithinAbs(1.0, 1e-3));
}

TEST_CASE("torus spectrum through subspace iteration", "[spectral]") {
  const auto W = build_complex(product_torus(r2, r2, 64, 64), AmbientSpace::shrinker(2));
  const auto S = spectrum(W, 6);
  CHECK(S.solver == "shift-invert subspace iteration");
  CHECK_THAT(S.lambda1(), WithinAbs(0.5, 2e-3));
  CHECK_THAT(S.eigenvalues[4], WithinAbs(S.lambda1(), 1e-9));  // four-fold
  CHECK_THAT(S.eigenvalues[5], WithinAbs(1.0, 4e-3));         // k = (1, 1)
  CHECK(S.residuals.maxCoeff() < 1e-8);
}

TEST_CASE("dense and iterative solvers agree", "[spectral]") {
  const auto W = build_complex(product_torus(1.0, 1.5, 30, 30), AmbientSpace::shrinker(2));
  const auto dense = spectrum(W, 5);
  CHECK(dense.solver.find("dense") != std::string::npos);
  SpectrumResult it;
  detail::subspace_iteration(W.stiffness, W.mass, 5, it);
  CHECK((it.eigenvalues - dense.eigenvalues).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("Dirichlet spectrum on open curves", "[spectral]") {
  // Unit-speed segment of length 2 with constant weight: (k pi / 2)^2.
  const auto W = build_complex(line(0.3, 1.0, 401, false), AmbientSpace::constant(1));
  const auto S = spectrum(W, 3);
  CHECK(S.dirichlet);
  CHECK_THAT(S.eigenvalues[0], WithinRel(std::pow(oracle::pi / 2, 2), 1e-4));
  CHECK_THAT(S.eigenvalues[1], WithinRel(std::pow(oracle::pi, 2), 1e-4));
}

TEST_CASE("Witten Laplacian on the grim reaper angle", "[spectral]") {
  const auto G = grim_reaper(kT, 1.2, 401);
  const auto amb = translator();
  const Vec theta = lagrangian_angle(G).theta;
  const Vec L = witten_apply_pointwise(G, amb, theta);
  const auto mask = diagnostic_mask(G);
  double worst = 0.0;
  for (Index i = 0; i < G.size(); ++i)
    if (mask[static_cast<size_t>(i)]) worst = std::max(worst, std::abs(L[i]));
  CHECK(worst <= 1e-6);
  // The assembled operator agrees to discretisation order.
  const auto W = build_complex(G.without_jets(), amb);
  const Vec La = witten_apply(W, theta);
  double wa = 0.0;
  for (Index i = 0; i < G.size(); ++i)
    if (mask[static_cast<size_t>(i)]) wa = std::max(wa, std::abs(La[i]));
  CHECK(wa < 1e-3);
}

TEST_CASE("1-form Laplacian on exact forms", "[spectral]") {
  const int n = 256;
  const auto W = build_complex(circle(r2, n, false), AmbientSpace::shrinker(1));
  Vec u(n);
  for (int i = 0; i < n; ++i) u[i] = std::cos(2.0 * oracle::pi * i / n);
  const Vec a = d_vertex(W, u);
  const Vec La = witten_1form_apply(W, a);
  CHECK((La - d_vertex(W, witten_apply(W, u))).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((La - 0.5 * a).cwiseAbs().maxCoeff() < 1e-4 * a.cwiseAbs().maxCoeff());
  CHECK(witten_1form_apply(W, Vec::Zero(W.edge_count())).norm() == 0.0);
}

TEST_CASE("translator identities on the grim reaper", "[spectral]") {
  const auto G = grim_reaper(kT, 1.2, 401);
  const auto id = translator_identities(G, translator());
  CHECK(TranslatorIdentities::max_abs(id.laplace_f_plus_2H2, id.mask) <= 1e-6);
  CHECK(TranslatorIdentities::max_abs(id.energy, id.mask) <= 1e-6);
  CHECK(TranslatorIdentities::max_abs(id.steady, id.mask) <= 1e-6);
  CHECK(TranslatorIdentities::max_value(id.eigen_bound, id.mask) <= 0.0);
  const auto st = steady_identity(G, translator());
  CHECK_THAT(st.constant, WithinAbs(-2.0, 1e-6));
  CHECK(st.deviation < 1e-6);
}

TEST_CASE("translator identities on a line parallel to T", "[spectral]") {
  const auto Lp = line(-oracle::pi / 2, 2.0, 101);
  const auto id = translator_identities(Lp, translator());
  CHECK(TranslatorIdentities::max_abs(id.energy, id.mask) < 1e-12);
  const auto st = steady_identity(Lp, translator());
  CHECK_THAT(st.constant, WithinAbs(-2.0, 1e-12));
}

TEST_CASE("identities report positive residuals off solitons", "[spectral]") {
  const auto C = circle(1.0, 128);
  const auto id = translator_identities(C, translator());
  CHECK(TranslatorIdentities::max_abs(id.energy, id.mask) > 1e-2);
  CHECK(steady_identity(C, translator()).deviation > 1e-2);
}
