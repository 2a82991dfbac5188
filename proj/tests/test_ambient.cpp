#include "lmcf/ambient.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace lmcf;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

AmbientSpace reaper_translator() { return AmbientSpace::translator(v2(0.0, -1.0)); }

}  // namespace

TEST_CASE("potential values", "[ambient]") {
  const auto s = AmbientSpace::shrinker(1);
  CHECK(s.potential(v2(0, 0)) == 0.0);
  CHECK_THAT(s.potential(v2(std::sqrt(2.0), 0.0)), WithinAbs(1.0, 1e-15));
  CHECK_THAT(reaper_translator().potential(v2(0.3, -1.2)), WithinAbs(2.4, 1e-15));
  CHECK(AmbientSpace::constant(2).potential(Vec::Ones(4)) == 0.0);
}

TEST_CASE("gradient values", "[ambient]") {
  CHECK(AmbientSpace::shrinker(1).gradient(v2(1, 2)).isApprox(v2(1, 2)));
  const auto g = reaper_translator().gradient(v2(5.0, -7.0));
  CHECK(g.isApprox(v2(0.0, -2.0)));
  CHECK(AmbientSpace::constant(1).gradient(v2(3, 4)).isZero());
}

TEST_CASE("Bakry-Emery tensor is the Hessian on flat space", "[ambient]") {
  CHECK(AmbientSpace::shrinker(1).bakry_emery(v2(1, 0), v2(1, 0)) == 1.0);
  CHECK(AmbientSpace::expander(1).bakry_emery(v2(0, 1), v2(0, 1)) == -1.0);
  CHECK(reaper_translator().bakry_emery(v2(0.3, 2), v2(-1, 4)) == 0.0);
}

TEST_CASE("soliton constants and sigma", "[ambient]") {
  CHECK(AmbientSpace::shrinker(1).soliton_constant() == 1.0);
  CHECK(AmbientSpace::expander(2).soliton_constant() == -1.0);
  CHECK(reaper_translator().soliton_constant() == 0.0);
  CHECK(reaper_translator().is_steady());
  CHECK_THAT(AmbientSpace::shrinker(1).sigma(0.5), WithinAbs(0.5, 1e-15));
  CHECK(reaper_translator().sigma(7.0) == 1.0);
  CHECK(AmbientSpace::expander(1).sigma(1.0) == 2.0);
}

TEST_CASE("flow map closed forms", "[ambient]") {
  const auto s = AmbientSpace::shrinker(1);
  CHECK_THAT(s.flow_map(0.75, v2(1, 0))[0], WithinAbs(2.0, 1e-14));
  CHECK(reaper_translator().flow_map(2.0, v2(0, 0)).isApprox(v2(0, -2)));
  CHECK(AmbientSpace::expander(1).flow_map(0.0, v2(0.4, -3)).isApprox(v2(0.4, -3)));
  // phi_t^{-1}(z) = sqrt(1 - t) z for the shrinker
  CHECK_THAT(s.flow_map_inverse(0.36, v2(1, 0))[0], WithinAbs(0.8, 1e-14));
  CHECK_THROWS_AS(s.flow_map(1.0, v2(1, 0)), NumericalError);
}

TEST_CASE("flow maps solve d phi/dt = grad f / (2 sigma)", "[ambient]") {
  for (const auto& a : {AmbientSpace::shrinker(1), AmbientSpace::expander(1), reaper_translator()}) {
    const Vec z = v2(0.7, -0.4);
    const double t = 0.3, h = 1e-5;
    const Vec dphi = (a.flow_map(t + h, z) - a.flow_map(t - h, z)) / (2 * h);
    const Vec rhs = a.gradient(a.flow_map(t, z)) / (2.0 * a.sigma(t));
    CHECK((dphi - rhs).norm() < 1e-8);
    CHECK((a.flow_map_inverse(t, a.flow_map(t, z)) - z).norm() < 1e-14);
  }
}

TEST_CASE("custom potential matches the Gaussian shrinker", "[ambient]") {
  const auto c = AmbientSpace::custom(Mat::Identity(2, 2), Vec::Zero(2));
  const auto s = AmbientSpace::shrinker(1);
  CHECK(c.soliton_constant() == 1.0);
  const Vec z = v2(0.5, 0.25);
  CHECK((c.flow_map(0.4, z) - s.flow_map(0.4, z)).norm() < 1e-12);
  CHECK((c.flow_map_inverse(0.4, z) - s.flow_map_inverse(0.4, z)).norm() < 1e-12);
  Mat bad(2, 2);
  bad << 1, 0, 0, 2;
  CHECK_THROWS_AS(AmbientSpace::custom(bad, Vec::Zero(2)), ValidationError);
}

TEST_CASE("reparametrized time matches quadrature", "[ambient]") {
  for (const auto& a : {AmbientSpace::shrinker(1), AmbientSpace::expander(1), reaper_translator()}) {
    const double t = 0.5;
    CHECK_THAT(a.reparametrized_time(t), WithinAbs(oracle::reparam_quadrature(a.soliton_constant(), t), 1e-10));
  }
  CHECK_THAT(AmbientSpace::shrinker(1).reparametrized_time(0.5), WithinAbs(std::log(2.0), 1e-15));
}

TEST_CASE("translator rejects non-unit T", "[ambient]") {
  CHECK_THROWS_AS(AmbientSpace::translator(v2(0, -2)), ValidationError);
  CHECK_THROWS_AS(AmbientSpace::translator(Vec::Ones(3)), ValidationError);
}

TEST_CASE("holomorphic volume form", "[ambient]") {
  const HoloVolumeForm flat(AmbientSpace::constant(1));
  Mat e(2, 1);
  e << 1, 0;
  CHECK(std::abs(flat.evaluate(v2(3, -1), e) - Complex(1, 0)) < 1e-15);
  e << 0, 1;  // J d/dx
  CHECK(std::abs(flat.evaluate(v2(3, -1), e) - Complex(0, 1)) < 1e-15);

  // Translator form on the grim reaper tangent: real and equal to e^{-f/2}.
  const HoloVolumeForm tr(reaper_translator());
  for (double x : {-1.1, -0.3, 0.0, 0.8}) {
    const Vec z = v2(x, -std::log(std::cos(x)));
    Mat t(2, 1);
    t << std::cos(x), std::sin(x);
    const Complex v = tr.evaluate(z, t);
    CHECK(std::abs(v.imag()) < 1e-14);
    CHECK_THAT(v.real(), WithinRel(std::exp(-0.5 * tr.ambient().potential(z)), 1e-14));
  }
  CHECK_THROWS_AS(HoloVolumeForm(AmbientSpace::shrinker(1)), PreconditionError);
}

TEST_CASE("almost Calabi-Yau identity at random points", "[ambient]") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  Vec T(4);
  T << 0.6, 0.0, 0.0, -0.8;
  for (const auto& amb : {reaper_translator(), AmbientSpace::translator(T), AmbientSpace::constant(2)}) {
    const HoloVolumeForm form(amb, 0.3);
    const Index d = 2 * amb.m();
    for (int s = 0; s < 200; ++s) {
      Vec z(d);
      Mat F(d, d);
      for (Index i = 0; i < d; ++i) z[i] = g(rng);
      for (Index i = 0; i < d * d; ++i) F.data()[i] = g(rng);
      const auto e = acy_sides(form, z, F);
      CHECK(std::abs(e.rhs - e.lhs) <= 1e-12 * std::abs(e.lhs));
    }
  }
}
