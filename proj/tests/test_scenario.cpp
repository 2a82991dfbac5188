#include "lmcf/scenario.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lmcf;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lmcf-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json builtin(const std::string& name) {
  auto j = find_builtin(name);
  REQUIRE(j.has_value());
  return *j;
}

std::string validation_field(json j) {
  try {
    parse_scenario(j);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("catalogue contents", "[scenario]") {
  const auto all = builtin_scenarios();
  CHECK(all.size() >= 9);
  for (const char* name :
       {"shrinker-circle-residual", "shrinker-circle-spectrum", "shrinker-circle-secondvar", "shrinker-circle-correspond",
        "expander-line", "grim-reaper-residual", "grim-reaper-translator-eq", "grim-reaper-identities",
        "grim-reaper-perturb", "clifford-torus-shrinker-residual", "clifford-torus-shrinker-spectrum",
        "mcf-circle-benchmark"})
    CHECK(find_builtin(name).has_value());
  for (const auto& j : all) {
    const Scenario s = parse_scenario(json::parse(j.dump()));
    CHECK(s.raw == j);
  }
}

TEST_CASE("validation names the offending field", "[scenario]") {
  json j = builtin("shrinker-circle-spectrum");
  j["geometry"]["family"] = "klein_bottle";
  CHECK(validation_field(j) == "geometry.family");

  j = builtin("shrinker-circle-spectrum");
  j["geometry"]["resolution"] = 4;
  CHECK(validation_field(j) == "geometry.resolution");

  j = builtin("clifford-torus-shrinker-spectrum");
  j["geometry"]["resolution"] = {300, 64};
  CHECK(validation_field(j) == "geometry.resolution");

  j = builtin("shrinker-circle-spectrum");
  j["task"]["type"] = "dance";
  CHECK(validation_field(j) == "task.type");

  j = builtin("grim-reaper-residual");
  j["ambient"]["T"] = {0.0, -2.0};
  CHECK(validation_field(j) == "ambient.T");

  j = builtin("shrinker-circle-spectrum");
  j["geometry"]["params"]["r"] = "wide";
  CHECK(validation_field(j) == "geometry.params.r");

  j = builtin("shrinker-circle-spectrum");
  j.erase("ambient");
  CHECK(validation_field(j) == "ambient");

  j = builtin("shrinker-circle-spectrum");
  j["ambient"]["potential"] = "gaussian";
  CHECK(validation_field(j) == "ambient.potential");
}

TEST_CASE("run failures map to exit codes", "[scenario]") {
  const auto dir = scratch("exit");
  json j = builtin("mcf-circle-benchmark");
  j["task"]["dt"] = 1e-2;
  const auto rr = run_scenario(parse_scenario(j), dir.string());
  CHECK(rr.exit_code == 3);
  CHECK_THAT(rr.message, ContainsSubstring("CFL"));
  CHECK(rr.manifest.at("status") == "error");

  j = builtin("shrinker-circle-secondvar");
  j["task"]["mode"] = "guess";
  CHECK(run_scenario(parse_scenario(j), dir.string()).exit_code == 2);

  j = builtin("shrinker-circle-secondvar");
  j["geometry"]["params"]["r"] = 1.0;
  CHECK(run_scenario(parse_scenario(j), dir.string()).exit_code == 3);
}

TEST_CASE("spectrum manifest", "[scenario]") {
  const auto dir = scratch("spectrum");
  const auto rr = run_scenario(parse_scenario(builtin("shrinker-circle-spectrum")), dir.string());
  REQUIRE(rr.exit_code == 0);
  const json m = json::parse(slurp(fs::path(rr.out_dir) / "manifest.json"));
  CHECK(m.at("version") == kVersion);
  CHECK(m.at("scenario").at("name") == "shrinker-circle-spectrum");
  CHECK_THAT(m.at("results").at("lambda1").get<double>(), WithinAbs(0.5, 1e-3));
  CHECK(m.at("results").at("stability").at("classification") == "hamiltonian f-unstable");
  CHECK(fs::exists(fs::path(rr.out_dir) / "eigenvalues.csv"));
  CHECK(fs::exists(fs::path(rr.out_dir) / "eigenvalues.svg"));
}

TEST_CASE("translator equation manifest", "[scenario]") {
  const auto dir = scratch("calibrate");
  const auto rr = run_scenario(parse_scenario(builtin("grim-reaper-translator-eq")), dir.string());
  REQUIRE(rr.exit_code == 0);
  const auto& r = rr.manifest.at("results");
  CHECK(std::abs(r.at("translator_equation_theta0").get<double>()) <= 1e-8);
  CHECK(r.at("min_slack").get<double>() >= -1e-12);
}

TEST_CASE("output root precedence", "[scenario]") {
  const auto dir = scratch("precedence");
  const Scenario s = parse_scenario(builtin("grim-reaper-residual"));
  CHECK(resolve_out_dir(s, dir.string()) == (dir / "grim-reaper-residual").string());
  ::setenv("LMCF_OUT_DIR", "/tmp/lmcf-env-root", 1);
  CHECK(resolve_out_dir(s, "") == "/tmp/lmcf-env-root/grim-reaper-residual");
  CHECK(resolve_out_dir(s, dir.string()) == (dir / "grim-reaper-residual").string());
  ::unsetenv("LMCF_OUT_DIR");
  CHECK(resolve_out_dir(s, "") == "lmcf-out/grim-reaper-residual");
}

TEST_CASE("identical runs give identical CSV", "[scenario]") {
  for (const char* name : {"expander-line", "grim-reaper-identities", "clifford-torus-shrinker-spectrum"}) {
    const auto a = scratch(std::string("det-a-") + name), b = scratch(std::string("det-b-") + name);
    const Scenario s = parse_scenario(builtin(name));
    const auto ra = run_scenario(s, a.string());
    const auto rb = run_scenario(s, b.string());
    REQUIRE(ra.exit_code == 0);
    REQUIRE(rb.exit_code == 0);
    int csvs = 0;
    for (const auto& e : fs::directory_iterator(ra.out_dir)) {
      if (e.path().extension() != ".csv") continue;
      ++csvs;
      CHECK(slurp(e.path()) == slurp(fs::path(rb.out_dir) / e.path().filename()));
    }
    CHECK(csvs > 0);
  }
}

TEST_CASE("every built-in runs", "[scenario][slow]") {
  const auto dir = scratch("all");
  for (const auto& j : builtin_scenarios()) {
    INFO(j.at("name").get<std::string>());
    const auto rr = run_scenario(parse_scenario(j), dir.string());
    CHECK(rr.exit_code == 0);
    CHECK(rr.message.empty());
  }
}
