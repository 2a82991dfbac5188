// lmcf: scenario runner for weighted Lagrangian soliton computations.
//
//   lmcf run scenarios/shrinker-circle-spectrum.json
//   lmcf list --json
//   lmcf spectrum --builtin clifford-torus-shrinker-spectrum -k 8 --out /tmp/runs
//   lmcf flow --potential shrinker --family circle --param r=1.5 --dt 1e-4 --steps 2000

#include "lmcf/lmcf.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using lmcf::json;

struct Common {
  std::string scenario_file;
  std::string builtin;
  std::string out;
  // ambient / geometry overrides
  std::optional<int> m;
  std::string potential;
  std::vector<double> T;
  std::string family;
  std::vector<std::string> params;
  std::vector<long> resolution;
  std::optional<bool> jets;
  std::optional<long> seed;
  bool no_svg = false;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
  auto* src = sub->add_option("--scenario", c.scenario_file, "Scenario JSON used as the base")->check(CLI::ExistingFile);
  sub->add_option("--builtin", c.builtin, "Built-in scenario used as the base")->excludes(src);
  sub->add_option("--out", c.out, "Output root (overrides LMCF_OUT_DIR)");
  sub->add_option("--m", c.m, "Complex dimension");
  sub->add_option("--potential", c.potential, "shrinker | expander | constant | translator");
  sub->add_option("--T", c.T, "Translation vector (translator)")->expected(2, 4);
  sub->add_option("--family", c.family, "circle | line | grim_reaper | product_torus");
  sub->add_option("--param", c.params, "Family parameter key=value (repeatable)");
  sub->add_option("--resolution", c.resolution, "Vertex count, or nu nv for tori")->expected(1, 2);
  sub->add_option("--jets", c.jets, "Use analytic jets (true/false)");
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_flag("--no-svg", c.no_svg, "Skip SVG plots");
  sub->add_flag("-q,--quiet", c.quiet, "Print only errors");
}

json base_scenario(const Common& c, const std::string& type) {
  json j;
  if (!c.scenario_file.empty()) {
    j = lmcf::load_scenario(c.scenario_file).raw;
  } else if (!c.builtin.empty()) {
    auto b = lmcf::find_builtin(c.builtin);
    if (!b) throw lmcf::ValidationError("builtin", "no built-in scenario named '" + c.builtin + "'");
    j = *b;
  } else {
    j["name"] = type;
    j["seed"] = 0;
    j["ambient"] = json::object();
    j["geometry"] = json::object();
    j["task"] = json::object();
  }
  if (c.m) j["ambient"]["m"] = *c.m;
  if (!c.potential.empty()) j["ambient"]["potential"] = c.potential;
  if (!c.T.empty()) j["ambient"]["T"] = c.T;
  if (!c.family.empty()) {
    j["geometry"]["family"] = c.family;
    j["geometry"]["params"] = json::object();
  }
  for (const auto& kv : c.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw lmcf::ValidationError("geometry.params", "expected key=value, got '" + kv + "'");
    try {
      j["geometry"]["params"][kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw lmcf::ValidationError("geometry.params." + kv.substr(0, eq), "not a number");
    }
  }
  if (c.resolution.size() == 1) j["geometry"]["resolution"] = c.resolution[0];
  if (c.resolution.size() == 2) j["geometry"]["resolution"] = c.resolution;
  if (c.jets) j["geometry"]["jets"] = *c.jets;
  if (c.seed) j["seed"] = *c.seed;
  if (c.no_svg) j["output"]["svg"] = false;
  if (j.value("task", json::object()).value("type", "") != type) j["task"] = json::object();
  j["task"]["type"] = type;
  return j;
}

int execute(const json& j, const std::string& out, bool quiet) {
  lmcf::Scenario sc;
  try {
    sc = lmcf::parse_scenario(j);
  } catch (const lmcf::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const lmcf::Error& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  }
  const auto rr = lmcf::run_scenario(sc, out);
  if (rr.exit_code != 0) {
    std::cerr << rr.message << '\n';
    return rr.exit_code;
  }
  if (!quiet) {
    std::cout << "wrote " << rr.out_dir << "/manifest.json\n";
    std::cout << rr.manifest.at("results").dump(2) << '\n';
  }
  return 0;
}

template <class T>
void set_if(json& task, const char* key, const std::optional<T>& v) {
  if (v) task[key] = *v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted Lagrangian mean curvature flow and f-stability toolkit"};
  app.set_version_flag("--version", std::string(lmcf::kVersion));
  app.require_subcommand(1);

  // run
  std::string run_file, run_out;
  bool run_quiet = false;
  auto* run = app.add_subcommand("run", "Run a scenario file");
  run->add_option("scenario", run_file, "Scenario JSON")->required();
  run->add_option("--out", run_out, "Output root (overrides LMCF_OUT_DIR)");
  run->add_flag("-q,--quiet", run_quiet);

  // list
  bool list_json = false;
  std::string list_write;
  auto* list = app.add_subcommand("list", "List built-in scenarios");
  list->add_flag("--json", list_json, "Print the full catalogue as JSON");
  list->add_option("--write", list_write, "Write each built-in as <dir>/<name>.json");

  Common c_spec, c_sv, c_cal, c_res, c_cor, c_flow;

  std::optional<long> k;
  auto* spec = app.add_subcommand("spectrum", "Low spectrum of the weighted Laplacian and stability report");
  add_common(spec, c_spec);
  spec->add_option("-k", k, "Number of eigenpairs");

  std::optional<std::string> sv_mode;
  std::optional<double> sv_h;
  std::optional<long> sv_modes, sv_random;
  auto* sv = app.add_subcommand("secondvar", "Second variation of the f-volume");
  add_common(sv, c_sv);
  sv->add_option("--mode", sv_mode, "analytic | fd | both");
  sv->add_option("--step", sv_h, "Finite-difference step");
  sv->add_option("--modes", sv_modes, "Number of Fourier/sine modes");
  sv->add_option("--random", sv_random, "Number of random clamped variations");

  std::optional<long> samples;
  std::optional<double> phase;
  auto* cal = app.add_subcommand("calibrate", "Calibration inequality and f-SLag checks");
  add_common(cal, c_cal);
  cal->add_option("--samples", samples, "Random planes to sample");
  cal->add_option("--phase", phase, "Phase of the calibration form");

  std::optional<double> res_h;
  bool refine = false, identities = false;
  auto* res = app.add_subcommand("residual", "f-minimality residual and first variation");
  add_common(res, c_res);
  res->add_option("--step", res_h, "Finite-difference step");
  res->add_flag("--refine", refine, "Polyline refinement study");
  res->add_flag("--identities", identities, "Translator identities");

  std::optional<double> horizon, cor_dt;
  auto* cor = app.add_subcommand("correspond", "GLMCF versus Kahler-Ricci MCF correspondence");
  add_common(cor, c_cor);
  cor->add_option("--horizon", horizon, "Final MCF time");
  cor->add_option("--dt", cor_dt, "Time step");

  std::optional<double> dt;
  std::optional<long> steps;
  std::optional<bool> redistribute;
  bool correspond = false;
  std::string perturb;
  auto* flow = app.add_subcommand("flow", "Generalized Lagrangian mean curvature flow");
  add_common(flow, c_flow);
  flow->add_option("--dt", dt, "Time step");
  flow->add_option("--steps", steps, "Number of steps");
  flow->add_option("--redistribute", redistribute, "Uniform resampling on closed curves");
  flow->add_flag("--correspond", correspond, "Run the correspondence check up to dt*steps instead");
  flow->add_option("--perturb", perturb, "Perturbation experiment, e.g. profile=cos1,eps=0.01");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      lmcf::Scenario sc;
      try {
        sc = lmcf::load_scenario(run_file);
      } catch (const lmcf::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
      }
      return execute(sc.raw, run_out, run_quiet);
    }
    if (*list) {
      const auto all = lmcf::builtin_scenarios();
      if (!list_write.empty()) {
        for (const auto& j : all) lmcf::write_text(list_write + "/" + j.at("name").get<std::string>() + ".json", j.dump(2) + "\n");
      }
      if (list_json) {
        std::cout << json(all).dump(2) << '\n';
      } else {
        for (const auto& j : all)
          std::cout << j.at("name").get<std::string>() << "  (" << j.at("task").at("type").get<std::string>() << ")\n";
      }
      return 0;
    }
    if (*spec) {
      json j = base_scenario(c_spec, "spectrum");
      set_if(j["task"], "k", k);
      return execute(j, c_spec.out, c_spec.quiet);
    }
    if (*sv) {
      json j = base_scenario(c_sv, "secondvar");
      set_if(j["task"], "mode", sv_mode);
      set_if(j["task"], "step", sv_h);
      set_if(j["task"], "modes", sv_modes);
      set_if(j["task"], "random", sv_random);
      return execute(j, c_sv.out, c_sv.quiet);
    }
    if (*cal) {
      json j = base_scenario(c_cal, "calibrate");
      set_if(j["task"], "samples", samples);
      set_if(j["task"], "phase", phase);
      return execute(j, c_cal.out, c_cal.quiet);
    }
    if (*res) {
      json j = base_scenario(c_res, "residual");
      set_if(j["task"], "step", res_h);
      if (refine) j["task"]["refine"] = true;
      if (identities) j["task"]["identities"] = true;
      return execute(j, c_res.out, c_res.quiet);
    }
    if (*cor) {
      json j = base_scenario(c_cor, "correspond");
      set_if(j["task"], "horizon", horizon);
      set_if(j["task"], "dt", cor_dt);
      return execute(j, c_cor.out, c_cor.quiet);
    }
    if (*flow) {
      json j = base_scenario(c_flow, correspond ? "correspond" : "flow");
      if (correspond) {
        const double d = dt.value_or(1e-4);
        j["task"]["dt"] = d;
        j["task"]["horizon"] = d * static_cast<double>(steps.value_or(1000));
      } else {
        set_if(j["task"], "dt", dt);
        set_if(j["task"], "steps", steps);
        set_if(j["task"], "redistribute", redistribute);
        if (!perturb.empty()) {
          json p = json::object();
          std::stringstream ss(perturb);
          std::string item;
          while (std::getline(ss, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw lmcf::ValidationError("task.perturb", "expected key=value, got '" + item + "'");
            const std::string key = item.substr(0, eq), val = item.substr(eq + 1);
            if (key == "eps") {
              try {
                p["eps"] = std::stod(val);
              } catch (const std::exception&) {
                throw lmcf::ValidationError("task.perturb.eps", "not a number");
              }
            } else if (key == "profile" || key == "u") {
              p["profile"] = val;
            } else {
              throw lmcf::ValidationError("task.perturb." + key, "unknown key");
            }
          }
          j["task"]["perturb"] = p;
        }
      }
      return execute(j, c_flow.out, c_flow.quiet);
    }
  } catch (const lmcf::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const lmcf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
