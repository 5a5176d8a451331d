// Command-line front end: scenario-driven verification runs and parameter
// sweeps over the shipped return-map models.

#include "returnmap/scenario.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using rmap::Json;

Json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) rmap::fail(rmap::ErrorCode::ConfigError, "cannot open config file " + path);
  Json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    rmap::fail(rmap::ErrorCode::ConfigError, std::string("config parse error: ") + e.what());
  }
  return doc;
}

void write_file(const std::string& dir, const std::string& name, const std::string& body) {
  if (name.empty()) return;
  std::filesystem::path p = dir.empty() ? std::filesystem::path(name)
                                        : std::filesystem::path(dir) / name;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << body;
}

int exit_code_for(const rmap::Error& e) {
  switch (e.code()) {
    case rmap::ErrorCode::ConfigError:
      return rmap::kExitConfigError;
    case rmap::ErrorCode::ResonanceGuard:
      return rmap::kExitResonance;
    case rmap::ErrorCode::MeshExplosion:
      return rmap::kExitBudget;
    default:
      return rmap::kExitCheckFailed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"return-map bifurcation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string out_dir;
  int jobs = 1;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "scenario JSON file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", jobs, "worker threads for sweeps");
  app.add_option("--seed", seed_override, "override the scenario seed")
      ->each([&](const std::string&) { seed_set = true; });

  auto* cmd_toy = app.add_subcommand("toy-verify", "golden checks of the explicit model");
  auto* cmd_scan = app.add_subcommand("ns-scan", "sweep the bifurcation locus");
  auto* cmd_lc = app.add_subcommand("lc", "one Lyapunov-coefficient evaluation");
  auto* cmd_manifold = app.add_subcommand("manifold", "grow the repelling set");
  auto* cmd_implicit = app.add_subcommand("solve-implicit", "solve y = G(x) + H(x, y)");

  CLI11_PARSE(app, argc, argv);

  try {
    rmap::Scenario sc = rmap::parse_scenario(load_config(config_path));
    if (seed_set) sc.seed = seed_override;

    if (cmd_toy->parsed()) {
      rmap::ToyVerifyResult res = rmap::run_toy_verify(sc);
      Json rep = res.to_json();
      std::cout << rep.dump(2) << "\n";
      write_file(out_dir, sc.out_json.empty() ? "toy_verify.json" : sc.out_json, rep.dump(2) + "\n");
      return res.all_pass ? rmap::kExitOk : rmap::kExitCheckFailed;
    }
    if (cmd_scan->parsed()) {
      rmap::NsScanResult res = rmap::run_ns_scan(sc, jobs);
      write_file(out_dir, sc.out_csv.empty() ? "ns_scan.csv" : sc.out_csv, res.csv);
      std::cout << res.csv;
      return rmap::kExitOk;
    }
    if (cmd_lc->parsed()) {
      Json rep = rmap::run_lc(sc);
      std::cout << rep.dump(2) << "\n";
      write_file(out_dir, sc.out_json.empty() ? "lc.json" : sc.out_json, rep.dump(2) + "\n");
      return rmap::kExitOk;
    }
    if (cmd_manifold->parsed()) {
      rmap::ManifoldRunResult res = rmap::run_manifold(sc);
      write_file(out_dir, sc.out_csv.empty() ? "cloud.csv" : sc.out_csv,
                 rmap::cloud_csv(res.cloud));
      std::cout << res.summary.dump(2) << "\n";
      write_file(out_dir, sc.out_json.empty() ? "manifold.json" : sc.out_json,
                 res.summary.dump(2) + "\n");
      return res.cloud.budget_exhausted ? rmap::kExitBudget : rmap::kExitOk;
    }
    if (cmd_implicit->parsed()) {
      Json rep = rmap::run_solve_implicit(sc);
      std::cout << rep.dump(2) << "\n";
      write_file(out_dir, sc.out_json.empty() ? "implicit.json" : sc.out_json,
                 rep.dump(2) + "\n");
      return rmap::kExitOk;
    }
  } catch (const rmap::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rmap::kExitCheckFailed;
  }
  return rmap::kExitConfigError;
}
