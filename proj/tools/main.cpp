// kldesign: command-line front end for the KL-optimal discriminating design solvers.
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kldesign/error.hpp"
#include "kldesign/runner.hpp"

namespace {

enum Exit { kOk = 0, kNotCertified = 2, kConfigError = 3, kSolverError = 4 };

int exit_code_for(kldesign::ErrorCode code) {
  using kldesign::ErrorCode;
  switch (code) {
    case ErrorCode::Config:
    case ErrorCode::ParseError:
    case ErrorCode::Io:
    case ErrorCode::FamilyMismatch:
    case ErrorCode::InvalidDesign:
      return kConfigError;
    default:
      return kSolverError;
  }
}

std::filesystem::path default_scenario_dir() {
  if (const char* env = std::getenv("KLDESIGN_SCENARIOS")) return env;
  return KLDESIGN_SCENARIO_DIR;
}

void print_design(const kldesign::Design& d) {
  std::cout << std::fixed << std::setprecision(4);
  for (std::size_t k = 0; k < d.size(); ++k) {
    std::cout << "  x = " << std::setw(10) << d.point(k) << "   w = " << d.weight(k) << '\n';
  }
  std::cout.unsetf(std::ios::floatfield);
}

void print_report(const kldesign::CertificationReport& r) {
  std::cout << std::setprecision(10) << "  KL_P = " << r.kl_value << ", max Psi = " << r.max_psi
            << " at x = " << r.argmax_psi << "\n  gap = " << std::setprecision(3) << r.max_gap_rel
            << ", efficiency >= " << std::setprecision(6) << r.efficiency_bound() << ", verdict "
            << (r.certified ? "certified" : "not certified") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KL-optimal discriminating designs"};
  app.require_subcommand(1);

  std::filesystem::path scenario_dir = default_scenario_dir();
  app.add_option("--scenario-dir", scenario_dir, "Directory of bundled scenarios");

  kldesign::RunOverrides ov;
  std::string algo = "new-quad";
  std::string out_dir;
  std::string scenario_name;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", ov.seed, "Seed for inner multistart draws");
    sub->add_option("--threads", ov.threads, "Worker threads for per-comparison solves")->check(CLI::PositiveNumber);
    sub->add_option("--grid", ov.grid, "Grid size for Psi scans")->check(CLI::Range(2, 10000000));
    sub->add_option("--eff-target", ov.eff_target, "Stop once the efficiency bound reaches this")
        ->check(CLI::Range(1e-12, 1.0));
    sub->add_option("--max-iters", ov.max_iters, "Outer iteration cap (AF: step cap)")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", out_dir, "Directory for output files");
  };

  auto* run = app.add_subcommand("run", "Optimize a design for a scenario");
  run->add_option("scenario", scenario_name, "Bundled scenario name or path")->required();
  run->add_option("--algo", algo, "af | new-grad | new-quad")->check(CLI::IsMember({"af", "new-grad", "new-quad"}));
  add_common(run);

  std::string design_file;
  double tol = 2e-3;
  std::size_t cert_grid = 2000;
  auto* cert = app.add_subcommand("certify", "Check the equivalence theorem for a design");
  cert->add_option("scenario", scenario_name, "Bundled scenario name or path")->required();
  cert->add_option("--design", design_file, "design.json to check (default: the scenario's reference design)");
  cert->add_option("--tol", tol, "Relative tolerance");
  cert->add_option("--grid", cert_grid, "Grid size")->check(CLI::Range(2, 10000000));
  cert->add_option("--seed", ov.seed, "Seed for inner multistart draws");
  cert->add_option("--threads", ov.threads, "Worker threads")->check(CLI::PositiveNumber);
  cert->add_option("--out-dir", out_dir, "Write report.json and psi.csv here");

  std::vector<std::string> algos = {"af", "new-grad", "new-quad"};
  int repeats = 1;
  double budget_factor = 20.0;
  auto* bench = app.add_subcommand("bench", "Time the algorithms to the efficiency target");
  bench->add_option("scenario", scenario_name, "Bundled scenario name or path")->required();
  bench->add_option("--algos", algos, "Algorithms to time")->delimiter(',')->check(
      CLI::IsMember({"af", "new-grad", "new-quad"}));
  bench->add_option("--repeats", repeats, "Repeats per algorithm")->check(CLI::PositiveNumber);
  bench->add_option("--budget-factor", budget_factor, "Time budget relative to new-quad")->check(CLI::PositiveNumber);
  add_common(bench);

  auto* repro = app.add_subcommand("reproduce-all", "Run every bundled reproduction check");
  add_common(repro);

  auto* list = app.add_subcommand("list-scenarios", "List bundled scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    // Usage errors are configuration errors; --help exits cleanly.
    return code == 0 ? kOk : kConfigError;
  }

  const std::optional<std::filesystem::path> out =
      out_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(out_dir);
  try {
    if (*list) {
      for (const auto& name : kldesign::list_scenarios(scenario_dir)) {
        const auto s = kldesign::load_scenario(scenario_dir / (name + ".json"));
        std::cout << std::left << std::setw(18) << name << ' ' << s.description << '\n';
      }
      return kOk;
    }
    if (*repro) {
      const auto rep = kldesign::reproduce_all(scenario_dir, ov, std::cout, out);
      std::size_t passed = 0;
      for (const auto& c : rep.checks) passed += c.passed ? 1 : 0;
      std::cout << passed << "/" << rep.checks.size() << " checks passed\n";
      return rep.all_passed() ? kOk : kNotCertified;
    }

    const auto scenario = kldesign::load_scenario(kldesign::resolve_scenario(scenario_name, scenario_dir));
    if (*run) {
      const auto kind = kldesign::algorithm_from_string(algo);
      const auto o = kldesign::run_scenario(scenario, kind, ov, out);
      std::cout << scenario.name << " / " << algo << ": " << kldesign::to_string(o.result.status) << " after "
                << o.result.iterations << " iterations, " << std::setprecision(3) << o.result.wall_time.count()
                << " s\n";
      print_design(o.result.design);
      print_report(o.report);
      return o.report.certified ? kOk : kNotCertified;
    }
    if (*cert) {
      kldesign::Design design = kldesign::Design::one_point(0.0);
      if (!design_file.empty()) {
        std::ifstream in(design_file);
        if (!in) throw kldesign::Error(kldesign::ErrorCode::Io, "cannot read " + design_file);
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          throw kldesign::Error(kldesign::ErrorCode::ParseError, design_file + ": " + e.what());
        }
        design = kldesign::Design::from_json(j);
      } else if (scenario.reference) {
        design = scenario.reference->design;
      } else {
        throw kldesign::Error(kldesign::ErrorCode::Config, "no --design given and the scenario has no reference");
      }
      kldesign::AlgoConfig cfg = scenario.algorithm;
      ov.apply(cfg);
      const auto table = scenario.table();
      kldesign::CertifyOptions copts{cert_grid, tol, cfg.inner};
      const auto cv = kldesign::kl_criterion(design, table, cfg.inner);
      const auto report = kldesign::certify(cv, table, scenario.space, copts);
      print_design(design);
      print_report(report);
      if (out) {
        std::filesystem::create_directories(*out);
        std::ofstream(*out / "report.json") << report.to_json().dump(2) << '\n';
        kldesign::export_psi_trace(cv, table, scenario.space, cert_grid, *out / "psi.csv");
      }
      return report.certified ? kOk : kNotCertified;
    }
    if (*bench) {
      std::vector<kldesign::AlgorithmKind> kinds;
      for (const auto& a : algos) kinds.push_back(kldesign::algorithm_from_string(a));
      const auto summary = kldesign::bench(scenario, kinds, repeats, ov, budget_factor);
      std::cout << "median wall time (hardware dependent)\n";
      for (const auto& [a, t] : summary.medians) {
        std::cout << "  " << std::left << std::setw(9) << kldesign::to_string(a) << std::right << std::setw(12)
                  << std::setprecision(4) << t << " s" << (summary.any_dnf(a) ? "  DNF" : "") << '\n';
      }
      for (const auto& [a, t] : summary.medians) {
        if (a != kldesign::AlgorithmKind::NewQuad) {
          std::cout << "  " << kldesign::to_string(a) << " / new-quad = " << std::setprecision(4)
                    << summary.speed_ratio(a, kldesign::AlgorithmKind::NewQuad) << '\n';
        }
      }
      if (out) {
        std::filesystem::create_directories(*out);
        summary.write_csv(*out / "bench.csv");
      }
      return kOk;
    }
  } catch (const kldesign::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverError;
  }
  return kOk;
}
