#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "kldesign/algorithms.hpp"
#include "kldesign/scenario.hpp"
#include "kldesign/verify.hpp"

namespace kldesign {

/// Command-line overrides applied on top of a scenario's own settings.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::size_t> grid;
  std::optional<double> eff_target;
  std::optional<int> max_iters;  ///< outer_max for new-*, af_max_iters for af
  std::optional<double> time_budget;

  void apply(AlgoConfig& cfg) const;
};

struct RunOutput {
  RunResult result;
  CertificationReport report;
  AlgorithmKind algorithm = AlgorithmKind::NewQuad;
};

/// Runs one algorithm, certifies the result and, when `out_dir` is given,
/// writes design.json, report.json, psi.csv and trace.csv there.
RunOutput run_scenario(const Scenario& scenario, AlgorithmKind algorithm, const RunOverrides& overrides,
                       const std::optional<std::filesystem::path>& out_dir, std::size_t certify_grid = 2000);

/// design.json content: deterministic fields only.
nlohmann::json design_document(const Scenario& scenario, AlgorithmKind algorithm, const RunResult& r);

struct BenchRow {
  AlgorithmKind algorithm = AlgorithmKind::NewQuad;
  int repeat = 0;
  double seconds = 0.0;
  double criterion = 0.0;
  double efficiency_bound = 0.0;
  RunStatus status = RunStatus::MaxIter;
  bool dnf = false;
};

struct BenchSummary {
  std::vector<BenchRow> rows;
  /// Median seconds per algorithm, in the order requested.
  std::vector<std::pair<AlgorithmKind, double>> medians;
  double budget_factor = 20.0;

  void write_csv(const std::filesystem::path& path) const;
  /// Median time of `slow` over median time of `fast`; DNF runs count with
  /// the time they consumed, so the ratio is then a lower bound.
  double speed_ratio(AlgorithmKind slow, AlgorithmKind fast) const;
  bool any_dnf(AlgorithmKind a) const;
};

/// Times each algorithm to the scenario's eff_target. new-quad runs first
/// when requested, and the others get a budget of `budget_factor` times its
/// median; runs that miss the target are recorded as DNF.
BenchSummary bench(const Scenario& scenario, const std::vector<AlgorithmKind>& algorithms, int repeats,
                   const RunOverrides& overrides, double budget_factor = 20.0);

struct ReproductionCheck {
  std::string name;
  std::string kind;  ///< "design" or "efficiency"
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct DesignComparison {
  double criterion_ratio = 0.0;  ///< KL_P(run) / KL_P(reference)
  bool criterion_ok = false;
  bool support_ok = false;
  bool match_ok = false;
  std::string detail;
};

/// Support match: every reference point heavier than the weight tolerance
/// pairs with a distinct run point within point_tol whose weight differs by
/// at most weight_tol; unmatched points on either side must be lighter than
/// weight_tol.
DesignComparison compare_to_reference(const Design& run, double run_criterion, const ReferenceDesign& ref,
                                      const ComparisonTable& table, const InnerOptions& opts);

struct ReproductionReport {
  std::vector<ReproductionCheck> checks;
  Eigen::MatrixXd efficiency;
  Eigen::MatrixXd efficiency_expected;
  std::vector<std::string> efficiency_labels;
  bool all_passed() const;
  nlohmann::json to_json() const;
};

/// Runs the manifest in `dir`/reproduce.manifest: design reproductions with
/// new-quad and the cross-efficiency matrix. Progress lines go to `log`.
ReproductionReport reproduce_all(const std::filesystem::path& dir, const RunOverrides& overrides, std::ostream& log,
                                 const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace kldesign
