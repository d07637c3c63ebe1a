#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kldesign/criterion.hpp"
#include "kldesign/search.hpp"
#include "kldesign/weights_grad.hpp"

namespace kldesign {

enum class WeightMethod { QP, Grad };
enum class AlgorithmKind { AF, NewGrad, NewQuad };

std::string_view to_string(AlgorithmKind a) noexcept;
/// "af", "new-grad" or "new-quad"; throws Error(Config) otherwise.
AlgorithmKind algorithm_from_string(std::string_view name);

struct AlgoConfig {
  std::size_t grid_size = 1000;
  /// Relative to the width of the design space.
  double refine_tol = 1e-8;
  double prune_threshold = std::pow(2.2e-16, 0.25);
  /// Relative to the width of the design space.
  double merge_tol = 1e-3;
  WeightMethod weight_method = WeightMethod::QP;
  int qp_inner_iters = 3;
  int outer_max = 50;
  double eff_target = 1.0 - 1e-4;
  int af_max_iters = 5000;
  /// alpha_s for the AF update; default 1 / (s + 2).
  std::function<double(int)> af_step_rule;
  LineSearchMode line_search = LineSearchMode::Linearized;
  int grad_max_steps = 100;
  double grad_tolerance = 1e-6;
  /// Outer iterations without criterion progress before reporting Stalled.
  int stall_iterations = 3;
  /// Wall-clock cap in seconds; zero or negative disables it.
  double time_budget = 0.0;
  InnerOptions inner{};

  /// Throws Error(Config) on nonpositive tolerances or eff_target outside (0, 1].
  void validate() const;
  nlohmann::json to_json() const;
  /// Overrides the fields present in `j`, leaving the rest unchanged.
  void update_from_json(const nlohmann::json& j);
};

struct TraceRow {
  int iteration = 0;
  double criterion = 0.0;
  std::size_t support_size = 0;
  /// (max Psi - KL_P) / KL_P before the iteration's update.
  double psi_gap = 0.0;
  double seconds = 0.0;
};

enum class RunStatus { Converged, MaxIter, Stalled, TimeBudget };
std::string_view to_string(RunStatus s) noexcept;

struct RunResult {
  Design design = Design::one_point(0.0);
  CriterionValue cv;
  double criterion = 0.0;
  double efficiency_bound = 0.0;
  int iterations = 0;
  std::chrono::duration<double> wall_time{};
  RunStatus status = RunStatus::MaxIter;
  std::vector<TraceRow> trace;

  /// Columns iteration, criterion, support_size, psi_gap, seconds.
  void write_trace_csv(const std::filesystem::path& path) const;
};

/// Local maxima of `psi_fn` on the grid of cfg.grid_size points, refined to
/// refine_tol and deduplicated at merge_tol (both scaled by the width).
std::vector<double> find_local_maxima(const ScalarFunction& psi_fn, const DesignSpace& space, const AlgoConfig& cfg);

/// Exchange algorithm: add the maximizer of Psi with mass alpha_s each iteration.
/// Throws Error(NonPositiveStart) if KL_P(start) <= 0.
RunResult af_algorithm(const ComparisonTable& table, const DesignSpace& space, const Design& start,
                       const AlgoConfig& cfg);

/// Support-extension algorithm: add all local maxima of Psi, then optimize the weights.
/// Throws Error(NonPositiveStart) if KL_P(start) <= 0.
RunResult new_algorithm(const ComparisonTable& table, const DesignSpace& space, const Design& start,
                        const AlgoConfig& cfg);

RunResult run_algorithm(AlgorithmKind kind, const ComparisonTable& table, const DesignSpace& space,
                        const Design& start, AlgoConfig cfg);

/// Equally spaced design with equal weights; the point count is doubled
/// once if KL_P vanishes. Throws Error(DegenerateStart) after that.
Design default_start(const DesignSpace& space, std::size_t n_points, const ComparisonTable* table = nullptr,
                     const InnerOptions& opts = {});

}  // namespace kldesign
