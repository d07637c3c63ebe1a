#include "kldesign/algorithms.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "kldesign/error.hpp"
#include "kldesign/weights_qp.hpp"

namespace kldesign {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

CriterionValue checked_start(const Design& start, const ComparisonTable& table, const AlgoConfig& cfg) {
  CriterionValue cv = kl_criterion(start, table, cfg.inner);
  if (!(cv.total > 0.0)) throw Error(ErrorCode::NonPositiveStart, "starting design has KL_P <= 0");
  return cv;
}

Design drop_zero_weights(const Design& d) { return prune_small_weights(d, std::numeric_limits<double>::denorm_min()); }

struct PsiScan {
  double max_value = 0.0;
  std::vector<double> maxima;
};

}  // namespace

std::string_view to_string(AlgorithmKind a) noexcept {
  switch (a) {
    case AlgorithmKind::AF: return "af";
    case AlgorithmKind::NewGrad: return "new-grad";
    case AlgorithmKind::NewQuad: return "new-quad";
  }
  return "?";
}

AlgorithmKind algorithm_from_string(std::string_view name) {
  if (name == "af") return AlgorithmKind::AF;
  if (name == "new-grad") return AlgorithmKind::NewGrad;
  if (name == "new-quad") return AlgorithmKind::NewQuad;
  throw Error(ErrorCode::Config, "unknown algorithm '" + std::string(name) + "' (af, new-grad, new-quad)");
}

std::string_view to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::MaxIter: return "max_iter";
    case RunStatus::Stalled: return "stalled";
    case RunStatus::TimeBudget: return "time_budget";
  }
  return "?";
}

void AlgoConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::Config, std::string("invalid algorithm setting: ") + what);
  };
  need(grid_size >= 2, "grid_size >= 2");
  need(refine_tol > 0.0, "refine_tol > 0");
  need(prune_threshold > 0.0 && prune_threshold < 1.0, "prune_threshold in (0, 1)");
  need(merge_tol > 0.0, "merge_tol > 0");
  need(qp_inner_iters >= 1, "qp_inner_iters >= 1");
  need(outer_max >= 1, "outer_max >= 1");
  need(eff_target > 0.0 && eff_target <= 1.0, "eff_target in (0, 1]");
  need(af_max_iters >= 1, "af_max_iters >= 1");
  need(grad_max_steps >= 1, "grad_max_steps >= 1");
  need(grad_tolerance > 0.0, "grad_tolerance > 0");
  need(stall_iterations >= 1, "stall_iterations >= 1");
  need(inner.starts >= 1, "inner_starts >= 1");
  need(inner.threads >= 1, "threads >= 1");
}

nlohmann::json AlgoConfig::to_json() const {
  return {{"grid_size", grid_size},
          {"refine_tol", refine_tol},
          {"prune_threshold", prune_threshold},
          {"merge_tol", merge_tol},
          {"weight_method", weight_method == WeightMethod::QP ? "qp" : "grad"},
          {"qp_inner_iters", qp_inner_iters},
          {"outer_max", outer_max},
          {"eff_target", eff_target},
          {"af_max_iters", af_max_iters},
          {"line_search", line_search == LineSearchMode::Exact ? "exact" : "linearized"},
          {"grad_max_steps", grad_max_steps},
          {"grad_tolerance", grad_tolerance},
          {"stall_iterations", stall_iterations},
          {"time_budget", time_budget},
          {"inner_starts", inner.starts},
          {"inner_max_iterations", inner.minimizer.max_iterations},
          {"inner_gradient_tolerance", inner.minimizer.gradient_tolerance},
          {"seed", inner.seed},
          {"threads", inner.threads}};
}

void AlgoConfig::update_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "algorithm settings must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "grid_size") grid_size = value.get<std::size_t>();
      else if (key == "refine_tol") refine_tol = value.get<double>();
      else if (key == "prune_threshold") prune_threshold = value.get<double>();
      else if (key == "merge_tol") merge_tol = value.get<double>();
      else if (key == "weight_method") {
        const auto s = value.get<std::string>();
        if (s != "qp" && s != "grad") throw Error(ErrorCode::Config, "weight_method must be qp or grad");
        weight_method = s == "qp" ? WeightMethod::QP : WeightMethod::Grad;
      } else if (key == "qp_inner_iters") qp_inner_iters = value.get<int>();
      else if (key == "outer_max") outer_max = value.get<int>();
      else if (key == "eff_target") eff_target = value.get<double>();
      else if (key == "af_max_iters") af_max_iters = value.get<int>();
      else if (key == "af_step_offset") {
        const double offset = value.get<double>();
        if (!(offset > 1.0)) throw Error(ErrorCode::Config, "af_step_offset must exceed 1");
        af_step_rule = [offset](int s) { return 1.0 / (s + offset); };
      } else if (key == "line_search") {
        const auto s = value.get<std::string>();
        if (s != "exact" && s != "linearized") throw Error(ErrorCode::Config, "line_search must be exact or linearized");
        line_search = s == "exact" ? LineSearchMode::Exact : LineSearchMode::Linearized;
      } else if (key == "grad_max_steps") grad_max_steps = value.get<int>();
      else if (key == "grad_tolerance") grad_tolerance = value.get<double>();
      else if (key == "stall_iterations") stall_iterations = value.get<int>();
      else if (key == "time_budget") time_budget = value.get<double>();
      else if (key == "inner_starts") inner.starts = value.get<int>();
      else if (key == "inner_max_iterations") inner.minimizer.max_iterations = value.get<int>();
      else if (key == "inner_gradient_tolerance") inner.minimizer.gradient_tolerance = value.get<double>();
      else if (key == "seed") inner.seed = value.get<std::uint64_t>();
      else if (key == "threads") inner.threads = value.get<int>();
      else throw Error(ErrorCode::Config, "unknown algorithm setting '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Config, "algorithm setting '" + key + "': " + e.what());
    }
  }
}

void RunResult::write_trace_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.precision(17);
  out << "iteration,criterion,support_size,psi_gap,seconds\n";
  for (const auto& r : trace) {
    out << r.iteration << ',' << r.criterion << ',' << r.support_size << ',' << r.psi_gap << ',' << r.seconds << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

std::vector<double> find_local_maxima(const ScalarFunction& psi_fn, const DesignSpace& space, const AlgoConfig& cfg) {
  LocalMaximaOptions opts;
  opts.grid_size = cfg.grid_size;
  opts.refine_tol = cfg.refine_tol * space.width();
  opts.dedup_tol = cfg.merge_tol * space.width();
  std::vector<double> xs;
  for (const auto& m : local_maxima(psi_fn, space, opts)) xs.push_back(space.clamp(m.x));
  return xs;
}

namespace {

PsiScan scan_psi(const CriterionValue& cv, const ComparisonTable& table, const DesignSpace& space,
                 const AlgoConfig& cfg) {
  const ScalarFunction f = [&](double x) { return psi(x, cv, table); };
  LocalMaximaOptions opts;
  opts.grid_size = cfg.grid_size;
  opts.refine_tol = cfg.refine_tol * space.width();
  opts.dedup_tol = cfg.merge_tol * space.width();
  PsiScan scan;
  scan.max_value = -std::numeric_limits<double>::infinity();
  for (const auto& m : local_maxima(f, space, opts)) {
    scan.maxima.push_back(space.clamp(m.x));
    scan.max_value = std::max(scan.max_value, m.value);
  }
  for (double x : cv.design.points()) scan.max_value = std::max(scan.max_value, f(x));
  return scan;
}

// Grid argmax of Psi (smallest x on ties), refined on the adjacent cells.
ScalarMax argmax_psi(const CriterionValue& cv, const ComparisonTable& table, const DesignSpace& space,
                     const AlgoConfig& cfg) {
  const ScalarFunction f = [&](double x) { return psi(x, cv, table); };
  const auto grid = space.uniform_grid(cfg.grid_size);
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = f(grid[i]);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  const double a = grid[best == 0 ? 0 : best - 1];
  const double b = grid[std::min(best + 1, grid.size() - 1)];
  ScalarMax m = golden_section_max(f, a, b, cfg.refine_tol * space.width());
  if (best_value >= m.value) m = {grid[best], best_value};
  m.x = space.clamp(m.x);
  return m;
}

void finish(RunResult& res, Design design, CriterionValue cv, double max_psi_value, Clock::time_point t0) {
  res.design = std::move(design);
  res.criterion = cv.total;
  res.cv = std::move(cv);
  res.efficiency_bound = std::min(1.0, res.criterion / max_psi_value);
  res.wall_time = Clock::now() - t0;
}

bool out_of_time(const AlgoConfig& cfg, Clock::time_point t0) {
  return cfg.time_budget > 0.0 && seconds_since(t0) > cfg.time_budget;
}

}  // namespace

RunResult af_algorithm(const ComparisonTable& table, const DesignSpace& space, const Design& start,
                       const AlgoConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  const auto step = cfg.af_step_rule ? cfg.af_step_rule : [](int s) { return 1.0 / (s + 2.0); };
  Design d = start;
  CriterionValue cv = checked_start(d, table, cfg);
  RunResult res;
  for (int s = 0;; ++s) {
    const ScalarMax top = argmax_psi(cv, table, space, cfg);
    double max_value = top.value;
    for (double x : d.points()) max_value = std::max(max_value, psi(x, cv, table));
    res.trace.push_back({s, cv.total, d.size(), (max_value - cv.total) / cv.total, seconds_since(t0)});
    res.iterations = s;
    const bool done = cv.total / max_value >= cfg.eff_target;
    if (done || s >= cfg.af_max_iters || out_of_time(cfg, t0)) {
      res.status = done ? RunStatus::Converged : (s >= cfg.af_max_iters ? RunStatus::MaxIter : RunStatus::TimeBudget);
      finish(res, std::move(d), std::move(cv), max_value, t0);
      return res;
    }
    d = mix(d, top.x, step(s), space.point_tolerance());
    d = merge_close_points(prune_small_weights(d, cfg.prune_threshold), cfg.merge_tol * space.width());
    cv = kl_criterion(d, table, cfg.inner, &cv);
  }
}

RunResult new_algorithm(const ComparisonTable& table, const DesignSpace& space, const Design& start,
                        const AlgoConfig& cfg) {
  cfg.validate();
  const auto t0 = Clock::now();
  Design d = start;
  CriterionValue cv = checked_start(d, table, cfg);
  RunResult res;
  int no_progress = 0;
  for (int s = 0;; ++s) {
    const PsiScan scan = scan_psi(cv, table, space, cfg);
    res.trace.push_back({s, cv.total, d.size(), (scan.max_value - cv.total) / cv.total, seconds_since(t0)});
    res.iterations = s;
    const bool done = cv.total / scan.max_value >= cfg.eff_target;
    const bool stalled = no_progress >= cfg.stall_iterations;
    if (done || stalled || s >= cfg.outer_max || out_of_time(cfg, t0)) {
      res.status = done      ? RunStatus::Converged
                   : stalled ? RunStatus::Stalled
                   : s >= cfg.outer_max ? RunStatus::MaxIter
                                        : RunStatus::TimeBudget;
      finish(res, std::move(d), std::move(cv), scan.max_value, t0);
      return res;
    }

    const double previous = cv.total;
    Design extended = extend_support(d, scan.maxima, space.point_tolerance());
    cv.design = extended;  // added points carry no mass, so the minimizers still apply
    auto weight_step = [&](const Design& from, const CriterionValue& from_cv) {
      if (cfg.weight_method == WeightMethod::QP) {
        QPStepOptions qopts;
        qopts.iterations = cfg.qp_inner_iters;
        qopts.inner = cfg.inner;
        WeightStepResult w = qp_weight_step(from, table, from_cv, qopts);
        return std::pair{std::move(w.design), std::move(w.cv)};
      }
      GradientOptions gopts;
      gopts.mode = cfg.line_search;
      gopts.max_steps = cfg.grad_max_steps;
      gopts.tolerance = cfg.grad_tolerance;
      gopts.inner = cfg.inner;
      GradientRunResult g = optimize_weights_grad(from, table, from_cv, gopts);
      return std::pair{std::move(g.state.design), std::move(g.state.cv)};
    };
    auto [updated, updated_cv] = weight_step(extended, cv);

    Design cleaned = merge_close_points(prune_small_weights(updated, cfg.prune_threshold), cfg.merge_tol * space.width());
    if (cleaned == updated) {
      d = std::move(updated);
      cv = std::move(updated_cv);
    } else {
      // Merging moves points, so the weights are re-optimized on the cleaned support.
      auto [reweighted, reweighted_cv] = weight_step(cleaned, kl_criterion(cleaned, table, cfg.inner, &updated_cv));
      if (reweighted_cv.total >= previous) {
        d = std::move(reweighted);
        cv = std::move(reweighted_cv);
      } else {
        d = drop_zero_weights(updated);
        cv = d == updated ? std::move(updated_cv) : kl_criterion(d, table, cfg.inner, &updated_cv);
      }
    }
    no_progress = cv.total > previous * (1.0 + 1e-12) ? 0 : no_progress + 1;
  }
}

RunResult run_algorithm(AlgorithmKind kind, const ComparisonTable& table, const DesignSpace& space,
                        const Design& start, AlgoConfig cfg) {
  switch (kind) {
    case AlgorithmKind::AF: return af_algorithm(table, space, start, cfg);
    case AlgorithmKind::NewGrad: cfg.weight_method = WeightMethod::Grad; return new_algorithm(table, space, start, cfg);
    case AlgorithmKind::NewQuad: cfg.weight_method = WeightMethod::QP; return new_algorithm(table, space, start, cfg);
  }
  throw Error(ErrorCode::Config, "unknown algorithm");
}

Design default_start(const DesignSpace& space, std::size_t n_points, const ComparisonTable* table,
                     const InnerOptions& opts) {
  if (n_points < 1) throw Error(ErrorCode::Config, "default start needs at least one point");
  if (table && n_points < table->max_rival_dim() + 1) {
    throw Error(ErrorCode::Config, "default start needs more points than rival parameters");
  }
  Design d = Design::uniform(space.uniform_grid(n_points));
  if (!table) return d;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (kl_criterion(d, *table, opts).total > 1e-12) return d;
    if (attempt == 0) d = Design::uniform(space.uniform_grid(2 * n_points));
  }
  throw Error(ErrorCode::DegenerateStart, "KL_P vanishes on the default start design");
}

}  // namespace kldesign
