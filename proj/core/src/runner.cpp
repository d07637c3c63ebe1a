#include "kldesign/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "kldesign/error.hpp"

namespace kldesign {

namespace {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

}  // namespace

void RunOverrides::apply(AlgoConfig& cfg) const {
  if (seed) cfg.inner.seed = *seed;
  if (threads) cfg.inner.threads = *threads;
  if (grid) cfg.grid_size = *grid;
  if (eff_target) cfg.eff_target = *eff_target;
  if (max_iters) {
    cfg.outer_max = *max_iters;
    cfg.af_max_iters = *max_iters;
  }
  if (time_budget) cfg.time_budget = *time_budget;
  cfg.validate();
}

nlohmann::json design_document(const Scenario& scenario, AlgorithmKind algorithm, const RunResult& r) {
  nlohmann::json j = r.design.to_json();
  j["scenario"] = scenario.name;
  j["algorithm"] = std::string(to_string(algorithm));
  j["criterion"] = r.criterion;
  j["efficiency_bound"] = r.efficiency_bound;
  j["iterations"] = r.iterations;
  j["status"] = std::string(to_string(r.status));
  return j;
}

RunOutput run_scenario(const Scenario& scenario, AlgorithmKind algorithm, const RunOverrides& overrides,
                       const std::optional<std::filesystem::path>& out_dir, std::size_t certify_grid) {
  AlgoConfig cfg = scenario.algorithm;
  overrides.apply(cfg);
  const ComparisonTable table = scenario.table();
  RunOutput out;
  out.algorithm = algorithm;
  Scenario with_cfg = scenario;
  with_cfg.algorithm = cfg;
  out.result = run_algorithm(algorithm, table, scenario.space, with_cfg.start_design(table), cfg);
  CertifyOptions copts;
  copts.grid_size = certify_grid;
  copts.inner = cfg.inner;
  out.report = certify(out.result.cv, table, scenario.space, copts);

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_json(*out_dir / "design.json", design_document(scenario, algorithm, out.result));
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& m : table.models()) {
      nlohmann::json box = nlohmann::json::array();
      for (const auto& b : m.theta_box) box.push_back({b.lo, b.hi});
      boxes.push_back({{"model", m.name}, {"theta_box", std::move(box)}});
    }
    nlohmann::json report = {{"scenario", scenario.name},
                             {"algorithm", std::string(to_string(algorithm))},
                             {"status", std::string(to_string(out.result.status))},
                             {"iterations", out.result.iterations},
                             {"wall_seconds", out.result.wall_time.count()},
                             {"criterion", out.result.criterion},
                             {"efficiency_bound", out.result.efficiency_bound},
                             {"comparisons", table.size()},
                             {"certification", out.report.to_json()},
                             {"config", cfg.to_json()},
                             {"rival_boxes", std::move(boxes)},
                             {"inner", out.result.cv.to_json(table)}};
    write_json(*out_dir / "report.json", report);
    export_psi_trace(out.result.cv, table, scenario.space, certify_grid, *out_dir / "psi.csv");
    out.result.write_trace_csv(*out_dir / "trace.csv");
  }
  return out;
}

void BenchSummary::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.precision(10);
  out << "algorithm,repeat,seconds,criterion,efficiency_bound,status,dnf\n";
  for (const auto& r : rows) {
    out << to_string(r.algorithm) << ',' << r.repeat << ',' << r.seconds << ',' << r.criterion << ','
        << r.efficiency_bound << ',' << to_string(r.status) << ',' << (r.dnf ? 1 : 0) << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

double BenchSummary::speed_ratio(AlgorithmKind slow, AlgorithmKind fast) const {
  double ts = 0.0, tf = 0.0;
  for (const auto& [a, t] : medians) {
    if (a == slow) ts = t;
    if (a == fast) tf = t;
  }
  return tf > 0.0 ? ts / tf : 0.0;
}

bool BenchSummary::any_dnf(AlgorithmKind a) const {
  return std::any_of(rows.begin(), rows.end(), [a](const BenchRow& r) { return r.algorithm == a && r.dnf; });
}

BenchSummary bench(const Scenario& scenario, const std::vector<AlgorithmKind>& algorithms, int repeats,
                   const RunOverrides& overrides, double budget_factor) {
  if (repeats < 1) throw Error(ErrorCode::Config, "repeats must be positive");
  AlgoConfig base = scenario.algorithm;
  overrides.apply(base);
  const ComparisonTable table = scenario.table();
  Scenario configured = scenario;
  configured.algorithm = base;
  const Design start = configured.start_design(table);

  std::vector<AlgorithmKind> order = algorithms;
  std::stable_partition(order.begin(), order.end(), [](AlgorithmKind a) { return a == AlgorithmKind::NewQuad; });
  BenchSummary summary;
  summary.budget_factor = budget_factor;
  std::optional<double> quad_median;
  for (AlgorithmKind a : order) {
    AlgoConfig cfg = base;
    if (a != AlgorithmKind::NewQuad && quad_median && !overrides.time_budget) {
      cfg.time_budget = budget_factor * *quad_median;
    }
    std::vector<double> times;
    for (int r = 0; r < repeats; ++r) {
      const RunResult res = run_algorithm(a, table, scenario.space, start, cfg);
      const double secs = res.wall_time.count();
      summary.rows.push_back(
          {a, r, secs, res.criterion, res.efficiency_bound, res.status, res.status != RunStatus::Converged});
      times.push_back(secs);
    }
    const double m = median(times);
    if (a == AlgorithmKind::NewQuad) quad_median = m;
    summary.medians.emplace_back(a, m);
  }
  // Report in the requested order.
  std::vector<std::pair<AlgorithmKind, double>> ordered;
  for (AlgorithmKind a : algorithms) {
    for (const auto& entry : summary.medians) {
      if (entry.first == a) ordered.push_back(entry);
    }
  }
  summary.medians = std::move(ordered);
  return summary;
}

DesignComparison compare_to_reference(const Design& run, double run_criterion, const ReferenceDesign& ref,
                                      const ComparisonTable& table, const InnerOptions& opts) {
  DesignComparison c;
  const double ref_value = kl_criterion(ref.design, table, opts).total;
  c.criterion_ratio = run_criterion / ref_value;
  c.criterion_ok = c.criterion_ratio >= ref.criterion_ratio;
  c.support_ok = ref.support_sizes.empty()
                     ? run.size() == ref.design.size()
                     : std::find(ref.support_sizes.begin(), ref.support_sizes.end(), run.size()) != ref.support_sizes.end();

  std::vector<bool> used(run.size(), false);
  bool matched = true;
  std::ostringstream detail;
  for (std::size_t r = 0; r < ref.design.size(); ++r) {
    const double xr = ref.design.point(r);
    const double wr = ref.design.weight(r);
    std::size_t best = run.size();
    for (std::size_t k = 0; k < run.size(); ++k) {
      if (used[k] || std::abs(run.point(k) - xr) > ref.point_tol) continue;
      if (best == run.size() || std::abs(run.point(k) - xr) < std::abs(run.point(best) - xr)) best = k;
    }
    if (best == run.size()) {
      if (wr > ref.weight_tol) {
        matched = false;
        detail << "no point near " << xr << "; ";
      }
      continue;
    }
    used[best] = true;
    if (std::abs(run.weight(best) - wr) > ref.weight_tol) {
      matched = false;
      detail << "weight at " << xr << ": " << fmt(run.weight(best), 4) << " vs " << wr << "; ";
    }
  }
  for (std::size_t k = 0; k < run.size(); ++k) {
    if (!used[k] && run.weight(k) > ref.weight_tol) {
      matched = false;
      detail << "extra point " << fmt(run.point(k), 5) << " (" << fmt(run.weight(k), 4) << "); ";
    }
  }
  c.match_ok = matched && c.support_ok;
  if (!c.support_ok) detail << "support size " << run.size() << "; ";
  detail << "ratio " << fmt(c.criterion_ratio, 8);
  c.detail = detail.str();
  return c;
}

bool ReproductionReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const ReproductionCheck& c) { return c.passed; });
}

nlohmann::json ReproductionReport::to_json() const {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : checks) {
    cs.push_back({{"name", c.name}, {"kind", c.kind}, {"passed", c.passed}, {"detail", c.detail}, {"seconds", c.seconds}});
  }
  auto mat = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  return {{"checks", std::move(cs)},
          {"efficiency_labels", efficiency_labels},
          {"efficiency", mat(efficiency)},
          {"efficiency_expected", mat(efficiency_expected)},
          {"all_passed", all_passed()}};
}

ReproductionReport reproduce_all(const std::filesystem::path& dir, const RunOverrides& overrides, std::ostream& log,
                                 const std::optional<std::filesystem::path>& out_dir) {
  const auto manifest_path = dir / "reproduce.manifest";
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, manifest_path.string() + ": " + e.what());
  }

  ReproductionReport rep;
  struct Cached {
    Scenario scenario;
    RunOutput output;
  };
  std::vector<std::pair<std::string, Cached>> runs;
  auto run_named = [&](const std::string& name) -> const Cached& {
    for (const auto& [n, c] : runs) {
      if (n == name) return c;
    }
    Scenario s = load_scenario(resolve_scenario(name, dir));
    std::optional<std::filesystem::path> sub;
    if (out_dir) sub = *out_dir / name;
    RunOutput o = run_scenario(s, AlgorithmKind::NewQuad, overrides, sub);
    runs.emplace_back(name, Cached{std::move(s), std::move(o)});
    return runs.back().second;
  };

  for (const auto& name_j : manifest.at("designs")) {
    const auto name = name_j.get<std::string>();
    const auto t0 = std::chrono::steady_clock::now();
    const Cached& c = run_named(name);
    ReproductionCheck check{name, "design", false, "", 0.0};
    if (!c.scenario.reference) {
      check.detail = "scenario has no reference design";
    } else {
      AlgoConfig cfg = c.scenario.algorithm;
      overrides.apply(cfg);
      const DesignComparison cmp =
          compare_to_reference(c.output.result.design, c.output.result.criterion, *c.scenario.reference,
                               c.scenario.table(), cfg.inner);
      check.passed = cmp.criterion_ok && cmp.match_ok && c.output.report.certified;
      check.detail = cmp.detail + (c.output.report.certified ? "; certified" : "; not certified, gap " +
                                                                                   fmt(c.output.report.max_gap_rel));
    }
    check.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << (check.passed ? "PASS " : "FAIL ") << name << ": " << check.detail << '\n';
    rep.checks.push_back(std::move(check));
  }

  if (manifest.contains("efficiency")) {
    const auto& eff = manifest["efficiency"];
    const auto names = eff.at("scenarios").get<std::vector<std::string>>();
    const auto expected = eff.at("expected").get<std::vector<std::vector<double>>>();
    const double tol = eff.at("tolerance").get<double>();
    const auto n = static_cast<Eigen::Index>(names.size());
    std::vector<Design> designs;
    std::vector<ComparisonTable> tables;
    std::vector<double> best;
    for (const auto& name : names) {
      const Cached& c = run_named(name);
      designs.push_back(c.output.result.design);
      tables.push_back(c.scenario.table());
      best.push_back(c.output.result.criterion);
    }
    std::vector<const ComparisonTable*> tptr;
    for (const auto& t : tables) tptr.push_back(&t);
    AlgoConfig cfg;
    overrides.apply(cfg);
    rep.efficiency = efficiency_matrix(designs, tptr, best, cfg.inner);
    rep.efficiency_expected.resize(n, n);
    rep.efficiency_labels = names;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double want = expected.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j));
        rep.efficiency_expected(i, j) = want;
        const double got = rep.efficiency(i, j);
        ReproductionCheck check{"eff[" + names[static_cast<std::size_t>(i)] + "][" + names[static_cast<std::size_t>(j)] + "]",
                                "efficiency", std::abs(got - want) <= tol, fmt(got, 4) + " vs " + fmt(want, 4), 0.0};
        log << (check.passed ? "PASS " : "FAIL ") << check.name << ": " << check.detail << '\n';
        rep.checks.push_back(std::move(check));
      }
    }
  }
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_json(*out_dir / "reproduce.json", rep.to_json());
  }
  return rep;
}

}  // namespace kldesign
