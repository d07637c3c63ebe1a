#include <filesystem>
#include <map>
#include <random>
#include <string>

#include <benchmark/benchmark.h>

#include "kldesign/algorithms.hpp"
#include "kldesign/scenario.hpp"
#include "kldesign/simplex_qp.hpp"
#include "kldesign/weights_qp.hpp"

namespace {

const kldesign::Scenario& scenario(const std::string& name) {
  static std::map<std::string, kldesign::Scenario> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    it = cache.emplace(name, kldesign::load_scenario(std::filesystem::path(KLDESIGN_SCENARIO_DIR) / (name + ".json")))
             .first;
  }
  return it->second;
}

void BM_KernelJet(benchmark::State& state) {
  const auto& s = scenario("example2_case1");
  const auto table = s.table();
  const auto& c = table.entries()[0];
  const std::vector<double> theta = {1.5, 0.8};
  for (auto _ : state) {
    const auto t = kldesign::moments(1.3, table.true_model(c), c.theta_true);
    const auto r = kldesign::moments_with_gradient(1.3, table.rival_model(c), theta);
    benchmark::DoNotOptimize(kldesign::kernel_jet(kldesign::Family::LogNormal, t, r));
  }
}
BENCHMARK(BM_KernelJet);

void BM_Criterion(benchmark::State& state, const std::string& name) {
  const auto& s = scenario(name);
  const auto table = s.table();
  const auto design = s.reference->design;
  for (auto _ : state) benchmark::DoNotOptimize(kldesign::kl_criterion(design, table).total);
  state.counters["comparisons"] = static_cast<double>(table.size());
}
BENCHMARK_CAPTURE(BM_Criterion, example2, std::string("example2_case1"))->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Criterion, example3, std::string("example3_case1"))->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Criterion, example4, std::string("example4_case1"))->Unit(benchmark::kMillisecond);

void BM_SimplexQP(benchmark::State& state) {
  const auto n = state.range(0);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(n, n / 2 + 1);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = z(rng);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) b[i] = z(rng);
  const kldesign::QPData qp{a * a.transpose(), b};
  for (auto _ : state) benchmark::DoNotOptimize(kldesign::solve_simplex_qp(qp).objective);
}
BENCHMARK(BM_SimplexQP)->Arg(4)->Arg(16)->Arg(64);

void BM_Algorithm(benchmark::State& state, kldesign::AlgorithmKind kind) {
  const auto& s = scenario("example2_case1");
  const auto table = s.table();
  kldesign::AlgoConfig cfg = s.algorithm;
  cfg.eff_target = 0.999;
  const auto start = s.start_design(table);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kldesign::run_algorithm(kind, table, s.space, start, cfg).criterion);
  }
}
BENCHMARK_CAPTURE(BM_Algorithm, af, kldesign::AlgorithmKind::AF)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Algorithm, new_grad, kldesign::AlgorithmKind::NewGrad)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Algorithm, new_quad, kldesign::AlgorithmKind::NewQuad)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
