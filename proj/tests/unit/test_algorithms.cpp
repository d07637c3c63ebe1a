#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "kldesign/algorithms.hpp"
#include "kldesign/error.hpp"
#include "kldesign/scenario.hpp"

namespace kldesign {
namespace {

Scenario bundled(const std::string& name) {
  return load_scenario(std::string(KLDESIGN_SCENARIO_DIR) + "/" + name + ".json");
}

void expect_monotone(const RunResult& r) {
  for (std::size_t k = 1; k < r.trace.size(); ++k) {
    EXPECT_GE(r.trace[k].criterion, r.trace[k - 1].criterion - 1e-10 * std::abs(r.trace[k - 1].criterion))
        << "iteration " << k;
  }
}

TEST(NewAlgorithm, ExampleTwoReachesTheTarget) {
  const Scenario s = bundled("example2_case1");
  const ComparisonTable t = s.table();
  for (auto kind : {AlgorithmKind::NewQuad, AlgorithmKind::NewGrad}) {
    AlgoConfig cfg = s.algorithm;
    const RunResult r = run_algorithm(kind, t, s.space, s.start_design(t), cfg);
    EXPECT_EQ(r.status, RunStatus::Converged) << to_string(kind);
    EXPECT_GE(r.efficiency_bound, 0.999);
    ASSERT_EQ(r.design.size(), 3u);
    EXPECT_NEAR(r.design.point(0), 0.130, 0.02);
    EXPECT_NEAR(r.design.point(1), 2.501, 0.02);
    EXPECT_NEAR(r.design.point(2), 5.0, 0.02);
    expect_monotone(r);
  }
}

TEST(NewAlgorithm, FixedEfficiencyTargetStopsEarly) {
  const Scenario s = bundled("example2_case2");
  const ComparisonTable t = s.table();
  AlgoConfig cfg = s.algorithm;
  cfg.eff_target = 0.5;
  const RunResult r = new_algorithm(t, s.space, s.start_design(t), cfg);
  EXPECT_GE(r.efficiency_bound, 0.5);
  EXPECT_LE(r.iterations, 2);
}

TEST(AFAlgorithm, SingleStepIsDeterministic) {
  const Scenario s = bundled("example2_case1");
  const ComparisonTable t = s.table();
  AlgoConfig cfg = s.algorithm;
  cfg.af_max_iters = 1;
  const Design start = s.start_design(t);
  const RunResult a = af_algorithm(t, s.space, start, cfg);
  const RunResult b = af_algorithm(t, s.space, start, cfg);
  EXPECT_EQ(a.design, b.design);
  EXPECT_EQ(a.criterion, b.criterion);
  // One step adds the maximizer of Psi with mass 1/2.
  EXPECT_EQ(a.iterations, 1);
  double largest = 0.0;
  for (double w : a.design.weights()) largest = std::max(largest, w);
  EXPECT_NEAR(largest, 0.5, 1e-12);
}

TEST(AFAlgorithm, ImprovesOnTheStart) {
  const Scenario s = bundled("example2_case3");
  const ComparisonTable t = s.table();
  AlgoConfig cfg = s.algorithm;
  cfg.af_max_iters = 200;
  const Design start = s.start_design(t);
  const RunResult r = af_algorithm(t, s.space, start, cfg);
  EXPECT_GT(r.criterion, kl_criterion(start, t).total);
  EXPECT_GT(r.efficiency_bound, 0.95);
}

TEST(Algorithms, NonPositiveStartIsRejected) {
  const Scenario s = bundled("example2_case1");
  const ComparisonTable t = s.table();
  try {
    new_algorithm(t, s.space, Design::one_point(1.0), s.algorithm);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveStart);
  }
}

TEST(Algorithms, DefaultStartSpansTheSpace) {
  const Scenario s = bundled("example4_case1");
  const ComparisonTable t = s.table();
  const Design d = default_start(s.space, 5, &t);
  EXPECT_EQ(d.point(0), 0.0);
  EXPECT_EQ(d.point(d.size() - 1), 500.0);
  EXPECT_GT(kl_criterion(d, t).total, 0.0);
  EXPECT_THROW(default_start(s.space, 2, &t), Error);
}

TEST(Algorithms, LocalMaximaOfAKnownFunction) {
  // sin is still rising at 14, so the right end is a maximum too.
  const DesignSpace space(0.0, 14.0);
  AlgoConfig cfg;
  const auto xs = find_local_maxima([](double x) { return std::sin(x); }, space, cfg);
  ASSERT_EQ(xs.size(), 3u);
  EXPECT_NEAR(xs[0], M_PI / 2, 1e-7);
  EXPECT_NEAR(xs[1], 5 * M_PI / 2, 1e-7);
  EXPECT_NEAR(xs[2], 14.0, 1e-12);
}

TEST(AlgoConfig, JsonRoundTripAndValidation) {
  AlgoConfig cfg;
  cfg.grid_size = 321;
  cfg.eff_target = 0.995;
  cfg.weight_method = WeightMethod::Grad;
  AlgoConfig back;
  back.update_from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  cfg.eff_target = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_THROW(algorithm_from_string("simplex"), Error);
  EXPECT_EQ(algorithm_from_string("new-grad"), AlgorithmKind::NewGrad);
}

}  // namespace
}  // namespace kldesign
