#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "kldesign/criterion.hpp"
#include "kldesign/inner.hpp"
#include "kldesign/scenario.hpp"
#include "support/oracles.hpp"

namespace kldesign {
namespace {

TEST(BoxMinimizer, InteriorQuadratic) {
  BoxObjective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const Eigen::Vector2d c(0.3, -0.7);
    if (g) *g = 2.0 * (x - c);
    return (x - c).squaredNorm();
  };
  const auto r = minimize_in_box(f, Eigen::Vector2d(2.0, 2.0), Eigen::Vector2d(-5, -5), Eigen::Vector2d(5, 5));
  EXPECT_EQ(r.status, BoxStatus::Converged);
  EXPECT_NEAR(r.x[0], 0.3, 1e-8);
  EXPECT_NEAR(r.x[1], -0.7, 1e-8);
}

TEST(BoxMinimizer, ActiveBoundIsReported) {
  BoxObjective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = 2.0 * (x - Eigen::Vector2d(3.0, 0.5));
    return (x - Eigen::Vector2d(3.0, 0.5)).squaredNorm();
  };
  const auto r = minimize_in_box(f, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1));
  EXPECT_EQ(r.status, BoxStatus::HitBound);
  EXPECT_DOUBLE_EQ(r.x[0], 1.0);
  EXPECT_NEAR(r.x[1], 0.5, 1e-8);
}

TEST(BoxMinimizer, Rosenbrock) {
  BoxObjective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    if (g) {
      (*g)[0] = -2.0 * a - 400.0 * x[0] * b;
      (*g)[1] = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
  };
  const auto r = minimize_in_box(f, Eigen::Vector2d(-1.2, 1.0), Eigen::Vector2d(-3, -3), Eigen::Vector2d(3, 3));
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
  EXPECT_NEAR(r.x[1], 1.0, 1e-6);
}

TEST(BoxMinimizer, UndefinedStartGivesInfinity) {
  BoxObjective f = [](const Eigen::VectorXd&, Eigen::VectorXd*) { return std::numeric_limits<double>::infinity(); };
  const auto r = minimize_in_box(f, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(-1, -1), Eigen::Vector2d(1, 1));
  EXPECT_TRUE(std::isinf(r.value));
}

TEST(InnerOracle, MatchesParameterGridOnExampleTwo) {
  const std::vector<Design> designs{
      Design({0.13, 2.501, 5.0}, {0.489, 0.378, 0.133}),
      Design::uniform({0.1, 2.55, 5.0}),
      Design({0.5, 1.0, 3.0, 4.5}, {0.1, 0.4, 0.2, 0.3}),
  };
  for (const char* name : {"example2_case1", "example2_case2", "example2_case3"}) {
    const Scenario s = load_scenario(std::string(KLDESIGN_SCENARIO_DIR) + "/" + name + ".json");
    const ComparisonTable table = s.table();
    ASSERT_EQ(table.size(), 1u);
    for (const auto& d : designs) {
      const InnerSolution sol = inner_infimum(table, 0, d, nullptr, InnerOptions{});
      const double ref = oracle::brute_force_infimum(table, 0, d);
      EXPECT_NEAR(sol.value, ref, 1e-6 * ref) << name;
    }
  }
}

TEST(Inner, WarmStartDoesNotChangeTheInfimum) {
  const Scenario s = load_scenario(std::string(KLDESIGN_SCENARIO_DIR) + "/example2_case1.json");
  const ComparisonTable table = s.table();
  const Design d = Design::uniform({0.1, 1.0, 2.5, 5.0});
  const InnerSolution cold = inner_infimum(table, 0, d, nullptr, InnerOptions{});
  const InnerSolution warm = inner_infimum(table, 0, d, &cold.theta_hat, InnerOptions{});
  EXPECT_NEAR(warm.value, cold.value, 1e-10 * cold.value);
}

TEST(Inner, IdenticalModelsGiveZero) {
  const Scenario s = load_scenario(std::string(KLDESIGN_SCENARIO_DIR) + "/example2_case1.json");
  std::vector<ModelSpec> models{s.models[1], s.models[1]};
  models[1].name = "copy";
  std::vector<std::optional<TruthSpec>> truths{TruthSpec{std::vector<double>{1.0, 1.0}}, std::nullopt};
  Eigen::MatrixXd p(2, 2);
  p << 0, 1, 0, 0;
  const ComparisonTable table = flatten_bayesian(models, truths, p);
  const InnerSolution sol = inner_infimum(table, 0, Design::uniform({0.1, 2.0, 5.0}), nullptr, InnerOptions{});
  EXPECT_LT(sol.value, 1e-14);
}

}  // namespace
}  // namespace kldesign
