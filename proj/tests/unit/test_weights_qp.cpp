#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "kldesign/error.hpp"
#include "kldesign/scenario.hpp"
#include "kldesign/weights_qp.hpp"

namespace kldesign {
namespace {

Scenario bundled(const std::string& name) {
  return load_scenario(std::string(KLDESIGN_SCENARIO_DIR) + "/" + name + ".json");
}

Eigen::VectorXd weights_of(const Design& d) {
  return Eigen::Map<const Eigen::VectorXd>(d.weights().data(), static_cast<Eigen::Index>(d.size()));
}

TEST(Linearize, ShapesAndSymmetry) {
  const Scenario s = bundled("example3_case1");
  const ComparisonTable t = s.table();
  const Design d = Design::uniform({0.0, 0.4, 1.6, 10.0});
  const CriterionValue cv = kl_criterion(d, t);
  const Linearization lin = linearize(d.points(), t, cv);
  ASSERT_EQ(lin.entries.size(), t.size());
  for (const auto& e : lin.entries) {
    EXPECT_EQ(e.R.rows(), 4);
    EXPECT_LE(e.R.cols(), 3);
    EXPECT_EQ(e.curvature.size(), 4u);
  }
  const QPData qp = assemble_qp(lin, weights_of(d));
  EXPECT_LT((qp.Q - qp.Q.transpose()).cwiseAbs().maxCoeff(), 1e-14 * qp.Q.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(qp.Q);
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * eig.eigenvalues().maxCoeff());
}

TEST(Linearize, KernelValuesFormTheLinearTerm) {
  const Scenario s = bundled("example2_case1");
  const ComparisonTable t = s.table();
  const Design d({0.1, 1.0, 2.5, 5.0}, {0.3, 0.2, 0.3, 0.2});
  const CriterionValue cv = kl_criterion(d, t);
  const Linearization lin = linearize(d.points(), t, cv);
  const auto& c = t.entries()[0];
  for (std::size_t k = 0; k < d.size(); ++k) {
    EXPECT_NEAR(lin.entries[0].b[static_cast<Eigen::Index>(k)],
                kl(d.point(k), t.true_model(c), c.theta_true, t.rival_model(c), cv.per_entry[0].theta_hat), 1e-15);
  }
  // At the minimizer the weighted gradient vanishes, so the surrogate is exact.
  const Eigen::VectorXd w = weights_of(d);
  EXPECT_NEAR(g_bar(lin, w), cv.total, 1e-9 * cv.total);
  EXPECT_LT(alpha_hat(lin.entries[0], w).norm(), 1e-6);
}

TEST(Linearize, GramInverseRejectsZero) {
  try {
    regularized_gram_inverse(Eigen::MatrixXd::Zero(2, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularGram);
  }
}

TEST(QPWeightStep, NeverDecreasesTheCriterion) {
  for (const char* name : {"example2_case1", "example2_case3", "example3_case2"}) {
    const Scenario s = bundled(name);
    const ComparisonTable t = s.table();
    const Design d = s.space.upper() > 5.0 ? Design::uniform({0.0, 0.3, 0.5, 1.5, 2.0, 6.0, 10.0})
                                          : Design::uniform({0.1, 0.2, 1.0, 2.5, 3.0, 5.0});
    CriterionValue cv = kl_criterion(d, t);
    Design cur = d;
    double prev = cv.total;
    for (int call = 0; call < 4; ++call) {
      const WeightStepResult r = qp_weight_step(cur, t, cv, QPStepOptions{});
      EXPECT_GE(r.cv.total, prev - 1e-12 * prev) << name;
      prev = r.cv.total;
      cur = r.design;
      cv = r.cv;
    }
  }
}

TEST(QPWeightStep, ReachesTheExampleTwoOptimumOnItsSupport) {
  const Scenario s = bundled("example2_case1");
  const ComparisonTable t = s.table();
  const Design d = Design::uniform({0.1302, 2.4978, 5.0});
  QPStepOptions o;
  o.iterations = 20;
  const WeightStepResult r = qp_weight_step(d, t, kl_criterion(d, t), o);
  EXPECT_NEAR(r.design.weight(0), 0.489, 0.01);
  EXPECT_NEAR(r.design.weight(1), 0.378, 0.01);
  EXPECT_NEAR(r.design.weight(2), 0.133, 0.01);
}

}  // namespace
}  // namespace kldesign
