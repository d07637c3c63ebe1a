#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "kldesign/criterion.hpp"
#include "kldesign/error.hpp"
#include "kldesign/scenario.hpp"

namespace kldesign {
namespace {

Scenario bundled(const std::string& name) {
  return load_scenario(std::string(KLDESIGN_SCENARIO_DIR) + "/" + name + ".json");
}

TEST(Table, BundledComparisonCounts) {
  EXPECT_EQ(bundled("example2_case1").table().size(), 1u);
  EXPECT_EQ(bundled("example3_case1").table().size(), 25u);
  EXPECT_EQ(bundled("example4_case1").table().size(), 246u);
}

TEST(Table, FlattenedWeightsAreProductOfPairAndPrior) {
  const ComparisonTable t = bundled("example3_case2").table();
  double total = 0.0;
  for (const auto& c : t.entries()) {
    EXPECT_EQ(c.true_index, 0u);
    EXPECT_EQ(c.rival_index, 1u);
    total += c.weight;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  const ComparisonTable t4 = bundled("example4_case1").table();
  double sum4 = 0.0;
  for (const auto& c : t4.entries()) sum4 += c.weight;
  EXPECT_NEAR(sum4, 1.0, 1e-12);
}

TEST(Table, RejectsInvalidEntries) {
  const Scenario s = bundled("example2_case1");
  auto code = [&](std::vector<Comparison> entries) {
    try {
      ComparisonTable(s.models, std::move(entries));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code({{0, 0, 1.0, {1, 1, 1}}}), ErrorCode::Config);
  EXPECT_EQ(code({{0, 5, 1.0, {1, 1, 1}}}), ErrorCode::Config);
  EXPECT_EQ(code({{0, 1, -1.0, {1, 1, 1}}}), ErrorCode::Config);
  EXPECT_EQ(code({{0, 1, 0.0, {1, 1, 1}}}), ErrorCode::Config);
  EXPECT_EQ(code({{0, 1, 1.0, {1, 1, 1e6}}}), ErrorCode::Config);
}

TEST(Criterion, PsiAveragesToTheCriterion) {
  // sum_k w_k Psi(x_k) reproduces KL_P because each entry's minimizer is shared.
  for (const char* name : {"example2_case1", "example3_case1"}) {
    const Scenario s = bundled(name);
    const ComparisonTable t = s.table();
    const Design d({0.1, 0.9, 2.0, 4.0, 5.0}, {0.1, 0.3, 0.2, 0.15, 0.25});
    Design dd = d;
    if (s.space.upper() > 5.0) dd = Design({0.0, 0.4, 1.7, 6.0, 10.0}, {0.2, 0.3, 0.3, 0.1, 0.1});
    const CriterionValue cv = kl_criterion(dd, t);
    double avg = 0.0;
    for (std::size_t k = 0; k < dd.size(); ++k) avg += dd.weight(k) * psi(dd.point(k), dd, cv, t);
    EXPECT_NEAR(avg, cv.total, 1e-12 * cv.total) << name;
    EXPECT_LE(efficiency_bound(cv, t, s.space), 1.0);
  }
}

TEST(Criterion, ThreadCountDoesNotChangeTheResult) {
  const Scenario s = bundled("example3_case3");
  const ComparisonTable t = s.table();
  const Design d = Design::uniform({0.0, 0.5, 2.0, 10.0});
  InnerOptions one, four;
  four.threads = 4;
  const CriterionValue a = kl_criterion(d, t, one);
  const CriterionValue b = kl_criterion(d, t, four);
  EXPECT_EQ(a.total, b.total);
  for (std::size_t e = 0; e < t.size(); ++e) EXPECT_EQ(a.per_entry[e].theta_hat, b.per_entry[e].theta_hat);
}

TEST(Criterion, OnePointDesignCannotDiscriminate) {
  const Scenario s = bundled("example2_case1");
  const ComparisonTable t = s.table();
  const CriterionValue cv = kl_criterion(Design::one_point(2.0), t);
  EXPECT_LT(cv.total, 1e-12);
  try {
    efficiency_bound(cv, t, s.space);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveCriterion);
  }
}

TEST(Criterion, PsiRequiresMatchingDesign) {
  const Scenario s = bundled("example2_case1");
  const ComparisonTable t = s.table();
  const Design d = Design::uniform({0.1, 2.0, 5.0});
  const CriterionValue cv = kl_criterion(d, t);
  EXPECT_THROW(psi(1.0, Design::uniform({0.1, 2.1, 5.0}), cv, t), Error);
}

TEST(Criterion, CrossEfficiencyOfOwnOptimumIsOne) {
  const Scenario s = bundled("example2_case1");
  const ComparisonTable t = s.table();
  const Design d({0.1302, 2.4978, 5.0}, {0.489, 0.378, 0.133});
  const double best = kl_criterion(d, t).total;
  EXPECT_NEAR(cross_efficiency(d, t, best), 1.0, 1e-12);
}

TEST(Criterion, HighestSingleEntryValueBoundsTheTotal) {
  const Scenario s = bundled("example3_case1");
  const ComparisonTable t = s.table();
  const CriterionValue cv = kl_criterion(Design::uniform({0.0, 0.4, 1.6, 10.0}), t);
  double sum = 0.0;
  for (std::size_t e = 0; e < t.size(); ++e) {
    EXPECT_GE(cv.per_entry[e].value, 0.0);
    sum += t.entries()[e].weight * cv.per_entry[e].value;
  }
  EXPECT_NEAR(sum, cv.total, 1e-14);
  const auto j = cv.to_json(t);
  EXPECT_EQ(j.at("per_entry").size(), t.size());
}

}  // namespace
}  // namespace kldesign
