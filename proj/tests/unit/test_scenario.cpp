#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "kldesign/error.hpp"
#include "kldesign/scenario.hpp"

namespace kldesign {
namespace {

const std::filesystem::path kDir = KLDESIGN_SCENARIO_DIR;

nlohmann::json bundled_json(const std::string& name) {
  std::ifstream in(kDir / (name + ".json"));
  return nlohmann::json::parse(in);
}

std::string config_error(const nlohmann::json& j) {
  try {
    parse_scenario(j, "s");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
    return e.what();
  }
  ADD_FAILURE() << "scenario was accepted";
  return {};
}

TEST(Scenario, AllBundledScenariosValidate) {
  const auto names = list_scenarios(kDir);
  EXPECT_EQ(names.size(), 10u);
  for (const auto& n : names) {
    const Scenario s = load_scenario(kDir / (n + ".json"));
    EXPECT_EQ(s.name, n);
    EXPECT_NO_THROW(s.table()) << n;
    EXPECT_TRUE(s.reference.has_value()) << n;
  }
}

TEST(Scenario, RoundTripGivesIdenticalTable) {
  for (const auto& n : list_scenarios(kDir)) {
    const Scenario a = load_scenario(kDir / (n + ".json"));
    const Scenario b = parse_scenario(a.to_json(), n);
    EXPECT_EQ(a.to_json(), b.to_json()) << n;
    const ComparisonTable ta = a.table(), tb = b.table();
    ASSERT_EQ(ta.size(), tb.size());
    for (std::size_t e = 0; e < ta.size(); ++e) {
      EXPECT_EQ(ta.entries()[e].theta_true, tb.entries()[e].theta_true);
      EXPECT_EQ(ta.entries()[e].weight, tb.entries()[e].weight);
      EXPECT_EQ(ta.entries()[e].rival_index, tb.entries()[e].rival_index);
    }
  }
}

TEST(Scenario, ErrorsNameTheJsonPath) {
  auto j = bundled_json("example2_case1");
  j["models"][1]["theta_box"][0] = {5.0, 1.0};
  EXPECT_NE(config_error(j).find("/models/1/theta_box/0"), std::string::npos);

  j = bundled_json("example2_case1");
  j["models"][0]["variance"] = {{"v2", -1.0}};
  EXPECT_NE(config_error(j).find("/models/0/variance"), std::string::npos);

  j = bundled_json("example2_case1");
  j["models"][0]["mean"] = {{"expr", "t1 * x +"}};
  EXPECT_NE(config_error(j).find("/models/0/mean"), std::string::npos);

  j = bundled_json("example2_case1");
  j["p"] = {{0, 1}};
  EXPECT_NE(config_error(j).find("/p"), std::string::npos);

  j = bundled_json("example2_case1");
  j["colour"] = "red";
  EXPECT_NE(config_error(j).find("/colour"), std::string::npos);

  j = bundled_json("example2_case1");
  j["models"][0]["theta"] = {1.0, 1.0, 1e6};
  EXPECT_NE(config_error(j).find("/models/0/theta"), std::string::npos);
}

TEST(Scenario, SyntaxErrorsCarryLineAndColumn) {
  const auto path = std::filesystem::temp_directory_path() / "kldesign_bad_scenario.json";
  {
    std::ofstream out(path);
    out << "{\n  \"name\": \"x\",\n  \"design_space\": [0, 1,]\n}\n";
  }
  try {
    load_scenario(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(Scenario, NegativeLogNormalMeanIsRejected) {
  auto j = bundled_json("example2_case1");
  j["models"][0]["mean"] = {{"expr", "t1 * x - 3"}};
  j["models"][0]["theta_box"] = {{0.0, 10.0}};
  j["models"][0]["theta"] = {1.0};
  // Caught while parsing, before any table is built.
  EXPECT_THROW(parse_scenario(j, "neg").table(), Error);
}

TEST(Scenario, PerturbedTruthChangesTheTable) {
  auto j = bundled_json("example2_case1");
  const ComparisonTable base = parse_scenario(j).table();
  j["models"][0]["theta"][0] = 1.5;
  const ComparisonTable moved = parse_scenario(j).table();
  EXPECT_NE(base.entries()[0].theta_true, moved.entries()[0].theta_true);
}

TEST(Priors, GaussGridOffsetsAndMasses) {
  const auto [offsets, masses] = gauss_grid(std::sqrt(0.3), 5);
  ASSERT_EQ(offsets.size(), 5u);
  EXPECT_NEAR(offsets[0], -std::sqrt(0.3), 1e-15);
  EXPECT_NEAR(offsets[2], 0.0, 1e-15);
  EXPECT_NEAR(offsets[4], std::sqrt(0.3), 1e-15);
  // Unnormalized: product_prior scales the atoms to total mass one.
  EXPECT_DOUBLE_EQ(masses[2], 1.0);
  EXPECT_DOUBLE_EQ(masses[0], masses[4]);
  EXPECT_NEAR(masses[1] / masses[2], std::exp(-1.0 / 8.0), 1e-14);
}

TEST(Priors, ProductPriorEnumeratesAllCombinations) {
  const DiscretePrior p = product_prior({1.0, 2.0, 3.0}, {0, 2}, {{-1.0, 1.0}, {-0.5, 0.0, 0.5}},
                                        {{0.5, 0.5}, {0.25, 0.5, 0.25}});
  ASSERT_EQ(p.atoms.size(), 6u);
  EXPECT_EQ(p.atoms[0].theta, (std::vector<double>{0.0, 2.0, 2.5}));
  EXPECT_EQ(p.atoms[1].theta, (std::vector<double>{0.0, 2.0, 3.0}));
  EXPECT_NEAR(p.atoms[1].tau, 0.25, 1e-15);
}

TEST(Scenario, ResolveByNameOrPath) {
  EXPECT_EQ(resolve_scenario("example2_case1", kDir), kDir / "example2_case1.json");
  EXPECT_EQ(resolve_scenario((kDir / "example3_case1.json").string(), "/nonexistent"),
            kDir / "example3_case1.json");
  EXPECT_THROW(resolve_scenario("no_such_scenario", kDir), Error);
}

}  // namespace
}  // namespace kldesign
