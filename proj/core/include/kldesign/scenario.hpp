#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "kldesign/algorithms.hpp"
#include "kldesign/criterion.hpp"

namespace kldesign {

/// A published design to compare against, with the matching tolerances.
struct ReferenceDesign {
  std::string label;
  Design design = Design::one_point(0.0);
  double point_tol = 0.0;
  double weight_tol = 0.0;
  /// Minimum acceptable KL_P(run) / KL_P(reference).
  double criterion_ratio = 0.999;
  /// Accepted support sizes; empty means "same as the reference".
  std::vector<std::size_t> support_sizes;
};

struct Scenario {
  std::string name;
  std::string description;
  DesignSpace space{0.0, 1.0};
  std::vector<ModelSpec> models;
  std::vector<std::optional<TruthSpec>> truths;
  Eigen::MatrixXd p;
  AlgoConfig algorithm;
  std::optional<Design> start;
  std::size_t start_points = 0;  ///< 0: one more than the largest rival dimension, at least 3
  std::optional<ReferenceDesign> reference;

  /// Flattened comparison table; also checks that log-normal truths have
  /// positive means across the design space.
  ComparisonTable table() const;
  Design start_design(const ComparisonTable& table) const;
  /// Priors are written out as explicit atoms.
  nlohmann::json to_json() const;
};

/// Validates every field; errors name the offending JSON path.
Scenario parse_scenario(const nlohmann::json& j, const std::string& origin = "<scenario>");
/// Reads and parses a file; syntax errors carry line and column.
Scenario load_scenario(const std::filesystem::path& path);

/// Sorted names of the *.json files in `dir`.
std::vector<std::string> list_scenarios(const std::filesystem::path& dir);
/// `name_or_path` is used as a path if it exists, otherwise looked up in `dir`.
std::filesystem::path resolve_scenario(const std::string& name_or_path, const std::filesystem::path& dir);

/// Offsets sd (i - c) / resolution around the center with masses
/// proportional to exp(-(i - c)^2 / (2 resolution^2)), i = 1..points,
/// c = (points + 1) / 2.
std::pair<std::vector<double>, std::vector<double>> gauss_grid(double sd, int points, double resolution = 2.0);

/// Product prior over the listed coordinates around `center`. The first
/// coordinate varies slowest; masses multiply and are renormalized.
DiscretePrior product_prior(const std::vector<double>& center, const std::vector<std::size_t>& coords,
                            const std::vector<std::vector<double>>& offsets,
                            const std::vector<std::vector<double>>& masses);

}  // namespace kldesign
