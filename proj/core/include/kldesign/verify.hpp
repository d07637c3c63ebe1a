#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "kldesign/criterion.hpp"

namespace kldesign {

struct SupportResidual {
  double x = 0.0;
  double weight = 0.0;
  double psi = 0.0;
  double residual = 0.0;  ///< |Psi(x) - KL_P| / KL_P
};

struct CertificationReport {
  double kl_value = 0.0;
  double max_psi = 0.0;
  double argmax_psi = 0.0;
  double max_gap_rel = 0.0;
  double tolerance = 0.0;
  std::vector<double> gap_locations;
  std::vector<SupportResidual> support;
  std::size_t hit_bound_entries = 0;
  bool certified = false;

  double efficiency_bound() const { return std::min(1.0, kl_value / max_psi); }
  nlohmann::json to_json() const;
};

struct CertifyOptions {
  std::size_t grid_size = 2000;
  double tol_rel = 2e-3;
  InnerOptions inner{};
};

/// Global inequality Psi <= KL_P on a dense grid plus refined local maxima,
/// and equality at every support point with positive weight.
/// Throws Error(NonPositiveCriterion) when KL_P <= 0.
CertificationReport certify(const Design& design, const ComparisonTable& table, const DesignSpace& space,
                            const CertifyOptions& opts = {});
CertificationReport certify(const CriterionValue& cv, const ComparisonTable& table, const DesignSpace& space,
                            const CertifyOptions& opts = {});

/// Entry (i, j) = KL_j(designs[i]) / best_values[j].
Eigen::MatrixXd efficiency_matrix(const std::vector<Design>& designs, const std::vector<const ComparisonTable*>& tables,
                                  const std::vector<double>& best_values, const InnerOptions& opts = {});

/// CSV x,psi,kl_p over the grid and the support points, sorted by x.
void export_psi_trace(const CriterionValue& cv, const ComparisonTable& table, const DesignSpace& space,
                      std::size_t grid_size, const std::filesystem::path& path);

}  // namespace kldesign
