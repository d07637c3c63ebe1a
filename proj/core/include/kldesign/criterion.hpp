#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "kldesign/design.hpp"
#include "kldesign/inner.hpp"
#include "kldesign/models.hpp"
#include "kldesign/search.hpp"

namespace kldesign {

/// One term of the criterion: model `true_index` with fixed parameters is
/// the truth, model `rival_index` is fitted to it.
struct Comparison {
  std::size_t true_index = 0;
  std::size_t rival_index = 0;
  double weight = 0.0;
  std::vector<double> theta_true;
};

struct PriorAtom {
  std::vector<double> theta;
  double tau = 0.0;
};

/// Discrete prior on the parameters of one model.
struct DiscretePrior {
  std::vector<PriorAtom> atoms;

  /// Nonempty, tau > 0, sum within 1e-12 of one, atoms in the model's box.
  void validate(const ModelSpec& model) const;
};

/// Either fixed "true" parameters or a discrete prior over them.
using TruthSpec = std::variant<std::vector<double>, DiscretePrior>;

class ComparisonTable {
 public:
  /// Throws Error(Config) on invalid indices, i == j, negative weights,
  /// out-of-box true parameters, family mismatch, or zero total weight.
  ComparisonTable(std::vector<ModelSpec> models, std::vector<Comparison> entries);

  const std::vector<ModelSpec>& models() const noexcept { return models_; }
  const std::vector<Comparison>& entries() const noexcept { return entries_; }
  const ModelSpec& true_model(const Comparison& c) const { return models_.at(c.true_index); }
  const ModelSpec& rival_model(const Comparison& c) const { return models_.at(c.rival_index); }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t max_rival_dim() const noexcept;

 private:
  std::vector<ModelSpec> models_;
  std::vector<Comparison> entries_;
};

/// Expand priors into one comparison per atom with weight p(i,j) * tau.
/// `truths[i]` may be empty for models that only ever act as rivals.
/// Comparisons with p(i,j) == 0 are omitted.
ComparisonTable flatten_bayesian(std::vector<ModelSpec> models, std::span<const std::optional<TruthSpec>> truths,
                                 const Eigen::MatrixXd& p);

enum class InnerStatus { Converged, HitBound, MaxIter };
std::string_view to_string(InnerStatus s) noexcept;

struct InnerSolution {
  std::vector<double> theta_hat;
  double value = 0.0;
  InnerStatus status = InnerStatus::Converged;
};

struct InnerOptions {
  /// Total starts: the warm start (when given), a least-squares fit of the
  /// rival mean to the true mean, the box center, and Latin hypercube draws
  /// for the rest.
  int starts = 10;
  std::uint64_t seed = 0;
  BoxMinimizerOptions minimizer{};
  /// Worker threads for independent entries; results do not depend on it.
  int threads = 1;
};

/// Minimize theta -> sum_k w_k I(x_k, theta_true, theta) over the rival box.
/// Throws Error(Infeasible) if the kernel is undefined at every start.
InnerSolution inner_infimum(const ComparisonTable& table, std::size_t entry, const Design& design,
                            const std::vector<double>* warm_start, const InnerOptions& opts);

/// KL_P(design) with the per-entry minimizers that Psi reuses.
struct CriterionValue {
  double total = 0.0;
  std::vector<InnerSolution> per_entry;
  Design design = Design::one_point(0.0);

  std::uint64_t design_hash() const noexcept { return design.hash(); }
  std::size_t hit_bound_count() const noexcept;
  nlohmann::json to_json(const ComparisonTable& table) const;
};

/// `warm` (typically the previous iterate) seeds every inner solve.
CriterionValue kl_criterion(const Design& design, const ComparisonTable& table, const InnerOptions& opts = {},
                            const CriterionValue* warm = nullptr);

/// Psi(x) = sum p I(x, theta_true, theta_hat) with the cached minimizers.
double psi(double x, const CriterionValue& cv, const ComparisonTable& table);
/// Same, checking that `cv` was computed for `design`.
double psi(double x, const Design& design, const CriterionValue& cv, const ComparisonTable& table);

struct PsiMaximum {
  double x = 0.0;
  double value = 0.0;
  std::vector<ScalarMax> local_maxima;
};

/// Maximum of Psi over a uniform grid plus the support points, with every
/// discrete local maximum refined by golden section.
PsiMaximum max_psi(const CriterionValue& cv, const ComparisonTable& table, const DesignSpace& space,
                   std::size_t grid_size, double refine_tol);

/// KL_P(design) / max_x Psi(x, design): a lower bound on the efficiency.
/// Throws Error(NonPositiveCriterion) when KL_P <= 0.
double efficiency_bound(const CriterionValue& cv, const ComparisonTable& table, const DesignSpace& space,
                        std::size_t grid_size = 2000);
double efficiency_bound(const Design& design, const ComparisonTable& table, const DesignSpace& space,
                        std::size_t grid_size = 2000, const InnerOptions& opts = {});

/// KL_P(design) / best_value, the efficiency against a best-known design.
double cross_efficiency(const Design& design, const ComparisonTable& reference_table, double best_value,
                        const InnerOptions& opts = {});

}  // namespace kldesign
