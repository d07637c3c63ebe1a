#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "kldesign/criterion.hpp"
#include "kldesign/simplex_qp.hpp"

namespace kldesign {

/// Quadratic model of one entry's design-averaged kernel around theta_hat.
/// Rows of R are half the kernel gradients at the support points, b holds
/// the kernel values, and M(w) = 1/2 sum_k w_k C_k with PSD curvatures C_k.
/// Parameters sitting on a bound of the rival box are held fixed, so R and
/// C_k only cover the free coordinates.
struct EntryLinearization {
  Eigen::MatrixXd R;
  Eigen::VectorXd b;
  std::vector<Eigen::MatrixXd> curvature;
  bool hit_bound = false;

  Eigen::MatrixXd gram(const Eigen::VectorXd& w) const;
};

struct Linearization {
  std::vector<double> points;
  std::vector<EntryLinearization> entries;
  std::vector<double> entry_weights;
};

/// Ridge added to M(w) before inversion, relative to trace(M)/d.
inline constexpr double kGramRidge = 1e-10;
/// A parameter within this fraction of the box width from a bound counts as
/// being on it.
inline constexpr double kBoundSlack = 1e-9;

/// Builds the per-entry models at the minimizers cached in `cv`.
Linearization linearize(std::span<const double> points, const ComparisonTable& table, const CriterionValue& cv,
                        int threads = 1);

/// (M(w) + ridge)^{-1}; throws Error(SingularGram) when M(w) is zero or
/// not finite.
Eigen::MatrixXd regularized_gram_inverse(const Eigen::MatrixXd& m);

/// Q = sum_e p_e R_e M_e(w_bar)^{-1} R_e^T and b = sum_e p_e b_e.
QPData assemble_qp(const Linearization& lin, const Eigen::VectorXd& w_bar);

/// The surrogate gbar(w) = sum_e p_e [b_e^T w - w^T R_e M_e(w)^{-1} R_e^T w].
double g_bar(const Linearization& lin, const Eigen::VectorXd& w);

/// alpha_hat = M_e(w)^{-1} R_e^T w for one entry: the minimizing parameter
/// offset of the quadratic model.
Eigen::VectorXd alpha_hat(const EntryLinearization& e, const Eigen::VectorXd& w);

struct WeightStepResult {
  Design design;
  CriterionValue cv;
  int iterations = 0;
  int rejected = 0;  ///< QP proposals that failed the ascent safeguard
};

struct QPStepOptions {
  int iterations = 3;
  int max_backtracks = 8;
  InnerOptions inner{};
};

/// Fixed-point iteration w -> argmax of the QP linearized at the current
/// weights. A proposal is accepted only if the exact criterion does not
/// decrease; otherwise the step toward it is halved.
WeightStepResult qp_weight_step(const Design& design, const ComparisonTable& table, const CriterionValue& cv,
                                const QPStepOptions& opts = {});

}  // namespace kldesign
