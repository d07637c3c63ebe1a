#pragma once

#include <functional>

#include <Eigen/Core>

namespace kldesign {

/// Smooth objective on a box. Returns the value and fills the gradient when
/// `grad` is non-null. May return +infinity where the objective is undefined.
using BoxObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BoxMinimizerOptions {
  int max_iterations = 200;
  /// Stop once the projected gradient satisfies |pg|_inf <= tol * (1 + |f|).
  double gradient_tolerance = 1e-8;
};

enum class BoxStatus { Converged, HitBound, MaxIter };

struct BoxMinimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  BoxStatus status = BoxStatus::MaxIter;
};

/// Projected Newton iteration with Levenberg-Marquardt damping. The Hessian
/// is formed by central differences of the analytic gradient, which keeps
/// the local rate quadratic even when the Gauss-Newton part is a poor model.
/// Coordinates at a bound with the gradient pointing outward are frozen for
/// the step. Returns the start unchanged with value +inf if the objective is
/// undefined there.
BoxMinimizerResult minimize_in_box(const BoxObjective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lo,
                                   const Eigen::VectorXd& hi, const BoxMinimizerOptions& opts = {});

}  // namespace kldesign
