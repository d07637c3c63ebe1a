#pragma once

#include <Eigen/Core>

namespace kldesign {

/// Concave quadratic b^T w - w^T Q w over the probability simplex.
struct QPData {
  Eigen::MatrixXd Q;
  Eigen::VectorXd b;

  double objective(const Eigen::VectorXd& w) const { return b.dot(w) - w.dot(Q * w); }
};

struct SimplexQPOptions {
  int max_iterations = 0;  ///< 0 selects 50 n + 100
  double kkt_tolerance = 1e-9;
};

struct SimplexQPResult {
  Eigen::VectorXd weights;
  double objective = 0.0;
  /// Largest violation of the simplex KKT conditions, relative to the scale
  /// of the gradient: free gradients equal a common multiplier, gradients at
  /// zero coordinates do not exceed it.
  double kkt_residual = 0.0;
  int iterations = 0;
};

/// Primal active-set method started from the barycenter. Q must be
/// symmetric positive semidefinite; a singular Q is handled by following
/// zero-curvature ascent directions to the boundary.
/// Throws Error(MaxIter) if the KKT tolerance is not met in time.
SimplexQPResult solve_simplex_qp(const QPData& qp, const SimplexQPOptions& opts = {});

/// KKT residual of `w` for `qp` as defined in SimplexQPResult.
double simplex_kkt_residual(const QPData& qp, const Eigen::VectorXd& w);

}  // namespace kldesign
