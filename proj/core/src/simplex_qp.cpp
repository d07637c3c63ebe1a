#include "kldesign/simplex_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "kldesign/error.hpp"

namespace kldesign {

namespace {

double problem_scale(const QPData& qp) {
  const double s = std::max(qp.b.cwiseAbs().maxCoeff(), 2.0 * qp.Q.cwiseAbs().maxCoeff());
  return s > 0.0 ? s : 1.0;
}

// Orthonormal basis of the complement of the all-ones vector in R^m.
Eigen::MatrixXd sum_zero_basis(Eigen::Index m) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Eigen::MatrixXd::Ones(m, 1));
  const Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
  return full.rightCols(m - 1);
}

}  // namespace

double simplex_kkt_residual(const QPData& qp, const Eigen::VectorXd& w) {
  const Eigen::VectorXd grad = qp.b - 2.0 * qp.Q * w;
  double lambda = 0.0;
  int n_free = 0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (w[k] > 0.0) {
      lambda += grad[k];
      ++n_free;
    }
  }
  if (n_free == 0) return std::numeric_limits<double>::infinity();
  lambda /= n_free;
  double r = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    r = std::max(r, w[k] > 0.0 ? std::abs(grad[k] - lambda) : std::max(0.0, grad[k] - lambda));
  }
  return r / problem_scale(qp);
}

SimplexQPResult solve_simplex_qp(const QPData& qp, const SimplexQPOptions& opts) {
  const Eigen::Index n = qp.b.size();
  if (n == 0 || qp.Q.rows() != n || qp.Q.cols() != n) throw Error(ErrorCode::Config, "QP dimensions do not match");
  const int max_it = opts.max_iterations > 0 ? opts.max_iterations : static_cast<int>(50 * n + 100);
  const double scale = problem_scale(qp);

  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  std::vector<bool> is_free(static_cast<std::size_t>(n), true);

  SimplexQPResult res;
  // Set after a full Newton step: w is already the minimizer on the current face,
  // and recomputing the step would only return rounding noise.
  bool on_face_minimum = false;
  for (int it = 0; it < max_it; ++it) {
    res.iterations = it + 1;
    std::vector<Eigen::Index> free;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (is_free[static_cast<std::size_t>(k)]) free.push_back(k);
    }
    const auto m = static_cast<Eigen::Index>(free.size());
    // Minimize F = w^T Q w - b^T w.
    const Eigen::VectorXd gF = 2.0 * qp.Q * w - qp.b;

    Eigen::VectorXd p = Eigen::VectorXd::Zero(m);
    bool to_boundary = false;
    if (m > 1 && !on_face_minimum) {
      Eigen::MatrixXd qff(m, m);
      Eigen::VectorXd gf(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        gf[a] = gF[free[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < m; ++b) qff(a, b) = qp.Q(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
      }
      const Eigen::MatrixXd z = sum_zero_basis(m);
      const Eigen::MatrixXd h = 2.0 * z.transpose() * qff * z;
      const Eigen::VectorXd r = z.transpose() * gf;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (h + h.transpose()));
      const Eigen::VectorXd& ev = eig.eigenvalues();
      const Eigen::MatrixXd& vecs = eig.eigenvectors();
      const Eigen::VectorXd c = vecs.transpose() * r;
      const double thr = 1e-12 * std::max(ev.cwiseAbs().maxCoeff(), scale);
      Eigen::VectorXd null_part = Eigen::VectorXd::Zero(m - 1);
      Eigen::VectorXd newton = Eigen::VectorXd::Zero(m - 1);
      for (Eigen::Index i = 0; i < m - 1; ++i) {
        if (ev[i] <= thr) {
          null_part -= c[i] * vecs.col(i);
        } else {
          newton -= (c[i] / ev[i]) * vecs.col(i);
        }
      }
      if (null_part.norm() > 1e-12 * scale) {
        // Flat direction with nonzero slope: descend until a bound is hit.
        p = z * null_part;
        to_boundary = true;
      } else {
        p = z * newton;
      }
    }

    if (on_face_minimum || (!to_boundary && p.cwiseAbs().maxCoeff() <= 1e-13)) {
      on_face_minimum = false;
      double lambda = 0.0;
      for (auto k : free) lambda += gF[k];
      lambda /= static_cast<double>(m);
      Eigen::Index drop = -1;
      double most_negative = -1e-13 * scale;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (is_free[static_cast<std::size_t>(k)]) continue;
        const double mu = gF[k] - lambda;
        if (mu < most_negative) {
          most_negative = mu;
          drop = k;
        }
      }
      if (drop < 0) {
        res.weights = w;
        res.objective = qp.objective(w);
        res.kkt_residual = simplex_kkt_residual(qp, w);
        if (res.kkt_residual > opts.kkt_tolerance) {
          throw Error(ErrorCode::MaxIter, "simplex QP stopped with KKT residual " + std::to_string(res.kkt_residual));
        }
        return res;
      }
      is_free[static_cast<std::size_t>(drop)] = true;
      continue;
    }

    double alpha = to_boundary ? std::numeric_limits<double>::infinity() : 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index a = 0; a < m; ++a) {
      if (p[a] < 0.0) {
        const double limit = -w[free[static_cast<std::size_t>(a)]] / p[a];
        if (limit < alpha) {
          alpha = limit;
          blocking = free[static_cast<std::size_t>(a)];
        }
      }
    }
    for (Eigen::Index a = 0; a < m; ++a) {
      const Eigen::Index k = free[static_cast<std::size_t>(a)];
      w[k] = std::max(0.0, w[k] + alpha * p[a]);
    }
    if (blocking >= 0) {
      w[blocking] = 0.0;
      is_free[static_cast<std::size_t>(blocking)] = false;
    } else if (!to_boundary) {
      on_face_minimum = true;
    }
    w /= w.sum();
  }
  throw Error(ErrorCode::MaxIter, "simplex QP iteration budget exhausted");
}

}  // namespace kldesign
