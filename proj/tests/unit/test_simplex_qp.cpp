#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include <Eigen/QR>

#include "kldesign/error.hpp"
#include "kldesign/simplex_qp.hpp"
#include "support/oracles.hpp"

namespace kldesign {
namespace {

// Exact optimum by enumerating supports and solving each face's KKT system.
double face_enumeration_maximum(const QPData& qp) {
  const Eigen::Index n = qp.b.size();
  double best = -std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> s;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (mask & (1u << k)) s.push_back(k);
    }
    const auto m = static_cast<Eigen::Index>(s.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::VectorXd rhs(m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) kkt(i, j) = 2.0 * qp.Q(s[i], s[j]);
      kkt(i, m) = 1.0;
      kkt(m, i) = 1.0;
      rhs[i] = qp.b[s[i]];
    }
    rhs[m] = 1.0;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if ((kkt * sol - rhs).norm() > 1e-9) continue;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    bool feasible = true;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (sol[i] < -1e-12) feasible = false;
      w[s[i]] = std::max(sol[i], 0.0);
    }
    if (feasible) best = std::max(best, qp.objective(w));
  }
  return best;
}

TEST(SimplexQPOracle, MatchesGridOnRandomInstances) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const QPData qp = oracle::random_qp(rng, trial % 5 == 0 ? 2 : 4);
    const SimplexQPResult r = solve_simplex_qp(qp);
    EXPECT_NEAR(r.weights.sum(), 1.0, 1e-14);
    EXPECT_GE(r.weights.minCoeff(), 0.0);
    const double grid = oracle::simplex_grid_maximum(qp, 400);
    EXPECT_GE(r.objective, grid - 1e-12) << "trial " << trial;
    EXPECT_NEAR(r.objective, grid, 1e-5) << "trial " << trial;
    EXPECT_LE(r.kkt_residual, 1e-9);
  }
}

TEST(SimplexQPOracle, MatchesFaceEnumeration) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const QPData qp = oracle::random_qp(rng, 4);
    EXPECT_NEAR(solve_simplex_qp(qp).objective, face_enumeration_maximum(qp), 1e-12) << "trial " << trial;
  }
}

TEST(SimplexQP, SingleCoordinate) {
  QPData qp{Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Constant(1, 1.0)};
  const auto r = solve_simplex_qp(qp);
  EXPECT_EQ(r.weights[0], 1.0);
  EXPECT_DOUBLE_EQ(r.objective, -1.0);
}

TEST(SimplexQP, LinearObjectivePicksBestVertex) {
  QPData qp{Eigen::MatrixXd::Zero(3, 3), Eigen::Vector3d(0.1, 0.4, 0.2)};
  const auto r = solve_simplex_qp(qp);
  EXPECT_NEAR(r.weights[1], 1.0, 1e-15);
  EXPECT_NEAR(r.objective, 0.4, 1e-15);
}

TEST(SimplexQP, IdentityWithoutLinearTermIsBarycenter) {
  QPData qp{Eigen::MatrixXd::Identity(5, 5), Eigen::VectorXd::Zero(5)};
  const auto r = solve_simplex_qp(qp);
  for (Eigen::Index k = 0; k < 5; ++k) EXPECT_NEAR(r.weights[k], 0.2, 1e-15);
}

TEST(SimplexQP, DimensionMismatchIsAConfigError) {
  QPData qp{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(2)};
  try {
    solve_simplex_qp(qp);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
  }
}

// Near-duplicate support points make Q almost singular; the solver used to
// spin on rounding-level Newton steps here.
const double kStalledQ[7][7] = {
    {0.15454171843722858, -0.062863490681745293, -0.061653849001900643, -0.0037196377721173983, -0.0036185518055488505, -0.0035854269765750596, -0.040037601133591692},
    {-0.062863490681745293, 0.054672095551243374, 0.054324100190542568, -0.018210400388225943, -0.018590308631127976, -0.018715707508266465, -0.011472824109712166},
    {-0.061653849001900643, 0.054324100190542568, 0.054027874000262703, -0.017921839074907103, -0.018310548004718007, -0.018438879164656474, -0.012457107527116198},
    {-0.0037196377721173983, -0.018210400388225943, -0.017921839074907103, 0.076575468637123903, 0.076789058299102694, 0.076850383015002244, -0.059018745919688073},
    {-0.0036185518055488505, -0.018590308631127976, -0.018310548004718007, 0.076789058299102694, 0.077021984644393471, 0.077089822671460237, -0.058724715032165586},
    {-0.0035854269765750596, -0.018715707508266465, -0.018438879164656474, 0.076850383015002244, 0.077089822671460237, 0.077159857356345521, -0.058616194755421382},
    {-0.040037601133591692, -0.011472824109712166, -0.012457107527116198, -0.059018745919688073, -0.058724715032165586, -0.058616194755421382, 0.13526953562276525},
};
const double kStalledB[7] = {0.046507079064985593, 0.046970644617804168, 0.046960637753217842, 0.047083378257189341, 0.047116285679415094, 0.047118596177253773, 0.047757344528826136};

TEST(SimplexQP, IllConditionedNearDuplicateColumns) {
  QPData qp{Eigen::MatrixXd(7, 7), Eigen::VectorXd(7)};
  for (int i = 0; i < 7; ++i) {
    qp.b[i] = kStalledB[i];
    for (int j = 0; j < 7; ++j) qp.Q(i, j) = kStalledQ[i][j];
  }
  const auto r = solve_simplex_qp(qp);
  EXPECT_LE(r.kkt_residual, 1e-9);
  EXPECT_NEAR(r.objective, face_enumeration_maximum(qp), 1e-10);
}

}  // namespace
}  // namespace kldesign
