#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "kldesign/error.hpp"
#include "kldesign/models.hpp"
#include "support/oracles.hpp"

namespace kldesign {
namespace {

ModelSpec make(const char* name, BuiltinMean mean, VarianceModel var, Family fam, int dim) {
  return ModelSpec{name, MeanFunction(mean), std::move(var), fam,
                   std::vector<ParamBounds>(static_cast<std::size_t>(dim), ParamBounds{1e-3, 100.0})};
}

TEST(KernelOracle, ClosedFormsMatchQuadrature) {
  for (std::uint64_t seed : {11u, 29u}) {
    const auto err = oracle::kernel_oracle_errors(seed);
    EXPECT_LT(err.normal, 1e-8);
    EXPECT_LT(err.lognormal, 1e-8);
  }
}

TEST(KernelOracle, QuadratureReproducesKnownDivergence) {
  // KL(N(0,1) || N(1,4)) = log 2 + (1 + 1) / 8 - 1/2
  EXPECT_NEAR(oracle::kl_normal_quadrature(0.0, 1.0, 1.0, 4.0), std::log(2.0) - 0.25, 1e-12);
  EXPECT_NEAR(oracle::kl_lognormal_quadrature(0.0, 1.0, 1.0, 4.0), std::log(2.0) - 0.25, 1e-10);
}

TEST(KernelOracle, NormalConstantVarianceIsScaledSquare) {
  const ModelSpec truth = make("a", BuiltinMean::MMPlusLinear, VarianceModel::const_v(0.25), Family::NormalHetero, 3);
  const ModelSpec rival = make("b", BuiltinMean::MM, VarianceModel::const_v(0.25), Family::NormalHetero, 2);
  const std::vector<double> ti{1.0, 1.0, 1.0}, tj{2.0, 0.5};
  const double x = 1.7;
  const double d = ti[0] * x / (ti[1] + x) + ti[2] * x - tj[0] * x / (tj[1] + x);
  EXPECT_NEAR(kl(x, truth, ti, rival, tj), d * d / 0.25, 1e-13);
}

TEST(Kernel, VanishesWhenModelsCoincide) {
  const ModelSpec a = make("a", BuiltinMean::Exp3, VarianceModel::exp_of_mean(1.0), Family::LogNormal, 3);
  const std::vector<double> t{2.0, 1.0, 0.5};
  EXPECT_NEAR(kl(1.3, a, t, a, t), 0.0, 1e-15);
  const ModelSpec b = make("b", BuiltinMean::Exp3, VarianceModel::const_v(2.0), Family::NormalHetero, 3);
  EXPECT_NEAR(kl(1.3, b, t, b, t), 0.0, 1e-15);
}

TEST(Kernel, FamilyMismatchThrows) {
  const ModelSpec a = make("a", BuiltinMean::Exp3, VarianceModel::const_v(1.0), Family::LogNormal, 3);
  const ModelSpec b = make("b", BuiltinMean::Exp3, VarianceModel::const_v(1.0), Family::NormalHetero, 3);
  const std::vector<double> t{2.0, 1.0, 0.5};
  try {
    kl(1.0, a, t, b, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FamilyMismatch);
  }
}

TEST(Kernel, NonPositiveLogNormalMeanThrows) {
  const ModelSpec a = make("a", BuiltinMean::Exp3, VarianceModel::const_v(1.0), Family::LogNormal, 3);
  const std::vector<double> t{-2.0, 1.0, 0.5};
  try {
    lognormal_params(1.0, a, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveMean);
  }
}

TEST(Kernel, RivalGradientMatchesDifferences) {
  struct Case {
    BuiltinMean truth, rival;
    int di, dj;
    VarianceModel var;
    Family fam;
  };
  const std::vector<Case> cases{
      {BuiltinMean::MMPlusLinear, BuiltinMean::MM, 3, 2, VarianceModel::exp_of_mean(3.0), Family::NormalHetero},
      {BuiltinMean::Exp4, BuiltinMean::Exp3, 4, 3, VarianceModel::exp_of_mean(1.0), Family::LogNormal},
      {BuiltinMean::Logistic4, BuiltinMean::Emax3, 4, 3, VarianceModel::const_v(1.0), Family::LogNormal},
      {BuiltinMean::Logistic4, BuiltinMean::Quadratic3, 4, 3, VarianceModel::const_sigma2(0.5), Family::LogNormal},
  };
  for (const auto& c : cases) {
    const ModelSpec ti = make("i", c.truth, c.var, c.fam, c.di);
    const ModelSpec tj = make("j", c.rival, c.var, c.fam, c.dj);
    const std::vector<double> pi{3.0, 1.2, 0.9, 1.4};
    std::vector<double> pj{2.5, 0.8, 0.6};
    pj.resize(static_cast<std::size_t>(c.dj));
    const std::vector<double> pi_used(pi.begin(), pi.begin() + c.di);
    const double x = 1.1;
    const auto g = kl_grad_rival(x, ti, pi_used, tj, pj);
    for (int k = 0; k < c.dj; ++k) {
      auto p = pj, m = pj;
      const double h = 1e-6 * std::max(1.0, std::abs(pj[static_cast<std::size_t>(k)]));
      p[static_cast<std::size_t>(k)] += h;
      m[static_cast<std::size_t>(k)] -= h;
      const double fd = (kl(x, ti, pi_used, tj, p) - kl(x, ti, pi_used, tj, m)) / (2.0 * h);
      EXPECT_NEAR(g[static_cast<std::size_t>(k)], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Kernel, CurvatureIsPositiveSemidefinite) {
  const ModelSpec ti = make("i", BuiltinMean::Exp4, VarianceModel::exp_of_mean(1.0), Family::LogNormal, 4);
  const ModelSpec tj = make("j", BuiltinMean::Exp3, VarianceModel::exp_of_mean(1.0), Family::LogNormal, 3);
  const std::vector<double> pi{2.0, 1.0, 0.8, 1.5}, pj{2.2, 1.1, 0.6};
  for (double x : {0.0, 0.5, 2.0, 9.0}) {
    const KernelJet jet = kernel_jet(Family::LogNormal, moments(x, ti, pi), moments_with_gradient(x, tj, pj));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jet.curvature);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff()));
    EXPECT_NEAR(jet.value, kl(x, ti, pi, tj, pj), 1e-14);
  }
}

TEST(Models, BuiltinDimensions) {
  EXPECT_EQ(builtin_dim(BuiltinMean::MMPlusLinear), 3);
  EXPECT_EQ(builtin_dim(BuiltinMean::MM), 2);
  EXPECT_EQ(builtin_dim(BuiltinMean::Exp4), 4);
  EXPECT_EQ(builtin_dim(BuiltinMean::Exp3), 3);
  EXPECT_EQ(builtin_dim(BuiltinMean::Linear2), 2);
  EXPECT_EQ(builtin_dim(BuiltinMean::Quadratic3), 3);
  EXPECT_EQ(builtin_dim(BuiltinMean::Emax3), 3);
  EXPECT_EQ(builtin_dim(BuiltinMean::Logistic4), 4);
  for (auto m : {BuiltinMean::MMPlusLinear, BuiltinMean::Logistic4}) {
    EXPECT_EQ(builtin_from_string(to_string(m)), m);
  }
}

TEST(Models, ValidateRejectsBadBoxes) {
  ModelSpec m = make("a", BuiltinMean::MM, VarianceModel::const_v(1.0), Family::NormalHetero, 2);
  EXPECT_NO_THROW(m.validate());
  m.theta_box[1] = {2.0, 1.0};
  EXPECT_THROW(m.validate(), Error);
  m.theta_box.pop_back();
  EXPECT_THROW(m.validate(), Error);
  ModelSpec s = make("b", BuiltinMean::MM, VarianceModel::const_sigma2(1.0), Family::NormalHetero, 2);
  EXPECT_THROW(s.validate(), Error);
}

}  // namespace
}  // namespace kldesign
