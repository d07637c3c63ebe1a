#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "kldesign/expr.hpp"

namespace kldesign {

enum class Family { NormalHetero, LogNormal };

std::string_view to_string(Family f) noexcept;
Family family_from_string(std::string_view name);

/// Built-in mean functions of the bundled dose-response and exponential
/// scenarios. Parameter order follows t1, t2, ...
enum class BuiltinMean {
  MMPlusLinear,  ///< t1 x / (t2 + x) + t3 x
  MM,            ///< t1 x / (t2 + x)
  Exp4,          ///< t1 - t2 exp(-t3 x^t4)
  Exp3,          ///< t1 - t2 exp(-t3 x)
  Linear2,       ///< t1 + t2 x
  Quadratic3,    ///< t1 + t2 x (t3 - x)
  Emax3,         ///< t1 + t2 x / (t3 + x)
  Logistic4,     ///< t1 + t2 / (1 + exp((t3 - x) / t4))
};

std::string_view to_string(BuiltinMean m) noexcept;
std::optional<BuiltinMean> builtin_from_string(std::string_view name) noexcept;
int builtin_dim(BuiltinMean m) noexcept;

class MeanFunction {
 public:
  explicit MeanFunction(BuiltinMean builtin) : impl_(builtin) {}
  explicit MeanFunction(Expr expr) : impl_(std::move(expr)) {}

  int dim() const noexcept;
  bool is_builtin() const noexcept { return std::holds_alternative<BuiltinMean>(impl_); }
  const std::variant<BuiltinMean, Expr>& impl() const noexcept { return impl_; }

  double value(double x, std::span<const double> theta) const;
  /// Analytic for builtins, central differences for expressions.
  void gradient(double x, std::span<const double> theta, std::span<double> out) const;

  /// Builtin name or the expression source.
  std::string describe() const;

 private:
  std::variant<BuiltinMean, Expr> impl_;
};

/// Variance specification. ConstSigma2 fixes the log-scale variance of a
/// log-normal response directly; the others give Var(Y) = v^2.
class VarianceModel {
 public:
  enum class Kind { ConstV, ConstSigma2, ExpOfMean, UserExpr };

  static VarianceModel const_v(double value);
  static VarianceModel const_sigma2(double value);
  /// v^2 = exp(eta / scale)
  static VarianceModel exp_of_mean(double scale);
  static VarianceModel expression(Expr expr);

  Kind kind() const noexcept { return kind_; }
  double parameter() const noexcept { return value_; }
  const std::optional<Expr>& expr() const noexcept { return expr_; }

  /// v^2 and its parameter gradient given the mean and its gradient. Not
  /// meaningful for ConstSigma2.
  double value(double x, std::span<const double> theta, double eta) const;
  void gradient(double x, std::span<const double> theta, double eta, std::span<const double> deta,
                double v2, std::span<double> out) const;

 private:
  VarianceModel(Kind kind, double value, std::optional<Expr> expr)
      : kind_(kind), value_(value), expr_(std::move(expr)) {}

  Kind kind_;
  double value_;
  std::optional<Expr> expr_;
};

struct ParamBounds {
  double lo;
  double hi;
};

struct ModelSpec {
  std::string name;
  MeanFunction mean;
  VarianceModel variance;
  Family family;
  std::vector<ParamBounds> theta_box;

  int dim() const noexcept { return mean.dim(); }
  /// Box finite with lo < hi per coordinate, arity consistent, variance kind
  /// compatible with the family. Throws Error(Config).
  void validate() const;
  bool in_box(std::span<const double> theta, double slack = 0.0) const noexcept;
  std::vector<double> box_center() const;
};

/// Location/scale pair the kernels work with: (eta, v^2) for the normal
/// family and (mu, sigma^2) of log Y for the log-normal family.
struct Moments {
  double loc = 0.0;
  double scale = 0.0;
};

struct MomentsWithGradient {
  double loc = 0.0;
  double scale = 0.0;
  Eigen::VectorXd dloc;
  Eigen::VectorXd dscale;
};

/// mu = log eta - sigma^2 / 2 and sigma^2 = log(1 + v^2 / eta^2) (or fixed).
/// Throws NonPositiveMean / NonPositiveVariance.
Moments lognormal_params(double x, const ModelSpec& m, std::span<const double> theta);

/// Family-appropriate moments. Throws on non-positive variance, or
/// non-positive mean for the log-normal family.
Moments moments(double x, const ModelSpec& m, std::span<const double> theta);
MomentsWithGradient moments_with_gradient(double x, const ModelSpec& m, std::span<const double> theta);

/// (eta_i - eta_j)^2 / v_j^2 + v_i^2 / v_j^2 + log(v_j^2 / v_i^2) - 1
double kl_normal_hetero(double x, const ModelSpec& true_model, std::span<const double> theta_true,
                        const ModelSpec& rival, std::span<const double> theta_rival);

/// 1/2 { log(s_i/s_j) + s_j/s_i + (mu_i - mu_j)^2 / s_i - 1 } with s = sigma^2.
double kl_lognormal(double x, const ModelSpec& true_model, std::span<const double> theta_true,
                    const ModelSpec& rival, std::span<const double> theta_rival);

/// Dispatch on the (shared) family. Throws FamilyMismatch otherwise.
double kl(double x, const ModelSpec& true_model, std::span<const double> theta_true, const ModelSpec& rival,
          std::span<const double> theta_rival);

std::vector<double> kl_grad_rival(double x, const ModelSpec& true_model, std::span<const double> theta_true,
                                  const ModelSpec& rival, std::span<const double> theta_rival);

/// Kernel value at one point together with its rival-parameter gradient and
/// a positive semidefinite curvature matrix: the Gauss-Newton part of the
/// kernel Hessian (2 dh dh^T with h = (eta_i - eta_j)/v_j for the normal
/// family, dmu_j dmu_j^T / sigma_i^2 for the log-normal family).
struct KernelJet {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd curvature;
};

/// Kernel evaluation from precomputed true-model moments; the hot path of
/// the inner solver.
double kernel_value(Family family, const Moments& truth, const Moments& rival);
KernelJet kernel_jet(Family family, const Moments& truth, const MomentsWithGradient& rival,
                     bool with_curvature = true);

}  // namespace kldesign
