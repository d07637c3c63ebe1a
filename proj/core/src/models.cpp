#include "kldesign/models.hpp"

#include <array>
#include <cmath>

#include "kldesign/error.hpp"

namespace kldesign {

namespace {

constexpr std::array<std::pair<BuiltinMean, std::string_view>, 8> kBuiltinNames{{
    {BuiltinMean::MMPlusLinear, "mm_plus_linear"},
    {BuiltinMean::MM, "mm"},
    {BuiltinMean::Exp4, "exp4"},
    {BuiltinMean::Exp3, "exp3"},
    {BuiltinMean::Linear2, "linear"},
    {BuiltinMean::Quadratic3, "quadratic"},
    {BuiltinMean::Emax3, "emax"},
    {BuiltinMean::Logistic4, "logistic"},
}};

double builtin_value(BuiltinMean m, double x, std::span<const double> t) {
  switch (m) {
    case BuiltinMean::MMPlusLinear: return t[0] * x / (t[1] + x) + t[2] * x;
    case BuiltinMean::MM: return t[0] * x / (t[1] + x);
    case BuiltinMean::Exp4: {
      const double xp = x > 0.0 ? std::pow(x, t[3]) : 0.0;
      return t[0] - t[1] * std::exp(-t[2] * xp);
    }
    case BuiltinMean::Exp3: return t[0] - t[1] * std::exp(-t[2] * x);
    case BuiltinMean::Linear2: return t[0] + t[1] * x;
    case BuiltinMean::Quadratic3: return t[0] + t[1] * x * (t[2] - x);
    case BuiltinMean::Emax3: return t[0] + t[1] * x / (t[2] + x);
    case BuiltinMean::Logistic4: return t[0] + t[1] / (1.0 + std::exp((t[2] - x) / t[3]));
  }
  return 0.0;
}

void builtin_gradient(BuiltinMean m, double x, std::span<const double> t, std::span<double> g) {
  switch (m) {
    case BuiltinMean::MMPlusLinear: {
      const double den = t[1] + x;
      g[0] = x / den;
      g[1] = -t[0] * x / (den * den);
      g[2] = x;
      return;
    }
    case BuiltinMean::MM: {
      const double den = t[1] + x;
      g[0] = x / den;
      g[1] = -t[0] * x / (den * den);
      return;
    }
    case BuiltinMean::Exp4: {
      // x^t4 and x^t4 log x both vanish as x -> 0+ for t4 > 0.
      const double xp = x > 0.0 ? std::pow(x, t[3]) : 0.0;
      const double lx = x > 0.0 ? std::log(x) : 0.0;
      const double e = std::exp(-t[2] * xp);
      g[0] = 1.0;
      g[1] = -e;
      g[2] = t[1] * xp * e;
      g[3] = t[1] * t[2] * xp * lx * e;
      return;
    }
    case BuiltinMean::Exp3: {
      const double e = std::exp(-t[2] * x);
      g[0] = 1.0;
      g[1] = -e;
      g[2] = t[1] * x * e;
      return;
    }
    case BuiltinMean::Linear2:
      g[0] = 1.0;
      g[1] = x;
      return;
    case BuiltinMean::Quadratic3:
      g[0] = 1.0;
      g[1] = x * (t[2] - x);
      g[2] = t[1] * x;
      return;
    case BuiltinMean::Emax3: {
      const double den = t[2] + x;
      g[0] = 1.0;
      g[1] = x / den;
      g[2] = -t[1] * x / (den * den);
      return;
    }
    case BuiltinMean::Logistic4: {
      const double z = (t[2] - x) / t[3];
      const double e = std::exp(z);
      const double den = 1.0 + e;
      const double s = t[1] * e / (den * den);  // -d/dz of t2 / (1 + e^z)
      g[0] = 1.0;
      g[1] = 1.0 / den;
      g[2] = -s / t[3];
      g[3] = s * z / t[3];
      return;
    }
  }
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NotFinite, std::string(what) + " is not finite");
}

}  // namespace

std::string_view to_string(Family f) noexcept {
  return f == Family::NormalHetero ? "normal" : "lognormal";
}

Family family_from_string(std::string_view name) {
  if (name == "normal" || name == "normal_hetero") return Family::NormalHetero;
  if (name == "lognormal" || name == "log_normal") return Family::LogNormal;
  throw Error(ErrorCode::Config, "unknown family '" + std::string(name) + "'");
}

std::string_view to_string(BuiltinMean m) noexcept {
  for (const auto& [b, name] : kBuiltinNames) {
    if (b == m) return name;
  }
  return "?";
}

std::optional<BuiltinMean> builtin_from_string(std::string_view name) noexcept {
  for (const auto& [b, n] : kBuiltinNames) {
    if (n == name) return b;
  }
  return std::nullopt;
}

int builtin_dim(BuiltinMean m) noexcept {
  switch (m) {
    case BuiltinMean::MMPlusLinear: return 3;
    case BuiltinMean::MM: return 2;
    case BuiltinMean::Exp4: return 4;
    case BuiltinMean::Exp3: return 3;
    case BuiltinMean::Linear2: return 2;
    case BuiltinMean::Quadratic3: return 3;
    case BuiltinMean::Emax3: return 3;
    case BuiltinMean::Logistic4: return 4;
  }
  return 0;
}

int MeanFunction::dim() const noexcept {
  if (const auto* b = std::get_if<BuiltinMean>(&impl_)) return builtin_dim(*b);
  return std::get<Expr>(impl_).dim();
}

double MeanFunction::value(double x, std::span<const double> theta) const {
  if (const auto* b = std::get_if<BuiltinMean>(&impl_)) {
    const double v = builtin_value(*b, x, theta);
    require_finite(v, "mean");
    return v;
  }
  return std::get<Expr>(impl_).eval(x, theta);
}

void MeanFunction::gradient(double x, std::span<const double> theta, std::span<double> out) const {
  if (const auto* b = std::get_if<BuiltinMean>(&impl_)) {
    builtin_gradient(*b, x, theta, out);
    for (std::size_t k = 0; k < static_cast<std::size_t>(dim()); ++k) require_finite(out[k], "mean gradient");
    return;
  }
  std::get<Expr>(impl_).grad_theta(x, theta, out);
}

std::string MeanFunction::describe() const {
  if (const auto* b = std::get_if<BuiltinMean>(&impl_)) return std::string(to_string(*b));
  return std::get<Expr>(impl_).to_string();
}

VarianceModel VarianceModel::const_v(double value) {
  if (!(value > 0.0)) throw Error(ErrorCode::Config, "constant variance must be positive");
  return VarianceModel(Kind::ConstV, value, std::nullopt);
}

VarianceModel VarianceModel::const_sigma2(double value) {
  if (!(value > 0.0)) throw Error(ErrorCode::Config, "constant sigma^2 must be positive");
  return VarianceModel(Kind::ConstSigma2, value, std::nullopt);
}

VarianceModel VarianceModel::exp_of_mean(double scale) {
  if (!(scale > 0.0)) throw Error(ErrorCode::Config, "exp-of-mean scale must be positive");
  return VarianceModel(Kind::ExpOfMean, scale, std::nullopt);
}

VarianceModel VarianceModel::expression(Expr expr) { return VarianceModel(Kind::UserExpr, 0.0, std::move(expr)); }

double VarianceModel::value(double x, std::span<const double> theta, double eta) const {
  switch (kind_) {
    case Kind::ConstV: return value_;
    case Kind::ConstSigma2: return value_;
    case Kind::ExpOfMean: return std::exp(eta / value_);
    case Kind::UserExpr: return expr_->eval(x, theta);
  }
  return 0.0;
}

void VarianceModel::gradient(double x, std::span<const double> theta, double /*eta*/, std::span<const double> deta,
                             double v2, std::span<double> out) const {
  switch (kind_) {
    case Kind::ConstV:
    case Kind::ConstSigma2:
      std::fill(out.begin(), out.end(), 0.0);
      return;
    case Kind::ExpOfMean:
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = v2 * deta[k] / value_;
      return;
    case Kind::UserExpr:
      expr_->grad_theta(x, theta, out);
      return;
  }
}

void ModelSpec::validate() const {
  const auto d = static_cast<std::size_t>(dim());
  if (theta_box.size() != d) {
    throw Error(ErrorCode::Config, "model '" + name + "': theta_box has " + std::to_string(theta_box.size()) +
                                       " entries, mean needs " + std::to_string(d));
  }
  for (const auto& b : theta_box) {
    if (!(std::isfinite(b.lo) && std::isfinite(b.hi) && b.lo < b.hi)) {
      throw Error(ErrorCode::Config, "model '" + name + "': theta_box needs finite lo < hi");
    }
  }
  if (variance.kind() == VarianceModel::Kind::ConstSigma2 && family != Family::LogNormal) {
    throw Error(ErrorCode::Config, "model '" + name + "': const_sigma2 requires the log-normal family");
  }
  if (variance.kind() == VarianceModel::Kind::UserExpr && variance.expr()->max_parameter() > dim()) {
    throw Error(ErrorCode::Config, "model '" + name + "': variance references more parameters than the mean");
  }
}

bool ModelSpec::in_box(std::span<const double> theta, double slack) const noexcept {
  if (theta.size() != theta_box.size()) return false;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double pad = slack * (theta_box[k].hi - theta_box[k].lo);
    if (theta[k] < theta_box[k].lo - pad || theta[k] > theta_box[k].hi + pad) return false;
  }
  return true;
}

std::vector<double> ModelSpec::box_center() const {
  std::vector<double> c;
  c.reserve(theta_box.size());
  for (const auto& b : theta_box) c.push_back(0.5 * (b.lo + b.hi));
  return c;
}

Moments lognormal_params(double x, const ModelSpec& m, std::span<const double> theta) {
  if (m.family != Family::LogNormal) throw Error(ErrorCode::FamilyMismatch, "lognormal_params on a normal model");
  const double eta = m.mean.value(x, theta);
  if (!(eta > 0.0)) throw Error(ErrorCode::NonPositiveMean, "mean of '" + m.name + "' is not positive");
  double sigma2 = 0.0;
  if (m.variance.kind() == VarianceModel::Kind::ConstSigma2) {
    sigma2 = m.variance.parameter();
  } else {
    const double v2 = m.variance.value(x, theta, eta);
    if (!(v2 > 0.0) || !std::isfinite(v2)) {
      throw Error(ErrorCode::NonPositiveVariance, "variance of '" + m.name + "' is not positive");
    }
    sigma2 = std::log1p(v2 / (eta * eta));
  }
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::NonPositiveVariance, "sigma^2 of '" + m.name + "' underflowed");
  return {std::log(eta) - 0.5 * sigma2, sigma2};
}

Moments moments(double x, const ModelSpec& m, std::span<const double> theta) {
  if (m.family == Family::LogNormal) return lognormal_params(x, m, theta);
  const double eta = m.mean.value(x, theta);
  const double v2 = m.variance.value(x, theta, eta);
  if (!(v2 > 0.0) || !std::isfinite(v2)) {
    throw Error(ErrorCode::NonPositiveVariance, "variance of '" + m.name + "' is not positive");
  }
  return {eta, v2};
}

MomentsWithGradient moments_with_gradient(double x, const ModelSpec& m, std::span<const double> theta) {
  const auto d = static_cast<Eigen::Index>(m.dim());
  MomentsWithGradient out;
  out.dloc.resize(d);
  out.dscale.resize(d);
  Eigen::VectorXd deta(d);
  const double eta = m.mean.value(x, theta);
  m.mean.gradient(x, theta, std::span<double>(deta.data(), static_cast<std::size_t>(d)));
  const std::span<const double> deta_s(deta.data(), static_cast<std::size_t>(d));

  if (m.family == Family::NormalHetero) {
    const double v2 = m.variance.value(x, theta, eta);
    if (!(v2 > 0.0) || !std::isfinite(v2)) {
      throw Error(ErrorCode::NonPositiveVariance, "variance of '" + m.name + "' is not positive");
    }
    out.loc = eta;
    out.scale = v2;
    out.dloc = deta;
    m.variance.gradient(x, theta, eta, deta_s, v2, std::span<double>(out.dscale.data(), static_cast<std::size_t>(d)));
    return out;
  }

  if (!(eta > 0.0)) throw Error(ErrorCode::NonPositiveMean, "mean of '" + m.name + "' is not positive");
  if (m.variance.kind() == VarianceModel::Kind::ConstSigma2) {
    out.scale = m.variance.parameter();
    out.dscale.setZero();
  } else {
    const double v2 = m.variance.value(x, theta, eta);
    if (!(v2 > 0.0) || !std::isfinite(v2)) {
      throw Error(ErrorCode::NonPositiveVariance, "variance of '" + m.name + "' is not positive");
    }
    Eigen::VectorXd dv2(d);
    m.variance.gradient(x, theta, eta, deta_s, v2, std::span<double>(dv2.data(), static_cast<std::size_t>(d)));
    // sigma^2 = log(1 + u), u = v^2 / eta^2
    const double u = v2 / (eta * eta);
    out.scale = std::log1p(u);
    const Eigen::VectorXd du = dv2 / (eta * eta) - (2.0 * v2 / (eta * eta * eta)) * deta;
    out.dscale = du / (1.0 + u);
  }
  if (!(out.scale > 0.0)) throw Error(ErrorCode::NonPositiveVariance, "sigma^2 of '" + m.name + "' underflowed");
  out.loc = std::log(eta) - 0.5 * out.scale;
  out.dloc = deta / eta - 0.5 * out.dscale;
  return out;
}

double kernel_value(Family family, const Moments& t, const Moments& r) {
  const double diff = t.loc - r.loc;
  if (family == Family::NormalHetero) {
    return diff * diff / r.scale + t.scale / r.scale + std::log(r.scale / t.scale) - 1.0;
  }
  return 0.5 * (std::log(t.scale / r.scale) + r.scale / t.scale + diff * diff / t.scale - 1.0);
}

KernelJet kernel_jet(Family family, const Moments& t, const MomentsWithGradient& r, bool with_curvature) {
  KernelJet jet;
  const double diff = t.loc - r.loc;
  jet.value = kernel_value(family, t, Moments{r.loc, r.scale});
  if (family == Family::NormalHetero) {
    const double w = r.scale;
    jet.grad = (-2.0 * diff / w) * r.dloc + ((1.0 - (diff * diff + t.scale) / w) / w) * r.dscale;
    if (with_curvature) {
      const double sw = std::sqrt(w);
      const Eigen::VectorXd dh = -r.dloc / sw - (diff / (2.0 * w * sw)) * r.dscale;
      jet.curvature = 2.0 * dh * dh.transpose();
    }
  } else {
    const double s_i = t.scale;
    const double s_j = r.scale;
    jet.grad = 0.5 * (1.0 / s_i - 1.0 / s_j) * r.dscale - (diff / s_i) * r.dloc;
    if (with_curvature) jet.curvature = (r.dloc * r.dloc.transpose()) / s_i;
  }
  return jet;
}

double kl_normal_hetero(double x, const ModelSpec& true_model, std::span<const double> theta_true,
                        const ModelSpec& rival, std::span<const double> theta_rival) {
  if (true_model.family != Family::NormalHetero || rival.family != Family::NormalHetero) {
    throw Error(ErrorCode::FamilyMismatch, "kl_normal_hetero needs two normal models");
  }
  return kernel_value(Family::NormalHetero, moments(x, true_model, theta_true), moments(x, rival, theta_rival));
}

double kl_lognormal(double x, const ModelSpec& true_model, std::span<const double> theta_true,
                    const ModelSpec& rival, std::span<const double> theta_rival) {
  if (true_model.family != Family::LogNormal || rival.family != Family::LogNormal) {
    throw Error(ErrorCode::FamilyMismatch, "kl_lognormal needs two log-normal models");
  }
  return kernel_value(Family::LogNormal, lognormal_params(x, true_model, theta_true),
                      lognormal_params(x, rival, theta_rival));
}

double kl(double x, const ModelSpec& true_model, std::span<const double> theta_true, const ModelSpec& rival,
          std::span<const double> theta_rival) {
  if (true_model.family != rival.family) {
    throw Error(ErrorCode::FamilyMismatch, "models '" + true_model.name + "' and '" + rival.name + "' differ in family");
  }
  return true_model.family == Family::NormalHetero ? kl_normal_hetero(x, true_model, theta_true, rival, theta_rival)
                                                   : kl_lognormal(x, true_model, theta_true, rival, theta_rival);
}

std::vector<double> kl_grad_rival(double x, const ModelSpec& true_model, std::span<const double> theta_true,
                                  const ModelSpec& rival, std::span<const double> theta_rival) {
  if (true_model.family != rival.family) {
    throw Error(ErrorCode::FamilyMismatch, "models '" + true_model.name + "' and '" + rival.name + "' differ in family");
  }
  const Moments t = moments(x, true_model, theta_true);
  const MomentsWithGradient r = moments_with_gradient(x, rival, theta_rival);
  const KernelJet jet = kernel_jet(true_model.family, t, r, false);
  return {jet.grad.data(), jet.grad.data() + jet.grad.size()};
}

}  // namespace kldesign
