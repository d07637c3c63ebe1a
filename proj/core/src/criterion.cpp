#include "kldesign/criterion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "kldesign/error.hpp"
#include "parallel.hpp"

namespace kldesign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Latin hypercube draws in the rival box; coordinates whose positive box
/// spans more than three decades are sampled on a log scale.
std::vector<Eigen::VectorXd> latin_hypercube(const ModelSpec& rival, int count, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> draws;
  if (count <= 0) return draws;
  const auto d = static_cast<Eigen::Index>(rival.dim());
  std::mt19937_64 rng(seed);
  draws.assign(static_cast<std::size_t>(count), Eigen::VectorXd(d));
  std::vector<int> strata(static_cast<std::size_t>(count));
  for (Eigen::Index k = 0; k < d; ++k) {
    std::iota(strata.begin(), strata.end(), 0);
    for (std::size_t i = strata.size(); i > 1; --i) std::swap(strata[i - 1], strata[rng() % i]);
    const auto& b = rival.theta_box[static_cast<std::size_t>(k)];
    const bool log_scale = b.lo > 0.0 && b.hi / b.lo > 1e3;
    for (int s = 0; s < count; ++s) {
      const double u = (strata[static_cast<std::size_t>(s)] + unit_uniform(rng)) / count;
      draws[static_cast<std::size_t>(s)][k] =
          log_scale ? std::exp(std::log(b.lo) + u * (std::log(b.hi) - std::log(b.lo))) : b.lo + u * (b.hi - b.lo);
    }
  }
  return draws;
}

/// Design-averaged kernel for one comparison, with the true-model moments
/// at the positive-weight support points precomputed.
class EntryObjective {
 public:
  EntryObjective(const ComparisonTable& table, const Comparison& c, const Design& design)
      : rival_(table.rival_model(c)), family_(rival_.family) {
    const ModelSpec& truth = table.true_model(c);
    for (std::size_t k = 0; k < design.size(); ++k) {
      if (design.weight(k) <= 0.0) continue;
      points_.push_back(design.point(k));
      weights_.push_back(design.weight(k));
      truth_.push_back(moments(design.point(k), truth, c.theta_true));
    }
  }

  double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
    const std::span<const double> th(theta.data(), static_cast<std::size_t>(theta.size()));
    double total = 0.0;
    if (grad) grad->setZero(theta.size());
    try {
      for (std::size_t k = 0; k < points_.size(); ++k) {
        if (grad) {
          const MomentsWithGradient r = moments_with_gradient(points_[k], rival_, th);
          const KernelJet jet = kernel_jet(family_, truth_[k], r, false);
          total += weights_[k] * jet.value;
          *grad += weights_[k] * jet.grad;
        } else {
          total += weights_[k] * kernel_value(family_, truth_[k], moments(points_[k], rival_, th));
        }
      }
    } catch (const Error&) {
      return kInf;
    }
    return std::isfinite(total) ? total : kInf;
  }

 private:
  const ModelSpec& rival_;
  Family family_;
  std::vector<double> points_;
  std::vector<double> weights_;
  std::vector<Moments> truth_;
};

/// Least-squares fit of the rival mean to the true mean on the support; a
/// start that avoids regions where the kernel is undefined. Log-normal
/// rivals are additionally pushed above a tenth of the true mean.
Eigen::VectorXd mean_fit_start(const ComparisonTable& table, const Comparison& c, const Design& design,
                               const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const Eigen::VectorXd& x0) {
  const ModelSpec& truth = table.true_model(c);
  const ModelSpec& rival = table.rival_model(c);
  constexpr double kFloorPenalty = 1e4;
  const bool positive = rival.family == Family::LogNormal;
  std::vector<double> xs, ws, target;
  for (std::size_t k = 0; k < design.size(); ++k) {
    if (design.weight(k) <= 0.0) continue;
    xs.push_back(design.point(k));
    ws.push_back(design.weight(k));
    target.push_back(truth.mean.value(design.point(k), c.theta_true));
  }
  const auto d = static_cast<std::size_t>(rival.dim());
  std::vector<double> grad_buf(d);
  const BoxObjective f = [&](const Eigen::VectorXd& th, Eigen::VectorXd* grad) {
    const std::span<const double> t(th.data(), d);
    double total = 0.0;
    if (grad) grad->setZero(th.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double eta = rival.mean.value(xs[k], t);
      const double r = eta - target[k];
      const double shortfall = positive ? std::max(0.0, 0.1 * std::abs(target[k]) - eta) : 0.0;
      total += ws[k] * (r * r + kFloorPenalty * shortfall * shortfall);
      if (grad) {
        rival.mean.gradient(xs[k], t, grad_buf);
        const double scale = 2.0 * ws[k] * (r - kFloorPenalty * shortfall);
        for (std::size_t a = 0; a < d; ++a) (*grad)[static_cast<Eigen::Index>(a)] += scale * grad_buf[a];
      }
    }
    return std::isfinite(total) ? total : kInf;
  };
  try {
    return minimize_in_box(f, x0, lo, hi).x;
  } catch (const Error&) {
    return x0;
  }
}

InnerStatus to_inner_status(BoxStatus s) {
  switch (s) {
    case BoxStatus::Converged: return InnerStatus::Converged;
    case BoxStatus::HitBound: return InnerStatus::HitBound;
    case BoxStatus::MaxIter: return InnerStatus::MaxIter;
  }
  return InnerStatus::MaxIter;
}

}  // namespace

void DiscretePrior::validate(const ModelSpec& model) const {
  if (atoms.empty()) throw Error(ErrorCode::Config, "prior for '" + model.name + "' has no atoms");
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!(a.tau > 0.0)) throw Error(ErrorCode::Config, "prior atom masses must be positive");
    if (a.theta.size() != static_cast<std::size_t>(model.dim())) {
      throw Error(ErrorCode::Config, "prior atom dimension mismatch for '" + model.name + "'");
    }
    if (!model.in_box(a.theta)) throw Error(ErrorCode::Config, "prior atom outside the box of '" + model.name + "'");
    total += a.tau;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorCode::Config, "prior masses must sum to one");
}

ComparisonTable::ComparisonTable(std::vector<ModelSpec> models, std::vector<Comparison> entries)
    : models_(std::move(models)), entries_(std::move(entries)) {
  for (const auto& m : models_) m.validate();
  double total = 0.0;
  for (const auto& c : entries_) {
    if (c.true_index >= models_.size() || c.rival_index >= models_.size()) {
      throw Error(ErrorCode::Config, "comparison references an unknown model");
    }
    if (c.true_index == c.rival_index) throw Error(ErrorCode::Config, "a model cannot be its own rival");
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) throw Error(ErrorCode::Config, "negative comparison weight");
    const ModelSpec& t = models_[c.true_index];
    if (t.family != models_[c.rival_index].family) {
      throw Error(ErrorCode::FamilyMismatch, "models '" + t.name + "' and '" + models_[c.rival_index].name +
                                                 "' use different response families");
    }
    if (c.theta_true.size() != static_cast<std::size_t>(t.dim()) || !t.in_box(c.theta_true)) {
      throw Error(ErrorCode::Config, "true parameters of '" + t.name + "' missing or outside its box");
    }
    total += c.weight;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::Config, "comparison weights sum to zero");
}

std::size_t ComparisonTable::max_rival_dim() const noexcept {
  std::size_t d = 0;
  for (const auto& c : entries_) d = std::max(d, static_cast<std::size_t>(models_[c.rival_index].dim()));
  return d;
}

ComparisonTable flatten_bayesian(std::vector<ModelSpec> models, std::span<const std::optional<TruthSpec>> truths,
                                 const Eigen::MatrixXd& p) {
  const auto nu = static_cast<Eigen::Index>(models.size());
  if (p.rows() != nu || p.cols() != nu) throw Error(ErrorCode::Config, "weight matrix must be square over the models");
  if (truths.size() != models.size()) throw Error(ErrorCode::Config, "one truth specification per model required");
  std::vector<Comparison> entries;
  for (Eigen::Index i = 0; i < nu; ++i) {
    if (p(i, i) != 0.0) throw Error(ErrorCode::Config, "diagonal comparison weights must be zero");
    const bool is_truth = (p.row(i).array() > 0.0).any();
    if (!is_truth) continue;
    const auto& truth = truths[static_cast<std::size_t>(i)];
    const ModelSpec& model = models[static_cast<std::size_t>(i)];
    if (!truth) throw Error(ErrorCode::Config, "model '" + model.name + "' is compared as truth but has no parameters");
    for (Eigen::Index j = 0; j < nu; ++j) {
      if (p(i, j) < 0.0) throw Error(ErrorCode::Config, "negative comparison weight");
      if (!(p(i, j) > 0.0)) continue;
      if (const auto* fixed = std::get_if<std::vector<double>>(&*truth)) {
        entries.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), p(i, j), *fixed});
      } else {
        const auto& prior = std::get<DiscretePrior>(*truth);
        prior.validate(model);
        for (const auto& atom : prior.atoms) {
          entries.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), p(i, j) * atom.tau, atom.theta});
        }
      }
    }
  }
  return ComparisonTable(std::move(models), std::move(entries));
}

std::string_view to_string(InnerStatus s) noexcept {
  switch (s) {
    case InnerStatus::Converged: return "converged";
    case InnerStatus::HitBound: return "hit_bound";
    case InnerStatus::MaxIter: return "maxiter";
  }
  return "?";
}

InnerSolution inner_infimum(const ComparisonTable& table, std::size_t entry, const Design& design,
                            const std::vector<double>* warm_start, const InnerOptions& opts) {
  const Comparison& c = table.entries().at(entry);
  const ModelSpec& rival = table.rival_model(c);
  const auto d = static_cast<Eigen::Index>(rival.dim());
  EntryObjective objective(table, c, design);
  const BoxObjective f = [&objective](const Eigen::VectorXd& th, Eigen::VectorXd* g) { return objective(th, g); };

  Eigen::VectorXd lo(d), hi(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    lo[k] = rival.theta_box[static_cast<std::size_t>(k)].lo;
    hi[k] = rival.theta_box[static_cast<std::size_t>(k)].hi;
  }

  std::vector<Eigen::VectorXd> starts;
  if (warm_start && warm_start->size() == static_cast<std::size_t>(d)) {
    starts.emplace_back(Eigen::Map<const Eigen::VectorXd>(warm_start->data(), d));
  }
  // Cold starts go through the mean fit first: the fit is defined everywhere,
  // while raw draws often sit where the kernel is not.
  const auto center_v = rival.box_center();
  std::vector<Eigen::VectorXd> seeds{Eigen::Map<const Eigen::VectorXd>(center_v.data(), d)};
  const int cold = std::max(1, opts.starts - static_cast<int>(starts.size()));
  for (auto& draw : latin_hypercube(rival, cold - 1, splitmix64(opts.seed ^ splitmix64(entry + 1)))) {
    seeds.push_back(std::move(draw));
  }
  for (const auto& seed : seeds) starts.push_back(mean_fit_start(table, c, design, lo, hi, seed));

  BoxMinimizerResult best;
  best.value = kInf;
  for (const auto& s : starts) {
    BoxMinimizerResult r = minimize_in_box(f, s, lo, hi, opts.minimizer);
    if (r.value < best.value) best = std::move(r);
  }
  if (!std::isfinite(best.value)) {
    throw Error(ErrorCode::Infeasible, "kernel undefined at every start for rival '" + rival.name + "'");
  }
  InnerSolution sol;
  sol.theta_hat.assign(best.x.data(), best.x.data() + best.x.size());
  sol.value = best.value;
  sol.status = to_inner_status(best.status);
  return sol;
}

std::size_t CriterionValue::hit_bound_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(per_entry.begin(), per_entry.end(), [](const InnerSolution& s) {
    return s.status == InnerStatus::HitBound;
  }));
}

nlohmann::json CriterionValue::to_json(const ComparisonTable& table) const {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t e = 0; e < per_entry.size(); ++e) {
    const auto& c = table.entries()[e];
    entries.push_back({{"i", c.true_index},
                       {"j", c.rival_index},
                       {"p", c.weight},
                       {"theta_hat", per_entry[e].theta_hat},
                       {"value", per_entry[e].value},
                       {"status", to_string(per_entry[e].status)}});
  }
  return {{"total", total}, {"per_entry", std::move(entries)}};
}

CriterionValue kl_criterion(const Design& design, const ComparisonTable& table, const InnerOptions& opts,
                            const CriterionValue* warm) {
  CriterionValue cv;
  cv.design = design;
  cv.per_entry.resize(table.size());
  const bool use_warm = warm && warm->per_entry.size() == table.size();
  detail::parallel_for(table.size(), opts.threads, [&](std::size_t e) {
    const std::vector<double>* ws = use_warm ? &warm->per_entry[e].theta_hat : nullptr;
    cv.per_entry[e] = inner_infimum(table, e, design, ws, opts);
  });
  double total = 0.0;
  for (std::size_t e = 0; e < table.size(); ++e) total += table.entries()[e].weight * cv.per_entry[e].value;
  cv.total = total;
  return cv;
}

double psi(double x, const CriterionValue& cv, const ComparisonTable& table) {
  double total = 0.0;
  for (std::size_t e = 0; e < table.size(); ++e) {
    const Comparison& c = table.entries()[e];
    if (c.weight == 0.0) continue;
    const Moments t = moments(x, table.true_model(c), c.theta_true);
    const Moments r = moments(x, table.rival_model(c), cv.per_entry[e].theta_hat);
    total += c.weight * kernel_value(table.true_model(c).family, t, r);
  }
  return total;
}

double psi(double x, const Design& design, const CriterionValue& cv, const ComparisonTable& table) {
  if (design.hash() != cv.design_hash()) {
    throw Error(ErrorCode::Config, "criterion value was computed for a different design");
  }
  return psi(x, cv, table);
}

PsiMaximum max_psi(const CriterionValue& cv, const ComparisonTable& table, const DesignSpace& space,
                   std::size_t grid_size, double refine_tol) {
  const ScalarFunction f = [&](double x) { return psi(x, cv, table); };
  LocalMaximaOptions lopts;
  lopts.grid_size = grid_size;
  lopts.refine_tol = refine_tol;
  lopts.dedup_tol = 0.0;
  PsiMaximum out;
  out.local_maxima = local_maxima(f, space, lopts);
  out.value = -kInf;
  for (const auto& m : out.local_maxima) {
    if (m.value > out.value) out = PsiMaximum{m.x, m.value, std::move(out.local_maxima)};
  }
  for (double x : cv.design.points()) {
    const double v = f(x);
    if (v > out.value) {
      out.x = x;
      out.value = v;
    }
  }
  return out;
}

double efficiency_bound(const CriterionValue& cv, const ComparisonTable& table, const DesignSpace& space,
                        std::size_t grid_size) {
  if (!(cv.total > 0.0)) throw Error(ErrorCode::NonPositiveCriterion, "efficiency bound needs KL_P > 0");
  const PsiMaximum m = max_psi(cv, table, space, grid_size, 1e-8 * space.width());
  return std::min(1.0, cv.total / m.value);
}

double efficiency_bound(const Design& design, const ComparisonTable& table, const DesignSpace& space,
                        std::size_t grid_size, const InnerOptions& opts) {
  return efficiency_bound(kl_criterion(design, table, opts), table, space, grid_size);
}

double cross_efficiency(const Design& design, const ComparisonTable& reference_table, double best_value,
                        const InnerOptions& opts) {
  if (!(best_value > 0.0)) throw Error(ErrorCode::NonPositiveCriterion, "reference criterion must be positive");
  return kl_criterion(design, reference_table, opts).total / best_value;
}

}  // namespace kldesign
