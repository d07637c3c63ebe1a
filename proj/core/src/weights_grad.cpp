#include "kldesign/weights_grad.hpp"

#include <algorithm>
#include <cmath>

#include "kldesign/error.hpp"
#include "kldesign/search.hpp"
#include "kldesign/weights_qp.hpp"

namespace kldesign {

namespace {

Design shifted(const Design& d, std::size_t k_up, std::size_t k_down, double alpha) {
  std::vector<double> w(d.weights().begin(), d.weights().end());
  w[k_up] += alpha;
  w[k_down] = alpha >= w[k_down] ? 0.0 : w[k_down] - alpha;
  return d.with_weights(normalize_weights(w));
}

LineSearchResult exact_search(const GradientState& s, const ComparisonTable& table, std::size_t k_up,
                              std::size_t k_down, double alpha_max, const InnerOptions& inner) {
  const ScalarFunction g = [&](double a) {
    return kl_criterion(shifted(s.design, k_up, k_down, a), table, inner, &s.cv).total;
  };
  const ScalarMax best = golden_section_max(g, 0.0, alpha_max, 0.0, 40);
  if (!(best.value > s.cv.total) || best.x <= 0.0) return {0.0, s.design, s.cv};
  Design d = shifted(s.design, k_up, k_down, best.x);
  CriterionValue cv = kl_criterion(d, table, inner, &s.cv);
  return {best.x, std::move(d), std::move(cv)};
}

}  // namespace

std::vector<double> directional_values(const Design& design, const ComparisonTable& table, const CriterionValue& cv) {
  std::vector<double> v(design.size());
  for (std::size_t k = 0; k < design.size(); ++k) v[k] = psi(design.point(k), cv, table);
  return v;
}

GradientState make_gradient_state(const Design& design, const ComparisonTable& table, const CriterionValue& cv) {
  return {design, cv, directional_values(design, table, cv), 0};
}

LineSearchResult line_search(const GradientState& state, const ComparisonTable& table, std::size_t k_up,
                             std::size_t k_down, double alpha_max, LineSearchMode mode, const InnerOptions& inner) {
  alpha_max = std::clamp(alpha_max, 0.0, state.design.weight(k_down));
  if (alpha_max <= 0.0 || k_up == k_down) return {0.0, state.design, state.cv};
  if (mode == LineSearchMode::Exact) return exact_search(state, table, k_up, k_down, alpha_max, inner);

  const auto n = static_cast<Eigen::Index>(state.design.size());
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(state.design.weights().data(), n);
  const QPData qp = assemble_qp(linearize(state.design.points(), table, state.cv, inner.threads), w);
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(n);
  dir[static_cast<Eigen::Index>(k_up)] = 1.0;
  dir[static_cast<Eigen::Index>(k_down)] = -1.0;
  const double slope = qp.b.dot(dir) - 2.0 * w.dot(qp.Q * dir);
  const double curv = dir.dot(qp.Q * dir);
  double alpha = 0.0;
  if (slope > 0.0) alpha = curv > 0.0 ? std::min(alpha_max, slope / (2.0 * curv)) : alpha_max;
  for (int halving = 0; halving < 20 && alpha > 0.0; ++halving, alpha *= 0.5) {
    Design d = shifted(state.design, k_up, k_down, alpha);
    CriterionValue cv = kl_criterion(d, table, inner, &state.cv);
    if (cv.total > state.cv.total) return {alpha, std::move(d), std::move(cv)};
  }
  // The surrogate proposed nothing useful; fall back to the exact search.
  return exact_search(state, table, k_up, k_down, alpha_max, inner);
}

GradientState exchange_step(const GradientState& state, const ComparisonTable& table, const GradientOptions& opts) {
  std::size_t k_up = 0;
  std::size_t k_down = state.design.size();
  for (std::size_t k = 0; k < state.v.size(); ++k) {
    if (state.v[k] > state.v[k_up]) k_up = k;
    if (state.design.weight(k) > 0.0 && (k_down == state.design.size() || state.v[k] < state.v[k_down])) k_down = k;
  }
  GradientState next = state;
  ++next.iteration;
  if (k_down == state.design.size() || !(state.v[k_up] > state.v[k_down])) return next;
  LineSearchResult ls =
      line_search(state, table, k_up, k_down, state.design.weight(k_down), opts.mode, opts.inner);
  if (ls.alpha <= 0.0) return next;
  next.design = std::move(ls.design);
  next.cv = std::move(ls.cv);
  next.v = directional_values(next.design, table, next.cv);
  return next;
}

GradientRunResult optimize_weights_grad(const Design& design, const ComparisonTable& table, const CriterionValue& cv,
                                        const GradientOptions& opts) {
  GradientRunResult res{make_gradient_state(design, table, cv), GradientStop::MaxSteps};
  for (int step = 0; step < opts.max_steps; ++step) {
    const double g = res.state.cv.total;
    const double vmax = *std::max_element(res.state.v.begin(), res.state.v.end());
    if (vmax - g <= opts.tolerance * g) {
      res.stop = GradientStop::Converged;
      return res;
    }
    GradientState next = exchange_step(res.state, table, opts);
    if (next.cv.total <= g) {
      res.state.iteration = next.iteration;
      res.stop = GradientStop::Stalled;
      return res;
    }
    res.state = std::move(next);
  }
  return res;
}

}  // namespace kldesign
