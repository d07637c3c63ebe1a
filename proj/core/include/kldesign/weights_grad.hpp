#pragma once

#include <cstddef>
#include <vector>

#include "kldesign/criterion.hpp"

namespace kldesign {

/// v_k = Psi(x_k) at every support point, with the cached minimizers.
std::vector<double> directional_values(const Design& design, const ComparisonTable& table, const CriterionValue& cv);

enum class LineSearchMode { Exact, Linearized };

struct GradientState {
  Design design;
  CriterionValue cv;
  std::vector<double> v;
  int iteration = 0;
};

struct LineSearchResult {
  double alpha = 0.0;
  Design design;
  CriterionValue cv;
};

/// Maximize alpha -> g(w + alpha (e_up - e_down)) over [0, alpha_max].
/// Exact mode runs 40 golden-section steps on the true criterion; the
/// linearized mode maximizes the quadratic surrogate in closed form and then
/// halves alpha until the true criterion does not decrease. alpha = 0 is
/// returned when no tried step is an ascent.
LineSearchResult line_search(const GradientState& state, const ComparisonTable& table, std::size_t k_up,
                             std::size_t k_down, double alpha_max, LineSearchMode mode, const InnerOptions& inner);

struct GradientOptions {
  LineSearchMode mode = LineSearchMode::Linearized;
  int max_steps = 100;
  /// Stop once max_k v_k - g <= tolerance * g.
  double tolerance = 1e-6;
  InnerOptions inner{};
};

/// One exchange of mass from the positive-weight point with the smallest
/// v to the point with the largest v. Ties go to the smallest index.
GradientState exchange_step(const GradientState& state, const ComparisonTable& table, const GradientOptions& opts);

enum class GradientStop { Converged, Stalled, MaxSteps };

struct GradientRunResult {
  GradientState state;
  GradientStop stop = GradientStop::MaxSteps;
};

GradientState make_gradient_state(const Design& design, const ComparisonTable& table, const CriterionValue& cv);

/// Repeated exchange steps until the v-gap certificate holds, no ascent is
/// found, or the step budget runs out.
GradientRunResult optimize_weights_grad(const Design& design, const ComparisonTable& table, const CriterionValue& cv,
                                        const GradientOptions& opts = {});

}  // namespace kldesign
