#pragma once

#include <functional>
#include <vector>

#include "kldesign/design.hpp"

namespace kldesign {

using ScalarFunction = std::function<double(double)>;

struct ScalarMax {
  double x = 0.0;
  double value = 0.0;
};

/// Golden-section search for the maximum of `f` on [a, b]. Stops when the
/// bracket is shorter than `tol` or after `max_iterations` shrinks. The
/// endpoints are compared against the interior optimum, so a monotone `f`
/// returns the better endpoint exactly.
ScalarMax golden_section_max(const ScalarFunction& f, double a, double b, double tol, int max_iterations = 200);

struct LocalMaximaOptions {
  std::size_t grid_size = 1000;
  double refine_tol = 1e-8;  ///< absolute, design-variable units
  double dedup_tol = 0.0;    ///< absolute, design-variable units
};

/// Strict discrete local maxima of `f` on a uniform grid (endpoints
/// included), each refined by golden section on its bracketing cells.
/// Returned sorted and deduplicated at `dedup_tol`; a constant function has
/// no maxima.
std::vector<ScalarMax> local_maxima(const ScalarFunction& f, const DesignSpace& space, const LocalMaximaOptions& opts);

}  // namespace kldesign
