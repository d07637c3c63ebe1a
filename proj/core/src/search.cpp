#include "kldesign/search.hpp"

#include <algorithm>
#include <cmath>

namespace kldesign {

ScalarMax golden_section_max(const ScalarFunction& f, double a, double b, double tol, int max_iterations) {
  constexpr double kInvPhi = 0.6180339887498949;
  const double fa = f(a);
  const double fb = f(b);
  double lo = a;
  double hi = b;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < max_iterations && (hi - lo) > tol; ++it) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = f(x2);
    }
  }
  ScalarMax best = f1 >= f2 ? ScalarMax{x1, f1} : ScalarMax{x2, f2};
  if (fa >= best.value) best = {a, fa};
  if (fb > best.value) best = {b, fb};
  return best;
}

std::vector<ScalarMax> local_maxima(const ScalarFunction& f, const DesignSpace& space, const LocalMaximaOptions& opts) {
  const std::size_t n = std::max<std::size_t>(opts.grid_size, 2);
  const std::vector<double> grid = space.uniform_grid(n);
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = f(grid[i]);

  std::vector<ScalarMax> found;
  for (std::size_t i = 0; i < n; ++i) {
    const bool left_ok = i == 0 ? true : values[i] > values[i - 1];
    const bool right_ok = i + 1 == n ? true : values[i] >= values[i + 1];
    // Endpoints need a strict rise toward them; plateaus report their left end.
    const bool strict = (i == 0) ? values[0] > values[1] : (i + 1 == n ? values[i] > values[i - 1] : left_ok);
    if (!(left_ok && right_ok && strict)) continue;
    const double a = grid[i == 0 ? 0 : i - 1];
    const double b = grid[i + 1 == n ? n - 1 : i + 1];
    ScalarMax refined = golden_section_max(f, a, b, opts.refine_tol);
    if (values[i] > refined.value) refined = {grid[i], values[i]};
    found.push_back(refined);
  }
  std::sort(found.begin(), found.end(), [](const ScalarMax& l, const ScalarMax& r) { return l.x < r.x; });
  std::vector<ScalarMax> out;
  for (const auto& m : found) {
    if (!out.empty() && m.x - out.back().x <= opts.dedup_tol) {
      if (m.value > out.back().value) out.back() = m;
      continue;
    }
    out.push_back(m);
  }
  return out;
}

}  // namespace kldesign
