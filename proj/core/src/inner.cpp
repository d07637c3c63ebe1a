#include "kldesign/inner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>

namespace kldesign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool at_lower(double x, double lo, double width) { return x <= lo + 1e-12 * width; }
bool at_upper(double x, double hi, double width) { return x >= hi - 1e-12 * width; }

}  // namespace

BoxMinimizerResult minimize_in_box(const BoxObjective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lo,
                                   const Eigen::VectorXd& hi, const BoxMinimizerOptions& opts) {
  const Eigen::Index d = x0.size();
  const Eigen::VectorXd width = hi - lo;
  BoxMinimizerResult res;
  res.x = x0.cwiseMax(lo).cwiseMin(hi);

  Eigen::VectorXd g(d);
  double fx = f(res.x, &g);
  res.value = fx;
  if (!std::isfinite(fx) || !g.allFinite()) {
    res.value = kInf;
    return res;
  }

  Eigen::VectorXd gp(d), gm(d), probe(d);
  double lambda = 1e-6;

  auto finish = [&](BoxStatus converged_status) {
    res.value = fx;
    res.status = converged_status;
    for (Eigen::Index k = 0; k < d; ++k) {
      if (at_lower(res.x[k], lo[k], width[k]) || at_upper(res.x[k], hi[k], width[k])) {
        if (converged_status == BoxStatus::Converged) res.status = BoxStatus::HitBound;
      }
    }
    return res;
  };

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter + 1;
    // Frozen coordinates: on a bound with the descent direction leaving the box.
    std::vector<Eigen::Index> free;
    double pg_norm = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      const bool blocked = (at_lower(res.x[k], lo[k], width[k]) && g[k] > 0.0) ||
                           (at_upper(res.x[k], hi[k], width[k]) && g[k] < 0.0);
      if (!blocked) {
        free.push_back(k);
        pg_norm = std::max(pg_norm, std::abs(g[k]));
      }
    }
    if (pg_norm <= opts.gradient_tolerance * (1.0 + std::abs(fx))) return finish(BoxStatus::Converged);

    // Hessian by central differences of the gradient on the free coordinates.
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd h(nf, nf);
    Eigen::VectorXd gf(nf);
    bool hess_ok = true;
    for (Eigen::Index a = 0; a < nf && hess_ok; ++a) {
      const Eigen::Index k = free[static_cast<std::size_t>(a)];
      gf[a] = g[k];
      const double step = 1e-6 * std::max(std::abs(res.x[k]), 1e-3 * width[k]);
      probe = res.x;
      probe[k] = res.x[k] + step;
      const double fp = f(probe, &gp);
      probe[k] = res.x[k] - step;
      const double fm = f(probe, &gm);
      if (!std::isfinite(fp) || !std::isfinite(fm) || !gp.allFinite() || !gm.allFinite()) {
        hess_ok = false;
        break;
      }
      for (Eigen::Index b = 0; b < nf; ++b) {
        h(b, a) = (gp[free[static_cast<std::size_t>(b)]] - gm[free[static_cast<std::size_t>(b)]]) / (2.0 * step);
      }
    }
    if (hess_ok) {
      h = 0.5 * (h + h.transpose()).eval();
    } else {
      // Near the edge of the feasible region: fall back to a scaled identity.
      h = Eigen::MatrixXd::Zero(nf, nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        const double w = width[free[static_cast<std::size_t>(a)]];
        h(a, a) = std::abs(gf[a]) / (0.1 * w) + 1e-300;
      }
    }
    Eigen::VectorXd diag = h.diagonal().cwiseAbs();
    const double diag_floor = std::max(diag.maxCoeff(), 1e-300) * 1e-12;
    diag = diag.cwiseMax(diag_floor);

    bool accepted = false;
    while (lambda <= 1e12) {
      Eigen::MatrixXd a = h;
      a.diagonal() += lambda * diag;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() != Eigen::Success) {
        lambda = std::max(lambda * 10.0, 1e-8);
        continue;
      }
      const Eigen::VectorXd step = -llt.solve(gf);
      Eigen::VectorXd candidate = res.x;
      for (Eigen::Index a_idx = 0; a_idx < nf; ++a_idx) {
        const Eigen::Index k = free[static_cast<std::size_t>(a_idx)];
        candidate[k] = std::clamp(res.x[k] + step[a_idx], lo[k], hi[k]);
      }
      Eigen::VectorXd gc(d);
      const double fc = f(candidate, &gc);
      if (std::isfinite(fc) && gc.allFinite() && fc < fx) {
        res.x = candidate;
        fx = fc;
        g = gc;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        break;
      }
      lambda = std::max(lambda * 10.0, 1e-8);
    }
    if (!accepted) {
      // No decrease is representable along any damped Newton direction.
      lambda = 1e-6;
      return finish(BoxStatus::Converged);
    }
  }
  res.value = fx;
  res.status = BoxStatus::MaxIter;
  return res;
}

}  // namespace kldesign
