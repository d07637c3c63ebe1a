#include "kldesign/weights_qp.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "kldesign/error.hpp"
#include "parallel.hpp"

namespace kldesign {

Eigen::MatrixXd EntryLinearization::gram(const Eigen::VectorXd& w) const {
  const auto d = R.cols();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < curvature.size(); ++k) {
    if (w[static_cast<Eigen::Index>(k)] != 0.0) m += (0.5 * w[static_cast<Eigen::Index>(k)]) * curvature[k];
  }
  return m;
}

Linearization linearize(std::span<const double> points, const ComparisonTable& table, const CriterionValue& cv,
                        int threads) {
  if (cv.per_entry.size() != table.size()) throw Error(ErrorCode::Config, "criterion value does not match the table");
  Linearization lin;
  lin.points.assign(points.begin(), points.end());
  lin.entries.resize(table.size());
  lin.entry_weights.resize(table.size());
  const auto n = static_cast<Eigen::Index>(points.size());
  detail::parallel_for(table.size(), threads, [&](std::size_t e) {
    const Comparison& c = table.entries()[e];
    const ModelSpec& truth = table.true_model(c);
    const ModelSpec& rival = table.rival_model(c);
    const auto& theta = cv.per_entry[e].theta_hat;
    // Coordinates on a bound stay fixed; the model moves only the free ones.
    std::vector<Eigen::Index> free;
    for (std::size_t a = 0; a < theta.size(); ++a) {
      const auto& b = rival.theta_box[a];
      const double slack = kBoundSlack * (b.hi - b.lo);
      if (theta[a] > b.lo + slack && theta[a] < b.hi - slack) free.push_back(static_cast<Eigen::Index>(a));
    }
    const auto d = static_cast<Eigen::Index>(free.size());
    EntryLinearization& out = lin.entries[e];
    out.R.resize(n, d);
    out.b.resize(n);
    out.curvature.resize(static_cast<std::size_t>(n));
    out.hit_bound = d < static_cast<Eigen::Index>(theta.size());
    for (Eigen::Index k = 0; k < n; ++k) {
      const double x = points[static_cast<std::size_t>(k)];
      const KernelJet jet =
          kernel_jet(truth.family, moments(x, truth, c.theta_true), moments_with_gradient(x, rival, theta), true);
      out.b[k] = jet.value;
      Eigen::MatrixXd& cur = out.curvature[static_cast<std::size_t>(k)];
      cur.resize(d, d);
      for (Eigen::Index a = 0; a < d; ++a) {
        out.R(k, a) = 0.5 * jet.grad[free[static_cast<std::size_t>(a)]];
        for (Eigen::Index b = 0; b < d; ++b) {
          cur(a, b) = jet.curvature(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
        }
      }
    }
  });
  for (std::size_t e = 0; e < table.size(); ++e) lin.entry_weights[e] = table.entries()[e].weight;
  return lin;
}

Eigen::MatrixXd regularized_gram_inverse(const Eigen::MatrixXd& m) {
  const auto d = m.rows();
  const double tr = m.trace();
  if (!(tr > 0.0) || !std::isfinite(tr)) throw Error(ErrorCode::SingularGram, "Gram matrix is zero or not finite");
  Eigen::MatrixXd a = 0.5 * (m + m.transpose());
  a.diagonal().array() += kGramRidge * tr / static_cast<double>(d);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularGram, "Gram matrix factorization failed");
  return ldlt.solve(Eigen::MatrixXd::Identity(d, d));
}

namespace {

// No free parameter, or the rival mean does not move with them: the entry is linear in w.
bool linear_entry(const EntryLinearization& e) { return e.R.cols() == 0 || e.R.isZero(0.0); }

}  // namespace

Eigen::VectorXd alpha_hat(const EntryLinearization& e, const Eigen::VectorXd& w) {
  if (linear_entry(e)) return Eigen::VectorXd::Zero(e.R.cols());
  return regularized_gram_inverse(e.gram(w)) * (e.R.transpose() * w);
}

QPData assemble_qp(const Linearization& lin, const Eigen::VectorXd& w_bar) {
  const auto n = static_cast<Eigen::Index>(lin.points.size());
  QPData qp{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  for (std::size_t e = 0; e < lin.entries.size(); ++e) {
    const EntryLinearization& ent = lin.entries[e];
    const double p = lin.entry_weights[e];
    if (p == 0.0) continue;
    qp.b += p * ent.b;
    if (linear_entry(ent)) continue;
    const Eigen::MatrixXd minv = regularized_gram_inverse(ent.gram(w_bar));
    qp.Q.noalias() += p * (ent.R * minv * ent.R.transpose());
  }
  qp.Q = 0.5 * (qp.Q + qp.Q.transpose()).eval();
  return qp;
}

double g_bar(const Linearization& lin, const Eigen::VectorXd& w) {
  double total = 0.0;
  for (std::size_t e = 0; e < lin.entries.size(); ++e) {
    const EntryLinearization& ent = lin.entries[e];
    double value = ent.b.dot(w);
    if (!linear_entry(ent)) {
      const Eigen::VectorXd rw = ent.R.transpose() * w;
      value -= rw.dot(regularized_gram_inverse(ent.gram(w)) * rw);
    }
    total += lin.entry_weights[e] * value;
  }
  return total;
}

WeightStepResult qp_weight_step(const Design& design, const ComparisonTable& table, const CriterionValue& cv,
                                const QPStepOptions& opts) {
  WeightStepResult res{design, cv, 0, 0};
  const auto n = static_cast<Eigen::Index>(design.size());
  for (int it = 0; it < std::max(opts.iterations, 1); ++it) {
    const Eigen::VectorXd w_bar = Eigen::Map<const Eigen::VectorXd>(res.design.weights().data(), n);
    const Linearization lin = linearize(res.design.points(), table, res.cv, opts.inner.threads);
    const SimplexQPResult sol = solve_simplex_qp(assemble_qp(lin, w_bar));
    ++res.iterations;
    if ((sol.weights - w_bar).cwiseAbs().maxCoeff() <= 1e-12) break;

    bool accepted = false;
    double t = 1.0;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt, t *= 0.5) {
      const Eigen::VectorXd w = w_bar + t * (sol.weights - w_bar);
      Design candidate = res.design.with_weights(normalize_weights({w.data(), static_cast<std::size_t>(n)}));
      CriterionValue cand_cv = kl_criterion(candidate, table, opts.inner, &res.cv);
      if (cand_cv.total >= res.cv.total) {
        res.design = std::move(candidate);
        res.cv = std::move(cand_cv);
        accepted = true;
        break;
      }
      ++res.rejected;
    }
    if (!accepted) break;
  }
  return res;
}

}  // namespace kldesign
