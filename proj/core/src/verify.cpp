#include "kldesign/verify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "kldesign/error.hpp"

namespace kldesign {

nlohmann::json CertificationReport::to_json() const {
  nlohmann::json sup = nlohmann::json::array();
  for (const auto& s : support) {
    sup.push_back({{"x", s.x}, {"weight", s.weight}, {"psi", s.psi}, {"residual", s.residual}});
  }
  return {{"kl_value", kl_value},
          {"max_psi", max_psi},
          {"argmax_psi", argmax_psi},
          {"max_gap_rel", max_gap_rel},
          {"efficiency_bound", efficiency_bound()},
          {"tolerance", tolerance},
          {"gap_locations", gap_locations},
          {"support_equality_residuals", std::move(sup)},
          {"hit_bound_entries", hit_bound_entries},
          {"verdict", certified ? "certified" : "not_certified"}};
}

CertificationReport certify(const CriterionValue& cv, const ComparisonTable& table, const DesignSpace& space,
                            const CertifyOptions& opts) {
  if (!(cv.total > 0.0)) throw Error(ErrorCode::NonPositiveCriterion, "certification needs KL_P > 0");
  const PsiMaximum m = max_psi(cv, table, space, opts.grid_size, 1e-10 * space.width());
  CertificationReport rep;
  rep.kl_value = cv.total;
  rep.max_psi = m.value;
  rep.argmax_psi = m.x;
  rep.max_gap_rel = (m.value - cv.total) / cv.total;
  rep.tolerance = opts.tol_rel;
  rep.hit_bound_entries = cv.hit_bound_count();
  for (const auto& lm : m.local_maxima) {
    if (lm.value >= m.value - 1e-6 * std::abs(m.value)) rep.gap_locations.push_back(lm.x);
  }
  if (rep.gap_locations.empty()) rep.gap_locations.push_back(m.x);
  bool support_ok = true;
  for (std::size_t k = 0; k < cv.design.size(); ++k) {
    const double v = psi(cv.design.point(k), cv, table);
    const SupportResidual r{cv.design.point(k), cv.design.weight(k), v, std::abs(v - cv.total) / cv.total};
    if (r.weight > 0.0 && r.residual > opts.tol_rel) support_ok = false;
    rep.support.push_back(r);
  }
  rep.certified = rep.max_gap_rel <= opts.tol_rel && support_ok;
  return rep;
}

CertificationReport certify(const Design& design, const ComparisonTable& table, const DesignSpace& space,
                            const CertifyOptions& opts) {
  return certify(kl_criterion(design, table, opts.inner), table, space, opts);
}

Eigen::MatrixXd efficiency_matrix(const std::vector<Design>& designs, const std::vector<const ComparisonTable*>& tables,
                                  const std::vector<double>& best_values, const InnerOptions& opts) {
  if (tables.size() != best_values.size()) throw Error(ErrorCode::Config, "one best value per table required");
  Eigen::MatrixXd eff(static_cast<Eigen::Index>(designs.size()), static_cast<Eigen::Index>(tables.size()));
  for (std::size_t i = 0; i < designs.size(); ++i) {
    for (std::size_t j = 0; j < tables.size(); ++j) {
      eff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          cross_efficiency(designs[i], *tables[j], best_values[j], opts);
    }
  }
  return eff;
}

void export_psi_trace(const CriterionValue& cv, const ComparisonTable& table, const DesignSpace& space,
                      std::size_t grid_size, const std::filesystem::path& path) {
  std::vector<double> xs = space.uniform_grid(grid_size);
  xs.insert(xs.end(), cv.design.points().begin(), cv.design.points().end());
  std::stable_sort(xs.begin(), xs.end());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.precision(17);
  out << "x,psi,kl_p\n";
  for (double x : xs) out << x << ',' << psi(x, cv, table) << ',' << cv.total << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

}  // namespace kldesign
