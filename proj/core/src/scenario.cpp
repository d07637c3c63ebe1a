#include "kldesign/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "kldesign/error.hpp"

namespace kldesign {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::Config, path + ": " + msg);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(path, "missing key '" + key + "'");
  return *it;
}

template <class T>
T as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail(path, "unexpected value " + j.dump());
  }
}

double finite(const json& j, const std::string& path) {
  const double v = as<double>(j, path);
  if (!std::isfinite(v)) fail(path, "value must be finite");
  return v;
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(finite(j[k], path + "/" + std::to_string(k)));
  return out;
}

Expr parse_expr(const json& j, int dim, const std::string& path) {
  try {
    return Expr::parse(as<std::string>(j, path), dim);
  } catch (const ParseError& e) {
    fail(path, "expression error at offset " + std::to_string(e.offset()) + ": " + e.message());
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

std::vector<ParamBounds> parse_box(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected [[lo, hi], ...]");
  std::vector<ParamBounds> box;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto b = numbers(j[k], path + "/" + std::to_string(k));
    if (b.size() != 2 || !(b[0] < b[1])) fail(path + "/" + std::to_string(k), "expected [lo, hi] with lo < hi");
    box.push_back({b[0], b[1]});
  }
  return box;
}

MeanFunction parse_mean(const json& j, int dim, const std::string& path) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    const auto builtin = builtin_from_string(name);
    if (!builtin) fail(path, "unknown built-in mean '" + name + "'");
    return MeanFunction(*builtin);
  }
  return MeanFunction(parse_expr(require(j, "expr", path), dim, path + "/expr"));
}

VarianceModel parse_variance(const json& j, int dim, const std::string& path) {
  if (!j.is_object() || j.size() != 1) fail(path, "expected exactly one of v2, sigma2, exp_of_mean, expr");
  const auto& [key, value] = *j.items().begin();
  const std::string sub = path + "/" + key;
  if (key == "v2" || key == "sigma2" || key == "exp_of_mean") {
    const double v = finite(value, sub);
    if (!(v > 0.0)) fail(sub, "must be positive");
    if (key == "v2") return VarianceModel::const_v(v);
    if (key == "sigma2") return VarianceModel::const_sigma2(v);
    return VarianceModel::exp_of_mean(v);
  }
  if (key == "expr") return VarianceModel::expression(parse_expr(value, dim, sub));
  fail(path, "unknown variance kind '" + key + "'");
}

json variance_to_json(const VarianceModel& v) {
  switch (v.kind()) {
    case VarianceModel::Kind::ConstV: return {{"v2", v.parameter()}};
    case VarianceModel::Kind::ConstSigma2: return {{"sigma2", v.parameter()}};
    case VarianceModel::Kind::ExpOfMean: return {{"exp_of_mean", v.parameter()}};
    case VarianceModel::Kind::UserExpr: return {{"expr", v.expr()->to_string()}};
  }
  return {};
}

json mean_to_json(const MeanFunction& m) {
  if (m.is_builtin()) return std::string(to_string(std::get<BuiltinMean>(m.impl())));
  return {{"expr", m.describe()}};
}

DiscretePrior parse_prior(const json& j, const std::optional<std::vector<double>>& center, std::size_t dim,
                          const std::string& path) {
  if (!j.is_object() || j.size() != 1) fail(path, "expected exactly one of atoms, product, gauss_grid");
  const auto& [kind, spec] = *j.items().begin();
  const std::string sub = path + "/" + kind;
  if (kind == "atoms") {
    if (!spec.is_array()) fail(sub, "expected an array of atoms");
    DiscretePrior prior;
    for (std::size_t a = 0; a < spec.size(); ++a) {
      const std::string ap = sub + "/" + std::to_string(a);
      prior.atoms.push_back({numbers(require(spec[a], "theta", ap), ap + "/theta"),
                             finite(require(spec[a], "tau", ap), ap + "/tau")});
    }
    return prior;
  }
  if (kind != "product" && kind != "gauss_grid") fail(path, "unknown prior kind '" + kind + "'");
  if (!center) fail(path, "generated priors are centered at 'theta', which is missing");
  if (!spec.is_array() || spec.empty()) fail(sub, "expected a nonempty array of coordinate specs");
  std::vector<std::size_t> coords;
  std::vector<std::vector<double>> offsets, masses;
  for (std::size_t c = 0; c < spec.size(); ++c) {
    const std::string cp = sub + "/" + std::to_string(c);
    const auto index = as<std::size_t>(require(spec[c], "index", cp), cp + "/index");
    if (index >= dim) fail(cp + "/index", "coordinate out of range");
    coords.push_back(index);
    if (kind == "product") {
      offsets.push_back(numbers(require(spec[c], "offsets", cp), cp + "/offsets"));
      if (spec[c].contains("weights")) {
        masses.push_back(numbers(spec[c]["weights"], cp + "/weights"));
        if (masses.back().size() != offsets.back().size()) fail(cp + "/weights", "one weight per offset required");
      } else {
        masses.emplace_back(offsets.back().size(), 1.0);
      }
    } else {
      const double sd = finite(require(spec[c], "sd", cp), cp + "/sd");
      const int points = as<int>(require(spec[c], "points", cp), cp + "/points");
      const double resolution = spec[c].contains("resolution") ? finite(spec[c]["resolution"], cp + "/resolution") : 2.0;
      if (!(sd > 0.0) || points < 1 || !(resolution > 0.0)) fail(cp, "need sd > 0, points >= 1, resolution > 0");
      auto [off, mass] = gauss_grid(sd, points, resolution);
      offsets.push_back(std::move(off));
      masses.push_back(std::move(mass));
    }
  }
  try {
    return product_prior(*center, coords, offsets, masses);
  } catch (const Error& e) {
    fail(sub, e.what());
  }
}

ReferenceDesign parse_reference(const json& j, const std::string& path) {
  ReferenceDesign ref;
  ref.label = j.contains("label") ? as<std::string>(j["label"], path + "/label") : std::string();
  try {
    ref.design = Design::from_json(require(j, "design", path));
  } catch (const Error& e) {
    fail(path + "/design", e.what());
  }
  ref.point_tol = finite(require(j, "point_tol", path), path + "/point_tol");
  ref.weight_tol = finite(require(j, "weight_tol", path), path + "/weight_tol");
  if (j.contains("criterion_ratio")) ref.criterion_ratio = finite(j["criterion_ratio"], path + "/criterion_ratio");
  if (j.contains("support_sizes")) ref.support_sizes = as<std::vector<std::size_t>>(j["support_sizes"], path + "/support_sizes");
  return ref;
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> gauss_grid(double sd, int points, double resolution) {
  std::vector<double> offsets, masses;
  const double c = (points + 1) / 2.0;
  for (int i = 1; i <= points; ++i) {
    offsets.push_back(sd * (i - c) / resolution);
    masses.push_back(std::exp(-(i - c) * (i - c) / (2.0 * resolution * resolution)));
  }
  return {offsets, masses};
}

DiscretePrior product_prior(const std::vector<double>& center, const std::vector<std::size_t>& coords,
                            const std::vector<std::vector<double>>& offsets,
                            const std::vector<std::vector<double>>& masses) {
  if (coords.size() != offsets.size() || coords.size() != masses.size()) {
    throw Error(ErrorCode::Config, "product prior needs offsets and masses for every coordinate");
  }
  DiscretePrior prior;
  prior.atoms.push_back({center, 1.0});
  for (std::size_t c = 0; c < coords.size(); ++c) {
    if (coords[c] >= center.size()) throw Error(ErrorCode::Config, "product prior coordinate out of range");
    std::vector<PriorAtom> next;
    for (const auto& atom : prior.atoms) {
      for (std::size_t i = 0; i < offsets[c].size(); ++i) {
        PriorAtom a = atom;
        a.theta[coords[c]] += offsets[c][i];
        a.tau *= masses[c][i];
        next.push_back(std::move(a));
      }
    }
    prior.atoms = std::move(next);
  }
  const double total = std::accumulate(prior.atoms.begin(), prior.atoms.end(), 0.0,
                                       [](double s, const PriorAtom& a) { return s + a.tau; });
  if (!(total > 0.0)) throw Error(ErrorCode::Config, "product prior masses sum to zero");
  for (auto& a : prior.atoms) a.tau /= total;
  return prior;
}

ComparisonTable Scenario::table() const {
  ComparisonTable t = flatten_bayesian(models, truths, p);
  const auto grid = space.uniform_grid(201);
  for (const auto& c : t.entries()) {
    const ModelSpec& m = t.true_model(c);
    for (double x : grid) {
      try {
        (void)moments(x, m, c.theta_true);
      } catch (const Error& e) {
        throw Error(ErrorCode::Config, "model '" + m.name + "' at x = " + std::to_string(x) + ": " + e.what());
      }
    }
  }
  return t;
}

Design Scenario::start_design(const ComparisonTable& t) const {
  if (start) return *start;
  const std::size_t n = start_points > 0 ? start_points : std::max<std::size_t>(3, t.max_rival_dim() + 1);
  return default_start(space, n, &t, algorithm.inner);
}

json Scenario::to_json() const {
  json ms = json::array();
  for (std::size_t i = 0; i < models.size(); ++i) {
    const ModelSpec& m = models[i];
    json box = json::array();
    for (const auto& b : m.theta_box) box.push_back({b.lo, b.hi});
    json mj = {{"name", m.name},
               {"family", std::string(to_string(m.family))},
               {"mean", mean_to_json(m.mean)},
               {"variance", variance_to_json(m.variance)},
               {"theta_box", std::move(box)}};
    if (truths[i]) {
      if (const auto* fixed = std::get_if<std::vector<double>>(&*truths[i])) {
        mj["theta"] = *fixed;
      } else {
        json atoms = json::array();
        for (const auto& a : std::get<DiscretePrior>(*truths[i]).atoms) atoms.push_back({{"theta", a.theta}, {"tau", a.tau}});
        mj["prior"] = {{"atoms", std::move(atoms)}};
      }
    }
    ms.push_back(std::move(mj));
  }
  json pm = json::array();
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < p.cols(); ++j) row.push_back(p(i, j));
    pm.push_back(std::move(row));
  }
  json out = {{"name", name},
              {"description", description},
              {"design_space", {space.lower(), space.upper()}},
              {"models", std::move(ms)},
              {"p", std::move(pm)},
              {"algorithm", algorithm.to_json()}};
  if (start) out["start"] = {{"design", start->to_json()}};
  else if (start_points > 0) out["start"] = {{"points", start_points}};
  if (reference) {
    out["reference"] = {{"label", reference->label},
                        {"design", reference->design.to_json()},
                        {"point_tol", reference->point_tol},
                        {"weight_tol", reference->weight_tol},
                        {"criterion_ratio", reference->criterion_ratio},
                        {"support_sizes", reference->support_sizes}};
  }
  return out;
}

Scenario parse_scenario(const json& j, const std::string& origin) {
  const std::string root = origin + ":";
  if (!j.is_object()) fail(root, "scenario must be an object");
  static const std::vector<std::string> known = {"name", "description", "design_space", "models", "p",
                                                 "algorithm", "start", "reference"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) fail(root + "/" + key, "unknown key");
  }
  Scenario s;
  s.name = as<std::string>(require(j, "name", root), root + "/name");
  if (j.contains("description")) s.description = as<std::string>(j["description"], root + "/description");
  const auto ds = numbers(require(j, "design_space", root), root + "/design_space");
  if (ds.size() != 2 || !(ds[0] < ds[1])) fail(root + "/design_space", "expected [lower, upper] with lower < upper");
  s.space = DesignSpace(ds[0], ds[1]);

  const json& models = require(j, "models", root);
  if (!models.is_array() || models.size() < 2) fail(root + "/models", "expected at least two models");
  for (std::size_t i = 0; i < models.size(); ++i) {
    const std::string mp = root + "/models/" + std::to_string(i);
    const json& mj = models[i];
    const auto box = parse_box(require(mj, "theta_box", mp), mp + "/theta_box");
    const int dim = static_cast<int>(box.size());
    ModelSpec m{as<std::string>(require(mj, "name", mp), mp + "/name"),
                parse_mean(require(mj, "mean", mp), dim, mp + "/mean"),
                parse_variance(require(mj, "variance", mp), dim, mp + "/variance"),
                Family::NormalHetero, box};
    try {
      m.family = family_from_string(as<std::string>(require(mj, "family", mp), mp + "/family"));
      m.validate();
    } catch (const Error& e) {
      fail(mp, e.what());
    }
    std::optional<std::vector<double>> theta;
    if (mj.contains("theta")) {
      theta = numbers(mj["theta"], mp + "/theta");
      if (theta->size() != box.size()) fail(mp + "/theta", "dimension does not match theta_box");
    }
    std::optional<TruthSpec> truth;
    if (mj.contains("prior")) {
      DiscretePrior prior = parse_prior(mj["prior"], theta, box.size(), mp + "/prior");
      try {
        prior.validate(m);
      } catch (const Error& e) {
        fail(mp + "/prior", e.what());
      }
      truth = std::move(prior);
    } else if (theta) {
      if (!m.in_box(*theta)) fail(mp + "/theta", "outside theta_box");
      truth = *theta;
    }
    for (const auto& other : s.models) {
      if (other.name == m.name) fail(mp + "/name", "duplicate model name '" + m.name + "'");
    }
    s.models.push_back(std::move(m));
    s.truths.push_back(std::move(truth));
  }

  const json& pj = require(j, "p", root);
  const auto n = static_cast<Eigen::Index>(s.models.size());
  if (!pj.is_array() || static_cast<Eigen::Index>(pj.size()) != n) fail(root + "/p", "expected a square matrix over the models");
  s.p.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = numbers(pj[static_cast<std::size_t>(i)], root + "/p/" + std::to_string(i));
    if (static_cast<Eigen::Index>(row.size()) != n) fail(root + "/p/" + std::to_string(i), "row length mismatch");
    for (Eigen::Index k = 0; k < n; ++k) s.p(i, k) = row[static_cast<std::size_t>(k)];
  }

  if (j.contains("algorithm")) {
    try {
      s.algorithm.update_from_json(j["algorithm"]);
      s.algorithm.validate();
    } catch (const Error& e) {
      fail(root + "/algorithm", e.what());
    }
  }
  if (j.contains("start")) {
    const json& st = j["start"];
    const std::string sp = root + "/start";
    if (st.contains("design")) {
      try {
        s.start = Design::from_json(st["design"]);
      } catch (const Error& e) {
        fail(sp + "/design", e.what());
      }
      for (double x : s.start->points()) {
        if (!s.space.contains(x)) fail(sp + "/design", "support point outside the design space");
      }
    } else {
      s.start_points = as<std::size_t>(require(st, "points", sp), sp + "/points");
    }
  }
  if (j.contains("reference")) s.reference = parse_reference(j["reference"], root + "/reference");

  try {
    (void)s.table();
  } catch (const Error& e) {
    fail(root, e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read scenario " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    const auto last_nl = text.rfind('\n', upto == 0 ? 0 : upto - 1);
    const auto col = last_nl == std::string::npos ? upto + 1 : upto - last_nl;
    throw Error(ErrorCode::ParseError,
                path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + e.what());
  }
  return parse_scenario(j, path.string());
}

std::vector<std::string> list_scenarios(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  if (!std::filesystem::is_directory(dir)) return names;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::filesystem::path resolve_scenario(const std::string& name_or_path, const std::filesystem::path& dir) {
  const std::filesystem::path direct(name_or_path);
  if (std::filesystem::is_regular_file(direct)) return direct;
  const auto bundled = dir / (name_or_path + ".json");
  if (std::filesystem::is_regular_file(bundled)) return bundled;
  throw Error(ErrorCode::Io, "no scenario named '" + name_or_path + "' (searched " + dir.string() + ")");
}

}  // namespace kldesign
