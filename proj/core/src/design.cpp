#include "kldesign/design.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "kldesign/error.hpp"

namespace kldesign {

DesignSpace::DesignSpace(double lower, double upper) : lower_(lower), upper_(upper) {
  if (!(std::isfinite(lower) && std::isfinite(upper) && lower < upper)) {
    throw Error(ErrorCode::Config, "design space requires finite lower < upper");
  }
}

double DesignSpace::clamp(double x) const noexcept { return std::clamp(x, lower_, upper_); }

std::vector<double> DesignSpace::uniform_grid(std::size_t n) const {
  if (n == 0) return {};
  if (n == 1) return {0.5 * (lower_ + upper_)};
  std::vector<double> grid(n);
  const double step = width() / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) grid[i] = lower_ + step * static_cast<double>(i);
  grid.back() = upper_;
  return grid;
}

Design::Design(std::vector<double> points, std::vector<double> weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.empty() || points_.size() != weights_.size()) {
    throw Error(ErrorCode::InvalidDesign, "points and weights must be nonempty and of equal length");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < points_.size(); ++k) {
    if (!std::isfinite(points_[k]) || !std::isfinite(weights_[k])) {
      throw Error(ErrorCode::InvalidDesign, "non-finite point or weight");
    }
    if (weights_[k] < 0.0) throw Error(ErrorCode::InvalidDesign, "negative weight");
    if (k > 0 && !(points_[k] > points_[k - 1])) {
      throw Error(ErrorCode::InvalidDesign, "points must be strictly increasing");
    }
    total += weights_[k];
  }
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    throw Error(ErrorCode::InvalidDesign, "weights must sum to one");
  }
  for (double& w : weights_) w /= total;
}

Design Design::uniform(std::vector<double> points) {
  std::vector<double> w(points.size(), points.empty() ? 0.0 : 1.0 / static_cast<double>(points.size()));
  return Design(std::move(points), std::move(w));
}

Design Design::one_point(double x) { return Design({x}, {1.0}); }

Design Design::with_weights(std::vector<double> weights) const { return Design(points_, std::move(weights)); }

std::ptrdiff_t Design::find(double x, double tol) const noexcept {
  auto it = std::lower_bound(points_.begin(), points_.end(), x - tol);
  if (it != points_.end() && std::abs(*it - x) <= tol) return it - points_.begin();
  return -1;
}

std::uint64_t Design::hash() const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix_in = [&h](double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (double p : points_) mix_in(p);
  for (double w : weights_) mix_in(w);
  return h;
}

nlohmann::json Design::to_json() const { return {{"points", points_}, {"weights", weights_}}; }

Design Design::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("points") || !j.contains("weights")) {
    throw Error(ErrorCode::Config, "design JSON requires \"points\" and \"weights\"");
  }
  auto points = j.at("points").get<std::vector<double>>();
  auto weights = j.at("weights").get<std::vector<double>>();
  // Tabulated designs are usually rounded; accept them if the sum is close.
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (total > 0.0 && std::abs(total - 1.0) < 1e-2) {
    for (double& w : weights) w /= total;
  }
  return Design(std::move(points), std::move(weights));
}

void Design::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string());
  out.precision(17);
  out << "x,weight\n";
  for (std::size_t k = 0; k < size(); ++k) out << points_[k] << ',' << weights_[k] << '\n';
}

std::vector<double> normalize_weights(std::span<const double> raw) {
  std::vector<double> out(raw.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    out[k] = raw[k] > 0.0 ? raw[k] : 0.0;
    total += out[k];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw Error(ErrorCode::AllZero, "no strictly positive weight to normalize");
  }
  for (double& w : out) w /= total;
  return out;
}

Design prune_small_weights(const Design& d, double threshold) {
  if (threshold <= 0.0) return d;
  std::vector<double> points;
  std::vector<double> weights;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (d.weight(k) >= threshold) {
      points.push_back(d.point(k));
      weights.push_back(d.weight(k));
    }
  }
  if (points.empty()) throw Error(ErrorCode::AllPruned, "every support point fell below the threshold");
  return Design(std::move(points), normalize_weights(weights));
}

Design merge_close_points(const Design& d, double tol) {
  std::vector<double> points;
  std::vector<double> weights;
  std::size_t start = 0;
  auto flush = [&](std::size_t begin, std::size_t end) {
    double mass = 0.0;
    double moment = 0.0;
    double plain = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      mass += d.weight(k);
      moment += d.weight(k) * d.point(k);
      plain += d.point(k);
    }
    points.push_back(mass > 0.0 ? moment / mass : plain / static_cast<double>(end - begin));
    weights.push_back(mass);
  };
  for (std::size_t k = 1; k <= d.size(); ++k) {
    if (k == d.size() || d.point(k) - d.point(k - 1) >= tol) {
      flush(start, k);
      start = k;
    }
  }
  if (points.size() == d.size()) return d;
  // Weighted means of disjoint sorted clusters stay sorted, but two clusters
  // can land on the same value when both are massless and symmetric.
  for (std::size_t k = 1; k < points.size(); ++k) {
    if (!(points[k] > points[k - 1])) points[k] = std::nextafter(points[k - 1], HUGE_VAL);
  }
  return Design(std::move(points), normalize_weights(weights));
}

Design mix(const Design& d, double x_new, double alpha, double same_point_tol) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorCode::Config, "mixing weight must lie in [0, 1]");
  if (alpha == 0.0) return d;
  if (alpha == 1.0) return Design::one_point(x_new);
  std::vector<double> points(d.points().begin(), d.points().end());
  std::vector<double> weights(d.weights().begin(), d.weights().end());
  for (double& w : weights) w *= (1.0 - alpha);
  if (auto idx = d.find(x_new, same_point_tol); idx >= 0) {
    weights[static_cast<std::size_t>(idx)] += alpha;
  } else {
    auto it = std::lower_bound(points.begin(), points.end(), x_new);
    auto pos = it - points.begin();
    points.insert(it, x_new);
    weights.insert(weights.begin() + pos, alpha);
  }
  return Design(std::move(points), normalize_weights(weights));
}

Design extend_support(const Design& d, std::span<const double> extra, double tol) {
  std::vector<std::pair<double, double>> merged;
  merged.reserve(d.size() + extra.size());
  for (std::size_t k = 0; k < d.size(); ++k) merged.emplace_back(d.point(k), d.weight(k));
  for (double x : extra) {
    bool near = std::any_of(merged.begin(), merged.end(),
                            [&](const auto& pw) { return std::abs(pw.first - x) <= tol; });
    if (!near) merged.emplace_back(x, 0.0);
  }
  if (merged.size() == d.size()) return d;
  std::sort(merged.begin(), merged.end());
  std::vector<double> points;
  std::vector<double> weights;
  for (const auto& [x, w] : merged) {
    points.push_back(x);
    weights.push_back(w);
  }
  return Design(std::move(points), std::move(weights));
}

}  // namespace kldesign
