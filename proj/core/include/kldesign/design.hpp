#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace kldesign {

/// Compact interval [lower, upper] the design variable lives in.
class DesignSpace {
 public:
  DesignSpace(double lower, double upper);

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  double width() const noexcept { return upper_ - lower_; }
  bool contains(double x) const noexcept { return x >= lower_ && x <= upper_; }
  double clamp(double x) const noexcept;

  /// Tolerance under which two points are considered the same support point.
  double point_tolerance() const noexcept { return 1e-10 * width(); }
  /// Default merge tolerance used by the outer algorithms.
  double default_merge_tolerance() const noexcept { return 1e-3 * width(); }

  /// `n` equally spaced points including both endpoints (n >= 2), or the
  /// midpoint when n == 1.
  std::vector<double> uniform_grid(std::size_t n) const;

 private:
  double lower_;
  double upper_;
};

/// Approximate design: finitely many strictly increasing support points with
/// weights on the probability simplex. Zero weights are allowed.
class Design {
 public:
  static constexpr double kSimplexTolerance = 1e-12;

  /// Validates the invariants; throws Error(InvalidDesign) on violation.
  /// Weights within kSimplexTolerance of summing to one are rescaled exactly.
  Design(std::vector<double> points, std::vector<double> weights);

  static Design uniform(std::vector<double> points);
  static Design one_point(double x);

  std::span<const double> points() const noexcept { return points_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return points_.size(); }
  double point(std::size_t k) const { return points_.at(k); }
  double weight(std::size_t k) const { return weights_.at(k); }

  /// Same support, new simplex weights.
  Design with_weights(std::vector<double> weights) const;

  /// Index of `x` in the support, if some point lies within `tol`.
  std::ptrdiff_t find(double x, double tol) const noexcept;

  /// FNV-1a hash of the raw bits of points and weights.
  std::uint64_t hash() const noexcept;

  nlohmann::json to_json() const;
  static Design from_json(const nlohmann::json& j);
  void write_csv(const std::filesystem::path& path) const;

  friend bool operator==(const Design&, const Design&) = default;

 private:
  std::vector<double> points_;
  std::vector<double> weights_;
};

/// Rescale nonnegative entries onto the simplex. Negative entries are treated
/// as zero. Throws Error(AllZero) when nothing positive remains.
std::vector<double> normalize_weights(std::span<const double> raw);

/// Drop support points whose weight is below `threshold` and renormalize.
/// Throws Error(AllPruned) if nothing survives.
Design prune_small_weights(const Design& d, double threshold);

/// Collapse chains of points whose consecutive gaps are below `tol` into one
/// point at the cluster's weight-weighted mean (plain mean if the cluster has
/// zero mass). Clustering is transitive along the sorted support.
Design merge_close_points(const Design& d, double tol);

/// (1 - alpha) * d + alpha * delta(x_new). A point within `same_point_tol`
/// of x_new receives the new mass instead of a new support point.
Design mix(const Design& d, double x_new, double alpha, double same_point_tol = 0.0);

/// Support union: keeps the weights of `d` and adds every point of `extra`
/// farther than `tol` from the current support with weight zero.
Design extend_support(const Design& d, std::span<const double> extra, double tol);

}  // namespace kldesign
