#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kldesign {

/// Parsed arithmetic expression over the design variable `x` and parameters
/// `t1..tD`. Immutable and cheap to copy (shared tree).
///
/// Grammar, lowest to highest precedence:
///   sum     := product (('+' | '-') product)*
///   product := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?          (right-associative)
///   primary := number | 'x' | 't' digits | func '(' sum ')' | '(' sum ')'
///   func    := exp | log | sqrt
class Expr {
 public:
  struct Node;

  /// Throws ParseError when `text` is malformed or references t_k with k > dim.
  static Expr parse(std::string_view text, int dim);

  int dim() const noexcept { return dim_; }

  /// Throws Error(NotFinite) if any subexpression is non-finite.
  double eval(double x, std::span<const double> theta) const;

  /// Central differences, step h_k = rel_step * max(1, |theta_k|).
  std::vector<double> grad_theta(double x, std::span<const double> theta, double rel_step = 1e-6) const;
  void grad_theta(double x, std::span<const double> theta, std::span<double> out,
                  double rel_step = 1e-6) const;

  /// Fully parenthesized rendering that parses back to the same tree.
  std::string to_string() const;

  /// Highest parameter index referenced (0 if none).
  int max_parameter() const noexcept { return max_param_; }

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  Expr(std::shared_ptr<const Node> root, int dim, int max_param)
      : root_(std::move(root)), dim_(dim), max_param_(max_param) {}

  std::shared_ptr<const Node> root_;
  int dim_ = 0;
  int max_param_ = 0;
};

}  // namespace kldesign
