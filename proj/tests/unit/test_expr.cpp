#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "kldesign/error.hpp"
#include "kldesign/expr.hpp"

namespace kldesign {
namespace {

double eval(const char* text, double x, std::vector<double> theta = {}) {
  return Expr::parse(text, static_cast<int>(theta.size())).eval(x, theta);
}

TEST(Expr, Precedence) {
  EXPECT_DOUBLE_EQ(eval("1 + 2 * 3", 0), 7.0);
  EXPECT_DOUBLE_EQ(eval("(1 + 2) * 3", 0), 9.0);
  EXPECT_DOUBLE_EQ(eval("2 ^ 3 ^ 2", 0), 512.0);
  EXPECT_DOUBLE_EQ(eval("-2 ^ 2", 0), -4.0);
  EXPECT_DOUBLE_EQ(eval("2 ^ -1", 0), 0.5);
  EXPECT_DOUBLE_EQ(eval("8 / 4 / 2", 0), 1.0);
  EXPECT_DOUBLE_EQ(eval("1 - 2 - 3", 0), -4.0);
}

TEST(Expr, VariablesAndFunctions) {
  EXPECT_DOUBLE_EQ(eval("t1 * x / (t2 + x)", 2.0, {3.0, 1.0}), 2.0);
  EXPECT_DOUBLE_EQ(eval("exp(log(x)) + sqrt(t1)", 1.5, {4.0}), 3.5);
  EXPECT_DOUBLE_EQ(eval("1.5e-1 * x", 2.0), 0.3);
}

TEST(Expr, MatchesBuiltinLogistic) {
  const std::vector<double> t{1.0, 2.0, 3.0, 0.5};
  const double x = 2.2;
  EXPECT_NEAR(eval("t1 + t2 / (1 + exp((t3 - x) / t4))", x, t), 1.0 + 2.0 / (1.0 + std::exp((3.0 - x) / 0.5)),
              1e-15);
}

TEST(Expr, ParseErrorsCarryOffset) {
  try {
    Expr::parse("1 + * 2", 0);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  EXPECT_THROW(Expr::parse("t3 * x", 2), ParseError);
  EXPECT_THROW(Expr::parse("(1 + x", 0), ParseError);
  EXPECT_THROW(Expr::parse("foo(x)", 0), ParseError);
  EXPECT_THROW(Expr::parse("", 0), ParseError);
  EXPECT_THROW(Expr::parse("x x", 0), ParseError);
}

TEST(Expr, NonFiniteEvaluation) {
  auto code = [](const char* text) {
    try {
      eval(text, -1.0);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code("log(x)"), ErrorCode::NotFinite);
  EXPECT_EQ(code("sqrt(x)"), ErrorCode::NotFinite);
  EXPECT_EQ(code("1 / (x + 1)"), ErrorCode::NotFinite);
  EXPECT_EQ(code("x ^ 0.5"), ErrorCode::NotFinite);
  EXPECT_DOUBLE_EQ(eval("x ^ 3", -1.0), -1.0);
}

TEST(Expr, ToStringRoundTrip) {
  for (const char* text : {"t1 - t2 * exp(-t3 * x ^ t4)", "-(x) ^ 2 / 3 - 1", "2 ^ 3 ^ x", "sqrt(x + t1) * log(2)"}) {
    const Expr e = Expr::parse(text, 4);
    const Expr back = Expr::parse(e.to_string(), 4);
    EXPECT_EQ(e, back) << text;
    const std::vector<double> t{1.1, 0.7, 0.3, 1.9};
    EXPECT_EQ(e.eval(0.8, t), back.eval(0.8, t));
  }
}

TEST(Expr, GradientMatchesAnalytic) {
  const Expr e = Expr::parse("t1 - t2 * exp(-t3 * x)", 3);
  const std::vector<double> t{2.0, 1.0, 0.8};
  const double x = 1.3;
  const auto g = e.grad_theta(x, t);
  EXPECT_NEAR(g[0], 1.0, 1e-8);
  EXPECT_NEAR(g[1], -std::exp(-0.8 * x), 1e-8);
  EXPECT_NEAR(g[2], x * std::exp(-0.8 * x), 1e-8);
}

TEST(Expr, EvaluationIsDeterministic) {
  const Expr e = Expr::parse("t1 * x / (t2 + x) + t3 * x", 3);
  const std::vector<double> t{1.0, 1.0, 1.0};
  EXPECT_EQ(e.eval(0.37, t), e.eval(0.37, t));
  EXPECT_EQ(e.max_parameter(), 3);
}

}  // namespace
}  // namespace kldesign
