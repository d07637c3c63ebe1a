#include "kldesign/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "kldesign/error.hpp"

namespace kldesign {

struct Expr::Node {
  enum class Kind { Number, Variable, Parameter, Add, Sub, Mul, Div, Pow, Neg, Exp, Log, Sqrt };

  Kind kind;
  double value = 0.0;  // Number
  int index = 0;       // Parameter, zero-based
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

namespace {

using Node = Expr::Node;
using NodePtr = std::shared_ptr<const Node>;
using Kind = Node::Kind;

NodePtr make_leaf(Kind kind, double value = 0.0, int index = 0) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->value = value;
  n->index = index;
  return n;
}

NodePtr make_node(Kind kind, NodePtr lhs, NodePtr rhs = nullptr) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

class Parser {
 public:
  Parser(std::string_view text, int dim) : text_(text), dim_(dim) {}

  NodePtr parse() {
    NodePtr root = sum();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return root;
  }

  int max_param() const { return max_param_; }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(pos_, msg); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr sum() {
    NodePtr lhs = product();
    for (;;) {
      if (accept('+')) {
        lhs = make_node(Kind::Add, lhs, product());
      } else if (accept('-')) {
        lhs = make_node(Kind::Sub, lhs, product());
      } else {
        return lhs;
      }
    }
  }

  NodePtr product() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_node(Kind::Mul, lhs, unary());
      } else if (accept('/')) {
        lhs = make_node(Kind::Div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make_node(Kind::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make_node(Kind::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = sum();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
    if (ec != std::errc() || ptr == text_.data() + pos_) fail("malformed number");
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    if (!std::isfinite(value)) {
      pos_ = start;
      fail("number out of range");
    }
    return make_leaf(Kind::Number, value);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name == "x") return make_leaf(Kind::Variable);
    if (name.size() > 1 && name[0] == 't' &&
        name.find_first_not_of("0123456789", 1) == std::string_view::npos) {
      int index = 0;
      std::from_chars(name.data() + 1, name.data() + name.size(), index);
      if (index < 1 || index > dim_) {
        pos_ = start;
        fail("parameter " + std::string(name) + " outside t1..t" + std::to_string(dim_));
      }
      max_param_ = std::max(max_param_, index);
      return make_leaf(Kind::Parameter, 0.0, index - 1);
    }
    Kind fn;
    if (name == "exp") {
      fn = Kind::Exp;
    } else if (name == "log") {
      fn = Kind::Log;
    } else if (name == "sqrt") {
      fn = Kind::Sqrt;
    } else {
      pos_ = start;
      fail("unknown identifier '" + std::string(name) + "'");
    }
    if (!accept('(')) fail("expected '(' after function name");
    NodePtr arg = sum();
    if (!accept(')')) fail("expected ')'");
    return make_node(fn, arg);
  }

  std::string_view text_;
  int dim_;
  std::size_t pos_ = 0;
  int max_param_ = 0;
};

double checked(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::NotFinite, "expression evaluated to a non-finite value");
  return v;
}

double eval_node(const Node& n, double x, std::span<const double> theta) {
  switch (n.kind) {
    case Kind::Number: return n.value;
    case Kind::Variable: return x;
    case Kind::Parameter: return theta[static_cast<std::size_t>(n.index)];
    case Kind::Add: return checked(eval_node(*n.lhs, x, theta) + eval_node(*n.rhs, x, theta));
    case Kind::Sub: return checked(eval_node(*n.lhs, x, theta) - eval_node(*n.rhs, x, theta));
    case Kind::Mul: return checked(eval_node(*n.lhs, x, theta) * eval_node(*n.rhs, x, theta));
    case Kind::Div: {
      const double den = eval_node(*n.rhs, x, theta);
      if (den == 0.0) throw Error(ErrorCode::NotFinite, "division by zero");
      return checked(eval_node(*n.lhs, x, theta) / den);
    }
    case Kind::Pow: {
      const double base = eval_node(*n.lhs, x, theta);
      const double expo = eval_node(*n.rhs, x, theta);
      if (base < 0.0 && std::trunc(expo) != expo) {
        throw Error(ErrorCode::NotFinite, "negative base with non-integer exponent");
      }
      return checked(std::pow(base, expo));
    }
    case Kind::Neg: return -eval_node(*n.lhs, x, theta);
    case Kind::Exp: return checked(std::exp(eval_node(*n.lhs, x, theta)));
    case Kind::Log: {
      const double a = eval_node(*n.lhs, x, theta);
      if (!(a > 0.0)) throw Error(ErrorCode::NotFinite, "log of a non-positive value");
      return std::log(a);
    }
    case Kind::Sqrt: {
      const double a = eval_node(*n.lhs, x, theta);
      if (a < 0.0) throw Error(ErrorCode::NotFinite, "sqrt of a negative value");
      return std::sqrt(a);
    }
  }
  return 0.0;
}

void print_node(const Node& n, std::ostringstream& out) {
  auto binary = [&](const char* op) {
    out << '(';
    print_node(*n.lhs, out);
    out << ' ' << op << ' ';
    print_node(*n.rhs, out);
    out << ')';
  };
  auto call = [&](const char* fn) {
    out << fn << '(';
    print_node(*n.lhs, out);
    out << ')';
  };
  switch (n.kind) {
    case Kind::Number: {
      // Negative literals cannot come out of the parser.
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), n.value);
      out << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
      break;
    }
    case Kind::Variable: out << 'x'; break;
    case Kind::Parameter: out << 't' << (n.index + 1); break;
    case Kind::Add: binary("+"); break;
    case Kind::Sub: binary("-"); break;
    case Kind::Mul: binary("*"); break;
    case Kind::Div: binary("/"); break;
    case Kind::Pow: binary("^"); break;
    case Kind::Neg:
      out << "(-";
      print_node(*n.lhs, out);
      out << ')';
      break;
    case Kind::Exp: call("exp"); break;
    case Kind::Log: call("log"); break;
    case Kind::Sqrt: call("sqrt"); break;
  }
}

bool equal_nodes(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Kind::Number: return a.value == b.value;
    case Kind::Variable: return true;
    case Kind::Parameter: return a.index == b.index;
    default: break;
  }
  if (!equal_nodes(*a.lhs, *b.lhs)) return false;
  if (a.rhs || b.rhs) return a.rhs && b.rhs && equal_nodes(*a.rhs, *b.rhs);
  return true;
}

}  // namespace

Expr Expr::parse(std::string_view text, int dim) {
  if (dim < 0) throw ParseError(0, "negative parameter dimension");
  Parser parser(text, dim);
  NodePtr root = parser.parse();
  return Expr(std::move(root), dim, parser.max_param());
}

double Expr::eval(double x, std::span<const double> theta) const {
  if (theta.size() < static_cast<std::size_t>(dim_)) {
    throw Error(ErrorCode::Config, "parameter vector shorter than expression dimension");
  }
  return checked(eval_node(*root_, x, theta));
}

void Expr::grad_theta(double x, std::span<const double> theta, std::span<double> out, double rel_step) const {
  std::vector<double> probe(theta.begin(), theta.end());
  for (std::size_t k = 0; k < static_cast<std::size_t>(dim_); ++k) {
    const double h = rel_step * std::max(1.0, std::abs(theta[k]));
    probe[k] = theta[k] + h;
    const double up = eval(x, probe);
    probe[k] = theta[k] - h;
    const double down = eval(x, probe);
    probe[k] = theta[k];
    out[k] = (up - down) / (2.0 * h);
  }
}

std::vector<double> Expr::grad_theta(double x, std::span<const double> theta, double rel_step) const {
  std::vector<double> g(static_cast<std::size_t>(dim_));
  grad_theta(x, theta, g, rel_step);
  return g;
}

std::string Expr::to_string() const {
  std::ostringstream out;
  print_node(*root_, out);
  return out.str();
}

bool operator==(const Expr& a, const Expr& b) { return a.dim_ == b.dim_ && equal_nodes(*a.root_, *b.root_); }

}  // namespace kldesign
