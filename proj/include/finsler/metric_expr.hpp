#pragma once

// Expression language for Finsler functions F(x, y).
//
//   expr     := term (('+' | '-') term)*
//   term     := factor (('*' | '/') factor)*
//   factor   := '-' factor | base ('^' exponent)?
//   base     := number | xk | yk | '(' expr ')' | fn '(' expr ')'
//   fn       := sqrt | exp | log | sin | cos | abs
//   exponent := number | '(' ['+' | '-'] number ['/' number] ')'
//
// Variables are 1-based: x1..xn are chart coordinates, y1..yn tangent components.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "finsler/error.hpp"
#include "finsler/jet.hpp"

namespace finsler {

enum class ExprFn { Sqrt, Exp, Log, Sin, Cos, Abs };

inline const char* fn_name(ExprFn fn) {
  switch (fn) {
    case ExprFn::Sqrt: return "sqrt";
    case ExprFn::Exp: return "exp";
    case ExprFn::Log: return "log";
    case ExprFn::Sin: return "sin";
    case ExprFn::Cos: return "cos";
    case ExprFn::Abs: return "abs";
  }
  return "?";
}

/// Exponent literal: sign * numerator / denominator, kept in source form for printing.
struct Exponent {
  bool negative = false;
  std::string numerator;
  std::string denominator;  // empty when not a fraction
  double value = 0.0;

  bool is_integer() const { return value == std::floor(value) && std::abs(value) <= 64; }
  bool operator==(const Exponent& o) const {
    return negative == o.negative && numerator == o.numerator && denominator == o.denominator;
  }
};

struct ExprNode {
  enum class Kind { Number, XVar, YVar, Add, Sub, Mul, Div, Neg, Pow, Call };

  Kind kind = Kind::Number;
  double number = 0.0;
  std::string text;  // number literal as written
  int index = 0;     // 0-based variable index
  ExprFn fn = ExprFn::Sqrt;
  Exponent exponent;
  std::shared_ptr<const ExprNode> lhs, rhs;  // rhs unused for unary kinds

  static bool equal(const ExprNode& a, const ExprNode& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::Number: return a.number == b.number;
      case Kind::XVar:
      case Kind::YVar: return a.index == b.index;
      case Kind::Neg: return equal(*a.lhs, *b.lhs);
      case Kind::Call: return a.fn == b.fn && equal(*a.lhs, *b.lhs);
      case Kind::Pow: return a.exponent == b.exponent && equal(*a.lhs, *b.lhs);
      default: return equal(*a.lhs, *b.lhs) && equal(*a.rhs, *b.rhs);
    }
  }
};

namespace detail {

template <class T>
T apply_fn(ExprFn fn, const T& u) {
  using std::abs, std::cos, std::exp, std::log, std::sin, std::sqrt;
  if constexpr (std::is_floating_point_v<T>) {
    if (fn == ExprFn::Sqrt && u < 0.0) throw EvaluationError("sqrt of negative value");
    if (fn == ExprFn::Log && !(u > 0.0)) throw EvaluationError("log of non-positive value");
  }
  switch (fn) {
    case ExprFn::Sqrt: return sqrt(u);
    case ExprFn::Exp: return exp(u);
    case ExprFn::Log: return log(u);
    case ExprFn::Sin: return sin(u);
    case ExprFn::Cos: return cos(u);
    case ExprFn::Abs: return abs(u);
  }
  return u;
}

template <class T>
T apply_pow(const T& u, const Exponent& e) {
  if constexpr (std::is_floating_point_v<T>) {
    if (!e.is_integer() && u < 0.0) throw EvaluationError("non-integer power of negative value");
    if (e.value < 0.0 && u == 0.0) throw EvaluationError("negative power of zero");
    return std::pow(u, static_cast<T>(e.value));
  } else {
    return pow(u, e.value);
  }
}

class ExprParser {
 public:
  ExprParser(std::string_view src, int dimension, int line, int column)
      : src_(src), dim_(dimension), line_(line), col_(column) {}

  std::shared_ptr<const ExprNode> parse() {
    skip_space();
    if (at_end()) fail("empty expression");
    auto e = expr();
    skip_space();
    if (!at_end()) fail(std::string("unexpected '") + peek() + "'");
    return e;
  }

 private:
  using NodePtr = std::shared_ptr<const ExprNode>;

  bool at_end() const { return pos_ >= src_.size(); }
  char peek() const { return at_end() ? '\0' : src_[pos_]; }
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }
  void skip_space() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) advance();
  }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, col_); }
  void expect(char c) {
    skip_space();
    if (peek() != c) fail(std::string("expected '") + c + "'" + (at_end() ? " at end of input" : ""));
    advance();
  }

  static NodePtr binary(ExprNode::Kind k, NodePtr l, NodePtr r) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
  }

  NodePtr expr() {
    auto lhs = term();
    while (true) {
      skip_space();
      char c = peek();
      if (c != '+' && c != '-') return lhs;
      advance();
      lhs = binary(c == '+' ? ExprNode::Kind::Add : ExprNode::Kind::Sub, lhs, term());
    }
  }

  NodePtr term() {
    auto lhs = factor();
    while (true) {
      skip_space();
      char c = peek();
      if (c != '*' && c != '/') return lhs;
      advance();
      lhs = binary(c == '*' ? ExprNode::Kind::Mul : ExprNode::Kind::Div, lhs, factor());
    }
  }

  NodePtr factor() {
    skip_space();
    if (peek() == '-') {
      advance();
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::Neg;
      n->lhs = factor();
      return n;
    }
    auto b = base();
    skip_space();
    if (peek() != '^') return b;
    advance();
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::Pow;
    n->lhs = b;
    n->exponent = exponent();
    return n;
  }

  std::string number_text() {
    skip_space();
    const std::size_t start = pos_;
    bool digits = false;
    while (std::isdigit(static_cast<unsigned char>(peek()))) advance(), digits = true;
    if (peek() == '.') {
      advance();
      while (std::isdigit(static_cast<unsigned char>(peek()))) advance(), digits = true;
    }
    if (!digits) fail("expected a number");
    if (peek() == 'e' || peek() == 'E') {
      const std::size_t save = pos_;
      const int save_col = col_;
      advance();
      if (peek() == '+' || peek() == '-') advance();
      if (!std::isdigit(static_cast<unsigned char>(peek()))) {
        pos_ = save;
        col_ = save_col;
      } else {
        while (std::isdigit(static_cast<unsigned char>(peek()))) advance();
      }
    }
    return std::string(src_.substr(start, pos_ - start));
  }

  Exponent exponent() {
    skip_space();
    Exponent e;
    if (peek() != '(') {
      e.numerator = number_text();
      e.value = std::stod(e.numerator);
      return e;
    }
    advance();
    skip_space();
    if (peek() == '+' || peek() == '-') {
      e.negative = peek() == '-';
      advance();
    }
    e.numerator = number_text();
    e.value = std::stod(e.numerator);
    skip_space();
    if (peek() == '/') {
      advance();
      const int col = col_;
      e.denominator = number_text();
      const double den = std::stod(e.denominator);
      if (den == 0.0) throw ParseError("zero denominator in exponent", line_, col);
      e.value /= den;
    }
    if (e.negative) e.value = -e.value;
    expect(')');
    return e;
  }

  NodePtr base() {
    skip_space();
    const char c = peek();
    if (c == '(') {
      advance();
      auto e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::Number;
      n->text = number_text();
      n->number = std::stod(n->text);
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const int col = col_;
      const std::size_t start = pos_;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') advance();
      const std::string name(src_.substr(start, pos_ - start));
      static const std::pair<const char*, ExprFn> kFns[] = {{"sqrt", ExprFn::Sqrt}, {"exp", ExprFn::Exp},
                                                            {"log", ExprFn::Log},   {"sin", ExprFn::Sin},
                                                            {"cos", ExprFn::Cos},   {"abs", ExprFn::Abs}};
      for (const auto& [fname, fn] : kFns)
        if (name == fname) {
          expect('(');
          auto n = std::make_shared<ExprNode>();
          n->kind = ExprNode::Kind::Call;
          n->fn = fn;
          n->lhs = expr();
          expect(')');
          return n;
        }
      if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'y') &&
          name.find_first_not_of("0123456789", 1) == std::string::npos && name[1] != '0') {
        const int k = std::stoi(name.substr(1));
        if (k > dim_)
          throw ParseError("dimension mismatch: '" + name + "' exceeds dimension " + std::to_string(dim_), line_, col);
        auto n = std::make_shared<ExprNode>();
        n->kind = name[0] == 'x' ? ExprNode::Kind::XVar : ExprNode::Kind::YVar;
        n->index = k - 1;
        return n;
      }
      throw ParseError("undeclared variable '" + name + "'", line_, col);
    }
    if (at_end()) fail("unexpected end of input");
    fail(std::string("unexpected '") + c + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int dim_;
  int line_;
  int col_;
};

// Precedence used by the printer: sum < product < unary < power < atom.
inline int precedence(const ExprNode& n) {
  switch (n.kind) {
    case ExprNode::Kind::Add:
    case ExprNode::Kind::Sub: return 1;
    case ExprNode::Kind::Mul:
    case ExprNode::Kind::Div: return 2;
    case ExprNode::Kind::Neg: return 3;
    case ExprNode::Kind::Pow: return 4;
    default: return 5;
  }
}

inline void print(const ExprNode& n, std::string& out) {
  auto wrapped = [&](const ExprNode& child, bool paren) {
    if (paren) out += '(';
    print(child, out);
    if (paren) out += ')';
  };
  switch (n.kind) {
    case ExprNode::Kind::Number:
      if (!n.text.empty()) {
        out += n.text;
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", n.number);
        out += buf;
      }
      return;
    case ExprNode::Kind::XVar: out += "x" + std::to_string(n.index + 1); return;
    case ExprNode::Kind::YVar: out += "y" + std::to_string(n.index + 1); return;
    case ExprNode::Kind::Call:
      out += fn_name(n.fn);
      out += '(';
      print(*n.lhs, out);
      out += ')';
      return;
    case ExprNode::Kind::Neg:
      out += '-';
      wrapped(*n.lhs, precedence(*n.lhs) < 3);
      return;
    case ExprNode::Kind::Pow: {
      wrapped(*n.lhs, precedence(*n.lhs) < 5);
      out += '^';
      const auto& e = n.exponent;
      if (!e.negative && e.denominator.empty()) {
        out += e.numerator;
      } else {
        out += '(';
        if (e.negative) out += '-';
        out += e.numerator;
        if (!e.denominator.empty()) out += "/" + e.denominator;
        out += ')';
      }
      return;
    }
    default: {
      const int p = precedence(n);
      const char* op = n.kind == ExprNode::Kind::Add   ? " + "
                       : n.kind == ExprNode::Kind::Sub ? " - "
                       : n.kind == ExprNode::Kind::Mul ? "*"
                                                       : "/";
      wrapped(*n.lhs, precedence(*n.lhs) < p);
      out += op;
      // operators are left-associative: a right operand of equal precedence keeps its parentheses
      wrapped(*n.rhs, precedence(*n.rhs) <= p);
      return;
    }
  }
}

template <class T>
T evaluate(const ExprNode& n, std::span<const T> x, std::span<const T> y) {
  switch (n.kind) {
    case ExprNode::Kind::Number: return T(n.number);
    case ExprNode::Kind::XVar: return x[static_cast<std::size_t>(n.index)];
    case ExprNode::Kind::YVar: return y[static_cast<std::size_t>(n.index)];
    case ExprNode::Kind::Add: return evaluate(*n.lhs, x, y) + evaluate(*n.rhs, x, y);
    case ExprNode::Kind::Sub: return evaluate(*n.lhs, x, y) - evaluate(*n.rhs, x, y);
    case ExprNode::Kind::Mul: return evaluate(*n.lhs, x, y) * evaluate(*n.rhs, x, y);
    case ExprNode::Kind::Div: {
      T den = evaluate(*n.rhs, x, y);
      if constexpr (std::is_floating_point_v<T>) {
        if (den == 0.0) throw EvaluationError("division by zero");
      }
      return evaluate(*n.lhs, x, y) / den;
    }
    case ExprNode::Kind::Neg: return -evaluate(*n.lhs, x, y);
    case ExprNode::Kind::Pow: return apply_pow(evaluate(*n.lhs, x, y), n.exponent);
    case ExprNode::Kind::Call: return apply_fn(n.fn, evaluate(*n.lhs, x, y));
  }
  return T(0.0);
}

inline bool uses_y(const ExprNode& n) {
  if (n.kind == ExprNode::Kind::YVar) return true;
  return (n.lhs && uses_y(*n.lhs)) || (n.rhs && uses_y(*n.rhs));
}

}  // namespace detail

/// Parsed metric expression over x1..xn, y1..yn.
class MetricExpr {
 public:
  /// Parses `source`; `line`/`column` locate its first character for error messages.
  static MetricExpr parse(std::string_view source, int dimension, int line = 1, int column = 1) {
    if (dimension < 1) throw ParseError("dimension must be positive", line, column);
    MetricExpr e;
    e.dim_ = dimension;
    e.root_ = detail::ExprParser(source, dimension, line, column).parse();
    return e;
  }

  int dimension() const noexcept { return dim_; }
  const ExprNode& root() const { return *root_; }
  bool uses_y() const { return detail::uses_y(*root_); }

  std::string to_string() const {
    std::string out;
    detail::print(*root_, out);
    return out;
  }

  template <class T>
  T evaluate(std::span<const T> x, std::span<const T> y) const {
    T v = detail::evaluate(*root_, x, y);
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(v)) throw EvaluationError("expression evaluated to a non-finite value");
    } else {
      if (!std::isfinite(v.value())) throw EvaluationError("expression evaluated to a non-finite value");
    }
    return v;
  }

  friend bool operator==(const MetricExpr& a, const MetricExpr& b) {
    return a.dim_ == b.dim_ && ExprNode::equal(*a.root_, *b.root_);
  }

 private:
  int dim_ = 0;
  std::shared_ptr<const ExprNode> root_;
};

inline MetricExpr parse_metric(std::string_view source, int dimension) {
  return MetricExpr::parse(source, dimension);
}

}  // namespace finsler
