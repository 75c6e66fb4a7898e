#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nacert/errors.hpp"
#include "nacert/hyperrectangle.hpp"
#include "nacert/interval.hpp"

namespace nacert {

enum class Op { Constant, Variable, Add, Mul, Div, Neg, Pow, Sqrt, Cbrt, Sin, Cos, Exp };

struct Rational {
  long num = 1;
  long den = 1;

  Rational() = default;
  Rational(long n, long d = 1) : num(n), den(d) {  // NOLINT(google-explicit-constructor)
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    if (den < 0) num = -num, den = -den;
    const long g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) num /= g, den /= g;
  }

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool is_integer() const { return den == 1; }

  friend Rational operator+(Rational a, Rational b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
  friend Rational operator-(Rational a, Rational b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
  friend Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
  friend Rational operator/(Rational a, Rational b) { return {a.num * b.den, a.den * b.num}; }
  friend Rational operator-(Rational a) { return {-a.num, a.den}; }
  friend bool operator==(Rational a, Rational b) { return a.num == b.num && a.den == b.den; }
};

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  Op op = Op::Constant;
  double value = 0.0;       // Constant
  std::size_t index = 0;    // Variable
  Rational exponent{1, 1};  // Pow
  std::vector<ExprPtr> children;
};

// Immutable handle to an expression tree. Builders fold constants and drop
// neutral elements so that derivative trees stay small.
class Expr {
 public:
  Expr() : node_(make_constant(0.0)) {}
  explicit Expr(ExprPtr node) : node_(std::move(node)) {}

  static Expr constant(double v) { return Expr(make_constant(v)); }
  static Expr variable(std::size_t i) {
    auto n = std::make_shared<ExprNode>();
    n->op = Op::Variable;
    n->index = i;
    return Expr(std::move(n));
  }

  Op op() const { return node_->op; }
  const ExprNode& node() const { return *node_; }
  const ExprPtr& ptr() const { return node_; }
  std::size_t arity() const { return node_->children.size(); }
  Expr child(std::size_t i) const { return Expr(node_->children.at(i)); }
  bool is_constant() const { return node_->op == Op::Constant; }
  bool is_constant(double v) const { return is_constant() && node_->value == v; }
  double constant_value() const { return node_->value; }

  static Expr unary(Op op, const Expr& a) {
    if (a.is_constant()) {
      const double v = a.constant_value();
      switch (op) {
        case Op::Neg: return constant(-v);
        case Op::Sin: return constant(std::sin(v));
        case Op::Cos: return constant(std::cos(v));
        case Op::Exp: return constant(std::exp(v));
        case Op::Cbrt: return constant(std::cbrt(v));
        case Op::Sqrt:
          if (v >= 0.0) return constant(std::sqrt(v));
          break;
        default: break;
      }
    }
    if (op == Op::Neg && a.op() == Op::Neg) return a.child(0);
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->children = {a.node_};
    return Expr(std::move(n));
  }

  static Expr binary(Op op, const Expr& a, const Expr& b) {
    switch (op) {
      case Op::Add:
        if (a.is_constant() && b.is_constant()) return constant(a.constant_value() + b.constant_value());
        if (a.is_constant(0.0)) return b;
        if (b.is_constant(0.0)) return a;
        break;
      case Op::Mul:
        if (a.is_constant() && b.is_constant()) return constant(a.constant_value() * b.constant_value());
        if (a.is_constant(0.0) || b.is_constant(0.0)) return constant(0.0);
        if (a.is_constant(1.0)) return b;
        if (b.is_constant(1.0)) return a;
        if (a.is_constant(-1.0)) return unary(Op::Neg, b);
        if (b.is_constant(-1.0)) return unary(Op::Neg, a);
        if (b.is_constant()) return binary(Op::Mul, b, a);
        // c1 * (c2 * e) -> (c1 c2) * e
        if (a.is_constant() && b.op() == Op::Mul && b.child(0).is_constant())
          return binary(Op::Mul, constant(a.constant_value() * b.child(0).constant_value()), b.child(1));
        break;
      case Op::Div:
        if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0)
          return constant(a.constant_value() / b.constant_value());
        if (b.is_constant(1.0)) return a;
        if (a.is_constant(0.0) && !(b.is_constant(0.0))) return constant(0.0);
        if (b.is_constant() && b.constant_value() != 0.0) return binary(Op::Mul, constant(1.0 / b.constant_value()), a);
        break;
      default: throw std::invalid_argument("not a binary operator");
    }
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->children = {a.node_, b.node_};
    return Expr(std::move(n));
  }

  static Expr pow(const Expr& a, Rational e);

  friend Expr operator+(const Expr& a, const Expr& b) { return binary(Op::Add, a, b); }
  friend Expr operator-(const Expr& a, const Expr& b) { return binary(Op::Add, a, unary(Op::Neg, b)); }
  friend Expr operator*(const Expr& a, const Expr& b) { return binary(Op::Mul, a, b); }
  friend Expr operator/(const Expr& a, const Expr& b) { return binary(Op::Div, a, b); }
  friend Expr operator-(const Expr& a) { return unary(Op::Neg, a); }
  friend Expr operator+(double a, const Expr& b) { return constant(a) + b; }
  friend Expr operator+(const Expr& a, double b) { return a + constant(b); }
  friend Expr operator-(double a, const Expr& b) { return constant(a) - b; }
  friend Expr operator-(const Expr& a, double b) { return a - constant(b); }
  friend Expr operator*(double a, const Expr& b) { return constant(a) * b; }
  friend Expr operator*(const Expr& a, double b) { return a * constant(b); }
  friend Expr operator/(const Expr& a, double b) { return a / constant(b); }
  friend Expr operator/(double a, const Expr& b) { return constant(a) / b; }

 private:
  static ExprPtr make_constant(double v) {
    auto n = std::make_shared<ExprNode>();
    n->op = Op::Constant;
    n->value = v;
    return n;
  }

  ExprPtr node_;
};

inline double pow_real(double y, Rational e);
inline bool structurally_equal(const Expr& a, const Expr& b);

inline Expr Expr::pow(const Expr& a, Rational e) {
  if (e.num == 0) return constant(1.0);
  if (e == Rational(1)) return a;
  if (a.is_constant()) {
    const double v = a.constant_value();
    const bool ok = (e.den % 2 == 1 || v >= 0.0) && !(e.num < 0 && v == 0.0);
    if (ok) return constant(pow_real(v, e));
  }
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Pow;
  n->exponent = e;
  n->children = {a.node_};
  return Expr(std::move(n));
}

inline Expr pow(const Expr& a, Rational e) { return Expr::pow(a, e); }
inline Expr sqrt(const Expr& a) { return Expr::unary(Op::Sqrt, a); }
inline Expr cbrt(const Expr& a) { return Expr::unary(Op::Cbrt, a); }
inline Expr sin(const Expr& a) { return Expr::unary(Op::Sin, a); }
inline Expr cos(const Expr& a) { return Expr::unary(Op::Cos, a); }
inline Expr exp(const Expr& a) { return Expr::unary(Op::Exp, a); }

// ---------------------------------------------------------------- printing

inline std::string to_string(const Expr& e, std::span<const std::string> names = {}) {
  std::ostringstream os;
  os.precision(17);
  const auto& n = e.node();
  auto sub = [&](std::size_t i) { return to_string(e.child(i), names); };
  switch (n.op) {
    case Op::Constant: os << n.value; break;
    case Op::Variable:
      if (n.index < names.size())
        os << names[n.index];
      else
        os << 'x' << n.index;
      break;
    case Op::Add: os << '(' << sub(0) << " + " << sub(1) << ')'; break;
    case Op::Mul: os << '(' << sub(0) << " * " << sub(1) << ')'; break;
    case Op::Div: os << '(' << sub(0) << " / " << sub(1) << ')'; break;
    case Op::Neg: os << "-(" << sub(0) << ')'; break;
    case Op::Pow:
      os << '(' << sub(0) << ")^";
      if (n.exponent.is_integer())
        os << n.exponent.num;
      else
        os << '(' << n.exponent.num << '/' << n.exponent.den << ')';
      break;
    case Op::Sqrt: os << "sqrt(" << sub(0) << ')'; break;
    case Op::Cbrt: os << "cbrt(" << sub(0) << ')'; break;
    case Op::Sin: os << "sin(" << sub(0) << ')'; break;
    case Op::Cos: os << "cos(" << sub(0) << ')'; break;
    case Op::Exp: os << "exp(" << sub(0) << ')'; break;
  }
  return os.str();
}

// ---------------------------------------------------------------- point evaluation

inline double pow_real(double y, Rational e) {
  if (e.is_integer()) return std::pow(y, static_cast<double>(e.num));
  const double p = e.value();
  if (y >= 0.0) return std::pow(y, p);
  // odd denominator: real root of a negative number
  const double mag = std::pow(-y, p);
  return (e.num % 2 == 0) ? mag : -mag;
}

inline double evaluate(const Expr& e, const Vector& x) {
  const auto& n = e.node();
  switch (n.op) {
    case Op::Constant: return n.value;
    case Op::Variable:
      if (static_cast<Eigen::Index>(n.index) >= x.size()) throw DimensionError("variable index out of range");
      return x[static_cast<Eigen::Index>(n.index)];
    case Op::Add: return evaluate(e.child(0), x) + evaluate(e.child(1), x);
    case Op::Mul: return evaluate(e.child(0), x) * evaluate(e.child(1), x);
    case Op::Neg: return -evaluate(e.child(0), x);
    case Op::Div: {
      const double den = evaluate(e.child(1), x);
      if (den == 0.0) throw DomainError(to_string(e), den, "division by zero");
      return evaluate(e.child(0), x) / den;
    }
    case Op::Pow: {
      const double y = evaluate(e.child(0), x);
      if (!n.exponent.is_integer() && y < 0.0 && n.exponent.den % 2 == 0)
        throw DomainError(to_string(e), y, "even root of a negative number");
      if (n.exponent.num < 0 && y == 0.0) throw DomainError(to_string(e), y, "negative power of zero");
      return pow_real(y, n.exponent);
    }
    case Op::Sqrt: {
      const double y = evaluate(e.child(0), x);
      if (y < 0.0) throw DomainError(to_string(e), y, "square root of a negative number");
      return std::sqrt(y);
    }
    case Op::Cbrt: return std::cbrt(evaluate(e.child(0), x));
    case Op::Sin: return std::sin(evaluate(e.child(0), x));
    case Op::Cos: return std::cos(evaluate(e.child(0), x));
    case Op::Exp: return std::exp(evaluate(e.child(0), x));
  }
  return 0.0;
}

// ---------------------------------------------------------------- interval evaluation

// Range of y^e over an interval, for rational e.
inline Interval pow_interval(const Interval& y, Rational e, const std::string& where = "pow") {
  if (e.num == 0) return {1.0, 1.0};
  if (!e.is_integer() && e.den % 2 == 0 && y.lo < 0.0)
    throw DomainError(where, y.lo, "even root of a possibly negative interval");
  if (e.num < 0 && y.contains_zero()) throw DomainError(where, 0.0, "negative power of an interval containing zero");
  const bool even = (e.num % 2 == 0);  // f(-t) = f(t) when the numerator is even
  const double p = e.value();
  auto mag = [&](double t) { return std::pow(std::abs(t), p); };
  if (even) {
    const double a = std::abs(y.lo), b = std::abs(y.hi);
    const double near = y.contains_zero() ? 0.0 : std::min(a, b);
    const double far = std::max(a, b);
    return p > 0.0 ? Interval{std::pow(near, p), std::pow(far, p)} : Interval{std::pow(far, p), std::pow(near, p)};
  }
  // odd numerator: sign-preserving, monotone on each side of zero
  auto f = [&](double t) { return t >= 0.0 ? mag(t) : -mag(t); };
  if (p > 0.0) return {f(y.lo), f(y.hi)};
  return {f(y.hi), f(y.lo)};  // decreasing on an interval that excludes zero
}

inline Interval evaluate(const Expr& e, std::span<const Interval> x) {
  const auto& n = e.node();
  switch (n.op) {
    case Op::Constant: return {n.value, n.value};
    case Op::Variable:
      if (n.index >= x.size()) throw DimensionError("variable index out of range");
      return x[n.index];
    case Op::Add: return evaluate(e.child(0), x) + evaluate(e.child(1), x);
    case Op::Mul: {
      if (structurally_equal(e.child(0), e.child(1))) return sqr(evaluate(e.child(0), x));
      return evaluate(e.child(0), x) * evaluate(e.child(1), x);
    }
    case Op::Neg: return -evaluate(e.child(0), x);
    case Op::Div: {
      const Interval den = evaluate(e.child(1), x);
      if (den.contains_zero()) throw DomainError(to_string(e), 0.0, "division by an interval containing zero");
      const Interval inv{1.0 / den.hi, 1.0 / den.lo};
      return evaluate(e.child(0), x) * inv;
    }
    case Op::Pow: return pow_interval(evaluate(e.child(0), x), n.exponent, to_string(e));
    case Op::Sqrt: {
      const Interval y = evaluate(e.child(0), x);
      if (y.lo < 0.0) throw DomainError(to_string(e), y.lo, "square root of a possibly negative interval");
      return {std::sqrt(y.lo), std::sqrt(y.hi)};
    }
    case Op::Cbrt: return cbrt(evaluate(e.child(0), x));
    case Op::Sin: return sin(evaluate(e.child(0), x));
    case Op::Cos: return cos(evaluate(e.child(0), x));
    case Op::Exp: return exp(evaluate(e.child(0), x));
  }
  return {};
}

inline Interval evaluate(const Expr& e, const Hyperrectangle& box) {
  std::vector<Interval> x(box.dim());
  for (std::size_t i = 0; i < box.dim(); ++i) x[i] = box.interval(i);
  return evaluate(e, std::span<const Interval>(x));
}

// ---------------------------------------------------------------- symbolic differentiation

inline Expr differentiate(const Expr& e, std::size_t var) {
  const auto& n = e.node();
  switch (n.op) {
    case Op::Constant: return Expr::constant(0.0);
    case Op::Variable: return Expr::constant(n.index == var ? 1.0 : 0.0);
    case Op::Add: return differentiate(e.child(0), var) + differentiate(e.child(1), var);
    case Op::Neg: return -differentiate(e.child(0), var);
    case Op::Mul: {
      const Expr a = e.child(0), b = e.child(1);
      return differentiate(a, var) * b + a * differentiate(b, var);
    }
    case Op::Div: {
      const Expr a = e.child(0), b = e.child(1);
      const Expr da = differentiate(a, var), db = differentiate(b, var);
      if (db.is_constant(0.0)) return da / b;
      return da / b - (a * db) / pow(b, 2);
    }
    case Op::Pow: {
      const Expr a = e.child(0);
      const Expr da = differentiate(a, var);
      if (da.is_constant(0.0)) return Expr::constant(0.0);
      const Rational p = n.exponent;
      return Expr::constant(p.value()) * pow(a, p - Rational(1)) * da;
    }
    case Op::Sqrt: {
      const Expr da = differentiate(e.child(0), var);
      if (da.is_constant(0.0)) return Expr::constant(0.0);
      return da / (2.0 * e);
    }
    case Op::Cbrt: {
      const Expr da = differentiate(e.child(0), var);
      if (da.is_constant(0.0)) return Expr::constant(0.0);
      return da / (3.0 * pow(e, 2));
    }
    case Op::Sin: return cos(e.child(0)) * differentiate(e.child(0), var);
    case Op::Cos: return -(sin(e.child(0)) * differentiate(e.child(0), var));
    case Op::Exp: return e * differentiate(e.child(0), var);
  }
  return Expr::constant(0.0);
}

// ---------------------------------------------------------------- structure queries

inline void collect_variables(const Expr& e, std::set<std::size_t>& out) {
  if (e.op() == Op::Variable) out.insert(e.node().index);
  for (std::size_t i = 0; i < e.arity(); ++i) collect_variables(e.child(i), out);
}

inline bool has_variables(const Expr& e) {
  if (e.op() == Op::Variable) return true;
  for (std::size_t i = 0; i < e.arity(); ++i)
    if (has_variables(e.child(i))) return true;
  return false;
}

namespace detail {
inline void collect_nonlinear(const Expr& e, bool nonlinear, std::set<std::size_t>& out) {
  switch (e.op()) {
    case Op::Constant: return;
    case Op::Variable:
      if (nonlinear) out.insert(e.node().index);
      return;
    case Op::Add:
    case Op::Neg:
      for (std::size_t i = 0; i < e.arity(); ++i) collect_nonlinear(e.child(i), nonlinear, out);
      return;
    case Op::Mul: {
      const bool a = has_variables(e.child(0)), b = has_variables(e.child(1));
      collect_nonlinear(e.child(0), nonlinear || (a && b), out);
      collect_nonlinear(e.child(1), nonlinear || (a && b), out);
      return;
    }
    case Op::Div:
      collect_nonlinear(e.child(0), nonlinear || has_variables(e.child(1)), out);
      collect_nonlinear(e.child(1), true, out);
      return;
    case Op::Pow:
      collect_nonlinear(e.child(0), nonlinear || !(e.node().exponent == Rational(1)), out);
      return;
    default: collect_nonlinear(e.child(0), true, out); return;
  }
}
}  // namespace detail

// Variables that appear beneath a nonlinear operation. A variable outside
// this set enters the expression affinely.
inline std::set<std::size_t> nonlinear_variables(const Expr& e) {
  std::set<std::size_t> out;
  detail::collect_nonlinear(e, false, out);
  return out;
}

inline bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.ptr() == b.ptr()) return true;
  const auto& x = a.node();
  const auto& y = b.node();
  if (x.op != y.op || x.children.size() != y.children.size()) return false;
  if (x.op == Op::Constant && x.value != y.value) return false;
  if (x.op == Op::Variable && x.index != y.index) return false;
  if (x.op == Op::Pow && !(x.exponent == y.exponent)) return false;
  for (std::size_t i = 0; i < x.children.size(); ++i)
    if (!structurally_equal(a.child(i), b.child(i))) return false;
  return true;
}

inline std::size_t node_count(const Expr& e) {
  std::size_t c = 1;
  for (std::size_t i = 0; i < e.arity(); ++i) c += node_count(e.child(i));
  return c;
}

}  // namespace nacert
