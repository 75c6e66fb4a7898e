#pragma once

#include <cctype>
#include <charconv>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "nacert/errors.hpp"
#include "nacert/expr.hpp"

namespace nacert {

// Recursive-descent parser for the minimal infix grammar used by system
// configs:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' exponent)?
//   primary := number | name | func '(' expr ')' | '(' expr ')'
//   func    := sqrt | cbrt | sin | cos | exp
//
// Exponents must be rational constants, e.g. `x^2`, `x^(1/3)`, `x^-1`.
// `-x^2` parses as `-(x^2)`.
class ExpressionParser {
 public:
  explicit ExpressionParser(std::vector<std::string> variables, std::map<std::string, double> constants = {})
      : variables_(std::move(variables)), constants_(std::move(constants)) {
    constants_.emplace("pi", std::numbers::pi);
  }

  Expr parse(std::string_view text) const {
    State s{text, 0};
    Expr e = parse_expr(s);
    skip_ws(s);
    if (s.pos != s.text.size()) fail(s, "unexpected trailing input");
    return e;
  }

 private:
  struct State {
    std::string_view text;
    std::size_t pos;
  };

  [[noreturn]] static void fail(const State& s, const std::string& what) {
    throw ParseError(what + " in '" + std::string(s.text) + "'", 1, s.pos + 1);
  }

  static void skip_ws(State& s) {
    while (s.pos < s.text.size() && std::isspace(static_cast<unsigned char>(s.text[s.pos]))) ++s.pos;
  }

  static bool accept(State& s, char c) {
    skip_ws(s);
    if (s.pos < s.text.size() && s.text[s.pos] == c) {
      ++s.pos;
      return true;
    }
    return false;
  }

  static void expect(State& s, char c) {
    if (!accept(s, c)) fail(s, std::string("expected '") + c + "'");
  }

  Expr parse_expr(State& s) const {
    Expr lhs = parse_term(s);
    for (;;) {
      if (accept(s, '+'))
        lhs = lhs + parse_term(s);
      else if (accept(s, '-'))
        lhs = lhs - parse_term(s);
      else
        return lhs;
    }
  }

  Expr parse_term(State& s) const {
    Expr lhs = parse_unary(s);
    for (;;) {
      if (accept(s, '*'))
        lhs = lhs * parse_unary(s);
      else if (accept(s, '/'))
        lhs = lhs / parse_unary(s);
      else
        return lhs;
    }
  }

  Expr parse_unary(State& s) const {
    if (accept(s, '-')) return -parse_unary(s);
    if (accept(s, '+')) return parse_unary(s);
    return parse_power(s);
  }

  Expr parse_power(State& s) const {
    Expr base = parse_primary(s);
    if (accept(s, '^')) return pow(base, parse_exponent(s));
    return base;
  }

  static std::string_view scan_number(State& s) {
    skip_ws(s);
    const std::size_t start = s.pos;
    while (s.pos < s.text.size() &&
           (std::isdigit(static_cast<unsigned char>(s.text[s.pos])) || s.text[s.pos] == '.'))
      ++s.pos;
    if (s.pos < s.text.size() && (s.text[s.pos] == 'e' || s.text[s.pos] == 'E')) {
      std::size_t p = s.pos + 1;
      if (p < s.text.size() && (s.text[p] == '+' || s.text[p] == '-')) ++p;
      if (p < s.text.size() && std::isdigit(static_cast<unsigned char>(s.text[p]))) {
        s.pos = p;
        while (s.pos < s.text.size() && std::isdigit(static_cast<unsigned char>(s.text[s.pos]))) ++s.pos;
      }
    }
    return s.text.substr(start, s.pos - start);
  }

  // Decimal literal as an exact rational (no exponent notation).
  static Rational decimal_rational(State& s, std::string_view lit) {
    long num = 0, den = 1;
    bool frac = false;
    for (char c : lit) {
      if (c == '.') {
        if (frac) fail(s, "malformed number");
        frac = true;
        continue;
      }
      if (!std::isdigit(static_cast<unsigned char>(c))) fail(s, "exponent must be a rational constant");
      num = num * 10 + (c - '0');
      if (frac) den *= 10;
      if (den > 1'000'000'000L || num > 1'000'000'000L) fail(s, "exponent literal too long");
    }
    return {num, den};
  }

  Rational parse_exponent(State& s) const {
    skip_ws(s);
    if (accept(s, '-')) return -parse_exponent(s);
    if (accept(s, '+')) return parse_exponent(s);
    if (accept(s, '(')) {
      Rational r = parse_rational_expr(s);
      expect(s, ')');
      return r;
    }
    const auto lit = scan_number(s);
    if (lit.empty()) fail(s, "exponent must be a rational constant");
    return decimal_rational(s, lit);
  }

  Rational parse_rational_expr(State& s) const {
    Rational lhs = parse_rational_term(s);
    for (;;) {
      if (accept(s, '+'))
        lhs = lhs + parse_rational_term(s);
      else if (accept(s, '-'))
        lhs = lhs - parse_rational_term(s);
      else
        return lhs;
    }
  }

  Rational parse_rational_term(State& s) const {
    Rational lhs = parse_rational_atom(s);
    for (;;) {
      if (accept(s, '*')) {
        lhs = lhs * parse_rational_atom(s);
      } else if (accept(s, '/')) {
        const Rational d = parse_rational_atom(s);
        if (d.num == 0) fail(s, "division by zero in exponent");
        lhs = lhs / d;
      } else {
        return lhs;
      }
    }
  }

  Rational parse_rational_atom(State& s) const {
    if (accept(s, '-')) return -parse_rational_atom(s);
    if (accept(s, '(')) {
      Rational r = parse_rational_expr(s);
      expect(s, ')');
      return r;
    }
    const auto lit = scan_number(s);
    if (lit.empty()) fail(s, "exponent must be a rational constant");
    return decimal_rational(s, lit);
  }

  Expr parse_primary(State& s) const {
    skip_ws(s);
    if (s.pos >= s.text.size()) fail(s, "unexpected end of expression");
    const char c = s.text[s.pos];
    if (accept(s, '(')) {
      Expr e = parse_expr(s);
      expect(s, ')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const auto lit = scan_number(s);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), v);
      if (ec != std::errc() || ptr != lit.data() + lit.size()) fail(s, "malformed number");
      return Expr::constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = s.pos;
      while (s.pos < s.text.size() &&
             (std::isalnum(static_cast<unsigned char>(s.text[s.pos])) || s.text[s.pos] == '_'))
        ++s.pos;
      const std::string name(s.text.substr(start, s.pos - start));
      skip_ws(s);
      if (s.pos < s.text.size() && s.text[s.pos] == '(') {
        static const std::map<std::string, Op> funcs = {
            {"sqrt", Op::Sqrt}, {"cbrt", Op::Cbrt}, {"sin", Op::Sin}, {"cos", Op::Cos}, {"exp", Op::Exp}};
        const auto it = funcs.find(name);
        if (it == funcs.end()) fail(s, "unknown function '" + name + "'");
        expect(s, '(');
        Expr arg = parse_expr(s);
        expect(s, ')');
        return Expr::unary(it->second, arg);
      }
      for (std::size_t i = 0; i < variables_.size(); ++i)
        if (variables_[i] == name) return Expr::variable(i);
      if (const auto it = constants_.find(name); it != constants_.end()) return Expr::constant(it->second);
      fail(s, "unknown identifier '" + name + "'");
    }
    fail(s, std::string("unexpected character '") + c + "'");
  }

  std::vector<std::string> variables_;
  std::map<std::string, double> constants_;
};

}  // namespace nacert
