#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nacert/dynamics.hpp"
#include "nacert/errors.hpp"
#include "nacert/expr.hpp"
#include "nacert/hyperrectangle.hpp"
#include "nacert/interval.hpp"

namespace nacert {

// ---------------------------------------------------------------- enclosures

// One output row of an enclosure: a_low.x + b_low <= f_j(x) <= a_up.x + b_up.
struct EnclosureRow {
  Vector a_low;
  Vector a_up;
  double b_low = 0.0;
  double b_up = 0.0;

  // Gap between the two faces at the box center plus the spread of the
  // slope difference over the box.
  double width(const Hyperrectangle& box) const {
    const Vector c = box.center();
    const double up = a_up.dot(c) + b_up, lo = a_low.dot(c) + b_low;
    return (up - lo) + (a_up - a_low).cwiseAbs().dot(box.radius());
  }
};

struct CertifiedEnclosure {
  Hyperrectangle box;
  Matrix A_low, A_up;
  Vector b_low, b_up;

  std::size_t output_dim() const { return static_cast<std::size_t>(b_low.size()); }

  EnclosureRow row(std::size_t j) const {
    const auto r = static_cast<Eigen::Index>(j);
    return {A_low.row(r).transpose(), A_up.row(r).transpose(), b_low[r], b_up[r]};
  }

  double width(std::size_t j) const { return row(j).width(box); }

  static CertifiedEnclosure from_rows(const Hyperrectangle& box, const std::vector<EnclosureRow>& rows) {
    const auto m = static_cast<Eigen::Index>(rows.size());
    const auto n = static_cast<Eigen::Index>(box.dim());
    CertifiedEnclosure e{box, Matrix(m, n), Matrix(m, n), Vector(m), Vector(m)};
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& r = rows[static_cast<std::size_t>(j)];
      e.A_low.row(j) = r.a_low.transpose();
      e.A_up.row(j) = r.a_up.transpose();
      e.b_low[j] = r.b_low;
      e.b_up[j] = r.b_up;
    }
    return e;
  }
};

// ---------------------------------------------------------------- scalar relaxations

enum class Elementary { Exp, Sin, Cos, Pow };

// On the stated interval: slope*y + intercept + r_min <= g(y) <= slope*y + intercept + r_max.
struct ScalarRelaxation {
  double slope = 0.0;
  double intercept = 0.0;
  double r_min = 0.0;
  double r_max = 0.0;
};

namespace detail {

struct ScalarFunction {
  Elementary kind;
  Rational p;

  double value(double y) const {
    switch (kind) {
      case Elementary::Exp: return std::exp(y);
      case Elementary::Sin: return std::sin(y);
      case Elementary::Cos: return std::cos(y);
      case Elementary::Pow: return pow_real(y, p);
    }
    return 0.0;
  }
  // Only called where the derivative exists.
  double d1(double y) const {
    switch (kind) {
      case Elementary::Exp: return std::exp(y);
      case Elementary::Sin: return std::cos(y);
      case Elementary::Cos: return -std::sin(y);
      case Elementary::Pow: return p.value() * pow_real(y, p - Rational(1));
    }
    return 0.0;
  }
  Interval range(const Interval& y) const {
    switch (kind) {
      case Elementary::Exp: return exp(y);
      case Elementary::Sin: return sin(y);
      case Elementary::Cos: return cos(y);
      case Elementary::Pow: return pow_interval(y, p);
    }
    return {};
  }
};

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Tangent at y0 plus the exact remainder of a convex (+1) or concave (-1) function.
inline ScalarRelaxation tangent_relaxation(const ScalarFunction& g, const Interval& I, double y0, int curvature) {
  const double g0 = g.value(y0), s = g.d1(y0);
  ScalarRelaxation r{s, g0 - s * y0, 0.0, 0.0};
  auto h = [&](double y) { return g.value(y) - g0 - s * (y - y0); };
  if (curvature > 0) r.r_max = std::max({0.0, h(I.lo), h(I.hi)});
  if (curvature < 0) r.r_min = std::min({0.0, h(I.lo), h(I.hi)});
  return r;
}

// Lagrange remainder from signed bounds on g'', then clipped to the range of g.
inline ScalarRelaxation lagrange_relaxation(const ScalarFunction& g, const Interval& I, double y0,
                                            const Interval& g2) {
  const double g0 = g.value(y0), s = g.d1(y0);
  const double D = std::max(I.hi - y0, y0 - I.lo);
  Interval r{0.5 * std::min(g2.lo, 0.0) * D * D, 0.5 * std::max(g2.hi, 0.0) * D * D};
  const Interval G = g.range(I);
  const double lin_a = s * (I.lo - y0), lin_b = s * (I.hi - y0);
  const Interval lin{g0 + std::min(lin_a, lin_b), g0 + std::max(lin_a, lin_b)};
  r = intersect(r, Interval{G.lo - lin.hi, G.hi - lin.lo});
  return {s, g0 - s * y0, r.lo, r.hi};
}

// Chord slope anchored at y0; the remainder is evaluated exactly at the
// endpoints, the kink at zero and every point where g'(y) equals the slope.
inline ScalarRelaxation chord_relaxation(const ScalarFunction& g, const Interval& I, double y0) {
  const double s = (g.value(I.hi) - g.value(I.lo)) / (I.hi - I.lo);
  const double g0 = g.value(y0);
  std::vector<double> pts = {I.lo, I.hi, y0};
  if (I.contains(0.0)) pts.push_back(0.0);
  const double p = g.p.value();
  if (g.kind == Elementary::Pow && p != 1.0) {
    const Rational pm1 = g.p - Rational(1);
    const double e = 1.0 / pm1.value();
    if (s / p > 0.0) pts.push_back(std::pow(s / p, e));
    const double tau = pow_real(-1.0, pm1);
    if (s / (p * tau) > 0.0) pts.push_back(-std::pow(s / (p * tau), e));
  }
  ScalarRelaxation r{s, g0 - s * y0, 0.0, 0.0};
  for (double y : pts) {
    if (!I.contains(y)) continue;
    const double h = g.value(y) - g0 - s * (y - y0);
    r.r_min = std::min(r.r_min, h);
    r.r_max = std::max(r.r_max, h);
  }
  return r;
}

inline ScalarRelaxation pow_relaxation(const ScalarFunction& g, const Interval& I, double y0) {
  const Rational p = g.p;
  const double pv = p.value();
  if (p.num < 0 && I.contains_zero()) throw DomainError("pow", 0.0, "negative power of an interval containing zero");
  if (p.den % 2 == 0 && I.lo < 0.0) throw DomainError("pow", I.lo, "even root of a possibly negative interval");
  const Rational pm2 = p - Rational(2);
  const double c2 = pv * (pv - 1.0);
  const int pos = sign_of(c2);
  const int neg = sign_of(c2 * pow_real(-1.0, pm2));
  const bool smooth_at_zero = pv >= 1.0;  // g' defined at 0

  if (I.lo >= 0.0) {
    if (y0 == 0.0 && !smooth_at_zero) return chord_relaxation(g, I, y0);
    return tangent_relaxation(g, I, y0, pos);
  }
  if (I.hi <= 0.0) {
    if (y0 == 0.0 && !smooth_at_zero) return chord_relaxation(g, I, y0);
    return tangent_relaxation(g, I, y0, neg);
  }
  if (pv > 1.0 && pos == neg) return tangent_relaxation(g, I, y0, pos);
  if (pv >= 2.0) {
    auto g2 = [&](double y) { return c2 * pow_real(y, pm2); };
    const double a = g2(I.lo), b = g2(I.hi);
    return lagrange_relaxation(g, I, y0, Interval{std::min({a, b, 0.0}), std::max({a, b, 0.0})});
  }
  return chord_relaxation(g, I, y0);
}

}  // namespace detail

// Affine relaxation of g on [lo, hi] anchored at `center`.
inline ScalarRelaxation expand_elementary(Elementary kind, Interval I, double center, Rational exponent = Rational(1)) {
  if (I.lo > I.hi) throw std::invalid_argument("invalid interval: lower bound exceeds upper bound");
  if (kind == Elementary::Pow && exponent.num == 0) return {0.0, 1.0, 0.0, 0.0};
  const detail::ScalarFunction g{kind, exponent};
  I = hull(I, Interval{center, center});
  if (I.is_point()) {
    const double v = g.value(center);
    double s = 0.0;
    if (kind != Elementary::Pow || center != 0.0 || exponent.value() >= 1.0) s = g.d1(center);
    return {s, v - s * center, 0.0, 0.0};
  }
  switch (kind) {
    case Elementary::Exp: return detail::tangent_relaxation(g, I, center, +1);
    case Elementary::Sin:
    case Elementary::Cos: {
      const Interval g2 = kind == Elementary::Sin ? -sin(I) : -cos(I);
      if (g2.lo >= 0.0) return detail::tangent_relaxation(g, I, center, +1);
      if (g2.hi <= 0.0) return detail::tangent_relaxation(g, I, center, -1);
      return detail::lagrange_relaxation(g, I, center, g2);
    }
    case Elementary::Pow: return detail::pow_relaxation(g, I, center);
  }
  return {};
}

// Sqrt and Cbrt are y^(1/2) and y^(1/3).
inline ScalarRelaxation expand_elementary(Op op, Interval I, double center, Rational exponent = Rational(1)) {
  switch (op) {
    case Op::Exp: return expand_elementary(Elementary::Exp, I, center);
    case Op::Sin: return expand_elementary(Elementary::Sin, I, center);
    case Op::Cos: return expand_elementary(Elementary::Cos, I, center);
    case Op::Sqrt: return expand_elementary(Elementary::Pow, I, center, Rational(1, 2));
    case Op::Cbrt: return expand_elementary(Elementary::Pow, I, center, Rational(1, 3));
    case Op::Pow: return expand_elementary(Elementary::Pow, I, center, exponent);
    default: throw std::invalid_argument("not an elementary function node");
  }
}

// ---------------------------------------------------------------- compositional Taylor models

namespace detail {

// node(x) in value + grad.(x - c) + rem for every x in the box; range is a
// sound enclosure of node(x) over the box.
struct TaylorModel {
  double value = 0.0;
  Vector grad;
  Interval rem;
  Interval range;
};

class TaylorBuilder {
 public:
  explicit TaylorBuilder(const Hyperrectangle& box) : c_(box.center()), d_(box.radius()), box_(box) {}

  TaylorModel build(const Expr& e) const {
    TaylorModel t = raw(e);
    finish(t);
    return t;
  }

 private:
  Interval linear_span(const Vector& g) const {
    const double s = g.cwiseAbs().dot(d_);
    return {-s, s};
  }

  // Tighten the remainder with the node range and the range with the model.
  void finish(TaylorModel& t) const {
    const Interval lin = linear_span(t.grad);
    const Interval clip{t.range.lo - (t.value + lin.hi), t.range.hi - (t.value + lin.lo)};
    t.rem = intersect(t.rem, clip);
    t.range = intersect(t.range, Interval{t.value} + lin + t.rem);
  }

  TaylorModel leaf_constant(double v) const {
    return {v, Vector::Zero(c_.size()), Interval{0.0}, Interval{v}};
  }

  // Bound of (ga.d)(gb.d) for d in [-delta, delta].
  Interval quadratic_form(const Vector& ga, const Vector& gb) const {
    Interval q{0.0};
    const Eigen::Index n = ga.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = ga[i] * gb[i] * d_[i] * d_[i];
      q = q + Interval{std::min(t, 0.0), std::max(t, 0.0)};
      for (Eigen::Index k = i + 1; k < n; ++k) {
        const double s = std::abs(ga[i] * gb[k] + ga[k] * gb[i]) * d_[i] * d_[k];
        q = q + Interval{-s, s};
      }
    }
    return q;
  }

  TaylorModel multiply(const TaylorModel& a, const TaylorModel& b, bool square) const {
    TaylorModel t;
    t.value = a.value * b.value;
    t.grad = a.value * b.grad + b.value * a.grad;
    const Interval la = linear_span(a.grad), lb = linear_span(b.grad);
    t.rem = quadratic_form(a.grad, b.grad) + la * b.rem + a.rem * lb + a.rem * b.rem + scale(b.rem, a.value) +
            scale(a.rem, b.value);
    if (square) {
      t.rem = intersect(t.rem, sqr(la + a.rem) + scale(a.rem, 2.0 * a.value));
      t.range = sqr(a.range);
    } else {
      t.range = a.range * b.range;
    }
    return t;
  }

  TaylorModel elementary(const TaylorModel& y, Op op, Rational p) const {
    const ScalarRelaxation s = expand_elementary(op, y.range, y.value, p);
    TaylorModel t;
    t.value = s.slope * y.value + s.intercept;
    t.grad = s.slope * y.grad;
    t.rem = scale(y.rem, s.slope) + Interval{s.r_min, s.r_max};
    switch (op) {
      case Op::Exp: t.range = exp(y.range); break;
      case Op::Sin: t.range = sin(y.range); break;
      case Op::Cos: t.range = cos(y.range); break;
      case Op::Sqrt: t.range = pow_interval(y.range, Rational(1, 2), "sqrt"); break;
      case Op::Cbrt: t.range = cbrt(y.range); break;
      case Op::Pow: t.range = pow_interval(y.range, p, "pow"); break;
      default: break;
    }
    return t;
  }

  TaylorModel raw(const Expr& e) const {
    const auto& n = e.node();
    switch (n.op) {
      case Op::Constant: return leaf_constant(n.value);
      case Op::Variable: {
        const auto i = static_cast<Eigen::Index>(n.index);
        if (i >= c_.size()) throw DimensionError("variable index out of range");
        TaylorModel t{c_[i], Vector::Zero(c_.size()), Interval{0.0}, box_.interval(n.index)};
        t.grad[i] = 1.0;
        return t;
      }
      case Op::Add: {
        const TaylorModel a = build(e.child(0)), b = build(e.child(1));
        return {a.value + b.value, a.grad + b.grad, a.rem + b.rem, a.range + b.range};
      }
      case Op::Neg: {
        const TaylorModel a = build(e.child(0));
        return {-a.value, -a.grad, -a.rem, -a.range};
      }
      case Op::Mul: {
        if (structurally_equal(e.child(0), e.child(1))) {
          const TaylorModel a = build(e.child(0));
          return multiply(a, a, true);
        }
        return multiply(build(e.child(0)), build(e.child(1)), false);
      }
      case Op::Div: {
        const TaylorModel a = build(e.child(0));
        TaylorModel inv = elementary(build(e.child(1)), Op::Pow, Rational(-1));
        finish(inv);
        return multiply(a, inv, false);
      }
      case Op::Pow: return elementary(build(e.child(0)), Op::Pow, n.exponent);
      case Op::Sqrt:
      case Op::Cbrt:
      case Op::Sin:
      case Op::Cos:
      case Op::Exp: return elementary(build(e.child(0)), n.op, Rational(1));
    }
    return leaf_constant(0.0);
  }

  Vector c_, d_;
  const Hyperrectangle& box_;
};

inline EnclosureRow row_from_model(const Vector& center, double value, const Vector& grad, const Interval& rem) {
  const double b = value - grad.dot(center);
  return {grad, grad, b + rem.lo, b + rem.hi};
}

}  // namespace detail

// First-order enclosure of one output by composition over the expression
// tree. Throws DomainError when a node cannot be relaxed on the box.
inline EnclosureRow compositional_expand(const Expr& e, const Hyperrectangle& box) {
  const detail::TaylorBuilder b(box);
  const auto t = b.build(e);
  return detail::row_from_model(box.center(), t.value, t.grad, t.rem);
}

// Whole-expression enclosure f(c) + grad f(c).(x - c) +- M/2 ||delta||_2^2.
inline EnclosureRow lagrange_expand(const DynamicalSystem& sys, std::size_t j, const Hyperrectangle& box) {
  const Vector c = box.center();
  const double M = hessian_bound(sys, j, box);
  const double half = 0.5 * M * box.radius().squaredNorm();
  return detail::row_from_model(c, evaluate_output(sys, j, c), gradient(sys, j, c), Interval{-half, half});
}

// Taylor enclosure of output j on the box: the narrower of the
// compositional and the Lagrange enclosure.
inline EnclosureRow taylor_expand_output(const DynamicalSystem& sys, std::size_t j, const Hyperrectangle& box) {
  if (box.dim() != sys.input_dim()) throw DimensionError("box dimension does not match the system");
  evaluate_output(sys, j, box.center());  // domain errors at the center propagate

  std::optional<EnclosureRow> comp, lag;
  try {
    comp = compositional_expand(sys.output(j), box);
  } catch (const DomainError&) {
  }
  if (!comp || comp->b_up - comp->b_low > 0.0) {
    try {
      lag = lagrange_expand(sys, j, box);
    } catch (const NotTwiceDifferentiable&) {
    } catch (const DomainError&) {
    }
  }
  if (comp && lag) return lag->width(box) < comp->width(box) ? *lag : *comp;
  if (comp) return *comp;
  if (lag) return *lag;
  throw EnclosureUnavailable("no Taylor enclosure for output " + std::to_string(j) + " of '" + sys.name() +
                             "' on this box");
}

inline CertifiedEnclosure taylor_expand(const DynamicalSystem& sys, const Hyperrectangle& box) {
  std::vector<EnclosureRow> rows;
  rows.reserve(sys.output_dim());
  for (std::size_t j = 0; j < sys.output_dim(); ++j) rows.push_back(taylor_expand_output(sys, j, box));
  return CertifiedEnclosure::from_rows(box, rows);
}

// Constant band f(c) +- L ||delta||_inf, valid when L bounds the infinity-norm
// Lipschitz constant of f on the box.
inline CertifiedEnclosure lipschitz_relaxation(const Vector& f_at_center, double L, const Hyperrectangle& box) {
  if (!(L >= 0.0)) throw std::invalid_argument("Lipschitz constant must be nonnegative");
  const double M = box.dim() == 0 ? 0.0 : box.radius().cwiseAbs().maxCoeff();
  const auto m = f_at_center.size();
  const auto n = static_cast<Eigen::Index>(box.dim());
  const Vector spread = Vector::Constant(m, L * M);
  return {box, Matrix::Zero(m, n), Matrix::Zero(m, n), f_at_center - spread, f_at_center + spread};
}

// Sup over the box of sum_i |df_j/dx_i|, from interval evaluation of the
// gradient trees.
inline double lipschitz_bound(const DynamicalSystem& sys, std::size_t j, const Hyperrectangle& box) {
  double L = 0.0;
  for (std::size_t i = 0; i < sys.input_dim(); ++i) {
    const Expr& g = sys.gradient_expr(j, i);
    L += g.is_constant() ? std::abs(g.constant_value()) : evaluate(g, box).mag();
  }
  if (!std::isfinite(L)) throw EnclosureUnavailable("unbounded gradient on the box");
  return L;
}

}  // namespace nacert
