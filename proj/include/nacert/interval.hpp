#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

namespace nacert {

// Closed real interval [lo, hi]. Plain round-to-nearest arithmetic; callers
// that compare against sampled values use a small absolute slack.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  constexpr Interval() = default;
  constexpr Interval(double v) : lo(v), hi(v) {}  // NOLINT(google-explicit-constructor)
  constexpr Interval(double l, double h) : lo(l), hi(h) {}

  constexpr double width() const { return hi - lo; }
  constexpr double mid() const { return 0.5 * (lo + hi); }
  constexpr double mag() const { return std::max(std::abs(lo), std::abs(hi)); }
  constexpr bool contains(double v) const { return lo <= v && v <= hi; }
  constexpr bool contains_zero() const { return lo <= 0.0 && 0.0 <= hi; }
  constexpr bool is_point() const { return lo == hi; }
  constexpr bool empty() const { return lo > hi; }

  friend constexpr bool operator==(const Interval&, const Interval&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Interval& v) {
  return os << '[' << v.lo << ", " << v.hi << ']';
}

inline Interval hull(const Interval& a, const Interval& b) {
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

// Intersection of two intervals that are both known to contain the same set.
// If rounding makes them disjoint the narrower one wins.
inline Interval intersect(const Interval& a, const Interval& b) {
  Interval r{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
  if (r.empty()) return a.width() <= b.width() ? a : b;
  return r;
}

inline Interval operator+(const Interval& a, const Interval& b) { return {a.lo + b.lo, a.hi + b.hi}; }
inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }
inline Interval operator-(const Interval& a, const Interval& b) { return {a.lo - b.hi, a.hi - b.lo}; }

inline Interval operator*(const Interval& a, const Interval& b) {
  const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
  return {std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4})};
}

inline Interval scale(const Interval& a, double s) {
  return s >= 0.0 ? Interval{a.lo * s, a.hi * s} : Interval{a.hi * s, a.lo * s};
}

inline Interval sqr(const Interval& a) {
  if (a.lo >= 0.0) return {a.lo * a.lo, a.hi * a.hi};
  if (a.hi <= 0.0) return {a.hi * a.hi, a.lo * a.lo};
  return {0.0, std::max(a.lo * a.lo, a.hi * a.hi)};
}

inline Interval exp(const Interval& a) { return {std::exp(a.lo), std::exp(a.hi)}; }
inline Interval cbrt(const Interval& a) { return {std::cbrt(a.lo), std::cbrt(a.hi)}; }

// Range of sin over [lo, hi].
inline Interval sin(const Interval& a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (a.width() >= two_pi) return {-1.0, 1.0};
  double lo = std::min(std::sin(a.lo), std::sin(a.hi));
  double hi = std::max(std::sin(a.lo), std::sin(a.hi));
  // maxima at pi/2 + 2k pi, minima at -pi/2 + 2k pi
  const double kmax = std::ceil((a.lo - std::numbers::pi / 2) / two_pi);
  if (std::numbers::pi / 2 + two_pi * kmax <= a.hi) hi = 1.0;
  const double kmin = std::ceil((a.lo + std::numbers::pi / 2) / two_pi);
  if (-std::numbers::pi / 2 + two_pi * kmin <= a.hi) lo = -1.0;
  return {lo, hi};
}

inline Interval cos(const Interval& a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (a.width() >= two_pi) return {-1.0, 1.0};
  double lo = std::min(std::cos(a.lo), std::cos(a.hi));
  double hi = std::max(std::cos(a.lo), std::cos(a.hi));
  const double kmax = std::ceil(a.lo / two_pi);
  if (two_pi * kmax <= a.hi) hi = 1.0;
  const double kmin = std::ceil((a.lo - std::numbers::pi) / two_pi);
  if (std::numbers::pi + two_pi * kmin <= a.hi) lo = -1.0;
  return {lo, hi};
}

}  // namespace nacert
