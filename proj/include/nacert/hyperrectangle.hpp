#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <utility>
#include <vector>

#include "nacert/errors.hpp"
#include "nacert/interval.hpp"

namespace nacert {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Axis-aligned box. Stored by its corners so that splitting produces children
// sharing the exact same boundary coordinate; center/radius are derived.
class Hyperrectangle {
 public:
  Hyperrectangle() = default;

  Hyperrectangle(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size()) throw DimensionError("box corners have different lengths");
    for (Eigen::Index i = 0; i < lower_.size(); ++i)
      if (!(lower_[i] <= upper_[i])) throw DimensionError("box lower corner exceeds upper corner");
  }

  // The weighted L-infinity ball {x : |x - c| <= delta}.
  static Hyperrectangle from_center(const Vector& center, const Vector& radius) {
    if (center.size() != radius.size()) throw DimensionError("center and radius have different lengths");
    if ((radius.array() < 0.0).any()) throw DimensionError("negative box radius");
    return Hyperrectangle(center - radius, center + radius);
  }

  static Hyperrectangle from_bounds(const std::vector<std::pair<double, double>>& bounds) {
    Vector lo(static_cast<Eigen::Index>(bounds.size())), hi(lo.size());
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      lo[static_cast<Eigen::Index>(i)] = bounds[i].first;
      hi[static_cast<Eigen::Index>(i)] = bounds[i].second;
    }
    return Hyperrectangle(std::move(lo), std::move(hi));
  }

  std::size_t dim() const { return static_cast<std::size_t>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Vector center() const { return 0.5 * (lower_ + upper_); }
  Vector radius() const { return 0.5 * (upper_ - lower_); }
  Vector widths() const { return upper_ - lower_; }

  double lower(std::size_t i) const { return lower_[static_cast<Eigen::Index>(i)]; }
  double upper(std::size_t i) const { return upper_[static_cast<Eigen::Index>(i)]; }
  double width(std::size_t i) const { return upper(i) - lower(i); }
  Interval interval(std::size_t i) const { return {lower(i), upper(i)}; }

  double volume() const {
    double v = 1.0;
    for (Eigen::Index i = 0; i < lower_.size(); ++i) v *= upper_[i] - lower_[i];
    return v;
  }

  bool contains(const Vector& x, double slack = 0.0) const {
    if (x.size() != lower_.size()) return false;
    return ((x.array() >= lower_.array() - slack) && (x.array() <= upper_.array() + slack)).all();
  }

  bool contains(const Hyperrectangle& other) const {
    return other.dim() == dim() && (other.lower_.array() >= lower_.array()).all() &&
           (other.upper_.array() <= upper_.array()).all();
  }

  // Volume of the intersection (zero when only boundaries touch).
  double overlap_volume(const Hyperrectangle& other) const {
    double v = 1.0;
    for (Eigen::Index i = 0; i < lower_.size(); ++i) {
      const double w = std::min(upper_[i], other.upper_[i]) - std::max(lower_[i], other.lower_[i]);
      if (w <= 0.0) return 0.0;
      v *= w;
    }
    return v;
  }

  // Point at fractional position u in [0,1]^n.
  Vector point_at(const Vector& u) const { return lower_ + (upper_ - lower_).cwiseProduct(u); }

  friend bool operator==(const Hyperrectangle& a, const Hyperrectangle& b) {
    return a.dim() == b.dim() && a.lower_ == b.lower_ && a.upper_ == b.upper_;
  }

 private:
  Vector lower_;
  Vector upper_;
};

}  // namespace nacert
