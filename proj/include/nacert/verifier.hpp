#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nacert/crown.hpp"
#include "nacert/dynamics.hpp"
#include "nacert/hyperrectangle.hpp"
#include "nacert/network.hpp"
#include "nacert/taylor.hpp"

namespace nacert {

// ---------------------------------------------------------------- references

// The function the network is compared against: an analytic system, another
// network, or a black box with a known Lipschitz constant.
class Reference {
 public:
  struct Analytic {
    DynamicalSystem sys;
  };
  struct NetworkRef {
    Network net;
    Network bound_net;  // identity runs folded, used for enclosures only
    bool tight = false;
  };
  struct LipschitzRef {
    std::function<Vector(const Vector&)> f;
    double L = 0.0;  // infinity-norm Lipschitz constant valid on the whole domain
    std::size_t n = 0, m = 0;
  };

  static Reference analytic(DynamicalSystem sys) { return Reference(Analytic{std::move(sys)}); }
  static Reference network(Network net, bool tight = false) {
    Network folded = fold_identity_layers(net);
    return Reference(NetworkRef{std::move(net), std::move(folded), tight});
  }
  static Reference lipschitz(std::function<Vector(const Vector&)> f, double L, std::size_t n, std::size_t m) {
    if (!(L >= 0.0)) throw std::invalid_argument("Lipschitz constant must be nonnegative");
    return Reference(LipschitzRef{std::move(f), L, n, m});
  }

  bool is_analytic() const { return std::holds_alternative<Analytic>(v_); }
  bool is_network() const { return std::holds_alternative<NetworkRef>(v_); }
  const DynamicalSystem* system() const {
    const auto* a = std::get_if<Analytic>(&v_);
    return a ? &a->sys : nullptr;
  }

  std::size_t input_dim() const {
    return std::visit(
        [](const auto& r) -> std::size_t {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Analytic>) return r.sys.input_dim();
          if constexpr (std::is_same_v<T, NetworkRef>) return r.net.input_dim();
          if constexpr (std::is_same_v<T, LipschitzRef>) return r.n;
        },
        v_);
  }
  std::size_t output_dim() const {
    return std::visit(
        [](const auto& r) -> std::size_t {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Analytic>) return r.sys.output_dim();
          if constexpr (std::is_same_v<T, NetworkRef>) return r.net.output_dim();
          if constexpr (std::is_same_v<T, LipschitzRef>) return r.m;
        },
        v_);
  }

  Vector evaluate(const Vector& x) const {
    return std::visit(
        [&](const auto& r) -> Vector {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Analytic>) return nacert::evaluate(r.sys, x);
          if constexpr (std::is_same_v<T, NetworkRef>) return forward(r.net, x);
          if constexpr (std::is_same_v<T, LipschitzRef>) return r.f(x);
        },
        v_);
  }

  double evaluate_output(std::size_t j, const Vector& x) const {
    if (const auto* a = std::get_if<Analytic>(&v_)) return nacert::evaluate_output(a->sys, j, x);
    return evaluate(x)[static_cast<Eigen::Index>(j)];
  }

  // Certified linearization of output j on the box. Throws
  // EnclosureUnavailable when none can be built.
  EnclosureRow enclosure(std::size_t j, const Hyperrectangle& box) const {
    if (const auto* a = std::get_if<Analytic>(&v_)) {
      try {
        return taylor_expand_output(a->sys, j, box);
      } catch (const EnclosureUnavailable&) {
        return lipschitz_row(nacert::evaluate_output(a->sys, j, box.center()), lipschitz_bound(a->sys, j, box), box);
      }
    }
    if (const auto* r = std::get_if<NetworkRef>(&v_)) return linearize_network_output(r->bound_net, j, box, r->tight);
    const auto& l = std::get<LipschitzRef>(v_);
    return lipschitz_row(l.f(box.center())[static_cast<Eigen::Index>(j)], l.L, box);
  }

  // Inputs entering output j nonlinearly; nullopt when unknown.
  std::optional<std::set<std::size_t>> nonlinear_inputs(std::size_t j) const {
    if (const auto* a = std::get_if<Analytic>(&v_)) return a->sys.nonlinear_inputs(j);
    return std::nullopt;
  }

 private:
  using Variant = std::variant<Analytic, NetworkRef, LipschitzRef>;
  explicit Reference(Variant v) : v_(std::move(v)) {}

  static EnclosureRow lipschitz_row(double fc, double L, const Hyperrectangle& box) {
    const auto e = lipschitz_relaxation(Vector::Constant(1, fc), L, box);
    return e.row(0);
  }

  Variant v_;
};

// ---------------------------------------------------------------- tasks and verdicts

struct VerificationTask {
  Hyperrectangle box;
  std::size_t j = 0;
  double epsilon = 0.0;
  int depth = 0;
  std::uint64_t seed = 0;  // drives candidate sampling
};

enum class SplitReason { Remainder, Residual };

inline const char* to_string(SplitReason r) { return r == SplitReason::Remainder ? "remainder" : "residual"; }

struct Verdict {
  enum class Kind { Certified, Falsified, Split };
  Kind kind = Kind::Split;
  Vector witness;  // Falsified
  double error = 0.0;
  std::optional<std::size_t> axis;  // Split; empty when no axis may be split
  SplitReason reason = SplitReason::Remainder;
  double score = 0.0;  // Split: the offending width or residual bound

  static Verdict certified() { return {Kind::Certified, {}, 0.0, std::nullopt, SplitReason::Remainder, 0.0}; }
  static Verdict falsified(Vector x, double err) {
    return {Kind::Falsified, std::move(x), err, std::nullopt, SplitReason::Remainder, 0.0};
  }
  static Verdict split(std::optional<std::size_t> axis, SplitReason why, double score) {
    return {Kind::Split, {}, 0.0, axis, why, score};
  }
};

// ---------------------------------------------------------------- splitting

// Halve the box along one axis. The child containing c + (delta - delta')
// comes first; both children share the exact midpoint coordinate.
inline std::pair<Hyperrectangle, Hyperrectangle> split_box(const Hyperrectangle& box, std::size_t axis) {
  if (axis >= box.dim()) throw DimensionError("split axis out of range");
  if (!(box.width(axis) > 0.0)) throw DimensionError("cannot split a degenerate axis");
  const auto a = static_cast<Eigen::Index>(axis);
  const double mid = 0.5 * (box.lower(axis) + box.upper(axis));
  Vector lo = box.lower(), hi = box.upper();
  Vector upper_lo = lo;
  upper_lo[a] = mid;
  Vector lower_hi = hi;
  lower_hi[a] = mid;
  return {Hyperrectangle(upper_lo, hi), Hyperrectangle(lo, lower_hi)};
}

struct SplitPolicy {
  Vector min_width;         // per axis, absolute
  Vector domain_width;      // per axis, for relative comparisons
  int round_robin_every = 4;  // every k-th split in a lineage cycles over all admissible axes
  bool residual_probe = true;  // residual failures: pick the axis by probing both children
};

namespace detail {

inline std::vector<std::size_t> admissible_axes(const Hyperrectangle& box, const SplitPolicy& p,
                                                const std::optional<std::set<std::size_t>>& restrict_to) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < box.dim(); ++i) {
    if (restrict_to && !restrict_to->count(i)) continue;
    if (box.width(i) > 0.0 && box.width(i) >= p.min_width[static_cast<Eigen::Index>(i)]) out.push_back(i);
  }
  return out;
}

inline std::size_t widest_relative(const Hyperrectangle& box, const SplitPolicy& p,
                                   const std::vector<std::size_t>& axes) {
  std::size_t best = axes.front();
  double bw = -1.0;
  for (auto i : axes) {
    const double w = box.width(i) / p.domain_width[static_cast<Eigen::Index>(i)];
    if (w > bw) bw = w, best = i;
  }
  return best;
}

// |f_j(c + h e_i) - f_j(c) - h df_j/dx_i(c)| with h = delta_i / 2.
inline std::size_t rank_by_perturbation(const DynamicalSystem& sys, std::size_t j, const Hyperrectangle& box,
                                        const SplitPolicy& p, const std::vector<std::size_t>& axes) {
  const Vector c = box.center();
  try {
    const double fc = evaluate_output(sys, j, c);
    std::size_t best = axes.front();
    double bs = -1.0, bw = -1.0;
    for (auto i : axes) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double h = 0.25 * box.width(i);
      Vector cp = c;
      cp[ii] += h;
      const double g = evaluate(sys.gradient_expr(j, i), c);
      const double s = std::abs(evaluate_output(sys, j, cp) - fc - g * h);
      const double w = box.width(i) / p.domain_width[ii];
      if (s > bs || (s == bs && w > bw)) bs = s, bw = w, best = i;
    }
    return best;
  } catch (const DomainError&) {
    return widest_relative(box, p, axes);
  }
}

inline std::size_t rank_by_enclosure_probe(const Reference& ref, std::size_t j, const Hyperrectangle& box,
                                           const std::vector<std::size_t>& axes) {
  std::size_t best = axes.front();
  double bs = std::numeric_limits<double>::infinity();
  for (auto i : axes) {
    const auto [a, b] = split_box(box, i);
    double s = 0.0;
    try {
      s = ref.enclosure(j, a).width(a) + ref.enclosure(j, b).width(b);
    } catch (const EnclosureUnavailable&) {
      s = std::numeric_limits<double>::infinity();
    }
    if (s < bs) bs = s, best = i;
  }
  return best;
}

}  // namespace detail

// Axis to split for output j. Remainder splits only consider inputs that
// enter f_j nonlinearly; every `round_robin_every`-th split of a lineage
// cycles through the admissible axes instead of ranking them. Returns
// nullopt when no axis is wide enough to split.
inline std::optional<std::size_t> choose_split_axis(const Reference& ref, std::size_t j, const Hyperrectangle& box,
                                                    int depth, SplitReason reason, const SplitPolicy& policy) {
  const auto nonlinear = ref.nonlinear_inputs(j);
  const bool round_robin = policy.round_robin_every > 0 && depth % policy.round_robin_every == policy.round_robin_every - 1;

  if (nonlinear) {
    const auto nl_axes = detail::admissible_axes(box, policy, nonlinear);
    if (reason == SplitReason::Remainder) {
      if (nl_axes.empty()) return std::nullopt;
      if (round_robin) return nl_axes[static_cast<std::size_t>(depth / policy.round_robin_every) % nl_axes.size()];
      return detail::rank_by_perturbation(*ref.system(), j, box, policy, nl_axes);
    }
    const auto all = detail::admissible_axes(box, policy, std::nullopt);
    if (all.empty()) return std::nullopt;
    if (round_robin) return all[static_cast<std::size_t>(depth / policy.round_robin_every) % all.size()];
    if (nl_axes.empty()) return detail::widest_relative(box, policy, all);
    return detail::rank_by_perturbation(*ref.system(), j, box, policy, nl_axes);
  }

  const auto all = detail::admissible_axes(box, policy, std::nullopt);
  if (all.empty()) return std::nullopt;
  if (round_robin) return all[static_cast<std::size_t>(depth / policy.round_robin_every) % all.size()];
  if (ref.is_network()) return detail::rank_by_enclosure_probe(ref, j, box, all);
  return detail::widest_relative(box, policy, all);
}

// ---------------------------------------------------------------- box check

struct CheckOptions {
  int samples = 8;            // uniform candidates per box
  bool tight_bounds = false;  // backward-propagated intermediate bounds
  double certify_margin = 1e-12;
};

// |ref_j(x) - N_j(x)| > epsilon by direct evaluation.
inline bool confirm_counterexample(const Reference& ref, const Network& net, const Vector& x, std::size_t j,
                                   double epsilon) {
  const double e = std::abs(ref.evaluate_output(j, x) - forward(net, x)[static_cast<Eigen::Index>(j)]);
  return e > epsilon;
}

enum class ResidualSide { Upper, Lower };

// Sound upper bound on max over the box of (a_up.x + b_up - N_j(x)) for the
// upper side or (N_j(x) - a_low.x - b_low) for the lower side.
inline double residual_bound(const Network& net, const EnclosureRow& row, const Hyperrectangle& box, std::size_t j,
                             ResidualSide side, bool tight = false) {
  const Network folded = fold_identity_layers(net);
  const NeuronBounds nb = pre_activation_bounds(folded, box, tight);
  Matrix C = Matrix::Zero(1, static_cast<Eigen::Index>(net.output_dim()));
  C(0, static_cast<Eigen::Index>(j)) = side == ResidualSide::Upper ? -1.0 : 1.0;
  LinearBound b = backward_upper(folded, nb, C);
  if (side == ResidualSide::Upper) {
    b.Lambda.row(0) += row.a_up.transpose();
    b.beta[0] += row.b_up;
  } else {
    b.Lambda.row(0) -= row.a_low.transpose();
    b.beta[0] -= row.b_low;
  }
  return detail::concretize_upper(b, box)[0];
}

inline double residual_bound(const Network& net, const CertifiedEnclosure& enc, std::size_t j, ResidualSide side,
                             bool tight = false) {
  return residual_bound(net, enc.row(j), enc.box, j, side, tight);
}

// Runs the per-box check against a fixed reference and network.
class BoxChecker {
 public:
  BoxChecker(Reference ref, Network net, CheckOptions opts = {})
      : ref_(std::move(ref)), net_(std::move(net)), bound_net_(fold_identity_layers(net_)), opts_(opts) {
    if (ref_.input_dim() != net_.input_dim() || ref_.output_dim() != net_.output_dim())
      throw DimensionError("reference is " + std::to_string(ref_.input_dim()) + "->" +
                           std::to_string(ref_.output_dim()) + ", network is " + std::to_string(net_.input_dim()) +
                           "->" + std::to_string(net_.output_dim()));
  }

  // Affine upper bounds on ref_j - N_j (row 0) and N_j - ref_j (row 1) over the box.
  LinearBound residual_bounds(std::size_t j, const EnclosureRow& row, const Hyperrectangle& box) const {
    const NeuronBounds nb = pre_activation_bounds(bound_net_, box, opts_.tight_bounds);
    Matrix C = Matrix::Zero(2, static_cast<Eigen::Index>(net_.output_dim()));
    C(0, static_cast<Eigen::Index>(j)) = -1.0;
    C(1, static_cast<Eigen::Index>(j)) = 1.0;
    LinearBound b = backward_upper(bound_net_, nb, C);
    b.Lambda.row(0) += row.a_up.transpose();
    b.beta[0] += row.b_up;
    b.Lambda.row(1) -= row.a_low.transpose();
    b.beta[1] -= row.b_low;
    return b;
  }

  // max(rho+, rho-) on a box; infinite when no enclosure is available.
  double residual_score(std::size_t j, const Hyperrectangle& box) const {
    try {
      const EnclosureRow row = ref_.enclosure(j, box);
      return detail::concretize_upper(residual_bounds(j, row, box), box).maxCoeff();
    } catch (const EnclosureUnavailable&) {
      return std::numeric_limits<double>::infinity();
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  const Reference& reference() const { return ref_; }
  const Network& network() const { return net_; }
  const CheckOptions& options() const { return opts_; }

  // Verdict for the task; Split verdicts carry the reason but no axis (see
  // check_box for the version that also picks the axis).
  Verdict check(const VerificationTask& task) const {
    const Hyperrectangle& box = task.box;
    const double eps = task.epsilon;

    EnclosureRow row;
    try {
      row = ref_.enclosure(task.j, box);
    } catch (const EnclosureUnavailable&) {
      return Verdict::split(std::nullopt, SplitReason::Remainder, std::numeric_limits<double>::infinity());
    }
    const double w = row.width(box);
    if (!(w <= eps)) return Verdict::split(std::nullopt, SplitReason::Remainder, w);

    const LinearBound b = residual_bounds(task.j, row, box);
    const Vector rho = detail::concretize_upper(b, box);
    if (rho[0] < eps - opts_.certify_margin && rho[1] < eps - opts_.certify_margin) return Verdict::certified();

    // candidates: maximizers of the two affine residual bounds, center, samples
    const Vector c = box.center(), r = box.radius();
    std::vector<Vector> cands;
    for (int q = 0; q < 2; ++q) {
      Vector x = c;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double a = b.Lambda(q, i);
        if (a > 0.0) x[i] = box.upper()[i];
        if (a < 0.0) x[i] = box.lower()[i];
      }
      cands.push_back(std::move(x));
    }
    cands.push_back(c);
    std::mt19937_64 rng(task.seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int s = 0; s < opts_.samples; ++s) {
      Vector u(c.size());
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = U(rng);
      cands.push_back(box.point_at(u));
    }
    for (const auto& x : cands) {
      double e = 0.0;
      try {
        e = std::abs(ref_.evaluate_output(task.j, x) - forward(net_, x)[static_cast<Eigen::Index>(task.j)]);
      } catch (const DomainError&) {
        continue;
      }
      if (e > eps) return Verdict::falsified(x, e);
    }
    return Verdict::split(std::nullopt, SplitReason::Residual, std::max(rho[0], rho[1]));
  }

 private:
  Reference ref_;
  Network net_;
  Network bound_net_;
  CheckOptions opts_;
};

// Full check of one task including the split axis.
inline Verdict check_box(const BoxChecker& checker, const VerificationTask& task, const SplitPolicy& policy) {
  Verdict v = checker.check(task);
  if (v.kind != Verdict::Kind::Split) return v;
  const bool round_robin =
      policy.round_robin_every > 0 && task.depth % policy.round_robin_every == policy.round_robin_every - 1;
  if (v.reason == SplitReason::Residual && policy.residual_probe && !round_robin) {
    // the enclosure is already tight enough, so the network relaxation is
    // what fails: split where the children's residual bounds drop most (sum,
    // not max: a split that isolates the bad half should win)
    const auto axes = detail::admissible_axes(task.box, policy, std::nullopt);
    if (axes.empty()) return v;
    double best = std::numeric_limits<double>::infinity();
    v.axis = detail::widest_relative(task.box, policy, axes);
    for (auto i : axes) {
      const auto [a, b] = split_box(task.box, i);
      const double s = checker.residual_score(task.j, a) + checker.residual_score(task.j, b);
      if (s < best) best = s, v.axis = i;
    }
    return v;
  }
  v.axis = choose_split_axis(checker.reference(), task.j, task.box, task.depth, v.reason, policy);
  return v;
}

// Convenience overload with the default policy relative to the task box.
inline Verdict check_box(const Reference& ref, const Network& net, const VerificationTask& task,
                         const CheckOptions& opts = {}) {
  const BoxChecker checker(ref, net, opts);
  SplitPolicy policy{task.box.widths() * 1e-4, task.box.widths(), 4, true};
  return check_box(checker, task, policy);
}

}  // namespace nacert
