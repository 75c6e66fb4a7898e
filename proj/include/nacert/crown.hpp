#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "nacert/hyperrectangle.hpp"
#include "nacert/interval.hpp"
#include "nacert/network.hpp"
#include "nacert/taylor.hpp"

namespace nacert {

// Pre-activation intervals, one vector pair per layer.
struct NeuronBounds {
  std::vector<Vector> lower;
  std::vector<Vector> upper;

  std::size_t layers() const { return lower.size(); }
  Interval at(std::size_t k, Eigen::Index i) const { return {lower[k][i], upper[k][i]}; }
};

// Affine bounds on all outputs of a network over a box.
struct AffineBounds {
  Hyperrectangle box;
  Matrix A_low, A_up;
  Vector b_low, b_up;
};

// Affine upper bound Lambda x + beta of some linear function of the network.
struct LinearBound {
  Matrix Lambda;
  Vector beta;
};

// Scalar bounds lower_slope*z + lower_intercept <= sigma(z) <= upper_slope*z + upper_intercept on [l, u].
struct ActivationRelaxation {
  double upper_slope = 1.0, upper_intercept = 0.0;
  double lower_slope = 1.0, lower_intercept = 0.0;
};

inline ActivationRelaxation relax_activation(Activation kind, double l, double u, double leak = 0.0) {
  if (l > u) throw std::invalid_argument("relax_activation: lower bound exceeds upper bound");
  if (kind == Activation::Identity) return {};
  const double a = kind == Activation::ReLU ? 0.0 : leak;
  if (u <= 0.0) return {a, 0.0, a, 0.0};
  if (l >= 0.0) return {};
  // unstable: chord above, one of the two linear pieces below
  const double s = (u - a * l) / (u - l);
  ActivationRelaxation r;
  r.upper_slope = s;
  r.upper_intercept = u - s * u;
  r.lower_slope = u > -l ? 1.0 : a;
  r.lower_intercept = 0.0;
  return r;
}

// Interval bound propagation.
inline NeuronBounds ibp_bounds(const Network& net, const Hyperrectangle& box) {
  if (box.dim() != net.input_dim()) throw DimensionError("box dimension does not match the network input");
  NeuronBounds nb;
  Vector c = box.center(), r = box.radius();
  for (const auto& layer : net.layers()) {
    Vector zc = layer.affine(c);
    Vector zr = layer.weight.cwiseAbs() * r;
    Vector lo = zc - zr, hi = zc + zr;
    nb.lower.push_back(lo);
    nb.upper.push_back(hi);
    if (layer.activation != Activation::Identity) {
      for (Eigen::Index i = 0; i < lo.size(); ++i) {
        lo[i] = layer.activate(lo[i]);
        hi[i] = layer.activate(hi[i]);
      }
    }
    c = 0.5 * (lo + hi);
    r = 0.5 * (hi - lo);
  }
  return nb;
}

namespace detail {

// Upper bound of C z_k over the box, where z_k is the pre-activation of
// layer k (0-based). Activations of layers < k are relaxed with nb.
inline LinearBound backward_to_input(const Network& net, std::size_t k, const NeuronBounds& nb, const Matrix& C) {
  const auto& layers = net.layers();
  Matrix Lambda = C;
  Vector beta = Vector::Zero(C.rows());
  for (std::size_t t = k + 1; t-- > 0;) {
    const Layer& L = layers[t];
    if (L.has_bias()) beta.noalias() += Lambda * L.bias;
    Lambda = Lambda * L.weight;  // now acts on h_{t-1}
    if (t == 0) break;
    const Layer& prev = layers[t - 1];
    if (prev.activation == Activation::Identity) continue;
    for (Eigen::Index i = 0; i < Lambda.cols(); ++i) {
      const auto r = relax_activation(prev.activation, nb.lower[t - 1][i], nb.upper[t - 1][i], prev.slope);
      if (r.upper_slope == 1.0 && r.lower_slope == 1.0 && r.upper_intercept == 0.0 && r.lower_intercept == 0.0)
        continue;
      for (Eigen::Index q = 0; q < Lambda.rows(); ++q) {
        double& lam = Lambda(q, i);
        if (lam >= 0.0) {
          beta[q] += lam * r.upper_intercept;
          lam *= r.upper_slope;
        } else {
          beta[q] += lam * r.lower_intercept;
          lam *= r.lower_slope;
        }
      }
    }
  }
  return {std::move(Lambda), std::move(beta)};
}

// max over the box of Lambda x + beta, per row.
inline Vector concretize_upper(const LinearBound& b, const Hyperrectangle& box) {
  return b.Lambda * box.center() + b.Lambda.cwiseAbs() * box.radius() + b.beta;
}

}  // namespace detail

// Sound pre-activation intervals. With tight = true each nonlinear layer is
// bounded by a backward pass over the layers before it (intersected with the
// interval-propagation result).
inline NeuronBounds pre_activation_bounds(const Network& net, const Hyperrectangle& box, bool tight = false) {
  NeuronBounds nb = ibp_bounds(net, box);
  if (!tight) return nb;
  const auto& layers = net.layers();
  for (std::size_t k = 1; k < layers.size(); ++k) {
    if (layers[k].activation == Activation::Identity) continue;
    const auto out = layers[k].out_dim();
    Matrix C(2 * out, out);
    C << Matrix::Identity(out, out), -Matrix::Identity(out, out);
    const Vector ub = detail::concretize_upper(detail::backward_to_input(net, k, nb, C), box);
    for (Eigen::Index i = 0; i < out; ++i) {
      nb.upper[k][i] = std::min(nb.upper[k][i], ub[i]);
      nb.lower[k][i] = std::max(nb.lower[k][i], -ub[out + i]);
      if (nb.lower[k][i] > nb.upper[k][i]) nb.lower[k][i] = nb.upper[k][i];
    }
  }
  return nb;
}

// Upper bound Lambda x + beta of C N(x) on the box the neuron bounds belong to.
inline LinearBound backward_upper(const Network& net, const NeuronBounds& nb, const Matrix& C) {
  if (static_cast<std::size_t>(C.cols()) != net.output_dim()) throw DimensionError("objective has wrong width");
  return detail::backward_to_input(net, net.depth() - 1, nb, C);
}

inline AffineBounds backward_crown(const Network& net, const Hyperrectangle& box, bool tight = false) {
  const NeuronBounds nb = pre_activation_bounds(net, box, tight);
  const auto m = static_cast<Eigen::Index>(net.output_dim());
  Matrix C(2 * m, m);
  C << Matrix::Identity(m, m), -Matrix::Identity(m, m);
  const LinearBound b = backward_upper(net, nb, C);
  return {box, -b.Lambda.bottomRows(m), b.Lambda.topRows(m), -b.beta.tail(m), b.beta.head(m)};
}

// Per output: [min of the lower face, max of the upper face] over the box.
inline std::vector<Interval> concretize(const AffineBounds& bounds) {
  const Vector c = bounds.box.center(), r = bounds.box.radius();
  const Vector lo = bounds.A_low * c - bounds.A_low.cwiseAbs() * r + bounds.b_low;
  const Vector hi = bounds.A_up * c + bounds.A_up.cwiseAbs() * r + bounds.b_up;
  std::vector<Interval> out(static_cast<std::size_t>(lo.size()));
  for (Eigen::Index j = 0; j < lo.size(); ++j) out[static_cast<std::size_t>(j)] = {lo[j], hi[j]};
  return out;
}

inline CertifiedEnclosure linearize_network(const Network& net, const Hyperrectangle& box, bool tight = false) {
  const AffineBounds b = backward_crown(net, box, tight);
  return {box, b.A_low, b.A_up, b.b_low, b.b_up};
}

// Enclosure of output j alone; cheaper than linearizing every output.
inline EnclosureRow linearize_network_output(const Network& net, std::size_t j, const Hyperrectangle& box,
                                             bool tight = false) {
  const NeuronBounds nb = pre_activation_bounds(net, box, tight);
  Matrix C = Matrix::Zero(2, static_cast<Eigen::Index>(net.output_dim()));
  C(0, static_cast<Eigen::Index>(j)) = 1.0;
  C(1, static_cast<Eigen::Index>(j)) = -1.0;
  const LinearBound b = backward_upper(net, nb, C);
  return {-b.Lambda.row(1).transpose(), b.Lambda.row(0).transpose(), -b.beta[1], b.beta[0]};
}

}  // namespace nacert
