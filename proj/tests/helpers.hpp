#pragma once

#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nacert/nacert.hpp"

namespace testing_support {

using namespace nacert;

inline std::string data_path(const std::string& rel) { return std::string(NACERT_DATA_DIR) + "/" + rel; }

inline DynamicalSystem make_system(const std::vector<std::string>& vars, const std::vector<std::string>& outputs,
                                   const std::vector<std::pair<double, double>>& bounds, double eps = 0.1) {
  nlohmann::json doc;
  doc["name"] = "fixture";
  doc["variables"] = vars;
  doc["outputs"] = outputs;
  nlohmann::json dom = nlohmann::json::array();
  for (auto [lo, hi] : bounds) dom.push_back({lo, hi});
  doc["domain"] = dom;
  doc["epsilon"] = eps;
  return parse_system_config(doc);
}

inline Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

inline Hyperrectangle box(std::initializer_list<std::pair<double, double>> b) {
  return Hyperrectangle::from_bounds(std::vector<std::pair<double, double>>(b));
}

inline Layer layer(const Matrix& W, const Vector& b, Activation act, double slope = 0.0) {
  Layer l;
  l.weight = W;
  l.bias = b;
  l.activation = act;
  l.slope = slope;
  return l;
}

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) M(r, c++) = v;
    ++r;
  }
  return M;
}

inline Vector uniform_point(const Hyperrectangle& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vector u(static_cast<Eigen::Index>(b.dim()));
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = U(rng);
  return b.point_at(u);
}

// Random sub-box of `outer` with relative size in [lo_frac, hi_frac] per axis.
inline Hyperrectangle random_subbox(const Hyperrectangle& outer, std::mt19937_64& rng, double lo_frac = 0.01,
                                    double hi_frac = 0.5) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vector lo(static_cast<Eigen::Index>(outer.dim())), hi(lo.size());
  for (std::size_t i = 0; i < outer.dim(); ++i) {
    const double w = outer.width(i) * (lo_frac + (hi_frac - lo_frac) * U(rng));
    const double a = outer.lower(i) + (outer.width(i) - w) * U(rng);
    lo[static_cast<Eigen::Index>(i)] = a;
    hi[static_cast<Eigen::Index>(i)] = a + w;
  }
  return {lo, hi};
}

// Dense network with the given widths; hidden layers use `act`.
inline Network random_network(std::mt19937_64& rng, std::size_t n, const std::vector<std::size_t>& hidden,
                              std::size_t m, Activation act = Activation::ReLU, double slope = 0.1,
                              double scale = 1.0) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<Layer> layers;
  std::size_t in = n;
  auto make = [&](std::size_t out, Activation a) {
    Layer l;
    l.weight = Matrix(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = scale * N(rng) / std::sqrt(double(in));
    l.bias = Vector(static_cast<Eigen::Index>(out));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.3 * N(rng);
    l.activation = a;
    l.slope = a == Activation::LeakyReLU ? slope : 0.0;
    layers.push_back(std::move(l));
    in = out;
  };
  for (auto h : hidden) make(h, act);
  make(m, Activation::Identity);
  return Network(std::move(layers));
}

}  // namespace testing_support
