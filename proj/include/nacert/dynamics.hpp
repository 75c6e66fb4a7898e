#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nacert/errors.hpp"
#include "nacert/expr.hpp"
#include "nacert/hyperrectangle.hpp"
#include "nacert/parser.hpp"

namespace nacert {

// Only affects report wording: x' = f(x) versus x[k+1] = f(x[k]).
enum class TimeKind { Continuous, Discrete };

inline const char* to_string(TimeKind k) { return k == TimeKind::Continuous ? "continuous" : "discrete"; }

// f : X -> R^m given as one expression tree per output. Derivative trees are
// built once at construction; the object is immutable afterwards and cheap to
// copy.
class DynamicalSystem {
 public:
  DynamicalSystem(std::string name, std::vector<std::string> variables, std::vector<Expr> outputs,
                  Hyperrectangle domain, double default_epsilon, TimeKind time_kind = TimeKind::Continuous,
                  std::optional<double> large_epsilon = std::nullopt)
  {
    auto data = std::make_shared<Data>();
    auto& d = *data;
    d.name = std::move(name);
    d.variables = std::move(variables);
    d.outputs = std::move(outputs);
    d.domain = std::move(domain);
    d.default_epsilon = default_epsilon;
    d.large_epsilon = large_epsilon;
    d.time_kind = time_kind;

    const std::size_t n = d.variables.size();
    if (d.domain.dim() != n) throw DimensionError("domain dimension does not match the number of variables");
    for (std::size_t i = 0; i < n; ++i)
      if (!(d.domain.width(i) > 0.0)) throw DimensionError("domain radius must be strictly positive");
    if (d.outputs.empty()) throw DimensionError("system has no outputs");
    for (const auto& e : d.outputs) {
      std::set<std::size_t> vars;
      collect_variables(e, vars);
      if (!vars.empty() && *vars.rbegin() >= n) throw DimensionError("output references an unknown variable");
    }
    if (!(default_epsilon > 0.0)) throw ConfigError("default epsilon must be positive");

    d.gradient.resize(d.outputs.size());
    d.hessian.resize(d.outputs.size());
    for (std::size_t j = 0; j < d.outputs.size(); ++j) {
      d.gradient[j].reserve(n);
      for (std::size_t i = 0; i < n; ++i) d.gradient[j].push_back(differentiate(d.outputs[j], i));
      d.hessian[j].resize(n * n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = i; k < n; ++k) {
          d.hessian[j][i * n + k] = differentiate(d.gradient[j][i], k);
          d.hessian[j][k * n + i] = d.hessian[j][i * n + k];
        }
      d.nonlinear.push_back(nonlinear_variables(d.outputs[j]));
    }
    data_ = std::move(data);
  }

  const std::string& name() const { return data_->name; }
  std::size_t input_dim() const { return data_->variables.size(); }
  std::size_t output_dim() const { return data_->outputs.size(); }
  const std::vector<std::string>& variable_names() const { return data_->variables; }
  const std::vector<Expr>& outputs() const { return data_->outputs; }
  const Expr& output(std::size_t j) const { return data_->outputs.at(j); }
  const Hyperrectangle& domain() const { return data_->domain; }
  double default_epsilon() const { return data_->default_epsilon; }
  std::optional<double> large_epsilon() const { return data_->large_epsilon; }
  TimeKind time_kind() const { return data_->time_kind; }

  const Expr& gradient_expr(std::size_t j, std::size_t i) const { return data_->gradient.at(j).at(i); }
  const Expr& hessian_expr(std::size_t j, std::size_t i, std::size_t k) const {
    return data_->hessian.at(j).at(i * input_dim() + k);
  }
  const std::set<std::size_t>& nonlinear_inputs(std::size_t j) const { return data_->nonlinear.at(j); }

 private:
  struct Data {
    std::string name;
    std::vector<std::string> variables;
    std::vector<Expr> outputs;
    Hyperrectangle domain;
    double default_epsilon = 0.0;
    std::optional<double> large_epsilon;
    TimeKind time_kind = TimeKind::Continuous;
    std::vector<std::vector<Expr>> gradient;
    std::vector<std::vector<Expr>> hessian;
    std::vector<std::set<std::size_t>> nonlinear;
  };
  std::shared_ptr<const Data> data_;
};

inline void check_input(const DynamicalSystem& sys, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != sys.input_dim())
    throw DimensionError("input has length " + std::to_string(x.size()) + ", system '" + sys.name() + "' expects " +
                         std::to_string(sys.input_dim()));
}

inline Vector evaluate(const DynamicalSystem& sys, const Vector& x) {
  check_input(sys, x);
  Vector y(static_cast<Eigen::Index>(sys.output_dim()));
  for (std::size_t j = 0; j < sys.output_dim(); ++j) y[static_cast<Eigen::Index>(j)] = evaluate(sys.output(j), x);
  return y;
}

inline double evaluate_output(const DynamicalSystem& sys, std::size_t j, const Vector& x) {
  check_input(sys, x);
  return evaluate(sys.output(j), x);
}

// Exact partial derivatives from the symbolic gradient trees. Throws
// DomainError naming the derivative node at a non-differentiable point.
inline Matrix jacobian(const DynamicalSystem& sys, const Vector& x) {
  check_input(sys, x);
  Matrix J(static_cast<Eigen::Index>(sys.output_dim()), static_cast<Eigen::Index>(sys.input_dim()));
  for (std::size_t j = 0; j < sys.output_dim(); ++j)
    for (std::size_t i = 0; i < sys.input_dim(); ++i)
      J(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = evaluate(sys.gradient_expr(j, i), x);
  return J;
}

inline Vector gradient(const DynamicalSystem& sys, std::size_t j, const Vector& x) {
  check_input(sys, x);
  Vector g(static_cast<Eigen::Index>(sys.input_dim()));
  for (std::size_t i = 0; i < sys.input_dim(); ++i) g[static_cast<Eigen::Index>(i)] = evaluate(sys.gradient_expr(j, i), x);
  return g;
}

// Per output, the inputs that enter nonlinearly.
inline std::vector<std::set<std::size_t>> dependency_graph(const DynamicalSystem& sys) {
  std::vector<std::set<std::size_t>> g;
  g.reserve(sys.output_dim());
  for (std::size_t j = 0; j < sys.output_dim(); ++j) g.push_back(sys.nonlinear_inputs(j));
  return g;
}

// Upper bound on the spectral norm of the Hessian of output j over the box:
// interval-evaluate every second derivative, take elementwise magnitudes and
// use ||H||_2 <= sqrt(||H||_1 ||H||_inf).
inline double hessian_bound(const DynamicalSystem& sys, std::size_t j, const Hyperrectangle& box) {
  const std::size_t n = sys.input_dim();
  if (box.dim() != n) throw DimensionError("box dimension does not match the system");
  std::vector<Interval> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = box.interval(i);
  Matrix H = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  try {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = i; k < n; ++k) {
        const Expr& e = sys.hessian_expr(j, i, k);
        if (e.is_constant()) {
          H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = std::abs(e.constant_value());
        } else {
          H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
              evaluate(e, std::span<const Interval>(x)).mag();
        }
        H(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
            H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      }
  } catch (const DomainError& err) {
    throw NotTwiceDifferentiable(std::string("output ") + std::to_string(j) + " of '" + sys.name() +
                                 "' is not twice differentiable on the box: " + err.what());
  }
  if (!H.allFinite())
    throw NotTwiceDifferentiable("unbounded second derivative for output " + std::to_string(j) + " of '" +
                                 sys.name() + "'");
  const double norm1 = H.colwise().sum().maxCoeff();
  const double norm_inf = H.rowwise().sum().maxCoeff();
  return std::sqrt(norm1 * norm_inf);
}

// ---------------------------------------------------------------- config files

// {
//   "name": "...", "variables": ["x", "y"], "outputs": ["-y - 1.5*x^2", "3*x - y"],
//   "domain": [[-1, 1], [-1, 1]], "epsilon": 0.039,
//   "time": "continuous", "constants": {"mu": 1.0}, "large_epsilon": 0.012
// }
inline DynamicalSystem parse_system_config(const nlohmann::json& doc) {
  try {
    const auto name = doc.at("name").get<std::string>();
    const auto vars = doc.at("variables").get<std::vector<std::string>>();
    std::map<std::string, double> constants;
    if (doc.contains("constants")) constants = doc.at("constants").get<std::map<std::string, double>>();
    ExpressionParser parser(vars, constants);
    std::vector<Expr> outputs;
    for (const auto& s : doc.at("outputs")) outputs.push_back(parser.parse(s.get<std::string>()));
    std::vector<std::pair<double, double>> bounds;
    for (const auto& b : doc.at("domain")) {
      if (!b.is_array() || b.size() != 2) throw ConfigError("domain entries must be [lower, upper] pairs");
      bounds.emplace_back(b[0].get<double>(), b[1].get<double>());
    }
    TimeKind kind = TimeKind::Continuous;
    if (doc.contains("time")) {
      const auto t = doc.at("time").get<std::string>();
      if (t == "discrete")
        kind = TimeKind::Discrete;
      else if (t != "continuous")
        throw ConfigError("time must be 'continuous' or 'discrete'");
    }
    std::optional<double> large;
    if (doc.contains("large_epsilon")) large = doc.at("large_epsilon").get<double>();
    return DynamicalSystem(name, vars, std::move(outputs), Hyperrectangle::from_bounds(bounds),
                           doc.at("epsilon").get<double>(), kind, large);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid system config: ") + e.what());
  }
}

inline DynamicalSystem load_system_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open system config '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("system config '") + path + "': " + e.what());
  }
  return parse_system_config(doc);
}

}  // namespace nacert
