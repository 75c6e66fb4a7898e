#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nacert/dynamics.hpp"
#include "nacert/parser.hpp"

namespace nacert {

namespace detail {

inline DynamicalSystem make_system(std::string name, std::vector<std::string> vars,
                                   const std::vector<std::string>& outputs,
                                   std::vector<std::pair<double, double>> domain, double eps,
                                   std::optional<double> large_eps = std::nullopt,
                                   const std::map<std::string, double>& constants = {},
                                   TimeKind kind = TimeKind::Continuous) {
  ExpressionParser parser(vars, constants);
  std::vector<Expr> exprs;
  for (const auto& s : outputs) exprs.push_back(parser.parse(s));
  return DynamicalSystem(std::move(name), std::move(vars), std::move(exprs), Hyperrectangle::from_bounds(domain), eps,
                         kind, large_eps);
}

inline std::string normalize_name(const std::string& s) {
  std::string out;
  for (char c : s)
    if (c != '_' && c != '-' && c != ' ') out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

// Parameters of the discrete quadratic map x[k+1] = F(x[k]).
struct QuadraticParams {
  double mu = -0.05;
  double lambda = -1.0;
  double dt = 0.02;
};

// Closed-form flow of x1' = mu x1, x2' = lambda (x2 - x1^2) over time t.
inline DynamicalSystem quadratic_flow(double t, const QuadraticParams& p = {}, double epsilon = 0.1) {
  const double k = p.lambda / (2.0 * p.mu - p.lambda);
  std::map<std::string, double> c = {
      {"e1", std::exp(p.mu * t)}, {"el", std::exp(p.lambda * t)}, {"e2", std::exp(2.0 * p.mu * t)}, {"k", k}};
  return detail::make_system("QuadraticSystem", {"x1", "x2"}, {"x1 * e1", "(x2 + k * x1^2) * el - k * x1^2 * e2"},
                             {{-0.5, 0.5}, {-0.5, 0.5}}, epsilon, std::nullopt, c, TimeKind::Discrete);
}

// The map after `steps` applications of the one-step discrete map (exact:
// the flow has the semigroup property).
inline DynamicalSystem quadratic_steps(int steps, const QuadraticParams& p = {}, double epsilon = 0.1) {
  return quadratic_flow(p.dt * steps, p, epsilon);
}

// Constants used for the spacecraft benchmark (normalized units).
struct SpacecraftParams {
  double mu = 1.0;
  double m0 = 1.0;
  double v_exhaust = 1.0;
};

inline std::vector<DynamicalSystem> builtin_systems() {
  using detail::make_system;
  constexpr double pi = std::numbers::pi;
  std::vector<DynamicalSystem> v;
  v.push_back(make_system("WaterTank", {"x"}, {"1.5 - sqrt(x)"}, {{0.1, 10.0}}, 0.097, 0.007));
  v.push_back(make_system("JetEngine", {"x", "y"}, {"-y - 1.5*x^2 - 0.5*x^3 - 0.1", "3*x - y"},
                          {{-1, 1}, {-1, 1}}, 0.039, 0.012));
  v.push_back(make_system("SteamGovernor", {"x", "y", "z"},
                          {"y", "0.5*z^2*sin(2*x) - sin(x) - 3*y", "-(cos(x) - 1)"}, {{-1, 1}, {-1, 1}, {-1, 1}},
                          0.105, 0.06));
  v.push_back(make_system("Exponential", {"x", "y"}, {"-sin(exp(y^3 + 1)) - y^2", "-x"}, {{-1, 1}, {-1, 1}}, 0.112,
                          0.04));
  v.push_back(make_system("NonLipschitzVectorField1", {"x", "y"}, {"y", "sqrt(x)"}, {{0, 1}, {-1, 1}}, 0.11, 0.03));
  v.push_back(make_system("NonLipschitzVectorField2", {"x", "y"}, {"x^2 + y", "(x^2)^(1/3) - x"}, {{-1, 1}, {-1, 1}},
                          0.081, 0.02));
  v.push_back(make_system("VanDerPolOscillator", {"x1", "x2"}, {"x2", "mu*(1 - x1^2)*x2 - x1"}, {{-3, 3}, {-3, 3}},
                          0.25, std::nullopt, {{"mu", 1.0}}));
  v.push_back(make_system("Sine2D", {"x", "y"}, {"sin(wy*y)", "-sin(wx*x)"}, {{-pi, pi}, {-pi, pi}}, 0.02,
                          std::nullopt, {{"wx", 1.0}, {"wy", 0.5}}));
  v.push_back(make_system("NonlinearOscillator", {"x"}, {"-a*x - b*x^3 + c*sin(x)"}, {{-3, 3}}, 0.165, std::nullopt,
                          {{"a", 1.0}, {"b", 0.5}, {"c", 0.3}}));
  v.push_back(make_system("LorenzAttractor", {"x", "y", "z"},
                          {"sigma*(y - x)", "x*(rho - z) - y", "x*y - beta*z"}, {{-30, 30}, {-30, 30}, {0, 60}}, 0.6,
                          std::nullopt, {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}}));
  const SpacecraftParams sc;
  v.push_back(make_system(
      "LowThrustSpacecraft", {"r", "theta", "v_r", "v_theta", "dm", "T", "alpha"},
      {"v_r", "v_theta / r", "-mu / r^2 + v_theta^2 / r + T*cos(alpha) / (m0 + dm)",
       "-v_r*v_theta / r + T*sin(alpha) / (m0 + dm)", "-T / v_exhaust"},
      {{0.9, 1.1}, {-pi, pi}, {-0.1, 0.1}, {0.9, 1.1}, {0.0, 0.1}, {0.0, 0.1}, {-pi / 2, pi / 2}}, 0.05,
      std::nullopt, {{"mu", sc.mu}, {"m0", sc.m0}, {"v_exhaust", sc.v_exhaust}}));
  v.push_back(quadratic_steps(1));
  return v;
}

// Case-insensitive lookup that ignores underscores, e.g. "water_tank",
// "WaterTank", "nl1".
inline std::optional<DynamicalSystem> find_system(const std::string& name) {
  static const std::map<std::string, std::string> aliases = {
      {"nl1", "nonlipschitzvectorfield1"}, {"nl2", "nonlipschitzvectorfield2"},
      {"vanderpol", "vanderpoloscillator"}, {"vdp", "vanderpoloscillator"},
      {"lorenz", "lorenzattractor"},       {"lts", "lowthrustspacecraft"},
      {"quadratic", "quadraticsystem"},    {"nonlinosc", "nonlinearoscillator"},
      {"nlo", "nonlinearoscillator"},
  };
  std::string key = detail::normalize_name(name);
  if (const auto it = aliases.find(key); it != aliases.end()) key = it->second;
  for (auto& s : builtin_systems())
    if (detail::normalize_name(s.name()) == key) return s;
  return std::nullopt;
}

inline DynamicalSystem lookup_system(const std::string& name) {
  if (auto s = find_system(name)) return *s;
  throw ConfigError("unknown system '" + name + "'");
}

}  // namespace nacert
