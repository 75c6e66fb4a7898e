#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nacert/nacert.hpp"

namespace fs = std::filesystem;
using namespace nacert;

namespace {

std::string data_dir() {
  if (const char* env = std::getenv("NACERT_DATA_DIR")) return env;
#ifdef NACERT_DATA_DIR
  return NACERT_DATA_DIR;
#else
  return "data";
#endif
}

bool looks_like_path(const std::string& s) {
  return s.find('/') != std::string::npos || s.ends_with(".json");
}

DynamicalSystem resolve_system(const std::string& name) {
  if (looks_like_path(name) || fs::exists(name)) return load_system_config(name);
  if (auto sys = find_system(name)) return *sys;
  const fs::path local = fs::path(data_dir()) / "systems" / (name + ".json");
  if (fs::exists(local)) return load_system_config(local.string());
  std::string known;
  for (const auto& s : builtin_systems()) known += " " + s.name();
  throw ConfigError("unknown system '" + name + "'; built-in systems:" + known);
}

std::string resolve_weights(const std::string& name) {
  if (fs::exists(name)) return name;
  if (looks_like_path(name)) throw ConfigError("weight file '" + name + "' does not exist");
  const fs::path dir = fs::path(data_dir()) / "weights";
  std::string stem = name;
  const fs::path aliases = dir / "aliases.json";
  if (fs::exists(aliases)) {
    const auto doc = read_json(aliases.string());
    if (doc.contains(name)) stem = doc.at(name).get<std::string>();
  }
  const fs::path p = dir / (stem + ".json");
  if (!fs::exists(p)) throw ConfigError("no weight file for '" + name + "' (looked for " + p.string() + ")");
  return p.string();
}

struct RunOptions {
  std::string system;
  std::string weights;
  std::string koopman;
  std::string epsilon;
  int workers = 1;
  std::vector<int> grid;
  double min_width = 1e-4;  // relative to the domain width
  int max_depth = 60;
  std::uint64_t seed = 0;
  std::string mode = "exhaustive";
  bool tight = false;
  bool no_probe = false;
  double time_limit = 0.0;
  std::vector<std::size_t> outputs;
  std::string report;
  std::string regions;
  int last_step = -1;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--system", o.system, "built-in system name or system config file");
  cmd->add_option("--weights", o.weights, "weight file, or a name under the data directory");
  cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--grid", o.grid, "initial cells per axis")->delimiter(',');
  cmd->add_option("--min-width", o.min_width, "smallest box width, relative to the domain width")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-depth", o.max_depth, "maximum split depth")->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", o.seed, "seed for counterexample sampling");
  cmd->add_option("--mode", o.mode, "exhaustive or early-stop")
      ->check(CLI::IsMember({"exhaustive", "early-stop"}));
  cmd->add_flag("--tight-bounds", o.tight, "backward bounds for hidden layers");
  cmd->add_flag("--no-residual-probe", o.no_probe, "split residual failures by the Taylor-error ranking only");
  cmd->add_option("--time-limit", o.time_limit, "seconds per verification run, 0 = none")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--outputs", o.outputs, "output indices to verify (default all)")->delimiter(',');
  cmd->add_option("--report", o.report, "write a JSON report");
}

PartitionConfig make_config(const RunOptions& o, const Hyperrectangle& domain) {
  PartitionConfig c;
  c.workers = o.workers;
  c.grid = o.grid;
  c.min_width = Vector(domain.widths() * o.min_width);
  c.max_depth = o.max_depth;
  c.seed = o.seed;
  c.mode = o.mode == "early-stop" ? SearchMode::EarlyStop : SearchMode::Exhaustive;
  c.time_limit = o.time_limit;
  c.outputs = o.outputs;
  c.check.tight_bounds = o.tight;
  c.residual_probe = !o.no_probe;
  return c;
}

double parse_epsilon(const std::string& s, const DynamicalSystem& sys) {
  if (s.empty() || s == "small" || s == "default") return sys.default_epsilon();
  if (s == "large") {
    if (!sys.large_epsilon()) throw ConfigError("system '" + sys.name() + "' has no large-network epsilon");
    return *sys.large_epsilon();
  }
  double v = 0.0;
  std::size_t used = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !(v > 0.0)) throw ConfigError("epsilon must be a positive number, 'small' or 'large'");
  return v;
}

struct Loaded {
  DynamicalSystem sys;
  Network net;
};

Loaded load_run(const RunOptions& o) {
  if (o.system.empty()) throw ConfigError("--system is required");
  if (o.weights.empty()) throw ConfigError("--weights is required");
  auto sys = resolve_system(o.system);
  auto net = load_weights(resolve_weights(o.weights));
  if (net.input_dim() != sys.input_dim() || net.output_dim() != sys.output_dim())
    throw DimensionError("network is " + std::to_string(net.input_dim()) + " -> " + std::to_string(net.output_dim()) +
                         ", system " + sys.name() + " is " + std::to_string(sys.input_dim()) + " -> " +
                         std::to_string(sys.output_dim()));
  return {std::move(sys), std::move(net)};
}

void print_summary(const std::string& name, const Network& net, const CoverageReport& rep) {
  std::printf("%-22s %3s %3s %10s %10s %14s %10s %10s %8s %6s\n", "system", "n", "m", "epsilon", "params",
              "certified(%)", "time(s)", "boxes", "splits", "cex");
  std::printf("%-22s %3zu %3zu %10.4g %10zu %14.4f %10.2f %10zu %8zu %6zu%s\n", name.c_str(), rep.domain.dim(),
              rep.output_count, rep.epsilon, net.parameter_count(), 100.0 * rep.certified_fraction, rep.wall_time,
              rep.boxes_checked, rep.splits, rep.counterexamples.size(), rep.partial ? "  (partial)" : "");
  const std::size_t show = std::min<std::size_t>(rep.counterexamples.size(), 5);
  for (std::size_t k = 0; k < show; ++k) {
    const auto& c = rep.counterexamples[k];
    std::ostringstream os;
    os << c.x.transpose();
    std::printf("  counterexample: output %zu at [%s], |f - N| = %.6g\n", c.j, os.str().c_str(), c.error);
  }
  if (rep.counterexamples.size() > show) std::printf("  ... %zu more\n", rep.counterexamples.size() - show);
}

int run_koopman(const RunOptions& o) {
  const auto model = load_koopman(o.koopman);
  QuadraticParams p = model.params;
  const double eps = o.epsilon.empty() ? 0.1 : parse_epsilon(o.epsilon, quadratic_steps(0, p));
  const auto kr = verify_koopman(model, eps, make_config(o, quadratic_steps(0, p).domain()), o.last_step);
  std::printf("%5s %8s %14s %10s %6s\n", "step", "time", "certified(%)", "time(s)", "cex");
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t t = 0; t < kr.steps.size(); ++t) {
    const auto& r = kr.steps[t];
    std::printf("%5zu %8.3f %14.4f %10.2f %6zu\n", t, static_cast<double>(t) * p.dt, 100.0 * r.certified_fraction,
                r.wall_time, r.counterexamples.size());
    auto js = report_to_json(r);
    js["step"] = t;
    steps.push_back(std::move(js));
  }
  std::printf("all steps: certified %.4f%%, %zu counterexamples, %.2f s\n", 100.0 * kr.certified_fraction,
              kr.counterexamples, kr.wall_time);
  if (!o.report.empty())
    write_json({{"version", 1},
                {"koopman", true},
                {"epsilon", eps},
                {"horizon", model.horizon},
                {"certified_fraction", kr.certified_fraction},
                {"counterexamples", kr.counterexamples},
                {"wall_time", kr.wall_time},
                {"steps", std::move(steps)}},
               o.report);
  if (kr.counterexamples > 0) return 2;
  return kr.certified_fraction >= 1.0 ? 0 : 3;
}

SweepResult run_sweep(const RunOptions& o, double lo, double hi, double tol, double probe_limit) {
  const auto [sys, net] = load_run(o);
  if (hi <= 0.0) hi = sys.default_epsilon();
  if (lo <= 0.0) lo = hi / 20.0;
  const auto res = sweep_epsilon(Reference::analytic(sys), net, sys.domain(), lo, hi, make_config(o, sys.domain()),
                                 tol, probe_limit);
  std::printf("%10s %10s %14s %6s %10s\n", "epsilon", "result", "certified(%)", "cex", "time(s)");
  for (const auto& p : res.probes)
    std::printf("%10.6g %10s %14.4f %6zu %10.2f\n", p.epsilon, p.certified ? "certified" : "failed",
                100.0 * p.certified_fraction, p.counterexamples, p.wall_time);
  std::printf("smallest certified epsilon: %.6g", res.best_certified);
  if (res.largest_failed > 0.0) std::printf(" (largest failed %.6g)", res.largest_failed);
  std::printf("\n");
  if (!o.report.empty()) {
    nlohmann::json probes = nlohmann::json::array();
    for (const auto& p : res.probes)
      probes.push_back({{"epsilon", p.epsilon},
                        {"certified", p.certified},
                        {"certified_fraction", p.certified_fraction},
                        {"counterexamples", p.counterexamples},
                        {"wall_time", p.wall_time}});
    write_json({{"version", 1},
                {"system", sys.name()},
                {"best_certified", res.best_certified},
                {"largest_failed", res.largest_failed},
                {"tolerance", tol},
                {"probes", std::move(probes)}},
               o.report);
  }
  return res;
}

int cmd_verify(const RunOptions& o) {
  if (!o.koopman.empty()) return run_koopman(o);
  if (o.epsilon == "sweep") {
    run_sweep(o, 0.0, 0.0, 0.05, o.time_limit);
    return 0;
  }
  const auto [sys, net] = load_run(o);
  const double eps = parse_epsilon(o.epsilon, sys);
  const auto rep = verify_domain(Reference::analytic(sys), net, sys.domain(), eps, make_config(o, sys.domain()));
  print_summary(sys.name(), net, rep);
  if (!o.regions.empty()) export_regions(rep, o.regions);
  if (!o.report.empty()) {
    auto j = report_to_json(rep, o.regions.empty());
    j["system"] = sys.name();
    if (!o.regions.empty()) j["region_file"] = fs::absolute(o.regions).string();
    write_json(j, o.report);
  }
  return exit_code(rep);
}

// Regions from a report (embedded or via its region file) or a region file.
RegionFile read_regions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  int first = in.peek();
  while (first == ' ' || first == '\n' || first == '\t' || first == '\r') {
    in.get();
    first = in.peek();
  }
  if (first != '{') return load_regions(path);
  const auto doc = read_json(path);
  if (doc.contains("region_file")) return load_regions(doc.at("region_file").get<std::string>());
  const auto rep = report_from_json(doc);
  return {rep.domain, rep.output_count, rep.epsilon, rep.regions};
}

int cmd_plot_data(const std::string& input, const std::string& output) {
  const auto f = read_regions(input);
  const std::size_t n = f.domain.dim();
  if (n > 2)
    throw DimensionError("partition plots need n <= 2, this run has n = " + std::to_string(n) +
                         "; use 'export --error-slice' for a 2D error slice instead");
  std::ofstream file;
  if (!output.empty() && output != "-") {
    file.open(output);
    if (!file) throw std::runtime_error("cannot write '" + output + "'");
  }
  std::ostream& out = file.is_open() ? file : std::cout;
  out << std::setprecision(17);
  for (const auto& r : f.regions) {
    out << to_string(r.status);
    for (std::size_t i = 0; i < n; ++i) out << ' ' << r.box.lower(i);
    for (std::size_t i = 0; i < n; ++i) out << ' ' << r.box.upper(i);
    out << ' ' << r.j << '\n';
  }
  // counterexample markers: degenerate boxes at the witness
  for (const auto& r : f.regions) {
    if (r.status != RegionStatus::Counterexample) continue;
    out << "witness";
    for (int rep = 0; rep < 2; ++rep)
      for (std::size_t i = 0; i < n; ++i) out << ' ' << r.witness[static_cast<Eigen::Index>(i)];
    out << ' ' << r.j << '\n';
  }
  return 0;
}

// |f_j - N_j| on a grid over two axes, the other coordinates at the domain center.
int cmd_error_slice(const RunOptions& o, std::vector<std::size_t> axes, int resolution, const std::string& output) {
  const auto [sys, net] = load_run(o);
  const auto& d = sys.domain();
  if (axes.empty()) axes = d.dim() >= 2 ? std::vector<std::size_t>{0, 1} : std::vector<std::size_t>{0};
  for (auto a : axes)
    if (a >= d.dim()) throw ConfigError("slice axis out of range");
  if (axes.size() > 2) throw ConfigError("at most two slice axes");
  if (resolution < 2) throw ConfigError("resolution must be at least 2");
  std::ofstream file;
  if (!output.empty() && output != "-") {
    file.open(output);
    if (!file) throw std::runtime_error("cannot write '" + output + "'");
  }
  std::ostream& out = file.is_open() ? file : std::cout;
  out << std::setprecision(10);
  const int ny = axes.size() == 2 ? resolution : 1;
  for (int a = 0; a < resolution; ++a) {
    for (int b = 0; b < ny; ++b) {
      Vector x = d.center();
      const auto set = [&](std::size_t ax, int k) {
        x[static_cast<Eigen::Index>(ax)] = d.lower(ax) + d.width(ax) * k / (resolution - 1);
      };
      set(axes[0], a);
      if (axes.size() == 2) set(axes[1], b);
      const Vector err = (evaluate(sys, x) - forward(net, x)).cwiseAbs();
      for (auto ax : axes) out << x[static_cast<Eigen::Index>(ax)] << ' ';
      out << err.maxCoeff() << '\n';
    }
    if (axes.size() == 2) out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certify that a neural network stays within epsilon of a dynamical system"};
  app.set_config("--config", "", "run configuration file (TOML or INI, one section per subcommand)");
  app.require_subcommand(1);

  RunOptions vo;
  auto* verify = app.add_subcommand("verify", "certify a network against a system");
  add_run_options(verify, vo);
  verify->add_option("--epsilon", vo.epsilon, "number, 'small', 'large' or 'sweep' (default: system epsilon)");
  verify->add_option("--regions", vo.regions, "write the terminal boxes to a region file");
  verify->add_option("--koopman", vo.koopman, "directory of a Koopman model; verifies every trajectory step");
  verify->add_option("--last-step", vo.last_step, "Koopman: stop after this step (default: horizon)");

  RunOptions so;
  double eps_lo = 0.0, eps_hi = 0.0, tol = 0.05, probe_limit = 0.0;
  auto* sweep = app.add_subcommand("sweep", "bisect for the smallest certifiable epsilon");
  add_run_options(sweep, so);
  sweep->add_option("--eps-lo", eps_lo, "lower end of the bracket (default eps-hi / 20)");
  sweep->add_option("--eps-hi", eps_hi, "upper end, must certify (default: system epsilon)");
  sweep->add_option("--tolerance", tol, "relative bracket width to stop at")->check(CLI::PositiveNumber);
  sweep->add_option("--probe-time-limit", probe_limit, "seconds per probe, 0 = none")->check(CLI::NonNegativeNumber);

  std::string plot_in, plot_out;
  auto* plot = app.add_subcommand("plot-data", "box rectangles of a 1D or 2D run as whitespace columns");
  plot->add_option("input", plot_in, "report or region file")->required();
  plot->add_option("-o,--output", plot_out, "output file (default stdout)");

  RunOptions eo;
  std::string export_in, export_regions_out, slice_out;
  std::vector<std::size_t> slice_axes;
  int resolution = 101;
  auto* exp = app.add_subcommand("export", "convert a report to a region file, or sample an error slice");
  exp->add_option("--from-report", export_in, "JSON report with embedded regions");
  exp->add_option("--regions", export_regions_out, "region file to write");
  exp->add_option("--error-slice", slice_out, "write |f - N| on a grid (x [y] error columns)");
  exp->add_option("--axes", slice_axes, "one or two axes for the slice (default 0,1)")->delimiter(',');
  exp->add_option("--resolution", resolution, "grid points per axis");
  exp->add_option("--system", eo.system, "built-in system name or system config file");
  exp->add_option("--weights", eo.weights, "weight file, or a name under the data directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*verify) return cmd_verify(vo);
    if (*sweep) {
      run_sweep(so, eps_lo, eps_hi, tol, probe_limit);
      return 0;
    }
    if (*plot) return cmd_plot_data(plot_in, plot_out);
    if (*exp) {
      if (!slice_out.empty()) return cmd_error_slice(eo, slice_axes, resolution, slice_out);
      if (export_in.empty() || export_regions_out.empty())
        throw ConfigError("export needs --from-report and --regions, or --error-slice");
      export_regions(report_from_json(read_json(export_in)), export_regions_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
