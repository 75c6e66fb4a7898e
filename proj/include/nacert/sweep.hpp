#pragma once

#include <cmath>
#include <vector>

#include "nacert/errors.hpp"
#include "nacert/partitioner.hpp"

namespace nacert {

struct SweepProbe {
  double epsilon = 0.0;
  bool certified = false;
  double certified_fraction = 0.0;
  std::size_t counterexamples = 0;
  double wall_time = 0.0;
};

struct SweepResult {
  double best_certified = 0.0;   // smallest epsilon that certified
  double largest_failed = 0.0;   // largest epsilon that did not (0 when eps_lo certified)
  std::vector<SweepProbe> probes;
};

// Bisection for the smallest certifiable epsilon in [eps_lo, eps_hi]. Stops
// once the bracket is within rel_tol of its lower end. Each probe is a full
// verify_domain run; probe_time_limit (seconds, 0 = none) caps each probe and
// a probe that runs out of time counts as not certified.
inline SweepResult sweep_epsilon(const Reference& ref, const Network& net, const Hyperrectangle& domain, double eps_lo,
                                 double eps_hi, PartitionConfig config, double rel_tol = 0.05,
                                 double probe_time_limit = 0.0) {
  if (!(eps_lo > 0.0) || !(eps_hi > eps_lo)) throw ConfigError("sweep needs 0 < eps_lo < eps_hi");
  if (!(rel_tol > 0.0)) throw ConfigError("sweep tolerance must be positive");
  config.time_limit = probe_time_limit;
  config.mode = SearchMode::EarlyStop;  // one counterexample settles a probe
  SweepResult res;
  auto probe = [&](double eps) {
    const auto rep = verify_domain(ref, net, domain, eps, config);
    const bool ok = rep.certified_fraction >= 1.0 && rep.counterexamples.empty() && !rep.partial;
    res.probes.push_back({eps, ok, rep.certified_fraction, rep.counterexamples.size(), rep.wall_time});
    return ok;
  };
  if (!probe(eps_hi)) throw ConfigError("upper end of the sweep bracket is not certifiable within the budget");
  double lo = eps_lo, hi = eps_hi;
  if (probe(lo)) {
    res.best_certified = lo;
    return res;
  }
  while (hi - lo > rel_tol * lo) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid))
      hi = mid;
    else
      lo = mid;
  }
  res.best_certified = hi;
  res.largest_failed = lo;
  return res;
}

}  // namespace nacert
