#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nacert/errors.hpp"
#include "nacert/hyperrectangle.hpp"
#include "nacert/verifier.hpp"

namespace nacert {

enum class SearchMode { Exhaustive, EarlyStop };

struct PartitionConfig {
  int workers = 1;
  std::vector<int> grid;              // cells per axis; empty = 2 per axis for n <= 3, else 1
  std::optional<Vector> min_width;    // absolute per axis; default 1e-4 of the domain width
  int max_depth = 60;
  std::uint64_t seed = 0;
  SearchMode mode = SearchMode::Exhaustive;
  double time_limit = 0.0;            // seconds, 0 = none
  std::vector<std::size_t> outputs;   // empty = all
  CheckOptions check;
  bool residual_probe = true;  // see SplitPolicy
};

enum class RegionStatus { Certified, Counterexample, Unknown };

inline const char* to_string(RegionStatus s) {
  switch (s) {
    case RegionStatus::Certified: return "certified";
    case RegionStatus::Counterexample: return "counterexample";
    case RegionStatus::Unknown: return "unknown";
  }
  return "?";
}

// A terminal box of the refinement for one output.
struct Region {
  RegionStatus status = RegionStatus::Unknown;
  std::size_t j = 0;
  Hyperrectangle box;
  Vector witness;  // counterexample regions only
  double error = 0.0;
};

struct Counterexample {
  Vector x;
  std::size_t j = 0;
  double error = 0.0;
};

struct OutputCoverage {
  std::size_t j = 0;
  double certified_volume = 0.0;
  double counterexample_volume = 0.0;
  double unknown_volume = 0.0;
  std::size_t boxes_checked = 0;
  std::size_t splits = 0;
  std::size_t counterexamples = 0;
  double certified_fraction = 0.0;
};

struct CoverageReport {
  Hyperrectangle domain;
  double epsilon = 0.0;
  std::size_t output_count = 0;  // outputs of the network
  double certified_fraction = 0.0;
  std::vector<Counterexample> counterexamples;
  std::vector<Region> regions;  // every terminal box, sorted
  std::size_t boxes_checked = 0;
  std::size_t splits = 0;
  double wall_time = 0.0;
  bool partial = false;  // stopped early (first counterexample or time limit)
  std::vector<OutputCoverage> per_output;

  std::vector<Region> unknown_boxes() const {
    std::vector<Region> out;
    for (const auto& r : regions)
      if (r.status == RegionStatus::Unknown) out.push_back(r);
    return out;
  }
};

// ---------------------------------------------------------------- geometry helpers

// Regular grid of cells; cells share exact boundary coordinates.
inline std::vector<Hyperrectangle> initial_partition(const Hyperrectangle& domain, std::vector<int> grid = {}) {
  const std::size_t n = domain.dim();
  if (grid.empty()) grid.assign(n, n <= 3 ? 2 : 1);
  if (grid.size() != n) throw ConfigError("grid needs one entry per input dimension");
  for (int g : grid)
    if (g < 1) throw ConfigError("grid counts must be at least 1");
  std::vector<std::vector<double>> cuts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = domain.lower(i), hi = domain.upper(i);
    for (int k = 0; k <= grid[i]; ++k)
      cuts[i].push_back(k == 0 ? lo : k == grid[i] ? hi : lo + (hi - lo) * k / grid[i]);
  }
  std::vector<Hyperrectangle> out;
  std::vector<int> idx(n, 0);
  for (;;) {
    Vector lo(static_cast<Eigen::Index>(n)), hi(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      lo[static_cast<Eigen::Index>(i)] = cuts[i][static_cast<std::size_t>(idx[i])];
      hi[static_cast<Eigen::Index>(i)] = cuts[i][static_cast<std::size_t>(idx[i]) + 1];
    }
    out.emplace_back(lo, hi);
    std::size_t i = 0;
    while (i < n && ++idx[i] == grid[i]) idx[i++] = 0;
    if (i == n) break;
  }
  return out;
}

namespace detail {

// Pieces of a that lie outside b (a and b overlap).
inline void subtract_box(const Hyperrectangle& a, const Hyperrectangle& b, std::vector<Hyperrectangle>& out) {
  Vector lo = a.lower(), hi = a.upper();
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (b.lower()[i] > lo[i]) {
      Vector h = hi;
      h[i] = b.lower()[i];
      out.emplace_back(lo, h);
      lo[i] = b.lower()[i];
    }
    if (b.upper()[i] < hi[i]) {
      Vector l = lo;
      l[i] = b.upper()[i];
      out.emplace_back(l, hi);
      hi[i] = b.upper()[i];
    }
  }
}

}  // namespace detail

// Volume of a union of box groups; boxes within one group must have
// pairwise disjoint interiors.
inline double union_volume(const std::vector<std::vector<Hyperrectangle>>& groups) {
  std::vector<Hyperrectangle> acc;
  for (const auto& g : groups) {
    const std::size_t before = acc.size();
    for (const auto& box : g) {
      std::vector<Hyperrectangle> pieces{box};
      for (std::size_t k = 0; k < before && !pieces.empty(); ++k) {
        std::vector<Hyperrectangle> next;
        for (const auto& p : pieces) {
          if (p.overlap_volume(acc[k]) > 0.0)
            detail::subtract_box(p, acc[k], next);
          else
            next.push_back(p);
        }
        pieces.swap(next);
      }
      acc.insert(acc.end(), pieces.begin(), pieces.end());
    }
  }
  double v = 0.0;
  for (const auto& b : acc) v += b.volume();
  return v;
}

// Fraction of the domain certified for every listed output.
inline double certified_fraction_of(const std::vector<Region>& regions, const Hyperrectangle& domain,
                                    const std::vector<std::size_t>& outputs) {
  std::vector<std::vector<Hyperrectangle>> groups(outputs.size());
  for (const auto& r : regions) {
    if (r.status == RegionStatus::Certified) continue;
    const auto it = std::find(outputs.begin(), outputs.end(), r.j);
    if (it != outputs.end()) groups[static_cast<std::size_t>(it - outputs.begin())].push_back(r.box);
  }
  const double bad = union_volume(groups);
  return std::clamp(1.0 - bad / domain.volume(), 0.0, 1.0);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed derived from the box itself, so sampling does not depend on the order
// in which workers reach a box.
inline std::uint64_t task_seed(std::uint64_t seed, std::size_t j, const Hyperrectangle& box) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(j + 1));
  for (std::size_t i = 0; i < box.dim(); ++i) {
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(box.lower(i)));
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(box.upper(i)));
  }
  return h;
}

inline bool region_less(const Region& a, const Region& b) {
  if (a.j != b.j) return a.j < b.j;
  for (std::size_t i = 0; i < a.box.dim(); ++i) {
    if (a.box.lower(i) != b.box.lower(i)) return a.box.lower(i) < b.box.lower(i);
    if (a.box.upper(i) != b.box.upper(i)) return a.box.upper(i) < b.box.upper(i);
  }
  return false;
}

// Fill the aggregate fields of a report from its regions.
inline void summarize(CoverageReport& rep, const std::vector<std::size_t>& outputs) {
  std::sort(rep.regions.begin(), rep.regions.end(), region_less);
  rep.counterexamples.clear();
  std::vector<OutputCoverage> per(outputs.size());
  for (std::size_t k = 0; k < outputs.size(); ++k) per[k].j = outputs[k];
  for (const auto& r : rep.regions) {
    const auto it = std::find(outputs.begin(), outputs.end(), r.j);
    if (it == outputs.end()) continue;
    auto& o = per[static_cast<std::size_t>(it - outputs.begin())];
    const double v = r.box.volume();
    switch (r.status) {
      case RegionStatus::Certified: o.certified_volume += v; break;
      case RegionStatus::Counterexample:
        o.counterexample_volume += v;
        ++o.counterexamples;
        rep.counterexamples.push_back({r.witness, r.j, r.error});
        break;
      case RegionStatus::Unknown: o.unknown_volume += v; break;
    }
  }
  const double dv = rep.domain.volume();
  for (auto& o : per) o.certified_fraction = std::clamp(1.0 - (o.counterexample_volume + o.unknown_volume) / dv, 0.0, 1.0);
  // keep the per-output counters gathered during the run
  for (std::size_t k = 0; k < per.size() && k < rep.per_output.size(); ++k) {
    per[k].boxes_checked = rep.per_output[k].boxes_checked;
    per[k].splits = rep.per_output[k].splits;
  }
  rep.per_output = std::move(per);
  rep.certified_fraction = certified_fraction_of(rep.regions, rep.domain, outputs);
}

}  // namespace detail

// ---------------------------------------------------------------- driver

inline CoverageReport verify_domain(const Reference& ref, const Network& net, const Hyperrectangle& domain,
                                    double epsilon, const PartitionConfig& config = {}) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (config.workers < 1) throw ConfigError("workers must be at least 1");
  if (config.max_depth < 0) throw ConfigError("max_depth must be nonnegative");
  if (domain.dim() != net.input_dim()) throw DimensionError("domain dimension does not match the network input");
  for (std::size_t i = 0; i < domain.dim(); ++i)
    if (!(domain.width(i) > 0.0)) throw ConfigError("domain is degenerate along axis " + std::to_string(i));

  const BoxChecker checker(ref, net, config.check);
  SplitPolicy policy;
  policy.domain_width = domain.widths();
  policy.residual_probe = config.residual_probe;
  policy.min_width = config.min_width ? *config.min_width : Vector(domain.widths() * 1e-4);
  if (policy.min_width.size() != domain.widths().size()) throw ConfigError("min_width needs one entry per axis");
  if ((policy.min_width.array() <= 0.0).any()) throw ConfigError("min_width must be positive");

  std::vector<std::size_t> outputs = config.outputs;
  if (outputs.empty())
    for (std::size_t j = 0; j < net.output_dim(); ++j) outputs.push_back(j);
  for (auto j : outputs)
    if (j >= net.output_dim()) throw ConfigError("output index " + std::to_string(j) + " out of range");

  struct Item {
    VerificationTask task;
    double priority = 0.0;
    std::uint64_t order = 0;
  };
  auto cmp = [](const Item& a, const Item& b) {
    return a.priority != b.priority ? a.priority < b.priority : a.order > b.order;
  };

  std::mutex mu;
  std::condition_variable cv;
  std::vector<Item> stack;  // LIFO in exhaustive mode, heap in early-stop mode
  std::uint64_t order = 0;
  std::size_t in_flight = 0;
  bool stop = false;
  std::exception_ptr failure;
  std::string failure_task;

  CoverageReport rep;
  rep.domain = domain;
  rep.epsilon = epsilon;
  rep.output_count = net.output_dim();
  rep.per_output.resize(outputs.size());
  std::vector<std::size_t> slot(net.output_dim(), 0);
  for (std::size_t k = 0; k < outputs.size(); ++k) slot[outputs[k]] = k;

  const bool early = config.mode == SearchMode::EarlyStop;
  auto push = [&](Item it) {
    it.order = order++;
    stack.push_back(std::move(it));
    if (early) std::push_heap(stack.begin(), stack.end(), cmp);
  };
  auto pop = [&]() {
    if (early) std::pop_heap(stack.begin(), stack.end(), cmp);
    Item it = std::move(stack.back());
    stack.pop_back();
    return it;
  };

  for (const auto& cell : initial_partition(domain, config.grid))
    for (auto j : outputs)
      push({VerificationTask{cell, j, epsilon, 0, detail::task_seed(config.seed, j, cell)}, 0.0, 0});
  // depth-first from the first cell
  if (!early) std::reverse(stack.begin(), stack.end());

  auto deadline_passed = [&]() {
    return config.time_limit > 0.0 &&
           std::chrono::duration<double>(Clock::now() - t0).count() > config.time_limit;
  };

  auto worker = [&]() {
    std::unique_lock lock(mu);
    for (;;) {
      cv.wait(lock, [&] { return stop || !stack.empty() || in_flight == 0; });
      if (stop || (stack.empty() && in_flight == 0)) break;
      if (deadline_passed()) {
        stop = true;
        rep.partial = true;
        cv.notify_all();
        break;
      }
      Item item = pop();
      ++in_flight;
      lock.unlock();

      Verdict v;
      std::exception_ptr err;
      try {
        v = check_box(checker, item.task, policy);
      } catch (...) {
        err = std::current_exception();
      }

      lock.lock();
      --in_flight;
      auto& stats = rep.per_output[slot[item.task.j]];
      ++rep.boxes_checked;
      ++stats.boxes_checked;
      if (err) {
        if (!failure) {
          failure = err;
          std::ostringstream os;
          os << "output " << item.task.j << ", box [" << item.task.box.lower().transpose() << "] x ["
             << item.task.box.upper().transpose() << "], depth " << item.task.depth;
          failure_task = os.str();
        }
        stop = true;
        cv.notify_all();
        break;
      }
      switch (v.kind) {
        case Verdict::Kind::Certified:
          rep.regions.push_back({RegionStatus::Certified, item.task.j, item.task.box, {}, 0.0});
          break;
        case Verdict::Kind::Falsified:
          rep.regions.push_back({RegionStatus::Counterexample, item.task.j, item.task.box, v.witness, v.error});
          if (early) {
            stop = true;
            rep.partial = true;
          }
          break;
        case Verdict::Kind::Split:
          if (!v.axis || item.task.depth >= config.max_depth) {
            rep.regions.push_back({RegionStatus::Unknown, item.task.j, item.task.box, {}, 0.0});
          } else {
            ++rep.splits;
            ++stats.splits;
            auto [a, b] = split_box(item.task.box, *v.axis);
            const int d = item.task.depth + 1;
            // priority for early-stop mode: offending score weighted by volume
            const double pr = std::isfinite(v.score) ? v.score * item.task.box.volume() : item.task.box.volume();
            push({VerificationTask{b, item.task.j, epsilon, d, detail::task_seed(config.seed, item.task.j, b)}, pr, 0});
            push({VerificationTask{a, item.task.j, epsilon, d, detail::task_seed(config.seed, item.task.j, a)}, pr, 0});
          }
          break;
      }
      cv.notify_all();
    }
  };

  if (config.workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < config.workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("verification failed on ") + failure_task + ": " + e.what());
    }
  }
  // whatever is left after an early stop counts as unknown
  for (auto& it : stack) rep.regions.push_back({RegionStatus::Unknown, it.task.j, it.task.box, {}, 0.0});
  if (!stack.empty()) rep.partial = true;

  detail::summarize(rep, outputs);
  rep.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------- region files

namespace detail {

inline void put_number(std::string& s, double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  s.append(buf, p);
}

inline double get_number(std::istringstream& in, std::size_t line) {
  std::string tok;
  if (!(in >> tok)) throw ParseError("region file: missing number", line);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) throw ParseError("region file: bad number '" + tok + "'", line);
  return v;
}

}  // namespace detail

// Text format: '#' header lines, then one line per terminal box
//   <status> <j> <min_1..min_n> <max_1..max_n> [<witness_1..witness_n> <error>]
inline void export_regions(const CoverageReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write region file '" + path + "'");
  const std::size_t n = rep.domain.dim();
  std::string s = "# nacert regions 1\n# n " + std::to_string(n) + " m " + std::to_string(rep.output_count) +
                  " epsilon ";
  detail::put_number(s, rep.epsilon);
  s += "\n# domain";
  for (std::size_t i = 0; i < n; ++i) s += ' ', detail::put_number(s, rep.domain.lower(i));
  for (std::size_t i = 0; i < n; ++i) s += ' ', detail::put_number(s, rep.domain.upper(i));
  s += '\n';
  out << s;
  for (const auto& r : rep.regions) {
    s = to_string(r.status);
    s += ' ' + std::to_string(r.j);
    for (std::size_t i = 0; i < n; ++i) s += ' ', detail::put_number(s, r.box.lower(i));
    for (std::size_t i = 0; i < n; ++i) s += ' ', detail::put_number(s, r.box.upper(i));
    if (r.status == RegionStatus::Counterexample) {
      for (Eigen::Index i = 0; i < r.witness.size(); ++i) s += ' ', detail::put_number(s, r.witness[i]);
      s += ' ', detail::put_number(s, r.error);
    }
    out << s << '\n';
  }
  if (!out) throw std::runtime_error("error writing region file '" + path + "'");
}

struct RegionFile {
  Hyperrectangle domain;
  std::size_t output_count = 0;
  double epsilon = 0.0;
  std::vector<Region> regions;
};

inline RegionFile load_regions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open region file '" + path + "'");
  RegionFile f;
  std::size_t n = 0;
  bool have_dims = false, have_domain = false;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      if (key == "n") {
        std::string mkey, ekey;
        ls >> n >> mkey >> f.output_count >> ekey;
        if (mkey != "m" || ekey != "epsilon") throw ParseError("region file: malformed dimension header", ln);
        f.epsilon = detail::get_number(ls, ln);
        have_dims = true;
      } else if (key == "domain") {
        if (!have_dims) throw ParseError("region file: domain before dimensions", ln);
        Vector lo(static_cast<Eigen::Index>(n)), hi(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) lo[static_cast<Eigen::Index>(i)] = detail::get_number(ls, ln);
        for (std::size_t i = 0; i < n; ++i) hi[static_cast<Eigen::Index>(i)] = detail::get_number(ls, ln);
        f.domain = Hyperrectangle(lo, hi);
        have_domain = true;
      }
      continue;
    }
    if (!have_domain) throw ParseError("region file: record before header", ln);
    Region r;
    std::string status;
    ls >> status >> r.j;
    if (status == "certified")
      r.status = RegionStatus::Certified;
    else if (status == "counterexample")
      r.status = RegionStatus::Counterexample;
    else if (status == "unknown")
      r.status = RegionStatus::Unknown;
    else
      throw ParseError("region file: unknown status '" + status + "'", ln);
    Vector lo(static_cast<Eigen::Index>(n)), hi(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) lo[static_cast<Eigen::Index>(i)] = detail::get_number(ls, ln);
    for (std::size_t i = 0; i < n; ++i) hi[static_cast<Eigen::Index>(i)] = detail::get_number(ls, ln);
    r.box = Hyperrectangle(lo, hi);
    if (r.status == RegionStatus::Counterexample) {
      r.witness.resize(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) r.witness[static_cast<Eigen::Index>(i)] = detail::get_number(ls, ln);
      r.error = detail::get_number(ls, ln);
    }
    f.regions.push_back(std::move(r));
  }
  if (!have_domain) throw ParseError("region file: missing header");
  return f;
}

// Rebuild the volume accounting of a report from a region file.
inline CoverageReport report_from_regions(const RegionFile& f) {
  CoverageReport rep;
  rep.domain = f.domain;
  rep.epsilon = f.epsilon;
  rep.output_count = f.output_count;
  rep.regions = f.regions;
  std::vector<std::size_t> outputs;
  for (const auto& r : f.regions)
    if (std::find(outputs.begin(), outputs.end(), r.j) == outputs.end()) outputs.push_back(r.j);
  std::sort(outputs.begin(), outputs.end());
  detail::summarize(rep, outputs);
  return rep;
}

}  // namespace nacert
