#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace nacert;
using namespace testing_support;

namespace {

struct Bench {
  const char* system;
  const char* weights;
};

const std::vector<Bench> kSmall = {{"WaterTank", "water_tank_small"},   {"JetEngine", "jet_engine_small"},
                                   {"SteamGovernor", "steam_governor_small"}, {"Exponential", "exponential_small"},
                                   {"nl1", "nl1_small"},                {"nl2", "nl2_small"}};

CoverageReport run(const Bench& b, PartitionConfig cfg = {}, std::optional<double> eps = std::nullopt) {
  const auto sys = lookup_system(b.system);
  const Network net = load_weights(data_path(std::string("weights/") + b.weights + ".json"));
  return verify_domain(Reference::analytic(sys), net, sys.domain(), eps.value_or(sys.default_epsilon()), cfg);
}

// Interiors of two boxes intersect.
bool overlap(const Hyperrectangle& a, const Hyperrectangle& b) {
  for (std::size_t i = 0; i < a.dim(); ++i)
    if (!(a.lower(i) < b.upper(i) && b.lower(i) < a.upper(i))) return false;
  return true;
}

void expect_tiling(const CoverageReport& rep) {
  for (const auto& o : rep.per_output) {
    std::vector<Hyperrectangle> boxes;
    double v = 0.0;
    for (const auto& r : rep.regions)
      if (r.j == o.j) boxes.push_back(r.box), v += r.box.volume();
    EXPECT_NEAR(v, rep.domain.volume(), 1e-9 * rep.domain.volume()) << "output " << o.j;
    // sort by first lower coordinate so only nearby candidates are compared
    std::sort(boxes.begin(), boxes.end(), [](auto& a, auto& b) { return a.lower(0) < b.lower(0); });
    for (std::size_t p = 0; p < boxes.size(); ++p)
      for (std::size_t q = p + 1; q < boxes.size() && boxes[q].lower(0) < boxes[p].upper(0); ++q)
        ASSERT_FALSE(overlap(boxes[p], boxes[q])) << "output " << o.j;
  }
}

std::vector<std::tuple<std::size_t, std::vector<double>>> cex_set(const CoverageReport& rep) {
  std::vector<std::tuple<std::size_t, std::vector<double>>> s;
  for (const auto& c : rep.counterexamples) s.emplace_back(c.j, std::vector<double>(c.x.data(), c.x.data() + c.x.size()));
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

TEST(Partition, InitialGridExamples) {
  const auto cells = initial_partition(box({{-0.5, 0.5}, {-0.5, 0.5}}), {2, 2});
  ASSERT_EQ(cells.size(), 4u);
  std::vector<std::pair<double, double>> centers;
  for (const auto& c : cells) {
    EXPECT_EQ(c.radius(), vec({0.25, 0.25}));
    centers.emplace_back(c.center()[0], c.center()[1]);
  }
  std::sort(centers.begin(), centers.end());
  EXPECT_EQ(centers, (std::vector<std::pair<double, double>>{{-0.25, -0.25}, {-0.25, 0.25}, {0.25, -0.25}, {0.25, 0.25}}));
  const Hyperrectangle d = box({{0.1, 10}});
  const auto one = initial_partition(d, {1});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].lower(), d.lower());
  EXPECT_EQ(one[0].upper(), d.upper());
  EXPECT_EQ(initial_partition(box({{0, 1}, {0, 1}, {0, 1}})).size(), 8u);
  EXPECT_EQ(initial_partition(lookup_system("LowThrustSpacecraft").domain()).size(), 1u);
  EXPECT_THROW(initial_partition(d, {0}), ConfigError);
  EXPECT_THROW(initial_partition(d, {1, 1}), ConfigError);
}

TEST(Partition, InitialGridCoversRandomDomains) {
  std::mt19937_64 rng(61);
  std::uniform_int_distribution<int> G(1, 5);
  for (int k = 0; k < 100; ++k) {
    const Hyperrectangle d = random_subbox(box({{-10, 10}, {-3, 7}, {0, 1}}), rng, 0.01, 1.0);
    const auto cells = initial_partition(d, {G(rng), G(rng), G(rng)});
    double v = 0.0;
    for (const auto& c : cells) {
      v += c.volume();
      EXPECT_TRUE(d.contains(c));
    }
    EXPECT_NEAR(v, d.volume(), 1e-12 * d.volume());
  }
}

TEST(Partition, UnionVolumeOfOverlappingGroups) {
  const std::vector<std::vector<Hyperrectangle>> g = {{box({{0, 2}, {0, 1}})}, {box({{1, 3}, {0, 1}})}};
  EXPECT_DOUBLE_EQ(union_volume(g), 3.0);
  EXPECT_DOUBLE_EQ(union_volume({}), 0.0);
}

TEST(Partition, AffineFixtureNeedsNoSplits) {
  const auto sys = load_system_config(data_path("systems/affine.json"));
  const Network net = load_weights(data_path("weights/affine_exact.json"));
  const auto rep = verify_domain(Reference::analytic(sys), net, sys.domain(), 0.1);
  EXPECT_EQ(rep.certified_fraction, 1.0);
  EXPECT_EQ(rep.splits, 0u);
  EXPECT_EQ(rep.boxes_checked, initial_partition(sys.domain()).size() * sys.output_dim());
  EXPECT_TRUE(rep.counterexamples.empty());
  EXPECT_FALSE(rep.partial);
}

TEST(Partition, OffsetFixtureIsFalsified) {
  const auto sys = load_system_config(data_path("systems/affine.json"));
  const Network net = load_weights(data_path("weights/affine_offset.json"));
  const auto ref = Reference::analytic(sys);
  const auto rep = verify_domain(ref, net, sys.domain(), 0.1);
  EXPECT_EQ(rep.certified_fraction, 0.0);
  EXPECT_EQ(rep.counterexamples.size(), 8u);
  for (const auto& c : rep.counterexamples) {
    EXPECT_NEAR(c.error, 0.2, 1e-12);
    EXPECT_TRUE(confirm_counterexample(ref, net, c.x, c.j, 0.1));
  }
}

TEST(Partition, WaterTankIsFullyCertified) {
  const auto rep = run(kSmall[0]);
  EXPECT_EQ(rep.certified_fraction, 1.0);
  for (const auto& r : rep.regions) EXPECT_EQ(r.status, RegionStatus::Certified);
  double v = 0.0;
  for (const auto& r : rep.regions) v += r.box.volume();
  EXPECT_NEAR(v, rep.domain.volume(), 1e-12);
}

TEST(Partition, TerminalBoxesTileTheDomain) {
  for (const auto& b : kSmall) {
    const auto rep = run(b);
    SCOPED_TRACE(b.system);
    expect_tiling(rep);
  }
  // a run with unknown and counterexample boxes too
  PartitionConfig cfg;
  cfg.max_depth = 6;
  const auto rep = run(kSmall[1], cfg, 0.02);
  EXPECT_LT(rep.certified_fraction, 1.0);
  expect_tiling(rep);
}

TEST(Partition, SingleWorkerRunsAreDeterministic) {
  PartitionConfig cfg;
  cfg.seed = 9;
  const auto a = run(kSmall[1], cfg, 0.02), b = run(kSmall[1], cfg, 0.02);
  EXPECT_EQ(a.certified_fraction, b.certified_fraction);
  EXPECT_EQ(a.boxes_checked, b.boxes_checked);
  EXPECT_EQ(a.splits, b.splits);
  ASSERT_EQ(a.regions.size(), b.regions.size());
  for (std::size_t k = 0; k < a.regions.size(); ++k) {
    EXPECT_EQ(a.regions[k].status, b.regions[k].status);
    EXPECT_EQ(a.regions[k].box.lower(), b.regions[k].box.lower());
    EXPECT_EQ(a.regions[k].box.upper(), b.regions[k].box.upper());
    EXPECT_EQ(a.regions[k].witness, b.regions[k].witness);
  }
}

TEST(Partition, WorkerCountDoesNotChangeTheResult) {
  for (const auto& b : kSmall) {
    SCOPED_TRACE(b.system);
    PartitionConfig one, four;
    four.workers = 4;
    const auto r1 = run(b, one), r4 = run(b, four);
    EXPECT_EQ(r1.certified_fraction, r4.certified_fraction);
    EXPECT_EQ(cex_set(r1), cex_set(r4));
    EXPECT_EQ(r1.boxes_checked, r4.boxes_checked);
  }
  // and with counterexamples present
  PartitionConfig one, four;
  four.workers = 4;
  const auto r1 = run(kSmall[1], one, 0.02), r4 = run(kSmall[1], four, 0.02);
  EXPECT_FALSE(r1.counterexamples.empty());
  EXPECT_EQ(r1.certified_fraction, r4.certified_fraction);
  EXPECT_EQ(cex_set(r1), cex_set(r4));
}

TEST(Partition, NoBoxBelowHalfTheWidthFloor) {
  PartitionConfig cfg;
  cfg.min_width = vec({0.05, 0.05});
  const auto rep = run(kSmall[1], cfg, 0.01);
  bool unknown = false;
  for (const auto& r : rep.regions) {
    for (std::size_t i = 0; i < 2; ++i) EXPECT_GE(r.box.width(i), 0.025);
    unknown |= r.status == RegionStatus::Unknown;
  }
  EXPECT_TRUE(unknown || !rep.counterexamples.empty());
}

TEST(Partition, EarlyStopFindsACounterexampleWheneverExhaustiveDoes) {
  for (double eps : {0.005, 0.01, 0.02, 0.03}) {
    PartitionConfig ex, es;
    es.mode = SearchMode::EarlyStop;
    const auto a = run(kSmall[1], ex, eps), b = run(kSmall[1], es, eps);
    if (a.counterexamples.empty()) continue;
    ASSERT_FALSE(b.counterexamples.empty()) << eps;
    EXPECT_TRUE(b.partial);
    const auto ref = Reference::analytic(lookup_system("JetEngine"));
    const Network net = load_weights(data_path("weights/jet_engine_small.json"));
    for (const auto& c : b.counterexamples) EXPECT_TRUE(confirm_counterexample(ref, net, c.x, c.j, eps));
  }
}

TEST(Partition, TimeLimitGivesAPartialReport) {
  PartitionConfig cfg;
  cfg.time_limit = 1e-9;
  const auto rep = run(kSmall[2], cfg);
  EXPECT_TRUE(rep.partial);
  EXPECT_LT(rep.certified_fraction, 1.0);
  expect_tiling(rep);
}

TEST(Partition, WorkerErrorsSurfaceWithTheirTask) {
  const auto ref = Reference::lipschitz(
      [](const Vector& x) -> Vector {
        if (x[0] > 0.5) throw std::runtime_error("reference blew up");
        return x;
      },
      1.0, 1, 1);
  const Network net({layer(mat({{1.0}}), vec({0.5}), Activation::Identity)});
  for (int workers : {1, 3}) {
    PartitionConfig cfg;
    cfg.workers = workers;
    try {
      verify_domain(ref, net, box({{0, 1}}), 0.1, cfg);
      FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
      EXPECT_NE(std::string(e.what()).find("reference blew up"), std::string::npos);
      EXPECT_NE(std::string(e.what()).find("output 0"), std::string::npos);
    }
  }
}

TEST(Partition, ConfigurationErrors) {
  const auto sys = lookup_system("WaterTank");
  const Network net = load_weights(data_path("weights/water_tank_small.json"));
  const auto ref = Reference::analytic(sys);
  EXPECT_THROW(verify_domain(ref, net, sys.domain(), 0.0), ConfigError);
  PartitionConfig bad;
  bad.workers = 0;
  EXPECT_THROW(verify_domain(ref, net, sys.domain(), 0.1, bad), ConfigError);
  PartitionConfig out;
  out.outputs = {3};
  EXPECT_THROW(verify_domain(ref, net, sys.domain(), 0.1, out), ConfigError);
  EXPECT_THROW(verify_domain(ref, net, box({{0, 1}, {0, 1}}), 0.1), DimensionError);
}

TEST(Partition, JetEngineRemainderSplitsUseOnlyAxisZero) {
  // literal axis rule: output 0 is nonlinear in x only, so outside the round
  // robin turns every split halves axis 0 while axis 0 is still above the floor
  const auto sys = lookup_system("JetEngine");
  const auto ref = Reference::analytic(sys);
  const Network net = load_weights(data_path("weights/jet_engine_small.json"));
  const BoxChecker checker(ref, net);
  SplitPolicy pol{sys.domain().widths() * 1e-4, sys.domain().widths(), 4, false};
  std::vector<VerificationTask> stack;
  for (const auto& c : initial_partition(sys.domain())) stack.push_back({c, 0, sys.default_epsilon(), 0, 1});
  int checked = 0;
  while (!stack.empty() && checked < 5000) {
    auto t = stack.back();
    stack.pop_back();
    ++checked;
    const auto v = check_box(checker, t, pol);
    if (v.kind != Verdict::Kind::Split || !v.axis) continue;
    const bool x_splittable = t.box.width(0) >= pol.min_width[0];
    if (t.depth % 4 != 3 && x_splittable) EXPECT_EQ(*v.axis, 0u) << "depth " << t.depth;
    auto [a, b] = split_box(t.box, *v.axis);
    stack.push_back({b, 0, t.epsilon, t.depth + 1, 1});
    stack.push_back({a, 0, t.epsilon, t.depth + 1, 1});
  }
  EXPECT_GT(checked, 4);
}

TEST(Partition, OutputSelection) {
  PartitionConfig cfg;
  cfg.outputs = {1};
  const auto rep = run(kSmall[1], cfg);
  ASSERT_EQ(rep.per_output.size(), 1u);
  EXPECT_EQ(rep.per_output[0].j, 1u);
  for (const auto& r : rep.regions) EXPECT_EQ(r.j, 1u);
}
