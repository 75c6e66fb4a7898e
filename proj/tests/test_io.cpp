#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace nacert;
using namespace testing_support;

namespace {

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("nacert_io_" + name)).string();
}

CoverageReport jet_engine_run(double eps, int max_depth = 60) {
  const auto sys = lookup_system("JetEngine");
  PartitionConfig cfg;
  cfg.max_depth = max_depth;
  return verify_domain(Reference::analytic(sys), load_weights(data_path("weights/jet_engine_small.json")),
                       sys.domain(), eps, cfg);
}

void expect_same_accounting(const CoverageReport& a, const CoverageReport& b) {
  EXPECT_EQ(a.certified_fraction, b.certified_fraction);
  ASSERT_EQ(a.regions.size(), b.regions.size());
  for (std::size_t k = 0; k < a.regions.size(); ++k) {
    EXPECT_EQ(a.regions[k].status, b.regions[k].status);
    EXPECT_EQ(a.regions[k].j, b.regions[k].j);
    EXPECT_EQ(a.regions[k].box.lower(), b.regions[k].box.lower());
    EXPECT_EQ(a.regions[k].box.upper(), b.regions[k].box.upper());
    EXPECT_EQ(a.regions[k].witness, b.regions[k].witness);
    EXPECT_EQ(a.regions[k].error, b.regions[k].error);
  }
  ASSERT_EQ(a.per_output.size(), b.per_output.size());
  for (std::size_t k = 0; k < a.per_output.size(); ++k) {
    EXPECT_EQ(a.per_output[k].certified_volume, b.per_output[k].certified_volume);
    EXPECT_EQ(a.per_output[k].unknown_volume, b.per_output[k].unknown_volume);
    EXPECT_EQ(a.per_output[k].counterexample_volume, b.per_output[k].counterexample_volume);
  }
}

}  // namespace

TEST(RegionFile, RoundTripReproducesTheAccounting) {
  for (double eps : {0.039, 0.02}) {
    const auto rep = jet_engine_run(eps, 8);
    const auto path = temp_file("regions.txt");
    export_regions(rep, path);
    const auto back = report_from_regions(load_regions(path));
    EXPECT_EQ(back.epsilon, rep.epsilon);
    EXPECT_EQ(back.output_count, rep.output_count);
    expect_same_accounting(rep, back);
  }
}

TEST(RegionFile, EmptyReportIsHeaderOnly) {
  CoverageReport rep;
  rep.domain = box({{0, 1}, {0, 1}});
  rep.epsilon = 0.1;
  rep.output_count = 2;
  const auto path = temp_file("empty.txt");
  export_regions(rep, path);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line[0], '#');
    ++lines;
  }
  EXPECT_EQ(lines, 3);
  EXPECT_TRUE(load_regions(path).regions.empty());
}

TEST(RegionFile, WaterTankRunIsOneStatus) {
  const auto sys = lookup_system("WaterTank");
  const auto rep = verify_domain(Reference::analytic(sys), load_weights(data_path("weights/water_tank_small.json")),
                                 sys.domain(), 0.097);
  const auto path = temp_file("wt.txt");
  export_regions(rep, path);
  const auto f = load_regions(path);
  double v = 0.0;
  for (const auto& r : f.regions) {
    EXPECT_EQ(r.status, RegionStatus::Certified);
    v += r.box.volume();
  }
  EXPECT_NEAR(v, sys.domain().volume(), 1e-12);
}

TEST(RegionFile, MalformedRecordsAreRejected) {
  const auto path = temp_file("bad.txt");
  std::ofstream(path) << "# nacert regions 1\n# n 1 m 1 epsilon 0.1\n# domain 0 1\nmaybe 0 0 1\n";
  try {
    load_regions(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  std::ofstream(path) << "certified 0 0 1\n";
  EXPECT_THROW(load_regions(path), ParseError);
}

TEST(Report, JsonRoundTrip) {
  const auto rep = jet_engine_run(0.02, 8);
  const auto back = report_from_json(report_to_json(rep, true));
  expect_same_accounting(rep, back);
  EXPECT_EQ(back.boxes_checked, rep.boxes_checked);
  EXPECT_EQ(back.splits, rep.splits);
  EXPECT_EQ(back.partial, rep.partial);
  ASSERT_EQ(back.counterexamples.size(), rep.counterexamples.size());
  for (std::size_t k = 0; k < rep.counterexamples.size(); ++k) EXPECT_EQ(back.counterexamples[k].x, rep.counterexamples[k].x);
  EXPECT_THROW(report_from_json(nlohmann::json::parse(R"({"epsilon": 1})")), ParseError);
}

TEST(Report, ExitCodesDependOnlyOnTheReport) {
  CoverageReport rep;
  rep.certified_fraction = 1.0;
  EXPECT_EQ(exit_code(rep), 0);
  rep.certified_fraction = 0.7;
  EXPECT_EQ(exit_code(rep), 3);
  rep.counterexamples.push_back({vec({0.0}), 0, 1.0});
  EXPECT_EQ(exit_code(rep), 2);
  rep.certified_fraction = 1.0;  // inconsistent on purpose: counterexamples win
  EXPECT_EQ(exit_code(rep), 2);
  const auto full = report_from_json(report_to_json(jet_engine_run(0.039)));
  EXPECT_EQ(exit_code(full), exit_code(jet_engine_run(0.039)));
}

TEST(Sweep, ExactNetworkStopsAtTheLowerEnd) {
  const auto sys = load_system_config(data_path("systems/affine.json"));
  const auto res = sweep_epsilon(Reference::analytic(sys), load_weights(data_path("weights/affine_exact.json")),
                                 sys.domain(), 1e-6, 0.1, {});
  EXPECT_EQ(res.best_certified, 1e-6);
  EXPECT_EQ(res.probes.size(), 2u);
}

TEST(Sweep, ConstantOffsetBracketsTheTrueError) {
  const auto sys = load_system_config(data_path("systems/affine.json"));
  const auto res = sweep_epsilon(Reference::analytic(sys), load_weights(data_path("weights/affine_offset.json")),
                                 sys.domain(), 0.05, 0.5, {});
  EXPECT_GT(res.best_certified, 0.2);
  EXPECT_LE(res.best_certified, 0.2 * 1.05);
  EXPECT_LE(res.largest_failed, 0.2 + 1e-12);
  EXPECT_LE(res.best_certified - res.largest_failed, 0.05 * res.largest_failed + 1e-15);
}

TEST(Sweep, InvalidBracketIsReported) {
  const auto sys = load_system_config(data_path("systems/affine.json"));
  const Network net = load_weights(data_path("weights/affine_offset.json"));
  EXPECT_THROW(sweep_epsilon(Reference::analytic(sys), net, sys.domain(), 0.01, 0.1, {}), ConfigError);
  EXPECT_THROW(sweep_epsilon(Reference::analytic(sys), net, sys.domain(), 0.3, 0.1, {}), ConfigError);
}

TEST(Sweep, WaterTankCertifiesAtOrBelowTheStatedEpsilon) {
  const auto sys = lookup_system("WaterTank");
  const auto res = sweep_epsilon(Reference::analytic(sys), load_weights(data_path("weights/water_tank_small.json")),
                                 sys.domain(), 0.097 / 20, 0.097, {});
  EXPECT_LE(res.best_certified, 0.097);
  for (const auto& p : res.probes) EXPECT_EQ(p.certified, p.epsilon >= res.best_certified);
}

TEST(Sweep, CertificationIsMonotoneInEpsilon) {
  const auto sys = lookup_system("JetEngine");
  const auto ref = Reference::analytic(sys);
  const Network net = load_weights(data_path("weights/jet_engine_small.json"));
  bool seen = false;
  for (double eps : {0.02, 0.025, 0.03, 0.035, 0.039, 0.05, 0.08}) {
    const auto rep = verify_domain(ref, net, sys.domain(), eps);
    const bool ok = rep.certified_fraction >= 1.0;
    if (seen) EXPECT_TRUE(ok) << eps;
    seen |= ok;
  }
  EXPECT_TRUE(seen);
}
