#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace nacert;
using namespace testing_support;

namespace {

Network affine_net(double w, double b) { return Network({layer(mat({{w}}), vec({b}), Activation::Identity)}); }

VerificationTask task(const Hyperrectangle& b, std::size_t j, double eps, int depth = 0, std::uint64_t seed = 1) {
  return {b, j, eps, depth, seed};
}

SplitPolicy literal_policy(const Hyperrectangle& domain) {
  return {domain.widths() * 1e-4, domain.widths(), 4, false};
}

}  // namespace

TEST(Verifier, ExactAffineNetworkIsCertified) {
  const auto ref = Reference::analytic(make_system({"x"}, {"2*x"}, {{-1, 1}}));
  const auto v = check_box(ref, affine_net(2.0, 0.0), task(box({{-1, 1}}), 0, 1e-9));
  EXPECT_EQ(v.kind, Verdict::Kind::Certified);
}

TEST(Verifier, ConstantOffsetIsFalsified) {
  const auto ref = Reference::analytic(make_system({"x"}, {"x"}, {{-1, 1}}));
  const Network net = affine_net(1.0, 0.2);
  const auto v = check_box(ref, net, task(box({{-1, 1}}), 0, 0.1));
  ASSERT_EQ(v.kind, Verdict::Kind::Falsified);
  EXPECT_NEAR(v.error, 0.2, 1e-12);
  EXPECT_TRUE(confirm_counterexample(ref, net, v.witness, 0, 0.1));
}

TEST(Verifier, WideRemainderRequestsASplit) {
  const auto ref = Reference::analytic(make_system({"x"}, {"x^2"}, {{-1, 1}}));
  const auto v = check_box(ref, affine_net(0.0, 0.5), task(box({{-1, 1}}), 0, 0.1));
  ASSERT_EQ(v.kind, Verdict::Kind::Split);
  EXPECT_EQ(v.reason, SplitReason::Remainder);
  EXPECT_NEAR(v.score, 1.0, 1e-12);
  ASSERT_TRUE(v.axis.has_value());
  EXPECT_EQ(*v.axis, 0u);
}

TEST(Verifier, ConfirmCounterexample) {
  const auto ref = Reference::analytic(make_system({"x"}, {"x"}, {{-1, 1}}));
  EXPECT_TRUE(confirm_counterexample(ref, affine_net(1.0, 0.2), vec({0.0}), 0, 0.1));
  std::mt19937_64 rng(51);
  for (int k = 0; k < 100; ++k)
    EXPECT_FALSE(confirm_counterexample(ref, affine_net(1.0, 0.0), uniform_point(box({{-1, 1}}), rng), 0, 1e-12));
}

TEST(Verifier, ResidualBoundExamples) {
  const Hyperrectangle b = box({{0, 1}});
  const EnclosureRow exact{vec({1.0}), vec({1.0}), 0.0, 0.0};
  EXPECT_NEAR(residual_bound(affine_net(0.5, 0.0), exact, b, 0, ResidualSide::Upper), 0.5, 1e-15);
  EXPECT_NEAR(residual_bound(affine_net(0.5, 0.0), exact, b, 0, ResidualSide::Lower), 0.0, 1e-15);
  const EnclosureRow line{vec({0.3}), vec({0.3}), -0.1, 0.2};
  EXPECT_NEAR(residual_bound(affine_net(0.3, 0.2), line, b, 0, ResidualSide::Upper), 0.0, 1e-12);
}

TEST(Verifier, ResidualBoundDominatesAGridSearch) {
  std::mt19937_64 rng(52);
  const auto sys = lookup_system("JetEngine");
  const auto ref = Reference::analytic(sys);
  for (int k = 0; k < 100; ++k) {
    const Network net = random_network(rng, 2, {8, 8}, 2, k % 2 ? Activation::ReLU : Activation::LeakyReLU);
    const Hyperrectangle b = random_subbox(sys.domain(), rng, 0.05, 0.4);
    const std::size_t j = static_cast<std::size_t>(k % 2);
    const EnclosureRow row = ref.enclosure(j, b);
    const double up = residual_bound(net, row, b, j, ResidualSide::Upper);
    const double lo = residual_bound(net, row, b, j, ResidualSide::Lower);
    double gu = -std::numeric_limits<double>::infinity(), gl = gu;
    for (int a = 0; a < 100; ++a)
      for (int c = 0; c < 100; ++c) {
        const Vector x = b.point_at(vec({a / 99.0, c / 99.0}));
        const double n = forward(net, x)[static_cast<Eigen::Index>(j)];
        gu = std::max(gu, row.a_up.dot(x) + row.b_up - n);
        gl = std::max(gl, n - row.a_low.dot(x) - row.b_low);
        // and the enclosure brackets the true residual too
        const double f = evaluate_output(sys, j, x);
        ASSERT_LE(f - n, up + 1e-9);
        ASSERT_LE(n - f, lo + 1e-9);
      }
    EXPECT_GE(up, gu - 1e-9);
    EXPECT_GE(lo, gl - 1e-9);
  }
}

TEST(Verifier, SplitBoxExamples) {
  const auto [a, b] = split_box(Hyperrectangle::from_center(vec({0, 0}), vec({1, 1})), 0);
  EXPECT_EQ(a.center(), vec({0.5, 0.0}));
  EXPECT_EQ(b.center(), vec({-0.5, 0.0}));
  EXPECT_EQ(a.radius(), vec({0.5, 1.0}));
  EXPECT_EQ(b.radius(), vec({0.5, 1.0}));
  const auto [c, d] = split_box(box({{1, 3}}), 0);
  EXPECT_EQ(d.lower(0), 1.0);
  EXPECT_EQ(d.upper(0), 2.0);
  EXPECT_EQ(c.lower(0), 2.0);
  EXPECT_EQ(c.upper(0), 3.0);
  EXPECT_THROW(split_box(box({{1, 3}}), 1), DimensionError);
}

TEST(Verifier, SplitChildrenPartitionTheParent) {
  std::mt19937_64 rng(53);
  for (int k = 0; k < 500; ++k) {
    const Hyperrectangle p = random_subbox(box({{-5, 5}, {-1, 1}, {0, 3}}), rng, 0.01, 1.0);
    const std::size_t axis = static_cast<std::size_t>(k % 3);
    const auto [a, b] = split_box(p, axis);
    EXPECT_NEAR(a.volume() + b.volume(), p.volume(), 1e-12 * p.volume());
    EXPECT_EQ(a.lower(axis), b.upper(axis));
  }
}

TEST(Verifier, AxisChoiceFollowsTheNonlinearInputs) {
  const auto je = Reference::analytic(lookup_system("JetEngine"));
  const Hyperrectangle d = box({{-1, 1}, {-1, 1}});
  const auto pol = literal_policy(d);
  std::mt19937_64 rng(54);
  for (int depth : {0, 1, 2, 4, 5, 6}) {
    const Hyperrectangle b = random_subbox(d, rng, 0.1, 1.0);
    EXPECT_EQ(choose_split_axis(je, 0, b, depth, SplitReason::Remainder, pol), std::optional<std::size_t>(0));
    EXPECT_EQ(choose_split_axis(je, 1, b, depth, SplitReason::Remainder, pol), std::nullopt);
  }
  const auto ex = Reference::analytic(lookup_system("Exponential"));
  EXPECT_EQ(choose_split_axis(ex, 0, d, 0, SplitReason::Remainder, pol), std::optional<std::size_t>(1));
}

TEST(Verifier, RoundRobinVisitsEveryAxis) {
  const auto ref = Reference::analytic(lookup_system("SteamGovernor"));
  const Hyperrectangle d = lookup_system("SteamGovernor").domain();
  const auto pol = literal_policy(d);
  std::set<std::size_t> seen;
  for (int depth = 3; depth < 48; depth += 4)
    if (auto a = choose_split_axis(ref, 0, d, depth, SplitReason::Residual, pol)) seen.insert(*a);
  EXPECT_EQ(seen, (std::set<std::size_t>{0, 1, 2}));
}

TEST(Verifier, NoAxisBelowTheWidthFloor) {
  const auto ref = Reference::analytic(make_system({"x"}, {"x^2"}, {{-1, 1}}));
  SplitPolicy pol{vec({1.0}), vec({2.0}), 4, true};
  EXPECT_EQ(choose_split_axis(ref, 0, box({{0, 0.5}}), 0, SplitReason::Remainder, pol), std::nullopt);
  const auto v = check_box(BoxChecker(ref, affine_net(0.0, 0.0)), task(box({{0, 0.5}}), 0, 1e-3), pol);
  EXPECT_EQ(v.kind, Verdict::Kind::Split);
  EXPECT_FALSE(v.axis.has_value());
}

TEST(Verifier, VerdictsAreDeterministic) {
  std::mt19937_64 rng(55);
  const auto ref = Reference::analytic(lookup_system("JetEngine"));
  const Network net = load_weights(data_path("weights/jet_engine_small.json"));
  const BoxChecker checker(ref, net);
  const auto pol = literal_policy(box({{-1, 1}, {-1, 1}}));
  for (int k = 0; k < 50; ++k) {
    const auto t = task(random_subbox(box({{-1, 1}, {-1, 1}}), rng), k % 2, 0.039, k, 77 + k);
    const auto a = check_box(checker, t, pol), b = check_box(checker, t, pol);
    EXPECT_EQ(a.kind, b.kind);
    EXPECT_EQ(a.axis, b.axis);
    EXPECT_EQ(a.witness, b.witness);
    EXPECT_EQ(a.score, b.score);
  }
}

TEST(Verifier, FalsifiedWitnessesAlwaysConfirm) {
  std::mt19937_64 rng(56);
  const auto sys = lookup_system("Exponential");
  const auto ref = Reference::analytic(sys);
  const BoxChecker checker(ref, random_network(rng, 2, {6}, 2, Activation::ReLU, 0.1, 0.3));
  int falsified = 0;
  for (int k = 0; k < 300; ++k) {
    const auto t = task(random_subbox(sys.domain(), rng, 0.001, 0.05), k % 2, 0.1, 0, k);
    const auto v = checker.check(t);
    if (v.kind != Verdict::Kind::Falsified) continue;
    ++falsified;
    EXPECT_TRUE(t.box.contains(v.witness));
    EXPECT_TRUE(confirm_counterexample(ref, checker.network(), v.witness, t.j, t.epsilon));
  }
  EXPECT_GT(falsified, 0);
}

TEST(Verifier, CertifiedBoxesHaveNoErrorAboveEpsilon) {
  std::mt19937_64 rng(57);
  const auto sys = lookup_system("WaterTank");
  const auto ref = Reference::analytic(sys);
  const Network net = load_weights(data_path("weights/water_tank_small.json"));
  const BoxChecker checker(ref, net);
  int certified = 0;
  for (int k = 0; k < 300; ++k) {
    const auto t = task(random_subbox(sys.domain(), rng, 0.001, 0.02), 0, 0.097);
    if (checker.check(t).kind != Verdict::Kind::Certified) continue;
    ++certified;
    for (int s = 0; s < 200; ++s) {
      const Vector x = uniform_point(t.box, rng);
      EXPECT_LE(std::abs(evaluate_output(sys, 0, x) - forward(net, x)[0]), 0.097 + 1e-9);
    }
  }
  EXPECT_GT(certified, 100);
}

TEST(Verifier, NetworkReferenceAgainstItself) {
  std::mt19937_64 rng(58);
  const Network teacher = random_network(rng, 3, {12, 12}, 3);
  const auto ref = Reference::network(teacher);
  const auto v = check_box(ref, teacher, task(box({{-0.01, 0.01}, {-0.01, 0.01}, {-0.01, 0.01}}), 1, 0.05));
  EXPECT_EQ(v.kind, Verdict::Kind::Certified);
  const auto w = check_box(ref, teacher, task(box({{-2, 2}, {-2, 2}, {-2, 2}}), 1, 1e-3));
  EXPECT_EQ(w.kind, Verdict::Kind::Split);
  ASSERT_TRUE(w.axis.has_value());
}

TEST(Verifier, LipschitzReferenceFallback) {
  const auto ref = Reference::lipschitz([](const Vector& x) { return Vector(x.array().sin()); }, 1.0, 1, 1);
  const Network zero = affine_net(0.0, 0.0);
  EXPECT_EQ(check_box(ref, zero, task(box({{-0.01, 0.01}}), 0, 0.05)).kind, Verdict::Kind::Certified);
  EXPECT_EQ(check_box(ref, zero, task(box({{1.0, 1.01}}), 0, 0.05)).kind, Verdict::Kind::Falsified);
}

TEST(Verifier, MismatchedShapesAreRejected) {
  EXPECT_THROW(BoxChecker(Reference::analytic(lookup_system("JetEngine")), affine_net(1.0, 0.0)), DimensionError);
}
