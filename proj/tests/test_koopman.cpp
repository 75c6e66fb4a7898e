#include <cmath>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace nacert;
using namespace testing_support;

TEST(Koopman, ModelLoadsAndValidates) {
  const auto m = load_koopman(data_path("weights/koopman_quadratic"));
  EXPECT_EQ(m.horizon, 50);
  EXPECT_EQ(m.encoder.input_dim(), 2u);
  EXPECT_EQ(m.decoder.output_dim(), 2u);
  EXPECT_EQ(m.koopman.input_dim(), m.koopman.output_dim());
  for (const auto& l : m.koopman.layers()) EXPECT_FALSE(l.has_bias());
  EXPECT_THROW(m.step_network(51), ConfigError);
  EXPECT_THROW(load_koopman(data_path("weights/missing_model")), ParseError);
}

TEST(Koopman, ConvergedModelTracksTheClosedForm) {
  const auto m = load_koopman(data_path("weights/koopman_quadratic"));
  const auto rep = verify_koopman(m, 0.1, {}, 5);
  EXPECT_EQ(rep.steps.size(), 6u);
  EXPECT_EQ(rep.certified_fraction, 1.0);
  EXPECT_EQ(rep.counterexamples, 0u);
}

TEST(Koopman, CoarseModelCounterexamplesConfirm) {
  const auto m = load_koopman(data_path("weights/koopman_quadratic_coarse"));
  const auto rep = verify_koopman(m, 0.1, {}, 3);
  EXPECT_GT(rep.counterexamples, 0u);
  EXPECT_LT(rep.certified_fraction, 1.0);
  for (std::size_t t = 0; t < rep.steps.size(); ++t) {
    const auto ref = Reference::analytic(quadratic_steps(static_cast<int>(t), m.params));
    const Network net = m.step_network(static_cast<int>(t));
    for (const auto& c : rep.steps[t].counterexamples) {
      EXPECT_TRUE(confirm_counterexample(ref, net, c.x, c.j, 0.1));
      // same check straight from the closed form
      const QuadraticParams& p = m.params;
      const double s = p.dt * static_cast<double>(t), k = p.lambda / (2 * p.mu - p.lambda);
      const double x1 = c.x[0] * std::exp(p.mu * s);
      const double x2 = (c.x[1] + k * c.x[0] * c.x[0]) * std::exp(p.lambda * s) -
                        k * c.x[0] * c.x[0] * std::exp(2 * p.mu * s);
      const double truth = c.j == 0 ? x1 : x2;
      EXPECT_GT(std::abs(truth - forward(net, c.x)[static_cast<Eigen::Index>(c.j)]), 0.1);
    }
  }
}
