#include <gtest/gtest.h>

#include "helpers.hpp"

// Values frozen from tests/oracles/*.py, which enumerate the models directly
// and share no code with the library.

using namespace cel;

namespace {

struct FeedbackCase {
  double alpha, rho, mu_w;
  std::vector<double> intercepts;  // W[1..5] then X[1..5]
  double conf, med, wavg;
};

const std::vector<FeedbackCase>& feedback_cases() {
  static const std::vector<FeedbackCase> cases = {
      {3, 10, 2,
       {-2.1972245773362191, -16.344419636484012, -16.694471334793036, -17.061533298699381, -17.452404411532466,
        -2.8918965429729759, -4.0500198131353224, -4.9675576332411229, -5.8916503460921623, -6.789946828149616},
       1.0000000000000002, -0.95224027624431939, -0.87495634378528608},
      {1, 1, 1,
       {-2.1972245773362191, -2.4885674016430555, -2.6560450770419921, -2.8383721258395296, -3.0359085432619031,
        -2.3380655645132529, -2.6503901321609984, -2.8314080337013769, -3.0270696664159025, -3.2365754674118965},
       1.0000000000000002, 0.47186762696346118, 0.94856334851773016},
      {0, 5, 1,
       {-2.1972245773362191, -2.3380655645132529, -2.4885674016430559, -2.6503901321609979, -2.8245757370006124,
        -2.1972245773362196, -2.3380655645132524, -2.3380655645132529, -2.3380655645132529, -2.3380655645132538},
       1.0, 1.0, 1.0},
  };
  return cases;
}

}  // namespace

TEST(OracleValues, FeedbackCalibration) {
  for (const auto& c : feedback_cases()) {
    auto got = calibrate_intercepts(test::scenario(c.alpha, c.rho, c.mu_w));
    ASSERT_EQ(got.size(), c.intercepts.size());
    // Late intercepts sit where prevalence is flat in the intercept, so the
    // root itself is only determined to about 1e-9.
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], c.intercepts[i], 1e-7) << c.alpha << " #" << i;
  }
}

TEST(OracleValues, FeedbackEstimands) {
  for (const auto& c : feedback_cases()) {
    auto m = build_scenario(test::scenario(c.alpha, c.rho, c.mu_w), c.intercepts);
    EXPECT_NEAR(ate_sv(m, SvFlavor::conf).value, c.conf, 1e-12);
    EXPECT_NEAR(ate_sv(m, SvFlavor::med).value, c.med, 1e-12);
    EXPECT_NEAR(wavg_eq5(m).value, c.wavg, 1e-12);
  }
}

TEST(OracleValues, FeedbackNegativeCoupling) {
  auto row = evaluate_cell(ScenarioParams{}, -2, 0.5, 0.5);
  ASSERT_TRUE(row.ok);
  EXPECT_NEAR(row.ate_sv_conf, 1.0000000000000009, 1e-9);
  EXPECT_NEAR(row.ate_sv_med, 1.0216596321461728, 1e-9);
  EXPECT_NEAR(row.wavg_eq5, 1.0112814377362018, 1e-9);
}

TEST(OracleValues, AnchorCellDecomposition) {
  const auto& c = feedback_cases()[0];
  auto m = build_scenario(test::scenario(3, 10, 2), c.intercepts);
  auto top = wavg_eq5(m).by_weight();
  ASSERT_GE(top.size(), 4u);
  const char* x[] = {"11111", "01111", "10111", "00111"};
  const double w[] = {0.686841, 0.133473, 0.039859, 0.034723};
  const double ate[] = {-1.0, -0.999995, -0.999995, 0.8};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(top[i].x_profile, x[i]);
    EXPECT_EQ(top[i].x_star_profile, "00000");
    EXPECT_NEAR(top[i].weight, w[i], 1e-6);
    EXPECT_NEAR(top[i].pair_ate, ate[i], 1e-6);
  }
  // Positive association on the summary scale, negative weighted average.
  EXPECT_GT(c.conf, 0.0);
  EXPECT_LT(c.wavg, 0.0);
}

TEST(OracleValues, SmallModels) {
  auto la = test::load("la");
  EXPECT_NEAR(ate_longitudinal(la, {1, 1}, {0, 0}), 2.0, 1e-12);
  EXPECT_NEAR(ate_longitudinal(la, {1}, {0}), 2.0, 1e-12);
  EXPECT_NEAR(ate_cs_unconditional(la).value, 2.0, 1e-12);

  auto l4 = test::load("l_ex4");
  EXPECT_NEAR(ate_stratum(l4, {1, 1}, {0, 0}, Event::parse(l4, "W[1]=1")), 2.4153589363882122, 1e-12);
  EXPECT_NEAR(ate_stratum(l4, {1, 1}, {0, 0}, Event::parse(l4, "W[2]=1")), 2.4485150691073865, 1e-12);
  EXPECT_NEAR(ate_cs_conditional(l4, {l4.id("W[2]")}).value, 2.089444902419642, 1e-12);

  auto l2 = test::load("l_ex2");
  EXPECT_NEAR(ate_cs_conditional(l2, {l2.id("W[2]")}).value, 1.8309205735489036, 1e-12);
  EXPECT_NEAR(wavg_theorem2(l2, {l2.id("W[2]")}).value, 1.6805574696008814, 1e-12);

  auto st = test::load("stable_chain");
  EXPECT_NEAR(ate_cs_unconditional(st).value, 1.918666316761469, 1e-12);
  EXPECT_NEAR(ate_cs_stable(st).value, 1.918666316761469, 1e-12);
}

TEST(OracleValues, AlphaZeroInterceptsFollowOnlyTheirOwnChains) {
  // With alpha = 0 the two processes decouple but each still feeds forward
  // (beta, gamma), so only the first intercept of each is logit(0.1).
  const auto& c = feedback_cases()[2];
  EXPECT_NEAR(c.intercepts[0], logit(0.1), 1e-15);
  EXPECT_NEAR(c.intercepts[5], logit(0.1), 1e-15);
  EXPECT_GT(std::fabs(c.intercepts[1] - logit(0.1)), 0.1);
}
