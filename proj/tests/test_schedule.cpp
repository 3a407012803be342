#include <gtest/gtest.h>

#include "sorel/schedule.hpp"

using namespace sorel;

TEST(Theoretical, ParameterValues) {
  const double mu = 0.5, L = 3.0, G = 2.0;
  const auto s = ScheduleParams::theoretical(mu, L, G);
  EXPECT_DOUBLE_EQ(s.alpha, 1.0 / 36.0);
  EXPECT_DOUBLE_EQ(s.gamma(0), 1.0);
  EXPECT_DOUBLE_EQ(s.eta(3), mu * 4.0 / (8.0 * G * G));
  EXPECT_DOUBLE_EQ(s.theta(0), 0.0);
  EXPECT_DOUBLE_EQ(s.theta(3), 0.75);
  EXPECT_DOUBLE_EQ(s.tau(1), 4.0 / (mu * 2.0));
  EXPECT_DOUBLE_EQ(s.delta(0), std::min(mu / 40.0, mu));
  EXPECT_DOUBLE_EQ(s.delta(3), std::min(mu / 64.0, mu * std::pow(4.0, -6.0)));
  EXPECT_EQ(s.m(0), static_cast<std::size_t>(std::ceil(384.0 * L / (5.0 * mu) + 2.0)));
  EXPECT_GE(s.T(0), s.m(0));
  EXPECT_EQ(s.T(2), static_cast<std::size_t>(
                        std::ceil(static_cast<double>(s.m(2)) * std::log(1.0 / s.delta(2)) * 2.0)));
  EXPECT_TRUE(s.average_epochs);
  EXPECT_TRUE(s.proximal);
}

TEST(Theoretical, SubproblemEpochRule) {
  const double mu = 0.5, L = 3.0;
  const auto s = ScheduleParams::theoretical(mu, L, 1.0, 2.0, EpochRule::subproblem);
  EXPECT_EQ(s.m(4), static_cast<std::size_t>(std::ceil(96.0 * L / (mu + 1.0 / s.tau(4)) + 2.0)));
}

TEST(Theoretical, RejectsDegenerateConstants) {
  EXPECT_THROW(ScheduleParams::theoretical(0.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(ScheduleParams::theoretical(1.0, 0.0, 1.0), std::invalid_argument);
}

TEST(Practical, ParameterValues) {
  const auto s = ScheduleParams::practical(100, 0.4, 1e-3);
  EXPECT_DOUBLE_EQ(s.tau(0), 20.0 * 100.0);
  EXPECT_DOUBLE_EQ(s.tau(9), 200.0);
  EXPECT_DOUBLE_EQ(s.eta(4), 0.4 * 5.0 / 100.0);
  EXPECT_DOUBLE_EQ(s.theta(1), 0.5);
  EXPECT_EQ(s.m(7), 100u);
  EXPECT_EQ(s.T(7), 100u);
  EXPECT_FALSE(s.average_epochs);
  EXPECT_FALSE(s.proximal);
}

TEST(Condition1, AnalysisScheduleHoldsOverLongHorizon) {
  for (double mu : {1e-3, 0.1, 2.0})
    for (double G : {0.5, 10.0}) {
      const auto s = ScheduleParams::theoretical(mu, 4.0, G);
      const auto report = validate_condition1(s, G, mu, 100000);
      EXPECT_TRUE(report.all_hold()) << report.summary();
    }
}

TEST(Condition1, ConstantThetaBreaksCouplingAtZero) {
  auto s = ScheduleParams::theoretical(0.5, 1.0, 1.0);
  s.theta = [](std::size_t) { return 1.0; };
  const auto report = validate_condition1(s, 1.0, 0.5, 50);
  EXPECT_FALSE(report.checks[2].holds);
  EXPECT_EQ(report.checks[2].first_violation, 0u);
}

TEST(Condition1, ConstantEtaBreaksStepRatioAtZero) {
  auto s = ScheduleParams::theoretical(0.5, 1.0, 1.0);
  s.eta = [](std::size_t) { return 0.01; };
  const auto report = validate_condition1(s, 1.0, 0.5, 50);
  EXPECT_FALSE(report.checks[0].holds);
  EXPECT_EQ(report.checks[0].first_violation, 0u);
}

TEST(Condition1, AnalysisMultiplierConvention) {
  const auto s = ScheduleParams::theoretical(0.5, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(s.analysis_alpha(0), 2.0 * s.eta(0));
  EXPECT_DOUBLE_EQ(s.analysis_alpha(5), 2.0 * s.eta(4));
}

TEST(Condition1, TooLargeEtaBreaksCouplingInequality) {
  auto s = ScheduleParams::theoretical(0.5, 1.0, 1.0);
  const auto eta = s.eta;
  s.eta = [=](std::size_t k) { return 10.0 * eta(k); };
  const auto report = validate_condition1(s, 1.0, 0.5, 20);
  EXPECT_FALSE(report.checks[3].holds);
}

TEST(Condition1, SummaryNamesEachInequality) {
  const auto s = ScheduleParams::theoretical(0.5, 1.0, 1.0);
  const std::string text = validate_condition1(s, 1.0, 0.5, 10).summary();
  for (const char* tag : {"a:", "b:", "c:", "d:", "e:"}) EXPECT_NE(text.find(tag), std::string::npos);
  EXPECT_THROW(validate_condition1(s, 1.0, 0.5, 0), std::invalid_argument);
}
