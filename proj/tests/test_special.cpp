#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <gtest/gtest.h>

#include "isolyap/errors.hpp"
#include "isolyap/special.hpp"

namespace isolyap {
namespace {

TEST(Digamma, EulerMascheroni) {
  EXPECT_NEAR(digamma(1.0), -std::numbers::egamma, 1e-12);
  EXPECT_NEAR(digamma(1.0), -0.5772156649, 1e-10);
}

TEST(Digamma, HalfAndTwo) {
  EXPECT_NEAR(digamma(0.5), -std::numbers::egamma - 2 * std::numbers::ln2, 1e-12);
  EXPECT_NEAR(digamma(2.0), 1.0 - std::numbers::egamma, 1e-12);
}

TEST(Digamma, RecurrenceIdentity) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> dist(1e-3, 10.0);
  for (int k = 0; k < 2000; ++k) {
    const double x = dist(gen);
    EXPECT_NEAR(digamma(x + 1) - digamma(x), 1.0 / x, 1e-12 * std::max(1.0, 1.0 / x)) << x;
  }
}

TEST(Digamma, MatchesBoostOnGrid) {
  for (double x = 0.25; x <= 60.0; x += 0.0625) {
    EXPECT_NEAR(digamma(x), boost::math::digamma(x), 1e-12) << x;
  }
}

TEST(Trigamma, Basel) {
  EXPECT_NEAR(trigamma(1.0), std::numbers::pi * std::numbers::pi / 6, 1e-12);
  EXPECT_NEAR(trigamma(0.5), std::numbers::pi * std::numbers::pi / 2, 1e-12);
}

TEST(Trigamma, MatchesBoostOnGrid) {
  for (double x = 0.25; x <= 60.0; x += 0.0625) {
    EXPECT_NEAR(trigamma(x), boost::math::trigamma(x), 1e-12) << x;
  }
}

TEST(Special, DomainErrors) {
  EXPECT_THROW(digamma(0.0), DomainError);
  EXPECT_THROW(digamma(-1.5), DomainError);
  EXPECT_THROW(trigamma(0.0), DomainError);
  EXPECT_THROW(digamma(std::nan("")), DomainError);
  EXPECT_THROW(elog_chisq(0), DomainError);
}

TEST(ElogChisq, Values) {
  EXPECT_NEAR(elog_chisq(2), 0.1159315, 1e-7);
  EXPECT_NEAR(elog_chisq(1), -1.2703628, 1e-7);
  EXPECT_NEAR(elog_chisq(4), 1.1159315, 1e-7);
  EXPECT_NEAR(varlog_chisq(2), std::numbers::pi * std::numbers::pi / 6, 1e-12);
}

TEST(ElogChisq, MonteCarloTwoDegrees) {
  // chi-square with 2 dof is 2 * Exp(1).
  std::mt19937_64 gen(20261015);
  std::exponential_distribution<double> expo(1.0);
  constexpr int n = 10'000'000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double v = std::log(2.0 * expo(gen));
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_NEAR(mean, elog_chisq(2), 3 * se);
  EXPECT_NEAR(sum2 / n - mean * mean, varlog_chisq(2), 0.01);
}

}  // namespace
}  // namespace isolyap
