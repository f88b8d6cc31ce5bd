#include "isolyap/special.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "isolyap/errors.hpp"

namespace isolyap {
namespace {

constexpr double kShift = 10.0;

void require_positive(double x, const char* fn) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(fn) + ": argument must be positive and finite, got " + std::to_string(x));
  }
}

}  // namespace

double digamma(double x) {
  require_positive(x, "digamma");
  double acc = 0.0;
  while (x < kShift) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // -sum B_2k / (2k x^2k), k = 1..7
  const double series =
      r * (1.0 / 12 -
           r * (1.0 / 120 -
                r * (1.0 / 252 - r * (1.0 / 240 - r * (1.0 / 132 - r * (691.0 / 32760 - r * (1.0 / 12)))))));
  return acc + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double acc = 0.0;
  while (x < kShift) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // sum B_2k / x^(2k+1), k = 1..7
  const double series =
      (r / x) *
      (1.0 / 6 - r * (1.0 / 30 - r * (1.0 / 42 - r * (1.0 / 30 - r * (5.0 / 66 - r * (691.0 / 2730 - r * (7.0 / 6)))))));
  return acc + 1.0 / x + 0.5 * r + series;
}

double elog_chisq(int k) {
  if (k < 1) throw DomainError("elog_chisq: degrees of freedom must be >= 1, got " + std::to_string(k));
  return std::numbers::ln2 + digamma(0.5 * k);
}

double varlog_chisq(int k) {
  if (k < 1) throw DomainError("varlog_chisq: degrees of freedom must be >= 1, got " + std::to_string(k));
  return trigamma(0.5 * k);
}

}  // namespace isolyap
