#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "isolyap/ensembles.hpp"
#include "isolyap/errors.hpp"
#include "test_util.hpp"

namespace isolyap {
namespace {

using testing::max_abs;
using testing::Moments;

double sq_abs(double x) { return x * x; }
double sq_abs(Complex z) { return std::norm(z); }

void expect_within_se(const Moments& a, double target, double k = 3.0) {
  EXPECT_NEAR(a.mean(), target, k * a.se()) << "n=" << a.count();
}

void expect_same_mean(const Moments& a, const Moments& b) {
  const double se = std::hypot(a.se(), b.se());
  EXPECT_NEAR(a.mean(), b.mean(), 3 * se);
}

// ---------------------------------------------------------------- parsing

TEST(EnsembleText, RoundTrip) {
  for (const char* text : {"ginibre", "truncated-haar:m=8", "haar-scaled:law=lognormal(0,0.5)",
                           "custom-singular:fixed=[2,1]", "custom-singular:laws=[uniform(1,2),constant(1)]",
                           "haar-scaled:law=exponential(2.5)"}) {
    EXPECT_EQ(to_string(parse_ensemble_kind(text)), text);
  }
}

TEST(EnsembleText, ToleratesWhitespace) {
  const auto k = parse_ensemble_kind(" custom-singular : laws = [ uniform(1, 2) , constant(1) ] ");
  const auto& c = std::get<CustomSingular>(k);
  ASSERT_EQ(c.laws.size(), 2u);
  EXPECT_EQ(c.laws[0], ScalarLaw::uniform(1, 2));
}

TEST(EnsembleText, Rejects) {
  EXPECT_THROW(parse_ensemble_kind("wishart"), SpecError);
  EXPECT_THROW(parse_ensemble_kind("truncated-haar"), SpecError);
  EXPECT_THROW(parse_ensemble_kind("truncated-haar:m=x"), SpecError);
  EXPECT_THROW(parse_ensemble_kind("haar-scaled:law=constant(-1)"), SpecError);
  EXPECT_THROW(parse_ensemble_kind("haar-scaled:law=cauchy(1)"), SpecError);
  EXPECT_THROW(parse_ensemble_kind("custom-singular:fixed=2,1"), SpecError);
  EXPECT_THROW(parse_ensemble_kind("ginibre:m=3"), SpecError);
}

TEST(EnsembleSpec, Validation) {
  EXPECT_THROW((EnsembleSpec{Field::real, 3, TruncatedHaar{3}}.validate()), SpecError);
  EXPECT_NO_THROW((EnsembleSpec{Field::real, 3, TruncatedHaar{4}}.validate()));
  EXPECT_THROW((EnsembleSpec{Field::real, 0, Ginibre{}}.validate()), SpecError);
  EXPECT_THROW((EnsembleSpec{Field::real, 2, CustomSingular{{}, {1.0}}}.validate()), SpecError);
  EXPECT_THROW((EnsembleSpec{Field::real, 2, CustomSingular{{}, {1.0, 0.0}}}.validate()), SpecError);
  EXPECT_THROW((EnsembleSpec{Field::real, 1, CustomSingular{}}.validate()), SpecError);
}

TEST(ScalarLaw, MeanLogMatchesSampling) {
  for (const auto& law : {ScalarLaw::uniform(0.5, 3), ScalarLaw::lognormal(0.3, 0.7), ScalarLaw::exponential(2)}) {
    Engine eng = RngStream(101).engine();
    Moments m;
    for (int k = 0; k < 200000; ++k) m.add(std::log(law.sample(eng)));
    expect_within_se(m, law.mean_log());
  }
}

// --------------------------------------------------------------- samplers

TEST(SampleGinibre, RealMoments) {
  const RMatrix a = sample_ginibre<double>(1000, 1000, RngStream(1));
  EXPECT_NEAR(a.mean(), 0.0, 4.0 / 1000);
  EXPECT_NEAR(a.cwiseAbs2().mean(), 1.0, 0.01);
}

TEST(SampleGinibre, ComplexMoments) {
  const CMatrix a = sample_ginibre<Complex>(1000, 1000, RngStream(2));
  EXPECT_NEAR(a.real().mean(), 0.0, 4.0 / 1000);
  EXPECT_NEAR(a.imag().mean(), 0.0, 4.0 / 1000);
  EXPECT_NEAR(a.cwiseAbs2().mean(), 2.0, 0.02);
}

TEST(SampleGinibre, Reproducible) {
  const RngStream s(77, {4, 2});
  EXPECT_EQ(sample_ginibre<Complex>(3, 5, s), sample_ginibre<Complex>(3, 5, s));
  EXPECT_NE(sample_ginibre<double>(3, 3, s), sample_ginibre<double>(3, 3, s.derive(0)));
  EXPECT_THROW(sample_ginibre<double>(0, 3, s), ArgumentError);
}

TEST(SampleHaar, OneDimensionalSigns) {
  constexpr int n = 100000;
  int plus = 0;
  const RngStream root(3);
  for (int k = 0; k < n; ++k) {
    const double u = sample_haar_unitary<double>(1, root.derive(k))(0, 0);
    ASSERT_NEAR(std::abs(u), 1.0, 1e-15);
    plus += u > 0;
  }
  EXPECT_NEAR(plus, n / 2.0, 3 * std::sqrt(n * 0.25));
}

template <class Scalar>
void check_haar_column_moment(int d) {
  Moments m;
  const RngStream root(4, {static_cast<std::uint64_t>(d)});
  for (int k = 0; k < 50000; ++k) {
    const Mat<Scalar> u = sample_haar_unitary<Scalar>(d, root.derive(k));
    ASSERT_TRUE(linalg::is_unitary(u));
    m.add(sq_abs(u(0, 0)));
  }
  expect_within_se(m, 1.0 / d);
}

TEST(SampleHaar, FirstEntryMomentReal) {
  for (int d : {2, 3, 5}) check_haar_column_moment<double>(d);
}

TEST(SampleHaar, FirstEntryMomentComplex) {
  for (int d : {2, 3, 5}) check_haar_column_moment<Complex>(d);
}

template <class Scalar>
void check_haar_invariance(int d) {
  std::mt19937_64 gen(500 + d);
  const Mat<Scalar> w = testing::random_unitary<Scalar>(gen, d);
  Moments plain1, plain2, left1, left2, right1, right2;
  const RngStream root(5, {static_cast<std::uint64_t>(d)});
  constexpr int n = 100000;
  for (int k = 0; k < n; ++k) {
    const double t0 = std::abs(sample_haar_unitary<Scalar>(d, root.derive(3 * k)).trace());
    const double tl = std::abs((w * sample_haar_unitary<Scalar>(d, root.derive(3 * k + 1))).trace());
    const double tr = std::abs((sample_haar_unitary<Scalar>(d, root.derive(3 * k + 2)) * w).trace());
    plain1.add(t0);
    plain2.add(t0 * t0);
    left1.add(tl);
    left2.add(tl * tl);
    right1.add(tr);
    right2.add(tr * tr);
  }
  expect_same_mean(plain1, left1);
  expect_same_mean(plain2, left2);
  expect_same_mean(plain1, right1);
  expect_same_mean(plain2, right2);
  // E|tr u|^2 = 1 for Haar unitary and orthogonal matrices alike.
  expect_within_se(plain2, 1.0);
}

TEST(SampleHaar, LeftRightInvariance) {
  for (int d : {2, 4}) {
    check_haar_invariance<double>(d);
    check_haar_invariance<Complex>(d);
  }
}

TEST(SampleTruncatedHaar, ContractionAndEntryMoment) {
  Moments m;
  const RngStream root(6);
  for (int k = 0; k < 20000; ++k) {
    const CMatrix a = sample_truncated_haar<Complex>(7, 3, root.derive(k));
    ASSERT_LE(linalg::svd_descending(a).sigma(0), 1.0 + 1e-10);
    m.add(std::norm(a(1, 2)));
  }
  expect_within_se(m, 1.0 / 7);
  EXPECT_THROW(sample_truncated_haar<double>(3, 3, root), ArgumentError);
}

TEST(SampleTruncatedHaar, CosineEntryLogMoment) {
  Moments m;
  const RngStream root(7);
  for (int k = 0; k < 1'000'000; ++k) {
    m.add(std::log(std::abs(sample_truncated_haar<double>(2, 1, root.derive(k))(0, 0))));
  }
  expect_within_se(m, -std::numbers::ln2);
}

TEST(SampleSingularValues, FixedAndConstant) {
  const RngStream s(8);
  const RVector fixed = sample_singular_values({Field::real, 2, CustomSingular{{}, {1.0, 2.0}}}, s);
  EXPECT_EQ(fixed(0), 2.0);
  EXPECT_EQ(fixed(1), 1.0);
  const RVector ones = sample_singular_values({Field::complex, 4, HaarScaled{ScalarLaw::constant(1)}}, s);
  EXPECT_EQ(ones, RVector::Ones(4));
}

TEST(SampleSingularValues, LawsAreSortedDescending) {
  const EnsembleSpec spec{Field::real, 3, CustomSingular{{ScalarLaw::uniform(0, 1), ScalarLaw::uniform(0, 1),
                                                          ScalarLaw::exponential(1)}, {}}};
  for (int k = 0; k < 100; ++k) {
    const RVector s = sample_singular_values(spec, RngStream(9, {static_cast<std::uint64_t>(k)}));
    EXPECT_GE(s(0), s(1));
    EXPECT_GE(s(1), s(2));
    EXPECT_GT(s(2), 0.0);
  }
}

TEST(SampleSingularValues, GinibreTraceMoment) {
  Moments m;
  const EnsembleSpec spec{Field::real, 2, Ginibre{}};
  for (int k = 0; k < 100000; ++k) m.add(sample_singular_values(spec, RngStream(10).derive(k)).squaredNorm());
  EXPECT_NEAR(m.mean(), 4.0, 0.04);
}

TEST(SampleIsotropic, ScaledHaarIsUnitary) {
  const EnsembleSpec spec{Field::complex, 3, HaarScaled{ScalarLaw::constant(1)}};
  EXPECT_TRUE(linalg::is_unitary(sample_isotropic<Complex>(spec, RngStream(11))));
  EXPECT_THROW(sample_isotropic<double>(spec, RngStream(11)), ArgumentError);
}

TEST(SampleIsotropic, SingularValuesAreD) {
  const EnsembleSpec spec{Field::real, 4, CustomSingular{{ScalarLaw::lognormal(0, 1), ScalarLaw::lognormal(0, 1),
                                                          ScalarLaw::lognormal(0, 1), ScalarLaw::lognormal(0, 1)},
                                                         {}}};
  for (std::uint64_t k = 0; k < 50; ++k) {
    const RngStream s(12, {k});
    const RVector d = sample_singular_values(spec, s.derive(0));
    const RVector sigma = linalg::svd_descending(sample_isotropic<double>(spec, s)).sigma;
    EXPECT_LT((sigma - d).cwiseAbs().maxCoeff(), 1e-10 * d(0));
  }
}

TEST(SampleIsotropic, GinibreRoutesAgree) {
  const EnsembleSpec spec{Field::real, 2, Ginibre{}};
  Moments direct, composed;
  constexpr int n = 100000;
  for (int k = 0; k < n; ++k) {
    const RngStream s(13, {static_cast<std::uint64_t>(k)});
    direct.add(std::log(linalg::svd_descending(sample_isotropic<double>(spec, s)).sigma(0)));
    const RVector d = sample_singular_values(spec, s.derive(0));
    const RMatrix m = sample_haar_unitary<double>(2, s.derive(1)) * d.asDiagonal() *
                      sample_haar_unitary<double>(2, s.derive(2));
    composed.add(std::log(linalg::svd_descending(m).sigma(0)));
  }
  expect_same_mean(direct, composed);
}

TEST(SampleRightIsotropic, RowNormsFollowD) {
  const EnsembleSpec spec{Field::real, 2, CustomSingular{{}, {2.0, 1.0}}};
  const RMatrix m = sample_right_isotropic<double>(spec, RMatrix::Identity(2, 2), RngStream(14));
  EXPECT_NEAR(m.row(0).norm(), 2.0, 1e-12);
  EXPECT_NEAR(m.row(1).norm(), 1.0, 1e-12);
}

TEST(SampleRightIsotropic, SingularValuesIgnoreFrame) {
  std::mt19937_64 gen(15);
  const EnsembleSpec spec{Field::complex, 3, CustomSingular{{}, {3.0, 2.0, 0.5}}};
  const CMatrix u = testing::random_unitary<Complex>(gen, 3);
  const RVector sigma = linalg::svd_descending(sample_right_isotropic<Complex>(spec, u, RngStream(15))).sigma;
  EXPECT_LT((sigma - RVector{{3.0, 2.0, 0.5}}).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SampleRightIsotropic, RejectsNonUnitaryFrame) {
  const EnsembleSpec spec{Field::real, 2, CustomSingular{{}, {2.0, 1.0}}};
  EXPECT_THROW(sample_right_isotropic<double>(spec, RMatrix::Identity(2, 2) * 1.01, RngStream(16)), ArgumentError);
  EXPECT_THROW(sample_right_isotropic<double>(spec, RMatrix::Identity(3, 3), RngStream(16)), ArgumentError);
}

// ----------------------------------------------- triangular factor of Ginibre

template <class Scalar>
void check_lq_law(int i, int d) {
  constexpr int n = 100000;
  const double dof_scale = field_of<Scalar>() == Field::real ? 1.0 : 2.0;
  std::vector<Moments> diag(i), diag_sq(i);
  Moments off_mean, off_sq;
  const RngStream root(17, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(d)});
  for (int k = 0; k < n; ++k) {
    const auto lq = linalg::lq_positive(sample_ginibre<Scalar>(i, d, root.derive(k)));
    for (int j = 0; j < i; ++j) {
      const double t2 = std::real(lq.t(j, j)) * std::real(lq.t(j, j));
      diag[j].add(t2);
      diag_sq[j].add(t2 * t2);
      for (int c = 0; c < j; ++c) {
        off_mean.add(std::real(lq.t(j, c)));
        off_sq.add(sq_abs(lq.t(j, c)));
      }
    }
  }
  for (int j = 0; j < i; ++j) {
    const double dof = dof_scale * (d - j);
    expect_within_se(diag[j], dof);
    // Var = E[x^2] - E[x]^2 with the chi-square mean plugged in for E[x].
    expect_within_se(diag_sq[j], 2 * dof + dof * dof);
  }
  if (i > 1) {
    expect_within_se(off_mean, 0.0);
    expect_within_se(off_sq, dof_scale);
  }
}

TEST(GinibreLq, TriangularFactorLawReal) {
  check_lq_law<double>(2, 4);
  check_lq_law<double>(3, 3);
}

TEST(GinibreLq, TriangularFactorLawComplex) { check_lq_law<Complex>(2, 3); }

TEST(GinibreLq, FactorsIndependent) {
  constexpr int n = 100000;
  std::vector<double> x(n), y(n);
  const RngStream root(18);
  for (int k = 0; k < n; ++k) {
    const auto lq = linalg::lq_positive(sample_ginibre<double>(2, 4, root.derive(k)));
    x[k] = std::log(lq.t.diagonal().prod());
    y[k] = std::log(std::abs(lq.o.leftCols(2).determinant()));
  }
  const Eigen::Map<RVector> xv(x.data(), n), yv(y.data(), n);
  const RVector xc = xv.array() - xv.mean();
  const RVector yc = yv.array() - yv.mean();
  const double corr = xc.dot(yc) / (xc.norm() * yc.norm());
  EXPECT_NEAR(corr, 0.0, 3.0 / std::sqrt(n));
}

}  // namespace
}  // namespace isolyap
