#include "isolyap/exponents.hpp"

#include <cmath>
#include <numbers>

#include "isolyap/errors.hpp"
#include "isolyap/special.hpp"

namespace isolyap {
namespace {

void check_spread(double spread) {
  if (!(spread <= kHardCap)) {
    throw OverflowError("log singular value spread " + format_double(spread) + " exceeds " +
                        format_double(kHardCap));
  }
}

template <class Scalar>
RVector log_r_diagonal(const Mat<Scalar>& a) {
  const auto qr = linalg::qr_positive(a);
  return qr.r.diagonal().real().array().log();
}

}  // namespace

template <class Scalar>
ProductState<Scalar> init_state(const Mat<Scalar>& m1) {
  if (m1.rows() != m1.cols() || m1.rows() == 0) throw ArgumentError("init_state: matrix must be square");
  const int d = static_cast<int>(m1.rows());
  auto svd = linalg::svd_row_graded(RVector::Zero(d), m1);
  if (!svd.log_sigma.allFinite()) throw SingularInputError("init_state: matrix is singular");
  ProductState<Scalar> s;
  s.n = 1;
  s.log_sigma = std::move(svd.log_sigma);
  s.u_frame = std::move(svd.left);
  s.v_frame = std::move(svd.right);
  check_spread(s.spread());
  s.untrusted = s.spread() > kAccuracyCap;
  return s;
}

template <class Scalar>
ProductState<Scalar> advance(const ProductState<Scalar>& state, const Mat<Scalar>& m) {
  const auto d = state.log_sigma.size();
  if (m.rows() != d || m.cols() != d) throw ArgumentError("advance: factor has the wrong shape");
  auto svd = linalg::svd_row_graded(state.log_sigma, Mat<Scalar>(state.v_frame * m));
  if (!svd.log_sigma.allFinite()) throw SingularInputError("advance: factor is singular");
  ProductState<Scalar> next;
  next.n = state.n + 1;
  next.log_sigma = std::move(svd.log_sigma);
  next.u_frame = state.u_frame * svd.left;
  next.v_frame = std::move(svd.right);
  check_spread(next.spread());
  next.untrusted = state.untrusted || next.spread() > kAccuracyCap;
  return next;
}

template <class Scalar>
linalg::GradedSpectrum stability_spectrum(const ProductState<Scalar>& state) {
  check_spread(state.spread());
  return linalg::graded_spectrum(Mat<Scalar>(state.v_frame * state.u_frame), state.log_sigma);
}

template <class Scalar>
RVector stability_from_state(const ProductState<Scalar>& state) {
  const auto d = state.log_sigma.size();
  // A 1x1 unitary has modulus one; skip the rounding it would add.
  if (d == 1) return state.log_sigma;
  const auto spec = stability_spectrum(state);
  RVector out(d);
  for (Eigen::Index i = 0; i < d; ++i) out(i) = spec.values[i].log_modulus;
  return out;
}

ExponentEstimate estimate_from_rows(const RMatrix& samples) {
  ExponentEstimate e;
  e.count = samples.rows();
  if (e.count < 1) throw ArgumentError("estimate needs at least one sample");
  e.mean = samples.colwise().mean().transpose();
  const RMatrix centered = samples.rowwise() - e.mean.transpose();
  e.cov = e.count > 1 ? RMatrix(centered.transpose() * centered / double(e.count - 1))
                      : RMatrix::Zero(samples.cols(), samples.cols());
  e.se = (e.cov.diagonal() / double(e.count)).cwiseSqrt();
  return e;
}

RVector QrStreamResult::mean() const {
  if (running_means.rows() == 0) return RVector::Constant(increments.cols(), std::nan(""));
  return running_means.row(running_means.rows() - 1).transpose();
}

QrStreamResult lyapunov_qr_stream(const EnsembleSpec& spec, long n_steps, const RngStream& stream) {
  if (n_steps < 1) throw ArgumentError("lyapunov_qr_stream: n_steps must be >= 1");
  spec.validate();
  return dispatch_field(spec.field, [&]<class Scalar>() {
    const int d = spec.d;
    QrStreamResult res;
    res.increments.resize(n_steps, d);
    Mat<Scalar> q = Mat<Scalar>::Identity(d, d);
    long rows = 0;
    for (long k = 0; k < n_steps; ++k) {
      const Mat<Scalar> m = sample_isotropic<Scalar>(spec, stream.derive(k));
      try {
        auto qr = linalg::qr_positive(Mat<Scalar>(m * q));
        res.increments.row(rows++) = qr.r.diagonal().real().array().log().transpose();
        q = std::move(qr.q);
      } catch (const SingularInputError&) {
        ++res.skipped;
      }
    }
    res.increments.conservativeResize(rows, d);
    res.running_means.resize(rows, d);
    RVector sum = RVector::Zero(d);
    for (long k = 0; k < rows; ++k) {
      sum += res.increments.row(k).transpose();
      res.running_means.row(k) = (sum / double(k + 1)).transpose();
    }
    return res;
  });
}

ExponentEstimate single_step_L(const EnsembleSpec& spec, long n_samples, const RngStream& stream) {
  if (n_samples < 2) throw ArgumentError("single_step_L: n_samples must be >= 2");
  spec.validate();
  return dispatch_field(spec.field, [&]<class Scalar>() {
    RMatrix samples(n_samples, spec.d);
    for (long k = 0; k < n_samples; ++k) {
      const RngStream s = stream.derive(k);
      const RVector sigma = sample_singular_values(spec, s.derive(0));
      const Mat<Scalar> v = sample_haar_unitary<Scalar>(spec.d, s.derive(2));
      samples.row(k) = log_r_diagonal<Scalar>(sigma.cast<Scalar>().asDiagonal() * v).transpose();
    }
    return estimate_from_rows(samples);
  });
}

template <class Scalar>
ExponentEstimate single_step_L_right(const EnsembleSpec& spec, const Mat<Scalar>& u_fixed, long n_samples,
                                     const RngStream& stream) {
  if (n_samples < 2) throw ArgumentError("single_step_L_right: n_samples must be >= 2");
  spec.validate();
  RMatrix samples(n_samples, spec.d);
  for (long k = 0; k < n_samples; ++k) {
    samples.row(k) = log_r_diagonal<Scalar>(sample_right_isotropic<Scalar>(spec, u_fixed, stream.derive(k))).transpose();
  }
  return estimate_from_rows(samples);
}

AnalyticSpectrum analytic_spectrum(const EnsembleSpec& spec) {
  spec.validate();
  const int d = spec.d;
  const bool real = spec.field == Field::real;
  // Real entries halve the Beta / chi-square parameters.
  const double h = real ? 0.5 : 1.0;
  AnalyticSpectrum out;
  out.lyapunov.resize(d);
  out.variance.resize(d);
  out.source = std::string(to_string(spec.field)) + " " + to_string(spec.kind);
  if (std::holds_alternative<Ginibre>(spec.kind)) {
    for (int i = 0; i < d; ++i) {
      const double k = h * (d - i);
      out.lyapunov(i) = 0.5 * (std::numbers::ln2 + digamma(k));
      out.variance(i) = 0.25 * trigamma(k);
    }
  } else if (const auto* t = std::get_if<TruncatedHaar>(&spec.kind)) {
    for (int i = 0; i < d; ++i) {
      const double a = h * (d - i);
      const double b = h * (t->m - i);
      out.lyapunov(i) = 0.5 * (digamma(a) - digamma(b));
      out.variance(i) = 0.25 * (trigamma(a) - trigamma(b));
    }
  } else {
    throw UnsupportedError("no closed form for ensemble '" + to_string(spec.kind) +
                           "'; supported: ginibre, truncated-haar:m=<m>");
  }
  return out;
}

double analytic_truncated_logdet(int i, int d, Field field) {
  if (d < 1 || i < 1 || i > d) {
    throw ArgumentError("analytic_truncated_logdet requires 1 <= i <= d (i=" + std::to_string(i) +
                        ", d=" + std::to_string(d) + ")");
  }
  const int scale = field == Field::real ? 1 : 2;
  double sum = 0.0;
  for (int j = 1; j <= i; ++j) sum += elog_chisq(scale * (i - j + 1)) - elog_chisq(scale * (d - j + 1));
  return 0.5 * sum;
}

#define ISOLYAP_INSTANTIATE(S)                                                                        \
  template ProductState<S> init_state<S>(const Mat<S>&);                                              \
  template ProductState<S> advance<S>(const ProductState<S>&, const Mat<S>&);                         \
  template RVector stability_from_state<S>(const ProductState<S>&);                                   \
  template linalg::GradedSpectrum stability_spectrum<S>(const ProductState<S>&);                      \
  template ExponentEstimate single_step_L_right<S>(const EnsembleSpec&, const Mat<S>&, long, const RngStream&);

ISOLYAP_INSTANTIATE(double)
ISOLYAP_INSTANTIATE(Complex)
#undef ISOLYAP_INSTANTIATE

}  // namespace isolyap
