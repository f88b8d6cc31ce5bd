#pragma once

#include <string>

#include "isolyap/ensembles.hpp"
#include "isolyap/linalg.hpp"
#include "isolyap/rng.hpp"

namespace isolyap {

/// Spread of log singular values beyond which the smallest exponents are
/// flagged as untrusted (condition number about 1e13).
inline constexpr double kAccuracyCap = 30.0;
/// Spread beyond which exp(log_sigma - max) underflows a double.
inline constexpr double kHardCap = 690.0;

/// P_n = u_frame * diag(exp(log_sigma)) * v_frame.
template <class Scalar>
struct ProductState {
  long n = 0;
  RVector log_sigma;  ///< descending
  Mat<Scalar> u_frame;
  Mat<Scalar> v_frame;
  bool untrusted = false;  ///< spread has exceeded kAccuracyCap at some step

  double spread() const { return log_sigma.size() ? log_sigma(0) - log_sigma(log_sigma.size() - 1) : 0.0; }
};

template <class Scalar>
ProductState<Scalar> init_state(const Mat<Scalar>& m1);

/// State of P_n * m. Throws OverflowError if the new spread exceeds kHardCap.
template <class Scalar>
ProductState<Scalar> advance(const ProductState<Scalar>& state, const Mat<Scalar>& m);

/// Descending log|eigenvalue| of P_n, computed from the similar matrix
/// v_frame * u_frame * diag(exp(log_sigma)).
template <class Scalar>
RVector stability_from_state(const ProductState<Scalar>& state);

/// Full graded spectrum of the same similarity, including the number of
/// complex-conjugate pairs for real states.
template <class Scalar>
linalg::GradedSpectrum stability_spectrum(const ProductState<Scalar>& state);

struct ExponentEstimate {
  RVector mean;
  RMatrix cov;  ///< unbiased sample covariance
  long count = 0;
  RVector se;  ///< sqrt(diag(cov) / count)
};

/// Mean and covariance of the rows of `samples`.
ExponentEstimate estimate_from_rows(const RMatrix& samples);

struct QrStreamResult {
  RMatrix increments;     ///< one row of log diag(r) per accepted step
  RMatrix running_means;  ///< row k = mean of increments 0..k
  long skipped = 0;       ///< rank-deficient samples dropped

  RVector mean() const;
};

/// Streaming QR iteration q <- Q(m_k q). Step k samples from stream.derive(k).
QrStreamResult lyapunov_qr_stream(const EnsembleSpec& spec, long n_steps, const RngStream& stream);

/// Samples of log diag(r) from qr_positive(diag(D) v); sample k uses
/// stream.derive(k), D from derive(0) and v from derive(2) below that.
ExponentEstimate single_step_L(const EnsembleSpec& spec, long n_samples, const RngStream& stream);

/// Same as single_step_L with factors drawn as u_fixed * diag(D) * v.
template <class Scalar>
ExponentEstimate single_step_L_right(const EnsembleSpec& spec, const Mat<Scalar>& u_fixed, long n_samples,
                                     const RngStream& stream);

struct AnalyticSpectrum {
  RVector lyapunov;  ///< descending
  RVector variance;  ///< Var[log L_i]
  bool independent_components = true;
  std::string source;
};

/// Closed forms for Ginibre and truncated Haar; UnsupportedError otherwise.
AnalyticSpectrum analytic_spectrum(const EnsembleSpec& spec);

/// E log|det| of the i x i corner of a d x d Haar matrix.
double analytic_truncated_logdet(int i, int d, Field field);

}  // namespace isolyap
