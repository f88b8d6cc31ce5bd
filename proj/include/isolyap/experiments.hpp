#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "isolyap/ensembles.hpp"
#include "isolyap/exponents.hpp"

namespace isolyap {

/// Which reference estimators accompany a run. The gap reference is the
/// analytic spectrum when enabled, otherwise single_step_L.
struct Estimators {
  bool analytic = false;
  bool single_step = false;
  bool qr_stream = false;

  /// analytic when the ensemble has a closed form, single-step otherwise.
  static Estimators defaults_for(const EnsembleSpec& spec);
  std::string to_string() const;  ///< e.g. `[analytic,qr-stream]`
  static Estimators parse(std::string_view text);
  bool operator==(const Estimators&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  EnsembleSpec spec;
  std::vector<long> n_grid;
  long replications = 1;
  std::optional<Estimators> estimators;  ///< unset: Estimators::defaults_for(spec)
  long mc_samples = 100000;
  int threads = 1;
  std::string out;
  std::string format = "jsonl";

  Estimators effective_estimators() const;
  /// Throws ConfigError on an empty or non-increasing grid, nonpositive
  /// counts, or an invalid ensemble.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Stream ids below the master seed, one per experiment.
namespace stream_id {
inline constexpr std::uint64_t equality = 1;
inline constexpr std::uint64_t fluctuations = 2;
inline constexpr std::uint64_t real_probability = 3;
inline constexpr std::uint64_t lemma = 4;
inline constexpr std::uint64_t minor_identity = 5;
inline constexpr std::uint64_t single_step = 6;
inline constexpr std::uint64_t qr_stream = 7;
}  // namespace stream_id

/// Value with standard error and the number of samples behind it. Value and
/// SE are NaN when fewer than two samples were available.
struct Stat {
  double value = 0.0;
  double se = 0.0;
  long count = 0;
};

/// Mean of `xs` with SE sqrt(var / n).
Stat mean_stat(const std::vector<double>& xs);

/// Evaluates fn(i) for i in [0, count) on up to `threads` workers. Results
/// come back in index order; if any call throws, the lowest-index exception
/// is rethrown after all workers finish.
template <class Fn>
auto parallel_map(long count, int threads, Fn&& fn) -> std::vector<decltype(fn(long{}))> {
  using T = decltype(fn(long{}));
  std::vector<std::optional<T>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<long> next{0};
  auto worker = [&] {
    for (long i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const long n_workers = std::min<long>(std::max(threads, 1), std::max<long>(count, 1));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (long w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<T> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct Reference {
  RVector lyapunov;
  RVector se;  ///< zero for analytic values
  long count = 0;
  std::string source;  ///< "analytic" or "single-step"
};

/// Reference exponents per the configured estimators.
Reference reference_exponents(const ExperimentConfig& config);

struct EqualityPoint {
  long n = 0;
  long count = 0;      ///< replications that reached n
  long skipped = 0;    ///< replications lost to overflow or singular factors
  long untrusted = 0;  ///< reached n with spread above kAccuracyCap
  std::vector<Stat> singular;          ///< log_sigma_i / n
  std::vector<Stat> stability;         ///< log|lambda_i| / n
  std::vector<Stat> gap_singular_ref;  ///< |log_sigma_i/n - ref_i|
  std::vector<Stat> gap_stability_ref;
  std::vector<Stat> gap_singular_stability;
  RVector max_gap_singular_ref;  ///< max over replications
  RVector max_gap_stability_ref;
  RVector max_gap_singular_stability;
  Stat gap_singular_stability_maxcomp;  ///< mean over replications of max_i
};

struct EqualityResult {
  Reference reference;
  std::vector<EqualityPoint> points;
  std::vector<Stat> qr_stream;  ///< when enabled
  long qr_stream_skipped = 0;
};

EqualityResult run_equality(const ExperimentConfig& config);

struct FluctPoint {
  long n = 0;
  long count = 0;
  long skipped = 0;
  RMatrix cov_singular;  ///< of sqrt(n) (log_sigma/n - mean)
  RMatrix se_singular;   ///< entrywise
  RMatrix cov_stability;
  RMatrix se_stability;
};

struct FluctResult {
  long replications = 0;
  RMatrix reference_cov;
  RMatrix reference_se;  ///< zero for analytic
  std::string reference_source;
  std::vector<FluctPoint> points;
};

/// Requires replications >= 100.
FluctResult run_fluctuations(const ExperimentConfig& config);

struct RealProbPoint {
  long n = 0;
  long trials = 0;    ///< replications classified
  long excluded = 0;  ///< overflow or an eigenvalue block wider than kAccuracyCap
  long all_real = 0;
  double p_hat = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
};

struct RealProbResult {
  std::vector<RealProbPoint> points;
};

inline constexpr double kWilsonZ95 = 1.959963984540054;

/// Wilson score interval for `successes` out of `trials`.
std::pair<double, double> wilson_interval(long successes, long trials, double z = kWilsonZ95);

/// Requires field=real.
RealProbResult run_real_probability(const ExperimentConfig& config);

struct LemmaRow {
  std::string check;  ///< corner-logdet | lq-diag-mean | lq-diag-var | lq-offdiag-mean | lq-offdiag-var | scaling
  int i = 0;          ///< corner size or LQ row count
  int j = 0;          ///< component (1-based), 0 when pooled
  double estimate = 0.0;
  double se = 0.0;
  double target = 0.0;
  long count = 0;
  bool pass = false;
};

/// Monte Carlo checks of the Ginibre triangular factorisation and truncated
/// Haar log-determinants for config.spec.field and d = config.spec.d, with
/// config.mc_samples draws each. Pass means within max(3 SE, 1e-12).
std::vector<LemmaRow> run_lemma_checks(const ExperimentConfig& config);

struct MinorIdentityReport {
  long instances = 0;
  double max_residual_minors = 0.0;  ///< e_i(lambda) vs sum of principal minors of W sigma
  double max_residual_factored = 0.0;  ///< vs sum of [W]_J [sigma]_J
  long horn_violations = 0;
  long binomial_violations = 0;
  double max_recursion_residual = 0.0;  ///< advance vs explicit product, n <= 8
  bool pass = false;
};

inline constexpr double kIdentityTolerance = 1e-8;

/// config.replications random (W Haar, sigma from the ensemble) instances,
/// d <= 6. Residuals are relative to sum_J |[W]_J| [sigma]_J.
MinorIdentityReport run_minor_identity(const ExperimentConfig& config);

}  // namespace isolyap
