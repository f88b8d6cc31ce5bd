#include "isolyap/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "isolyap/errors.hpp"

namespace isolyap {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool has_closed_form(const EnsembleSpec& spec) {
  return std::holds_alternative<Ginibre>(spec.kind) || std::holds_alternative<TruncatedHaar>(spec.kind);
}

/// One replication's values at each grid point; empty where the trajectory
/// was lost before reaching that n.
struct Checkpoint {
  RVector singular;   ///< log_sigma
  RVector stability;  ///< log|lambda|
  bool untrusted = false;
  int complex_pairs = 0;
  double cluster_spread = 0.0;
};
using Trajectory = std::vector<std::optional<Checkpoint>>;

/// Runs every replication to max(n_grid) with factor k drawn from
/// RngStream(seed, {experiment, r, k}).
std::vector<Trajectory> run_trajectories(const ExperimentConfig& config, std::uint64_t experiment) {
  const auto& spec = config.spec;
  const auto& grid = config.n_grid;
  return parallel_map(config.replications, config.threads, [&](long r) {
    return dispatch_field(spec.field, [&]<class Scalar>() {
      const RngStream stream(config.seed, {experiment, static_cast<std::uint64_t>(r)});
      Trajectory out(grid.size());
      try {
        auto state = init_state<Scalar>(sample_isotropic<Scalar>(spec, stream.derive(0)));
        std::size_t g = 0;
        for (long k = 1;; ++k) {
          if (state.n == grid[g]) {
            const auto spectrum = stability_spectrum(state);
            Checkpoint c;
            c.singular = state.log_sigma;
            c.stability.resize(spec.d);
            for (int i = 0; i < spec.d; ++i) c.stability(i) = spectrum.values[i].log_modulus;
            if (spec.d == 1) c.stability = c.singular;
            c.untrusted = state.untrusted;
            c.complex_pairs = spectrum.complex_pairs;
            c.cluster_spread = spectrum.max_cluster_spread;
            out[g] = std::move(c);
            if (++g == grid.size()) break;
          }
          state = isolyap::advance(state, sample_isotropic<Scalar>(spec, stream.derive(k)));
        }
      } catch (const OverflowError&) {
      } catch (const SingularInputError&) {
      } catch (const NumericError&) {
      }
      return out;
    });
  });
}

std::vector<Stat> component_stats(const std::vector<RVector>& rows, int d) {
  std::vector<Stat> out;
  std::vector<double> xs(rows.size());
  for (int i = 0; i < d; ++i) {
    for (std::size_t r = 0; r < rows.size(); ++r) xs[r] = rows[r](i);
    out.push_back(mean_stat(xs));
  }
  return out;
}

RVector component_max(const std::vector<RVector>& rows, int d) {
  RVector m = RVector::Constant(d, rows.empty() ? kNaN : 0.0);
  for (const auto& r : rows) m = m.cwiseMax(r);
  return m;
}

/// Sample covariance and entrywise SE (sd of centered products / sqrt(N)).
std::pair<RMatrix, RMatrix> covariance_with_se(const std::vector<RVector>& rows, int d) {
  const long n = static_cast<long>(rows.size());
  if (n < 2) return {RMatrix::Constant(d, d, kNaN), RMatrix::Constant(d, d, kNaN)};
  RVector mean = RVector::Zero(d);
  for (const auto& r : rows) mean += r;
  mean /= double(n);
  RMatrix cov(d, d), se(d, d);
  std::vector<double> prod(n);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      for (long k = 0; k < n; ++k) prod[k] = (rows[k](i) - mean(i)) * (rows[k](j) - mean(j));
      const Stat s = mean_stat(prod);
      cov(i, j) = cov(j, i) = s.value * double(n) / double(n - 1);
      se(i, j) = se(j, i) = s.se;
    }
  }
  return {cov, se};
}

RVector batch_means_se(const RMatrix& increments, RVector* mean_out) {
  const long n = increments.rows();
  const long d = increments.cols();
  *mean_out = increments.colwise().mean().transpose();
  constexpr long kBatches = 100;
  if (n < 2 * kBatches) {
    const RMatrix c = increments.rowwise() - mean_out->transpose();
    return (c.colwise().squaredNorm().transpose() / double(std::max(n - 1, 1L)) / double(n)).cwiseSqrt();
  }
  const long size = n / kBatches;
  RMatrix batches(kBatches, d);
  for (long b = 0; b < kBatches; ++b) batches.row(b) = increments.middleRows(b * size, size).colwise().mean();
  return estimate_from_rows(batches).se;
}

}  // namespace

// ----------------------------------------------------------------- config

Estimators Estimators::defaults_for(const EnsembleSpec& spec) {
  Estimators e;
  if (has_closed_form(spec)) {
    e.analytic = true;
  } else {
    e.single_step = true;
  }
  return e;
}

std::string Estimators::to_string() const {
  std::string out = "[";
  const auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (out.size() > 1) out += ",";
    out += name;
  };
  add(analytic, "analytic");
  add(single_step, "single-step");
  add(qr_stream, "qr-stream");
  return out + "]";
}

Estimators Estimators::parse(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  if (text.size() < 2 || text.front() != '[' || text.back() != ']') {
    throw ConfigError("estimators must be a list like [analytic,qr-stream]");
  }
  text = trim(text.substr(1, text.size() - 2));
  Estimators e;
  while (!text.empty()) {
    const auto comma = text.find(',');
    auto name = trim(text.substr(0, comma));
    if (name.size() >= 2 && name.front() == '"' && name.back() == '"') name = name.substr(1, name.size() - 2);
    if (name == "analytic") {
      e.analytic = true;
    } else if (name == "single-step") {
      e.single_step = true;
    } else if (name == "qr-stream") {
      e.qr_stream = true;
    } else {
      throw ConfigError("unknown estimator '" + std::string(name) + "' (expected analytic, single-step, qr-stream)");
    }
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  return e;
}

Estimators ExperimentConfig::effective_estimators() const {
  return estimators ? *estimators : Estimators::defaults_for(spec);
}

void ExperimentConfig::validate() const {
  try {
    spec.validate();
  } catch (const SpecError& e) {
    throw ConfigError(e.what());
  }
  if (n_grid.empty()) throw ConfigError("n_grid must not be empty");
  if (n_grid.front() < 1) throw ConfigError("n_grid values must be >= 1");
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (n_grid[i] <= n_grid[i - 1]) throw ConfigError("n_grid must be strictly increasing");
  }
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (mc_samples < 2) throw ConfigError("mc_samples must be >= 2");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (format != "jsonl" && format != "csv") throw ConfigError("format must be jsonl or csv");
  const auto est = effective_estimators();
  if (est.analytic && !has_closed_form(spec)) {
    throw ConfigError("estimator 'analytic' needs ensemble ginibre or truncated-haar, got " + to_string(spec.kind));
  }
}

// ----------------------------------------------------------------- stats

Stat mean_stat(const std::vector<double>& xs) {
  Stat s;
  s.count = static_cast<long>(xs.size());
  if (s.count < 2) {
    s.value = s.se = kNaN;
    return s;
  }
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= double(s.count);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  s.value = mean;
  s.se = std::sqrt(ss / double(s.count - 1) / double(s.count));
  return s;
}

std::pair<double, double> wilson_interval(long successes, long trials, double z) {
  if (trials <= 0) return {kNaN, kNaN};
  const double n = double(trials);
  const double p = double(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

Reference reference_exponents(const ExperimentConfig& config) {
  const auto est = config.effective_estimators();
  Reference ref;
  if (est.analytic) {
    const auto a = analytic_spectrum(config.spec);
    ref.lyapunov = a.lyapunov;
    ref.se = RVector::Zero(config.spec.d);
    ref.source = "analytic";
    return ref;
  }
  if (est.single_step) {
    const auto e = single_step_L(config.spec, config.mc_samples, RngStream(config.seed, {stream_id::single_step}));
    ref.lyapunov = e.mean;
    ref.se = e.se;
    ref.count = e.count;
    ref.source = "single-step";
    return ref;
  }
  throw ConfigError("no reference estimator enabled (need analytic or single-step)");
}

// ----------------------------------------------------------------- runners

EqualityResult run_equality(const ExperimentConfig& config) {
  config.validate();
  const int d = config.spec.d;
  EqualityResult res;
  res.reference = reference_exponents(config);
  const RVector& ref = res.reference.lyapunov;
  const auto traj = run_trajectories(config, stream_id::equality);

  for (std::size_t g = 0; g < config.n_grid.size(); ++g) {
    const double n = double(config.n_grid[g]);
    EqualityPoint p;
    p.n = config.n_grid[g];
    std::vector<RVector> sing, stab, gsr, gtr, gst;
    std::vector<double> maxcomp;
    for (const auto& t : traj) {
      if (!t[g]) {
        ++p.skipped;
        continue;
      }
      const RVector s = t[g]->singular / n;
      const RVector l = t[g]->stability / n;
      sing.push_back(s);
      stab.push_back(l);
      gsr.push_back((s - ref).cwiseAbs());
      gtr.push_back((l - ref).cwiseAbs());
      gst.push_back((s - l).cwiseAbs());
      maxcomp.push_back(gst.back().maxCoeff());
      p.untrusted += t[g]->untrusted;
    }
    p.count = static_cast<long>(sing.size());
    p.singular = component_stats(sing, d);
    p.stability = component_stats(stab, d);
    p.gap_singular_ref = component_stats(gsr, d);
    p.gap_stability_ref = component_stats(gtr, d);
    p.gap_singular_stability = component_stats(gst, d);
    p.max_gap_singular_ref = component_max(gsr, d);
    p.max_gap_stability_ref = component_max(gtr, d);
    p.max_gap_singular_stability = component_max(gst, d);
    p.gap_singular_stability_maxcomp = mean_stat(maxcomp);
    res.points.push_back(std::move(p));
  }

  if (config.effective_estimators().qr_stream) {
    const auto qr = lyapunov_qr_stream(config.spec, config.mc_samples, RngStream(config.seed, {stream_id::qr_stream}));
    RVector mean;
    const RVector se = batch_means_se(qr.increments, &mean);
    for (int i = 0; i < d; ++i) res.qr_stream.push_back({mean(i), se(i), qr.increments.rows()});
    res.qr_stream_skipped = qr.skipped;
  }
  return res;
}

FluctResult run_fluctuations(const ExperimentConfig& config) {
  config.validate();
  if (config.replications < 100) throw ConfigError("fluctuations need replications >= 100");
  const int d = config.spec.d;
  FluctResult res;
  res.replications = config.replications;

  const auto est = config.effective_estimators();
  if (est.analytic) {
    res.reference_cov = analytic_spectrum(config.spec).variance.asDiagonal();
    res.reference_se = RMatrix::Zero(d, d);
    res.reference_source = "analytic";
  } else if (est.single_step) {
    const auto e = single_step_L(config.spec, config.mc_samples, RngStream(config.seed, {stream_id::single_step}));
    res.reference_cov = e.cov;
    // Normal-theory SE of a covariance entry.
    res.reference_se.resize(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        res.reference_se(i, j) = std::sqrt((e.cov(i, i) * e.cov(j, j) + e.cov(i, j) * e.cov(i, j)) / double(e.count - 1));
      }
    }
    res.reference_source = "single-step";
  } else {
    throw ConfigError("no reference estimator enabled (need analytic or single-step)");
  }

  const auto traj = run_trajectories(config, stream_id::fluctuations);
  for (std::size_t g = 0; g < config.n_grid.size(); ++g) {
    const double root_n = std::sqrt(double(config.n_grid[g]));
    FluctPoint p;
    p.n = config.n_grid[g];
    std::vector<RVector> sing, stab;
    for (const auto& t : traj) {
      if (!t[g]) {
        ++p.skipped;
        continue;
      }
      // sqrt(n) * (x / n - mean) has the covariance of x / sqrt(n).
      sing.push_back(t[g]->singular / root_n);
      stab.push_back(t[g]->stability / root_n);
    }
    p.count = static_cast<long>(sing.size());
    std::tie(p.cov_singular, p.se_singular) = covariance_with_se(sing, d);
    std::tie(p.cov_stability, p.se_stability) = covariance_with_se(stab, d);
    res.points.push_back(std::move(p));
  }
  return res;
}

RealProbResult run_real_probability(const ExperimentConfig& config) {
  if (config.spec.field != Field::real) throw ArgumentError("realprob requires field=real");
  config.validate();
  const auto traj = run_trajectories(config, stream_id::real_probability);
  RealProbResult res;
  for (std::size_t g = 0; g < config.n_grid.size(); ++g) {
    RealProbPoint p;
    p.n = config.n_grid[g];
    for (const auto& t : traj) {
      if (!t[g] || t[g]->cluster_spread > kAccuracyCap) {
        ++p.excluded;
        continue;
      }
      ++p.trials;
      p.all_real += t[g]->complex_pairs == 0;
    }
    p.p_hat = p.trials > 0 ? double(p.all_real) / double(p.trials) : kNaN;
    std::tie(p.wilson_lo, p.wilson_hi) = wilson_interval(p.all_real, p.trials);
    res.points.push_back(p);
  }
  return res;
}

std::vector<LemmaRow> run_lemma_checks(const ExperimentConfig& config) {
  config.validate();
  const int d = config.spec.d;
  const long n = config.mc_samples;
  const Field field = config.spec.field;
  const RngStream base(config.seed, {stream_id::lemma});
  std::vector<LemmaRow> rows;
  const auto add = [&](std::string check, int i, int j, const Stat& s, double target) {
    LemmaRow row{std::move(check), i, j, s.value, s.se, target, s.count, false};
    row.pass = std::abs(s.value - target) <= std::max(3 * s.se, 1e-12);
    rows.push_back(std::move(row));
  };

  dispatch_field(field, [&]<class Scalar>() {
    // Corner log-determinants of a d x d Haar matrix.
    const auto corners = parallel_map(n, config.threads, [&](long k) {
      const Mat<Scalar> w = sample_haar_unitary<Scalar>(d, base.derive(0).derive(k));
      std::vector<double> out(d);
      for (int i = 1; i <= d; ++i) out[i - 1] = std::log(std::abs(w.topLeftCorner(i, i).determinant()));
      return out;
    });
    for (int i = 1; i <= d; ++i) {
      std::vector<double> xs(n);
      for (long k = 0; k < n; ++k) xs[k] = corners[k][i - 1];
      add("corner-logdet", i, 0, mean_stat(xs), analytic_truncated_logdet(i, d, field));
    }

    // Triangular factor of an i x d Ginibre matrix.
    const int rows_i = d > 1 ? d - 1 : 1;
    const double scale = field == Field::real ? 1.0 : 2.0;
    struct LqSample {
      std::vector<double> diag_sq;
      std::vector<double> off_re;
      std::vector<double> off_abs2;
    };
    const auto lqs = parallel_map(n, config.threads, [&](long k) {
      const auto lq = linalg::lq_positive(sample_ginibre<Scalar>(rows_i, d, base.derive(1).derive(k)));
      LqSample s;
      for (int j = 0; j < rows_i; ++j) {
        s.diag_sq.push_back(std::norm(lq.t(j, j)));
        for (int c = 0; c < j; ++c) {
          s.off_re.push_back(std::real(lq.t(j, c)));
          s.off_abs2.push_back(std::norm(lq.t(j, c)));
        }
      }
      return s;
    });
    for (int j = 1; j <= rows_i; ++j) {
      const double dof = scale * (d - j + 1);
      std::vector<double> xs(n);
      for (long k = 0; k < n; ++k) xs[k] = lqs[k].diag_sq[j - 1];
      const Stat mean = mean_stat(xs);
      add("lq-diag-mean", rows_i, j, mean, dof);
      // Sample variance, SE from the fourth central moment.
      double m2 = 0, m4 = 0;
      for (double x : xs) {
        const double c = x - mean.value;
        m2 += c * c;
        m4 += c * c * c * c;
      }
      m2 /= double(n);
      m4 /= double(n);
      const Stat var{m2 * double(n) / double(n - 1), std::sqrt(std::max(m4 - m2 * m2, 0.0) / double(n)), n};
      add("lq-diag-var", rows_i, j, var, 2 * dof);
    }
    if (rows_i > 1) {
      std::vector<double> re, abs2;
      for (const auto& s : lqs) {
        re.insert(re.end(), s.off_re.begin(), s.off_re.end());
        abs2.insert(abs2.end(), s.off_abs2.begin(), s.off_abs2.end());
      }
      add("lq-offdiag-mean", rows_i, 0, mean_stat(re), 0.0);
      add("lq-offdiag-var", rows_i, 0, mean_stat(abs2), scale);
    }

    // m |u_11|^2 for an m x m Haar matrix has mean one for every m.
    const int m = 4 * d;
    const auto scaled = parallel_map(n, config.threads, [&](long k) {
      return double(m) * std::norm(sample_haar_unitary<Scalar>(m, base.derive(2).derive(k))(0, 0));
    });
    add("scaling", m, 0, mean_stat(scaled), 1.0);
  });
  return rows;
}

MinorIdentityReport run_minor_identity(const ExperimentConfig& config) {
  config.validate();
  const int d = config.spec.d;
  if (d > 6) throw ArgumentError("minor identity check supports d <= 6");
  constexpr int kSteps = 8;
  const RngStream base(config.seed, {stream_id::minor_identity});

  struct Instance {
    double res_minors = 0, res_factored = 0, res_recursion = 0;
    long horn = 0, binomial = 0;
  };
  const auto instances = parallel_map(config.replications, config.threads, [&](long k) {
    return dispatch_field(config.spec.field, [&]<class Scalar>() {
      const RngStream s = base.derive(k);
      Instance out;
      const Mat<Scalar> w = sample_haar_unitary<Scalar>(d, s.derive(0));
      const RVector sigma = sample_singular_values(config.spec, s.derive(1));
      const Mat<Scalar> ws = w * sigma.cast<Scalar>().asDiagonal();
      const auto lambda = linalg::eig_by_modulus(ws);
      const auto e = linalg::elementary_symmetric(lambda);
      const auto pm = linalg::principal_minor_sums(ws);
      double top_lambda = 1.0, top_sigma = 1.0;
      for (int i = 1; i <= d; ++i) {
        Complex factored = 0;
        double scale = 0;
        for (const auto& subset : linalg::subsets_of_size(d, i)) {
          const Complex minor = linalg::principal_minor(w, subset);
          double sp = 1.0;
          for (int j : subset) sp *= sigma(j);
          factored += minor * sp;
          scale += std::abs(minor) * sp;
        }
        out.res_minors = std::max(out.res_minors, std::abs(e[i] - Complex(pm[i])) / scale);
        out.res_factored = std::max(out.res_factored, std::abs(e[i] - factored) / scale);
        top_lambda *= std::abs(lambda[i - 1]);
        top_sigma *= sigma(i - 1);
        out.horn += top_lambda > top_sigma * (1 + kIdentityTolerance);
        double binom = 1;
        for (int j = 0; j < i; ++j) binom = binom * (d - j) / (j + 1);
        out.binomial += std::abs(e[i]) > binom * top_lambda * (1 + kIdentityTolerance);
      }

      // Recursion against an explicit product kept in extended precision.
      using Wide = std::conditional_t<std::is_same_v<Scalar, double>, long double, std::complex<long double>>;
      using WideMat = Eigen::Matrix<Wide, Eigen::Dynamic, Eigen::Dynamic>;
      const RngStream steps = s.derive(2);
      Mat<Scalar> m = sample_isotropic<Scalar>(config.spec, steps.derive(0));
      WideMat product = m.template cast<Wide>();
      auto state = init_state(m);
      for (int n = 2; n <= kSteps; ++n) {
        m = sample_isotropic<Scalar>(config.spec, steps.derive(n - 1));
        product = product * m.template cast<Wide>();
        state = isolyap::advance(state, m);
        const Eigen::JacobiSVD<WideMat> svd(product);
        for (int i = 0; i < d; ++i) {
          const double exact = static_cast<double>(std::log(svd.singularValues()(i)));
          out.res_recursion = std::max(out.res_recursion, std::abs(state.log_sigma(i) - exact));
        }
      }
      return out;
    });
  });

  MinorIdentityReport rep;
  rep.instances = config.replications;
  for (const auto& in : instances) {
    rep.max_residual_minors = std::max(rep.max_residual_minors, in.res_minors);
    rep.max_residual_factored = std::max(rep.max_residual_factored, in.res_factored);
    rep.max_recursion_residual = std::max(rep.max_recursion_residual, in.res_recursion);
    rep.horn_violations += in.horn;
    rep.binomial_violations += in.binomial;
  }
  rep.pass = rep.max_residual_minors <= kIdentityTolerance && rep.max_residual_factored <= kIdentityTolerance &&
             rep.max_recursion_residual <= kIdentityTolerance && rep.horn_violations == 0 &&
             rep.binomial_violations == 0;
  return rep;
}

}  // namespace isolyap
