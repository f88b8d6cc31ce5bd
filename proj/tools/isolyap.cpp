// isolyap: exponent experiments for products of isotropic random matrices.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "isolyap/config.hpp"
#include "isolyap/errors.hpp"
#include "isolyap/experiments.hpp"
#include "isolyap/exponents.hpp"
#include "isolyap/records.hpp"

namespace {

using namespace isolyap;

enum Exit : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kRuntime = 3 };

struct RunOptions {
  std::string experiment;
  std::string config_path;
  std::optional<int> threads;
  std::string out;
  std::string format;
  std::string plot_dir;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int env_threads() {
  const char* v = std::getenv("ISOLYAP_THREADS");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("ISOLYAP_THREADS must be a positive integer, got '" + std::string(v) + "'");
  return static_cast<int>(n);
}

void write_curve(const std::filesystem::path& path, const std::vector<std::pair<long, double>>& rows) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& [n, y] : rows) f << n << ' ' << format_real(y) << '\n';
  if (!f.flush()) throw IoError("write to '" + path.string() + "' failed");
}

double max_mean(const std::vector<Stat>& stats) {
  double m = 0.0;
  for (const auto& s : stats) m = std::max(m, s.value);
  return m;
}

void print_equality(const EqualityResult& r, bool with_stability) {
  std::printf("reference: %s\n", r.reference.source.c_str());
  if (with_stability) {
    std::printf("%8s %3s %13s %13s %11s %13s %11s %11s\n", "n", "i", "reference", "singular", "se", "stability", "se",
                "|gap|");
  } else {
    std::printf("%8s %3s %13s %13s %11s %11s %11s\n", "n", "i", "reference", "singular", "se", "|gap ref|", "se");
  }
  for (const auto& p : r.points) {
    for (std::size_t i = 0; i < p.singular.size(); ++i) {
      const double ref = r.reference.lyapunov(static_cast<Eigen::Index>(i));
      if (with_stability) {
        std::printf("%8ld %3zu %13.6g %13.6g %11.3g %13.6g %11.3g %11.3g\n", p.n, i + 1, ref, p.singular[i].value,
                    p.singular[i].se, p.stability[i].value, p.stability[i].se, p.gap_singular_stability[i].value);
      } else {
        std::printf("%8ld %3zu %13.6g %13.6g %11.3g %11.3g %11.3g\n", p.n, i + 1, ref, p.singular[i].value,
                    p.singular[i].se, p.gap_singular_ref[i].value, p.gap_singular_ref[i].se);
      }
    }
    if (p.skipped || p.untrusted) std::printf("%8ld skipped %ld, untrusted %ld\n", p.n, p.skipped, p.untrusted);
  }
  if (!r.qr_stream.empty()) {
    std::printf("qr-stream:");
    for (const auto& s : r.qr_stream) std::printf(" %.6g (se %.2g)", s.value, s.se);
    std::printf("  skipped %ld\n", r.qr_stream_skipped);
  }
}

void print_fluctuations(const FluctResult& r) {
  std::printf("reference: %s\n", r.reference_source.c_str());
  std::printf("%8s %3s %3s %13s %11s %13s %11s %13s\n", "n", "i", "j", "cov singular", "se", "cov stability", "se",
              "reference");
  for (const auto& p : r.points) {
    for (Eigen::Index i = 0; i < p.cov_singular.rows(); ++i) {
      for (Eigen::Index j = i; j < p.cov_singular.cols(); ++j) {
        std::printf("%8ld %3ld %3ld %13.6g %11.3g %13.6g %11.3g %13.6g\n", p.n, long(i + 1), long(j + 1),
                    p.cov_singular(i, j), p.se_singular(i, j), p.cov_stability(i, j), p.se_stability(i, j),
                    r.reference_cov(i, j));
      }
    }
  }
}

void print_real_probability(const RealProbResult& r) {
  std::printf("%8s %10s %10s %10s %10s %9s\n", "n", "trials", "p_real", "wilson lo", "wilson hi", "excluded");
  for (const auto& p : r.points) {
    std::printf("%8ld %10ld %10.6f %10.6f %10.6f %9ld\n", p.n, p.trials, p.p_hat, p.wilson_lo, p.wilson_hi,
                p.excluded);
  }
}

bool print_verify(const std::vector<LemmaRow>& lemma, const MinorIdentityReport& minor) {
  bool ok = minor.pass;
  std::printf("%-16s %3s %3s %13s %11s %13s %5s\n", "check", "i", "j", "estimate", "se", "target", "pass");
  for (const auto& row : lemma) {
    std::printf("%-16s %3d %3d %13.6g %11.3g %13.6g %5s\n", row.check.c_str(), row.i, row.j, row.estimate, row.se,
                row.target, row.pass ? "yes" : "NO");
    ok = ok && row.pass;
  }
  std::printf("minor identity: %ld instances, max residual %.3g (minors) %.3g (factored), recursion %.3g, "
              "horn violations %ld, binomial violations %ld: %s\n",
              minor.instances, minor.max_residual_minors, minor.max_residual_factored, minor.max_recursion_residual,
              minor.horn_violations, minor.binomial_violations, minor.pass ? "pass" : "FAIL");
  return ok;
}

int cmd_analytic(const std::string& field, int d, const std::string& ensemble) {
  EnsembleSpec spec{field == "real" ? Field::real : Field::complex, d, parse_ensemble_kind(ensemble)};
  spec.validate();
  const auto a = analytic_spectrum(spec);
  std::printf("%3s %18s %18s\n", "i", "lambda", "variance");
  for (Eigen::Index i = 0; i < a.lyapunov.size(); ++i) {
    std::printf("%3ld %18.10g %18.10g\n", long(i + 1), a.lyapunov(i), a.variance(i));
  }
  return kOk;
}

int cmd_run(const RunOptions& opt) {
  const auto text = read_file(opt.config_path);
  const auto file_config = parse_config(text);

  ExperimentConfig config = file_config;
  const auto keys = config_keys(text);
  if (opt.threads) {
    config.threads = *opt.threads;
  } else if (std::find(keys.begin(), keys.end(), "threads") == keys.end()) {
    if (const int t = env_threads()) config.threads = t;
  }
  if (!opt.out.empty()) config.out = opt.out;
  if (!opt.format.empty()) config.format = opt.format;
  if (config.out.empty()) throw ConfigError("no output path: set out in the config or pass --out");
  config.validate();

  const auto& e = opt.experiment;
  const std::filesystem::path plots = opt.plot_dir;
  if (!opt.plot_dir.empty()) std::filesystem::create_directories(plots);

  std::vector<ResultRecord> records;
  bool ok = true;
  if (e == "lyapunov" || e == "stability") {
    const auto r = run_equality(config);
    records = e == "lyapunov" ? lyapunov_records(config, r) : stability_records(config, r);
    print_equality(r, e == "stability");
    if (!opt.plot_dir.empty()) {
      std::vector<std::pair<long, double>> ref, pair;
      for (const auto& p : r.points) {
        ref.emplace_back(p.n, max_mean(p.gap_singular_ref));
        pair.emplace_back(p.n, p.gap_singular_stability_maxcomp.value);
      }
      write_curve(plots / "gap_singular_reference.txt", ref);
      if (e == "stability") write_curve(plots / "gap_singular_stability.txt", pair);
    }
  } else if (e == "fluctuations") {
    const auto r = run_fluctuations(config);
    records = fluctuation_records(config, r);
    print_fluctuations(r);
  } else if (e == "realprob") {
    const auto r = run_real_probability(config);
    records = real_probability_records(config, r);
    print_real_probability(r);
    if (!opt.plot_dir.empty()) {
      std::vector<std::pair<long, double>> curve;
      for (const auto& p : r.points) curve.emplace_back(p.n, p.p_hat);
      write_curve(plots / "p_real.txt", curve);
    }
  } else {
    const auto lemma = run_lemma_checks(config);
    const auto minor = run_minor_identity(config);
    records = verify_records(config, lemma, minor);
    ok = print_verify(lemma, minor);
  }

  // The manifest echoes the file's config, so --threads and --out leave the output bytes unchanged.
  write_records(make_manifest(file_config, "run " + e), records, config.format, config.out);
  return ok ? kOk : kVerifyFailed;
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const SpecError& e) {
    std::cerr << "invalid ensemble: " << e.what() << '\n';
  } catch (const UnsupportedError& e) {
    std::cerr << e.what() << '\n';
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kRuntime;
  } catch (const Error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lyapunov and stability exponents of products of isotropic random matrices"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);

  std::string field;
  int d = 0;
  std::string ensemble;
  auto* analytic = app.add_subcommand("analytic", "Print the closed-form exponents and variances");
  analytic->add_option("--field", field, "real or complex")->required()->check(CLI::IsMember({"real", "complex"}));
  analytic->add_option("--d", d, "Matrix dimension")->required()->check(CLI::PositiveNumber);
  analytic->add_option("--ensemble", ensemble, "Ensemble, e.g. ginibre or truncated-haar:m=8")->required();

  RunOptions opt;
  int threads = 0;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("experiment", opt.experiment, "lyapunov, stability, fluctuations, realprob or verify")
      ->required()
      ->check(CLI::IsMember({"lyapunov", "stability", "fluctuations", "realprob", "verify"}));
  run->add_option("--config", opt.config_path, "Config file")->required();
  auto* threads_opt =
      run->add_option("--threads", threads, "Worker threads (default: config, then ISOLYAP_THREADS, then 1)")
          ->check(CLI::PositiveNumber);
  run->add_option("--out", opt.out, "Output path (overrides the config)");
  run->add_option("--format", opt.format, "jsonl or csv (overrides the config)")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  run->add_option("--emit-plotdata", opt.plot_dir, "Directory for two-column curve files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  if (*analytic) return guarded([&] { return cmd_analytic(field, d, ensemble); });
  if (*threads_opt) opt.threads = threads;
  return guarded([&] { return cmd_run(opt); });
}
