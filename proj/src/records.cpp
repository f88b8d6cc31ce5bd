#include "isolyap/records.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "isolyap/config.hpp"
#include "isolyap/errors.hpp"

#ifndef ISOLYAP_VERSION
#define ISOLYAP_VERSION "0.0.0"
#endif

namespace isolyap {
namespace {

using Json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::string indexed(const std::string& base, int i) { return base + "_" + std::to_string(i); }
std::string indexed(const std::string& base, int i, int j) { return indexed(indexed(base, i), j); }

int lq_rows(int d) { return d > 1 ? d - 1 : 1; }

class RecordBuilder {
 public:
  RecordBuilder(const ExperimentConfig& config, std::string experiment, long n) {
    rec_.experiment = std::move(experiment);
    rec_.d = config.spec.d;
    rec_.field = std::string(to_string(config.spec.field));
    rec_.ensemble = to_string(config.spec.kind);
    rec_.n = n;
    rec_.replications = config.replications;
  }

  void stat(std::string name, const Stat& s) { rec_.stats.push_back({std::move(name), s.value, s.se, s.count}); }
  void value(std::string name, double v) { rec_.stats.push_back({std::move(name), v, kNaN, -1}); }
  void count(std::string name, long c) { rec_.stats.push_back({std::move(name), double(c), kNaN, -1}); }
  void components(const std::string& base, const std::vector<Stat>& stats) {
    for (std::size_t i = 0; i < stats.size(); ++i) stat(indexed(base, int(i) + 1), stats[i]);
  }
  void components(const std::string& base, const RVector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) value(indexed(base, int(i) + 1), v(i));
  }
  void reference(const Reference& ref) {
    for (Eigen::Index i = 0; i < ref.lyapunov.size(); ++i) {
      rec_.stats.push_back({indexed("reference", int(i) + 1), ref.lyapunov(i),
                            ref.source == "analytic" ? kNaN : ref.se(i), ref.source == "analytic" ? -1 : ref.count});
    }
  }
  void upper_triangle(const std::string& base, const RMatrix& value, const RMatrix& se, long n) {
    for (Eigen::Index i = 0; i < value.rows(); ++i) {
      for (Eigen::Index j = i; j < value.cols(); ++j) {
        rec_.stats.push_back({indexed(base, int(i) + 1, int(j) + 1), value(i, j), se(i, j), n});
      }
    }
  }

  ResultRecord take() { return std::move(rec_); }

 private:
  ResultRecord rec_;
};

void number_sequence(std::vector<ResultRecord>& records) {
  for (std::size_t i = 0; i < records.size(); ++i) records[i].seq = static_cast<long>(i);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Json real_or_null(double x) { return std::isnan(x) ? Json(nullptr) : Json(x); }

Json manifest_json(const RunManifest& m) {
  Json j;
  j["tool"] = m.tool;
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["command"] = m.command;
  j["config"] = m.config;
  j["started"] = m.started;
  return Json{{"manifest", j}};
}

Json record_json(const ResultRecord& r) {
  Json j;
  j["seq"] = r.seq;
  j["experiment"] = r.experiment;
  j["d"] = r.d;
  j["field"] = r.field;
  j["ensemble"] = r.ensemble;
  j["n"] = r.n < 0 ? Json(nullptr) : Json(r.n);
  j["replications"] = r.replications;
  for (const auto& s : r.stats) {
    j[s.name] = real_or_null(s.value);
    if (!std::isnan(s.se)) j["se_" + s.name] = s.se;
    if (s.count >= 0) j["count_" + s.name] = s.count;
  }
  return j;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  return f;
}

void finish(std::ofstream& f, const std::string& path) {
  f.flush();
  if (!f) throw IoError("write to '" + path + "' failed");
}

}  // namespace

bool StatValue::operator==(const StatValue& o) const {
  return name == o.name && same(value, o.value) && same(se, o.se) && count == o.count;
}

std::string tool_version() { return ISOLYAP_VERSION; }

std::string start_timestamp() {
  std::time_t t = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (*end != '\0' || v < 0) throw ConfigError("SOURCE_DATE_EPOCH must be a nonnegative integer");
    t = static_cast<std::time_t>(v);
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest make_manifest(const ExperimentConfig& config, std::string command) {
  RunManifest m;
  m.version = tool_version();
  m.seed = config.seed;
  m.command = std::move(command);
  m.config = canonical_config(config);
  m.started = start_timestamp();
  return m;
}

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<ResultRecord> lyapunov_records(const ExperimentConfig& config, const EqualityResult& result) {
  std::vector<ResultRecord> out;
  for (const auto& p : result.points) {
    RecordBuilder b(config, "lyapunov", p.n);
    b.reference(result.reference);
    b.components("singular", p.singular);
    b.components("gap_singular_ref", p.gap_singular_ref);
    b.components("max_gap_singular_ref", p.max_gap_singular_ref);
    if (!result.qr_stream.empty()) {
      b.components("qr_stream", result.qr_stream);
      b.count("qr_stream_skipped", result.qr_stream_skipped);
    }
    b.count("skipped", p.skipped);
    b.count("untrusted", p.untrusted);
    out.push_back(b.take());
  }
  number_sequence(out);
  return out;
}

std::vector<ResultRecord> stability_records(const ExperimentConfig& config, const EqualityResult& result) {
  std::vector<ResultRecord> out;
  for (const auto& p : result.points) {
    RecordBuilder b(config, "stability", p.n);
    b.reference(result.reference);
    b.components("singular", p.singular);
    b.components("stability", p.stability);
    b.components("gap_singular_ref", p.gap_singular_ref);
    b.components("gap_stability_ref", p.gap_stability_ref);
    b.components("gap_singular_stability", p.gap_singular_stability);
    b.components("max_gap_singular_ref", p.max_gap_singular_ref);
    b.components("max_gap_stability_ref", p.max_gap_stability_ref);
    b.components("max_gap_singular_stability", p.max_gap_singular_stability);
    b.stat("gap_singular_stability_maxcomp", p.gap_singular_stability_maxcomp);
    b.count("skipped", p.skipped);
    b.count("untrusted", p.untrusted);
    out.push_back(b.take());
  }
  number_sequence(out);
  return out;
}

std::vector<ResultRecord> fluctuation_records(const ExperimentConfig& config, const FluctResult& result) {
  std::vector<ResultRecord> out;
  const long ref_count = result.reference_source == "analytic" ? -1 : config.mc_samples;
  RMatrix ref_se = result.reference_se;
  if (result.reference_source == "analytic") ref_se.setConstant(kNaN);
  for (const auto& p : result.points) {
    RecordBuilder b(config, "fluctuations", p.n);
    b.upper_triangle("cov_singular", p.cov_singular, p.se_singular, p.count);
    b.upper_triangle("cov_stability", p.cov_stability, p.se_stability, p.count);
    b.upper_triangle("cov_reference", result.reference_cov, ref_se, ref_count);
    b.count("skipped", p.skipped);
    out.push_back(b.take());
  }
  number_sequence(out);
  return out;
}

std::vector<ResultRecord> real_probability_records(const ExperimentConfig& config, const RealProbResult& result) {
  std::vector<ResultRecord> out;
  for (const auto& p : result.points) {
    RecordBuilder b(config, "realprob", p.n);
    const double se = p.trials > 0 ? std::sqrt(p.p_hat * (1 - p.p_hat) / double(p.trials)) : kNaN;
    b.stat("p_real", {p.p_hat, se, p.trials});
    b.value("wilson_lo", p.wilson_lo);
    b.value("wilson_hi", p.wilson_hi);
    b.count("all_real", p.all_real);
    b.count("excluded", p.excluded);
    out.push_back(b.take());
  }
  number_sequence(out);
  return out;
}

std::vector<ResultRecord> verify_records(const ExperimentConfig& config, const std::vector<LemmaRow>& lemma,
                                         const MinorIdentityReport& minor) {
  std::vector<ResultRecord> out;
  RecordBuilder b(config, "lemma", -1);
  long failures = 0;
  for (const auto& row : lemma) {
    std::string name = row.check;
    for (char& c : name) {
      if (c == '-') c = '_';
    }
    if (row.check == "corner-logdet") {
      name = indexed(name, row.i);
    } else if (row.j > 0) {
      name = indexed(name, row.j);
    }
    b.stat(name, {row.estimate, row.se, row.count});
    b.value("target_" + name, row.target);
    failures += !row.pass;
  }
  b.count("lemma_failures", failures);
  out.push_back(b.take());

  RecordBuilder m(config, "minor-identity", -1);
  m.count("instances", minor.instances);
  m.value("max_residual_minors", minor.max_residual_minors);
  m.value("max_residual_factored", minor.max_residual_factored);
  m.value("max_recursion_residual", minor.max_recursion_residual);
  m.count("horn_violations", minor.horn_violations);
  m.count("binomial_violations", minor.binomial_violations);
  m.count("identity_failures", minor.pass ? 0 : 1);
  out.push_back(m.take());
  number_sequence(out);
  return out;
}

std::vector<std::string> stat_schema(int d) {
  std::vector<std::string> s;
  const auto comp = [&](const std::string& base) {
    for (int i = 1; i <= d; ++i) s.push_back(indexed(base, i));
  };
  const auto tri = [&](const std::string& base) {
    for (int i = 1; i <= d; ++i) {
      for (int j = i; j <= d; ++j) s.push_back(indexed(base, i, j));
    }
  };
  comp("reference");
  comp("singular");
  comp("stability");
  comp("gap_singular_ref");
  comp("gap_stability_ref");
  comp("gap_singular_stability");
  comp("max_gap_singular_ref");
  comp("max_gap_stability_ref");
  comp("max_gap_singular_stability");
  s.push_back("gap_singular_stability_maxcomp");
  comp("qr_stream");
  s.push_back("qr_stream_skipped");
  s.push_back("skipped");
  s.push_back("untrusted");
  tri("cov_singular");
  tri("cov_stability");
  tri("cov_reference");
  for (const char* name : {"p_real", "wilson_lo", "wilson_hi", "all_real", "excluded"}) s.push_back(name);
  for (int i = 1; i <= d; ++i) {
    s.push_back(indexed("corner_logdet", i));
    s.push_back(indexed("target_corner_logdet", i));
  }
  for (int j = 1; j <= lq_rows(d); ++j) {
    s.push_back(indexed("lq_diag_mean", j));
    s.push_back(indexed("target_lq_diag_mean", j));
    s.push_back(indexed("lq_diag_var", j));
    s.push_back(indexed("target_lq_diag_var", j));
  }
  for (const char* name : {"lq_offdiag_mean", "target_lq_offdiag_mean", "lq_offdiag_var", "target_lq_offdiag_var",
                           "scaling", "target_scaling", "lemma_failures", "instances", "max_residual_minors",
                           "max_residual_factored", "max_recursion_residual", "horn_violations",
                           "binomial_violations", "identity_failures"}) {
    s.push_back(name);
  }
  return s;
}

void write_records(const RunManifest& manifest, const std::vector<ResultRecord>& records, const std::string& format,
                   const std::string& path) {
  if (format == "jsonl") {
    auto f = open_for_write(path);
    f << manifest_json(manifest).dump() << '\n';
    for (const auto& r : records) f << record_json(r).dump() << '\n';
    finish(f, path);
    return;
  }
  if (format != "csv") throw ConfigError("format must be jsonl or csv, got '" + format + "'");

  const std::string sidecar = path + ".manifest.json";
  auto m = open_for_write(sidecar);
  m << manifest_json(manifest).dump(2) << '\n';
  finish(m, sidecar);

  // With no records the dimension comes from the manifest's config.
  const int d = !records.empty()          ? records.front().d
                : manifest.config.empty() ? 0
                                          : parse_config(manifest.config).spec.d;
  const auto schema = stat_schema(d);
  auto f = open_for_write(path);
  f << "seq,experiment,d,field,ensemble,n,replications";
  for (const auto& name : schema) f << ',' << name << ",se_" << name << ",count_" << name;
  f << "\r\n";
  for (const auto& r : records) {
    f << r.seq << ',' << csv_field(r.experiment) << ',' << r.d << ',' << csv_field(r.field) << ','
      << csv_field(r.ensemble) << ',' << (r.n < 0 ? "" : std::to_string(r.n)) << ',' << r.replications;
    for (const auto& name : schema) {
      const StatValue* s = nullptr;
      for (const auto& st : r.stats) {
        if (st.name == name) s = &st;
      }
      if (!s) {
        f << ",,,";
        continue;
      }
      f << ',' << (std::isnan(s->value) ? "" : format_real(s->value));
      f << ',' << (std::isnan(s->se) ? "" : format_real(s->se));
      f << ',' << (s->count < 0 ? "" : std::to_string(s->count));
    }
    f << "\r\n";
  }
  finish(f, path);
}

JsonlContents read_jsonl(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  JsonlContents out;
  std::string line;
  if (!std::getline(f, line)) throw IoError("'" + path + "' is empty");
  try {
    const auto m = Json::parse(line).at("manifest");
    out.manifest = {m.at("tool"), m.at("version"), m.at("seed"), m.at("command"), m.at("config"), m.at("started")};
    while (std::getline(f, line)) {
      const auto j = Json::parse(line);
      ResultRecord r;
      r.seq = j.at("seq");
      r.experiment = j.at("experiment");
      r.d = j.at("d");
      r.field = j.at("field");
      r.ensemble = j.at("ensemble");
      r.n = j.at("n").is_null() ? -1 : j.at("n").get<long>();
      r.replications = j.at("replications");
      for (const auto& [key, value] : j.items()) {
        if (key == "seq" || key == "experiment" || key == "d" || key == "field" || key == "ensemble" || key == "n" ||
            key == "replications") {
          continue;
        }
        const auto attach = [&](std::string_view prefix) -> StatValue* {
          if (!key.starts_with(prefix)) return nullptr;
          const auto name = key.substr(prefix.size());
          for (auto& s : r.stats) {
            if (s.name == name) return &s;
          }
          return nullptr;
        };
        if (auto* s = attach("se_")) {
          s->se = value.get<double>();
        } else if (auto* s2 = attach("count_")) {
          s2->count = value.get<long>();
        } else {
          r.stats.push_back({key, value.is_null() ? kNaN : value.get<double>(), kNaN, -1});
        }
      }
      out.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON-lines file '" + path + "': " + e.what());
  }
  return out;
}

}  // namespace isolyap
