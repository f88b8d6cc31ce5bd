#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isolyap/experiments.hpp"

namespace isolyap {

/// One named statistic. NaN value/se and count < 0 mean "not applicable".
struct StatValue {
  std::string name;
  double value = 0.0;
  double se = 0.0;
  long count = -1;

  bool operator==(const StatValue& o) const;
};

/// Flat result row: one per (experiment, n).
struct ResultRecord {
  long seq = 0;
  std::string experiment;
  int d = 0;
  std::string field;
  std::string ensemble;
  long n = -1;  ///< -1 when the experiment has no step count
  long replications = 0;
  std::vector<StatValue> stats;

  bool operator==(const ResultRecord&) const = default;
};

struct RunManifest {
  std::string tool = "isolyap";
  std::string version;
  std::uint64_t seed = 0;
  std::string command;
  std::string config;   ///< canonical_config text
  std::string started;  ///< UTC ISO-8601

  bool operator==(const RunManifest&) const = default;
};

/// Version string compiled into the library.
std::string tool_version();

/// SOURCE_DATE_EPOCH when set (reproducible output), else the wall clock.
std::string start_timestamp();

RunManifest make_manifest(const ExperimentConfig& config, std::string command);

std::vector<ResultRecord> lyapunov_records(const ExperimentConfig& config, const EqualityResult& result);
std::vector<ResultRecord> stability_records(const ExperimentConfig& config, const EqualityResult& result);
std::vector<ResultRecord> fluctuation_records(const ExperimentConfig& config, const FluctResult& result);
std::vector<ResultRecord> real_probability_records(const ExperimentConfig& config, const RealProbResult& result);
std::vector<ResultRecord> verify_records(const ExperimentConfig& config, const std::vector<LemmaRow>& lemma,
                                         const MinorIdentityReport& minor);

/// Every statistic name any experiment can emit for dimension d, in column
/// order. CSV files carry all of them, empty where inapplicable.
std::vector<std::string> stat_schema(int d);

/// JSON-lines: manifest object first, then one object per record.
/// CSV: header and rows, plus the manifest in `<path>.manifest.json`.
/// Throws IoError when the file cannot be written.
void write_records(const RunManifest& manifest, const std::vector<ResultRecord>& records, const std::string& format,
                   const std::string& path);

struct JsonlContents {
  RunManifest manifest;
  std::vector<ResultRecord> records;
};

JsonlContents read_jsonl(const std::string& path);

/// "%.17g": enough digits to read back the identical double.
std::string format_real(double x);

}  // namespace isolyap
