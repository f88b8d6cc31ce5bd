#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "isolyap/config.hpp"
#include "isolyap/errors.hpp"
#include "isolyap/records.hpp"

namespace isolyap {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "isolyap_test_records";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out(1);
  for (char c : line) {
    if (c == sep) {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

ExperimentConfig small_config() {
  return parse_config("seed=11 field=real d=2 ensemble=ginibre n_grid=[5,20] replications=12 mc_samples=200");
}

RunManifest fixed_manifest(const ExperimentConfig& c) {
  setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  auto m = make_manifest(c, "isolyap run lyapunov --config x");
  unsetenv("SOURCE_DATE_EPOCH");
  return m;
}

TEST(Records, TimestampFromSourceDateEpoch) {
  setenv("SOURCE_DATE_EPOCH", "0", 1);
  EXPECT_EQ(start_timestamp(), "1970-01-01T00:00:00Z");
  setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  EXPECT_EQ(start_timestamp(), "2023-11-14T22:13:20Z");
  setenv("SOURCE_DATE_EPOCH", "soon", 1);
  EXPECT_THROW(start_timestamp(), ConfigError);
  unsetenv("SOURCE_DATE_EPOCH");
  EXPECT_EQ(start_timestamp().size(), 20u);
}

TEST(Records, FormatRealRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::nextafter(1.0, 2.0)}) {
    EXPECT_EQ(std::strtod(format_real(x).c_str(), nullptr), x);
  }
  EXPECT_EQ(format_real(0.5), "0.5");
}

TEST(Records, JsonlRoundTripPreservesEveryField) {
  const auto c = small_config();
  const auto manifest = fixed_manifest(c);
  auto records = lyapunov_records(c, run_equality(c));
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].seq, 0);
  EXPECT_EQ(records[1].seq, 1);
  EXPECT_EQ(records[1].n, 20);
  EXPECT_EQ(records[0].ensemble, "ginibre");
  // Exercise NaN values, a missing n and awkward strings.
  records[1].stats.push_back({"odd", std::numeric_limits<double>::quiet_NaN(), 0.25, 3});
  records[1].experiment = "with \"quote\", comma";

  const auto path = temp_file("round.jsonl");
  write_records(manifest, records, "jsonl", path.string());
  const auto back = read_jsonl(path.string());
  EXPECT_EQ(back.manifest, manifest);
  EXPECT_EQ(back.records, records);
  EXPECT_EQ(parse_config(back.manifest.config), c);
}

TEST(Records, JsonlWritesNullForNaNAndOmitsAbsentSe) {
  const auto c = small_config();
  ResultRecord r{0, "lyapunov", 2, "real", "ginibre", 5, 12,
                 {{"a", std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), -1},
                  {"b", 1.5, 0.5, 4}}};
  const auto path = temp_file("null.jsonl");
  write_records(fixed_manifest(c), {r}, "jsonl", path.string());
  const auto text = slurp(path);
  EXPECT_NE(text.find("\"a\":null"), std::string::npos) << text;
  EXPECT_EQ(text.find("se_a"), std::string::npos);
  EXPECT_NE(text.find("\"se_b\":0.5,\"count_b\":4"), std::string::npos) << text;
  EXPECT_EQ(text.find("NaN"), std::string::npos);
}

TEST(Records, CsvHasSeColumnsForEveryStatistic) {
  const auto c = small_config();
  const auto records = stability_records(c, run_equality(c));
  const auto path = temp_file("stab.csv");
  write_records(fixed_manifest(c), records, "csv", path.string());

  std::ifstream f(path);
  std::string header, row;
  std::getline(f, header);
  std::getline(f, row);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (!row.empty() && row.back() == '\r') row.pop_back();
  const auto cols = split(header, ',');
  const auto vals = split(row, ',');
  ASSERT_EQ(cols.size(), vals.size());
  const auto schema = stat_schema(2);
  EXPECT_EQ(cols.size(), 7 + 3 * schema.size());
  for (const auto& name : schema) {
    EXPECT_NE(std::find(cols.begin(), cols.end(), "se_" + name), cols.end()) << name;
  }
  const auto col = [&](const std::string& name) {
    return vals[std::find(cols.begin(), cols.end(), name) - cols.begin()];
  };
  const auto& stat = records[0].stats;
  const auto singular = std::find_if(stat.begin(), stat.end(), [](auto& s) { return s.name == "singular_1"; });
  EXPECT_EQ(std::strtod(col("singular_1").c_str(), nullptr), singular->value);
  EXPECT_EQ(std::strtod(col("se_singular_1").c_str(), nullptr), singular->se);
  EXPECT_EQ(col("count_singular_1"), std::to_string(singular->count));
  EXPECT_EQ(col("p_real"), "");
  EXPECT_EQ(col("n"), "5");
  EXPECT_EQ(col("experiment"), "stability");

  const auto sidecar = slurp(path.string() + ".manifest.json");
  EXPECT_NE(sidecar.find("\"tool\": \"isolyap\""), std::string::npos) << sidecar;
}

TEST(Records, CsvQuotesAwkwardStrings) {
  const auto c = small_config();
  ResultRecord r{0, "a,\"b\"", 2, "real", "custom-singular:laws=[uniform(1,2),constant(1)]", -1, 1, {}};
  const auto path = temp_file("quote.csv");
  write_records(fixed_manifest(c), {r}, "csv", path.string());
  const auto text = slurp(path);
  EXPECT_NE(text.find("0,\"a,\"\"b\"\"\",2,real,\"custom-singular:laws=[uniform(1,2),constant(1)]\",,1"),
            std::string::npos)
      << text;
}

TEST(Records, EmptyRecordListStillWritesHeaderAndManifest) {
  const auto c = small_config();
  const auto manifest = fixed_manifest(c);
  const auto jl = temp_file("empty.jsonl");
  write_records(manifest, {}, "jsonl", jl.string());
  const auto back = read_jsonl(jl.string());
  EXPECT_EQ(back.manifest, manifest);
  EXPECT_TRUE(back.records.empty());

  const auto csv = temp_file("empty.csv");
  write_records(manifest, {}, "csv", csv.string());
  const auto text = slurp(csv);
  EXPECT_EQ(text.find("seq,experiment,d,field,ensemble,n,replications,reference_1,"), 0u) << text;
  EXPECT_NE(text.find("se_singular_2,"), std::string::npos);
  EXPECT_EQ(text.find("singular_3"), std::string::npos);
  EXPECT_EQ(text.find("\r\n"), text.size() - 2);
}

TEST(Records, SchemaCoversEveryBuilder) {
  auto c = parse_config("seed=2 field=real d=3 ensemble=ginibre n_grid=[4] replications=100 mc_samples=100");
  const auto schema = stat_schema(3);
  const auto check = [&](const std::vector<ResultRecord>& records) {
    for (const auto& r : records) {
      for (const auto& s : r.stats) {
        EXPECT_NE(std::find(schema.begin(), schema.end(), s.name), schema.end()) << r.experiment << " " << s.name;
      }
    }
  };
  c.estimators = Estimators{true, false, true};
  check(lyapunov_records(c, run_equality(c)));
  check(stability_records(c, run_equality(c)));
  check(fluctuation_records(c, run_fluctuations(c)));
  check(real_probability_records(c, run_real_probability(c)));
  c.replications = 50;
  check(verify_records(c, run_lemma_checks(c), run_minor_identity(c)));
}

TEST(Records, VerifyRecordsCountFailures) {
  auto c = parse_config("seed=2 field=complex d=2 ensemble=ginibre n_grid=[4] replications=200");
  auto lemma = run_lemma_checks(c);
  auto minor = run_minor_identity(c);
  auto records = verify_records(c, lemma, minor);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].experiment, "lemma");
  EXPECT_EQ(records[1].experiment, "minor-identity");
  lemma[0].pass = false;
  minor.pass = false;
  records = verify_records(c, lemma, minor);
  const auto value = [](const ResultRecord& r, const std::string& name) {
    for (const auto& s : r.stats) {
      if (s.name == name) return s.value;
    }
    return -1.0;
  };
  EXPECT_GE(value(records[0], "lemma_failures"), 1.0);
  EXPECT_EQ(value(records[1], "identity_failures"), 1.0);
  EXPECT_EQ(value(records[0], "target_corner_logdet_1"), lemma[0].target);
}

TEST(Records, WriteAndReadFailuresAreIoErrors) {
  const auto c = small_config();
  EXPECT_THROW(write_records(fixed_manifest(c), {}, "jsonl", "/nonexistent-dir/x.jsonl"), IoError);
  EXPECT_THROW(read_jsonl("/nonexistent-dir/x.jsonl"), IoError);
  const auto bad = temp_file("bad.jsonl");
  std::ofstream(bad) << "{not json\n";
  EXPECT_THROW(read_jsonl(bad.string()), IoError);
}

}  // namespace
}  // namespace isolyap
