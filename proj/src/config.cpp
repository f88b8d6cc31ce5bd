#include "isolyap/config.hpp"

#include <charconv>
#include <map>
#include <set>

#include "isolyap/errors.hpp"

namespace isolyap {
namespace {

struct Entry {
  std::string value;
  int line = 0;
  bool quoted = false;
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }
bool is_key_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

[[noreturn]] void fail(int line, std::string_view key, const std::string& why) {
  std::string msg = "line " + std::to_string(line);
  if (!key.empty()) msg += ": key '" + std::string(key) + "'";
  throw ConfigError(msg + ": " + why);
}

std::map<std::string, Entry> tokenize(std::string_view text) {
  std::map<std::string, Entry> entries;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    std::size_t i = 0;
    const auto skip = [&] {
      while (i < line.size() && is_space(line[i])) ++i;
    };
    while (true) {
      skip();
      if (i >= line.size() || line[i] == '#') break;
      const std::size_t k0 = i;
      while (i < line.size() && is_key_char(line[i])) ++i;
      const std::string key(line.substr(k0, i - k0));
      if (key.empty()) fail(line_no, "", "expected a key, found '" + std::string(line.substr(k0)) + "'");
      skip();
      if (i >= line.size() || line[i] != '=') fail(line_no, key, "expected '=' after key");
      ++i;
      skip();
      Entry e;
      e.line = line_no;
      if (i < line.size() && line[i] == '"') {
        const auto close = line.find('"', i + 1);
        if (close == std::string_view::npos) fail(line_no, key, "unterminated string");
        e.value = std::string(line.substr(i + 1, close - i - 1));
        e.quoted = true;
        i = close + 1;
      } else {
        int depth = 0;
        const std::size_t v0 = i;
        while (i < line.size()) {
          const char c = line[i];
          if (c == '[' || c == '(') ++depth;
          if (c == ']' || c == ')') --depth;
          if (depth <= 0 && (is_space(c) || c == '#')) break;
          ++i;
        }
        if (depth > 0) fail(line_no, key, "unbalanced brackets");
        e.value = std::string(line.substr(v0, i - v0));
        if (e.value.empty()) fail(line_no, key, "missing value");
      }
      if (i < line.size() && !is_space(line[i]) && line[i] != '#') {
        fail(line_no, key, "unexpected text after value");
      }
      const auto [it, inserted] = entries.emplace(key, std::move(e));
      if (!inserted) {
        fail(line_no, key, "duplicate key (first set on line " + std::to_string(it->second.line) + ")");
      }
    }
  }
  return entries;
}

template <class Int>
Int parse_integer(const std::string& key, const Entry& e, Int min_value) {
  Int value{};
  const char* end = e.value.data() + e.value.size();
  const auto [ptr, ec] = std::from_chars(e.value.data(), end, value);
  if (e.quoted || ec != std::errc() || ptr != end) fail(e.line, key, "expected an integer, got '" + e.value + "'");
  if (value < min_value) fail(e.line, key, "must be >= " + std::to_string(min_value) + ", got " + e.value);
  return value;
}

std::vector<long> parse_grid(const std::string& key, const Entry& e) {
  std::string_view v = e.value;
  if (e.quoted) fail(e.line, key, "expected an integer or a list of integers");
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') fail(e.line, key, "unterminated list");
    v = v.substr(1, v.size() - 2);
  }
  std::vector<long> grid;
  while (true) {
    while (!v.empty() && is_space(v.front())) v.remove_prefix(1);
    if (v.empty()) break;
    const auto comma = v.find(',');
    std::string item(v.substr(0, comma));
    while (!item.empty() && is_space(item.back())) item.pop_back();
    grid.push_back(parse_integer<long>(key, Entry{item, e.line, false}, 1));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (grid.empty()) fail(e.line, key, "must list at least one step count");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) fail(e.line, key, "must be strictly increasing");
  }
  return grid;
}

std::string quote(std::string_view s) { return "\"" + std::string(s) + "\""; }

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  static const std::set<std::string> known{"seed",    "field",      "d",       "ensemble", "n_grid",    "replications",
                                           "mc_samples", "threads", "out",     "format",   "estimators"};
  const auto entries = tokenize(text);
  for (const auto& [key, e] : entries) {
    if (!known.contains(key)) fail(e.line, key, "unknown key");
  }
  for (const char* key : {"seed", "field", "d", "ensemble", "n_grid", "replications"}) {
    if (!entries.contains(key)) throw ConfigError("missing required key '" + std::string(key) + "'");
  }

  ExperimentConfig c;
  c.seed = parse_integer<std::uint64_t>("seed", entries.at("seed"), 0);
  {
    const auto& e = entries.at("field");
    if (e.value == "real") {
      c.spec.field = Field::real;
    } else if (e.value == "complex") {
      c.spec.field = Field::complex;
    } else {
      fail(e.line, "field", "expected real or complex, got '" + e.value + "'");
    }
  }
  c.spec.d = parse_integer<int>("d", entries.at("d"), 1);
  {
    const auto& e = entries.at("ensemble");
    try {
      c.spec.kind = parse_ensemble_kind(e.value);
      c.spec.validate();
    } catch (const SpecError& err) {
      fail(e.line, "ensemble", err.what());
    }
  }
  c.n_grid = parse_grid("n_grid", entries.at("n_grid"));
  c.replications = parse_integer<long>("replications", entries.at("replications"), 1);
  if (auto it = entries.find("mc_samples"); it != entries.end()) {
    c.mc_samples = parse_integer<long>("mc_samples", it->second, 2);
  }
  if (auto it = entries.find("threads"); it != entries.end()) {
    c.threads = parse_integer<int>("threads", it->second, 1);
  }
  if (auto it = entries.find("out"); it != entries.end()) c.out = it->second.value;
  if (auto it = entries.find("format"); it != entries.end()) {
    if (it->second.value != "jsonl" && it->second.value != "csv") {
      fail(it->second.line, "format", "expected jsonl or csv, got '" + it->second.value + "'");
    }
    c.format = it->second.value;
  }
  if (auto it = entries.find("estimators"); it != entries.end()) {
    try {
      c.estimators = Estimators::parse(it->second.value);
    } catch (const ConfigError& err) {
      fail(it->second.line, "estimators", err.what());
    }
  }
  try {
    c.validate();
  } catch (const ConfigError& err) {
    const auto& e = entries.at(c.estimators ? "estimators" : "ensemble");
    fail(e.line, c.estimators ? "estimators" : "ensemble", err.what());
  }
  return c;
}

std::vector<std::string> config_keys(std::string_view text) {
  std::vector<std::string> keys;
  for (const auto& [key, e] : tokenize(text)) keys.push_back(key);
  return keys;
}

std::string canonical_config(const ExperimentConfig& c) {
  std::string out;
  const auto line = [&](std::string_view key, const std::string& value) {
    out += std::string(key) + " = " + value + "\n";
  };
  line("seed", std::to_string(c.seed));
  line("field", quote(to_string(c.spec.field)));
  line("d", std::to_string(c.spec.d));
  line("ensemble", quote(to_string(c.spec.kind)));
  std::string grid = "[";
  for (std::size_t i = 0; i < c.n_grid.size(); ++i) grid += (i ? "," : "") + std::to_string(c.n_grid[i]);
  line("n_grid", grid + "]");
  line("replications", std::to_string(c.replications));
  line("mc_samples", std::to_string(c.mc_samples));
  line("threads", std::to_string(c.threads));
  line("out", quote(c.out));
  line("format", quote(c.format));
  if (c.estimators) line("estimators", c.estimators->to_string());
  return out;
}

}  // namespace isolyap
