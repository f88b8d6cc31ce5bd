#include "isolyap/ensembles.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>

#include "isolyap/errors.hpp"

namespace isolyap {
namespace {

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view s, std::string_view context) {
  s = trim(s);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw SpecError("invalid number '" + std::string(s) + "' in " + std::string(context));
  }
  return value;
}

int parse_int(std::string_view s, std::string_view context) {
  s = trim(s);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw SpecError("invalid integer '" + std::string(s) + "' in " + std::string(context));
  }
  return value;
}

/// Splits on commas that are not nested inside parentheses or brackets.
std::vector<std::string_view> split_top_level(std::string_view s) {
  std::vector<std::string_view> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(' || s[i] == '[') ++depth;
    if (s[i] == ')' || s[i] == ']') --depth;
    if (s[i] == ',' && depth == 0) {
      parts.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  parts.push_back(trim(s.substr(start)));
  return parts;
}

std::string_view bracketed(std::string_view s, char open, char close, std::string_view context) {
  s = trim(s);
  if (s.size() < 2 || s.front() != open || s.back() != close) {
    throw SpecError("expected " + std::string(1, open) + "..." + std::string(1, close) + " in " +
                    std::string(context));
  }
  return s.substr(1, s.size() - 2);
}

template <class Scalar>
Scalar normal_scalar(Engine& eng) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return eng.normal();
  } else {
    const double re = eng.normal();
    return Scalar(re, eng.normal());
  }
}

void require_dim(int value, const char* what) {
  if (value < 1) throw ArgumentError(std::string(what) + " must be >= 1, got " + std::to_string(value));
}

template <class Scalar>
void require_field(const EnsembleSpec& spec) {
  if (spec.field != field_of<Scalar>()) {
    throw ArgumentError("scalar type does not match ensemble field " + std::string(to_string(spec.field)));
  }
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

void ScalarLaw::validate() const {
  const auto fail = [&](const std::string& why) { throw SpecError("law " + to_string() + ": " + why); };
  if (!std::isfinite(a) || !std::isfinite(b)) fail("parameters must be finite");
  switch (kind) {
    case Kind::constant:
      if (!(a > 0)) fail("value must be positive");
      break;
    case Kind::uniform:
      if (!(a >= 0) || !(b > a)) fail("requires 0 <= lower < upper");
      break;
    case Kind::lognormal:
      if (!(b >= 0)) fail("log-sd must be nonnegative");
      break;
    case Kind::exponential:
      if (!(a > 0)) fail("rate must be positive");
      break;
  }
}

double ScalarLaw::sample(Engine& eng) const {
  double x = 0.0;
  switch (kind) {
    case Kind::constant:
      x = a;
      break;
    case Kind::uniform:
      x = a + (b - a) * eng.uniform_open();
      break;
    case Kind::lognormal:
      x = std::exp(a + b * eng.normal());
      break;
    case Kind::exponential:
      x = -std::log(eng.uniform_open()) / a;
      break;
  }
  if (!(x > 0) || !std::isfinite(x)) {
    throw SpecError("law " + to_string() + " produced nonpositive value " + format_double(x));
  }
  return x;
}

double ScalarLaw::mean_log() const {
  switch (kind) {
    case Kind::constant:
      return std::log(a);
    case Kind::uniform: {
      const double upper = b * std::log(b);
      const double lower = a > 0 ? a * std::log(a) : 0.0;
      return (upper - lower) / (b - a) - 1.0;
    }
    case Kind::lognormal:
      return a;
    case Kind::exponential:
      return -std::numbers::egamma - std::log(a);
  }
  return 0.0;
}

std::string ScalarLaw::to_string() const {
  switch (kind) {
    case Kind::constant:
      return "constant(" + format_double(a) + ")";
    case Kind::uniform:
      return "uniform(" + format_double(a) + "," + format_double(b) + ")";
    case Kind::lognormal:
      return "lognormal(" + format_double(a) + "," + format_double(b) + ")";
    case Kind::exponential:
      return "exponential(" + format_double(a) + ")";
  }
  return {};
}

ScalarLaw ScalarLaw::parse(std::string_view text) {
  text = trim(text);
  const auto open = text.find('(');
  if (open == std::string_view::npos) throw SpecError("invalid law '" + std::string(text) + "'");
  const auto name = trim(text.substr(0, open));
  const auto args = split_top_level(bracketed(text.substr(open), '(', ')', text));
  const auto expect = [&](std::size_t n) {
    if (args.size() != n) {
      throw SpecError("law '" + std::string(name) + "' takes " + std::to_string(n) + " argument(s)");
    }
  };
  ScalarLaw law;
  if (name == "constant") {
    expect(1);
    law = constant(parse_number(args[0], text));
  } else if (name == "uniform") {
    expect(2);
    law = uniform(parse_number(args[0], text), parse_number(args[1], text));
  } else if (name == "lognormal") {
    expect(2);
    law = lognormal(parse_number(args[0], text), parse_number(args[1], text));
  } else if (name == "exponential") {
    expect(1);
    law = exponential(parse_number(args[0], text));
  } else {
    throw SpecError("unknown law '" + std::string(name) +
                    "' (expected constant, uniform, lognormal or exponential)");
  }
  law.validate();
  return law;
}

void EnsembleSpec::validate() const {
  if (d < 1) throw SpecError("d must be >= 1, got " + std::to_string(d));
  if (const auto* t = std::get_if<TruncatedHaar>(&kind)) {
    if (t->m <= d) {
      throw SpecError("m must exceed d (m=" + std::to_string(t->m) + ", d=" + std::to_string(d) + ")");
    }
  } else if (const auto* h = std::get_if<HaarScaled>(&kind)) {
    h->law.validate();
  } else if (const auto* c = std::get_if<CustomSingular>(&kind)) {
    const bool has_laws = !c->laws.empty();
    const bool has_fixed = !c->fixed.empty();
    if (has_laws == has_fixed) throw SpecError("custom-singular needs exactly one of laws or fixed");
    const std::size_t n = has_laws ? c->laws.size() : c->fixed.size();
    if (n != static_cast<std::size_t>(d)) {
      throw SpecError("custom-singular lists " + std::to_string(n) + " values but d=" + std::to_string(d));
    }
    for (const auto& law : c->laws) law.validate();
    for (double x : c->fixed) {
      if (!(x > 0) || !std::isfinite(x)) {
        throw SpecError("custom-singular fixed values must be positive, got " + format_double(x));
      }
    }
  }
}

std::string to_string(const EnsembleKind& kind) {
  if (std::holds_alternative<Ginibre>(kind)) return "ginibre";
  if (const auto* t = std::get_if<TruncatedHaar>(&kind)) return "truncated-haar:m=" + std::to_string(t->m);
  if (const auto* h = std::get_if<HaarScaled>(&kind)) return "haar-scaled:law=" + h->law.to_string();
  const auto& c = std::get<CustomSingular>(kind);
  std::string out = c.laws.empty() ? "custom-singular:fixed=[" : "custom-singular:laws=[";
  if (c.laws.empty()) {
    for (std::size_t i = 0; i < c.fixed.size(); ++i) out += (i ? "," : "") + format_double(c.fixed[i]);
  } else {
    for (std::size_t i = 0; i < c.laws.size(); ++i) out += (i ? "," : "") + c.laws[i].to_string();
  }
  return out + "]";
}

EnsembleKind parse_ensemble_kind(std::string_view text) {
  text = trim(text);
  const auto colon = text.find(':');
  const auto name = trim(text.substr(0, colon));
  const auto rest = colon == std::string_view::npos ? std::string_view{} : trim(text.substr(colon + 1));
  const auto option = [&](std::string_view key) -> std::string_view {
    const auto eq = rest.find('=');
    if (eq == std::string_view::npos || trim(rest.substr(0, eq)) != key) {
      throw SpecError("ensemble '" + std::string(name) + "' expects option " + std::string(key) + "=...");
    }
    return trim(rest.substr(eq + 1));
  };

  if (name == "ginibre") {
    if (!rest.empty()) throw SpecError("ensemble 'ginibre' takes no options");
    return Ginibre{};
  }
  if (name == "truncated-haar") return TruncatedHaar{parse_int(option("m"), text)};
  if (name == "haar-scaled") return HaarScaled{ScalarLaw::parse(option("law"))};
  if (name == "custom-singular") {
    const auto eq = rest.find('=');
    const auto key = eq == std::string_view::npos ? rest : trim(rest.substr(0, eq));
    CustomSingular c;
    if (key == "fixed") {
      for (auto part : split_top_level(bracketed(option("fixed"), '[', ']', text))) {
        c.fixed.push_back(parse_number(part, text));
      }
    } else if (key == "laws") {
      for (auto part : split_top_level(bracketed(option("laws"), '[', ']', text))) {
        c.laws.push_back(ScalarLaw::parse(part));
      }
    } else {
      throw SpecError("custom-singular expects fixed=[...] or laws=[...]");
    }
    return c;
  }
  throw SpecError("unknown ensemble '" + std::string(name) +
                  "' (expected ginibre, truncated-haar, haar-scaled or custom-singular)");
}

template <class Scalar>
Mat<Scalar> sample_ginibre(int rows, int cols, const RngStream& stream) {
  require_dim(rows, "rows");
  require_dim(cols, "cols");
  Engine eng = stream.engine();
  Mat<Scalar> a(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) a(i, j) = normal_scalar<Scalar>(eng);
  }
  return a;
}

template <class Scalar>
Mat<Scalar> sample_haar_unitary(int d, const RngStream& stream) {
  require_dim(d, "d");
  return linalg::qr_positive(sample_ginibre<Scalar>(d, d, stream)).q;
}

template <class Scalar>
Mat<Scalar> sample_truncated_haar(int m, int d, const RngStream& stream) {
  require_dim(d, "d");
  if (m <= d) throw ArgumentError("m must exceed d (m=" + std::to_string(m) + ", d=" + std::to_string(d) + ")");
  return sample_haar_unitary<Scalar>(m, stream).topLeftCorner(d, d);
}

RVector sample_singular_values(const EnsembleSpec& spec, const RngStream& stream) {
  const int d = spec.d;
  RVector s(d);
  if (std::holds_alternative<Ginibre>(spec.kind) || std::holds_alternative<TruncatedHaar>(spec.kind)) {
    return dispatch_field(spec.field, [&]<class Scalar>() -> RVector {
      const auto a = std::holds_alternative<Ginibre>(spec.kind)
                         ? sample_ginibre<Scalar>(d, d, stream)
                         : sample_truncated_haar<Scalar>(std::get<TruncatedHaar>(spec.kind).m, d, stream);
      RVector sigma = linalg::svd_descending(a).sigma;
      if (!(sigma(d - 1) > 0)) throw SpecError("sampled matrix is singular");
      return sigma;
    });
  }
  Engine eng = stream.engine();
  if (const auto* h = std::get_if<HaarScaled>(&spec.kind)) {
    s.setConstant(h->law.sample(eng));
    return s;
  }
  const auto& c = std::get<CustomSingular>(spec.kind);
  if (!c.fixed.empty()) {
    if (c.fixed.size() != static_cast<std::size_t>(d)) throw SpecError("custom-singular length does not match d");
    for (int i = 0; i < d; ++i) s(i) = c.fixed[i];
  } else {
    if (c.laws.size() != static_cast<std::size_t>(d)) throw SpecError("custom-singular length does not match d");
    for (int i = 0; i < d; ++i) s(i) = c.laws[i].sample(eng);
  }
  for (int i = 0; i < d; ++i) {
    if (!(s(i) > 0) || !std::isfinite(s(i))) throw SpecError("singular value must be positive, got " + format_double(s(i)));
  }
  std::sort(s.data(), s.data() + d, std::greater<>());
  return s;
}

template <class Scalar>
Mat<Scalar> sample_isotropic(const EnsembleSpec& spec, const RngStream& stream) {
  require_field<Scalar>(spec);
  if (std::holds_alternative<Ginibre>(spec.kind)) return sample_ginibre<Scalar>(spec.d, spec.d, stream);
  const RVector s = sample_singular_values(spec, stream.derive(0));
  const Mat<Scalar> u = sample_haar_unitary<Scalar>(spec.d, stream.derive(1));
  const Mat<Scalar> v = sample_haar_unitary<Scalar>(spec.d, stream.derive(2));
  return u * s.cast<Scalar>().asDiagonal() * v;
}

template <class Scalar>
Mat<Scalar> sample_right_isotropic(const EnsembleSpec& spec, const Mat<Scalar>& u_fixed,
                                   const RngStream& stream) {
  require_field<Scalar>(spec);
  if (u_fixed.rows() != spec.d || u_fixed.cols() != spec.d) throw ArgumentError("u_fixed must be d x d");
  if (!linalg::is_unitary(u_fixed)) throw ArgumentError("u_fixed is not unitary within 1e-10");
  const RVector s = sample_singular_values(spec, stream.derive(0));
  const Mat<Scalar> v = sample_haar_unitary<Scalar>(spec.d, stream.derive(2));
  return u_fixed * s.cast<Scalar>().asDiagonal() * v;
}

#define ISOLYAP_INSTANTIATE(S)                                                                \
  template Mat<S> sample_ginibre<S>(int, int, const RngStream&);                             \
  template Mat<S> sample_haar_unitary<S>(int, const RngStream&);                             \
  template Mat<S> sample_truncated_haar<S>(int, int, const RngStream&);                      \
  template Mat<S> sample_isotropic<S>(const EnsembleSpec&, const RngStream&);                \
  template Mat<S> sample_right_isotropic<S>(const EnsembleSpec&, const Mat<S>&, const RngStream&);

ISOLYAP_INSTANTIATE(double)
ISOLYAP_INSTANTIATE(Complex)
#undef ISOLYAP_INSTANTIATE

}  // namespace isolyap
