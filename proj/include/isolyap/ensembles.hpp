#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "isolyap/linalg.hpp"
#include "isolyap/rng.hpp"

namespace isolyap {

/// A named distribution over the positive reals.
struct ScalarLaw {
  enum class Kind { constant, uniform, lognormal, exponential };

  Kind kind = Kind::constant;
  double a = 1.0;  // constant value | lower bound | log-mean | rate
  double b = 0.0;  // upper bound | log-sd

  static ScalarLaw constant(double c) { return {Kind::constant, c, 0.0}; }
  static ScalarLaw uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static ScalarLaw lognormal(double mu, double sigma) { return {Kind::lognormal, mu, sigma}; }
  static ScalarLaw exponential(double rate) { return {Kind::exponential, rate, 0.0}; }

  /// Throws SpecError unless the law is supported on (0, inf).
  void validate() const;
  double sample(Engine& eng) const;
  /// E[log X], used for the scalar-multiple-of-unitary degenerate case.
  double mean_log() const;

  std::string to_string() const;
  /// Parses `constant(1)`, `uniform(1,2)`, `lognormal(0,0.5)`, `exponential(1)`.
  static ScalarLaw parse(std::string_view text);

  bool operator==(const ScalarLaw&) const = default;
};

struct Ginibre {
  bool operator==(const Ginibre&) const = default;
};
struct TruncatedHaar {
  int m = 0;
  bool operator==(const TruncatedHaar&) const = default;
};
/// A random positive scalar times a Haar unitary.
struct HaarScaled {
  ScalarLaw law;
  bool operator==(const HaarScaled&) const = default;
};
/// Either one independent law per diagonal slot, or a fixed vector.
struct CustomSingular {
  std::vector<ScalarLaw> laws;
  std::vector<double> fixed;
  bool operator==(const CustomSingular&) const = default;
};

using EnsembleKind = std::variant<Ginibre, TruncatedHaar, HaarScaled, CustomSingular>;

struct EnsembleSpec {
  Field field = Field::real;
  int d = 1;
  EnsembleKind kind = Ginibre{};

  /// Throws SpecError on d < 1, m <= d, nonpositive laws or a length mismatch.
  void validate() const;
  bool operator==(const EnsembleSpec&) const = default;
};

/// Canonical text: `ginibre`, `truncated-haar:m=8`,
/// `haar-scaled:law=lognormal(0,0.5)`, `custom-singular:fixed=[2,1]`,
/// `custom-singular:laws=[uniform(1,2),constant(1)]`.
std::string to_string(const EnsembleKind& kind);
EnsembleKind parse_ensemble_kind(std::string_view text);

/// Shortest round-trip decimal form of a double.
std::string format_double(double x);

template <class Scalar>
Mat<Scalar> sample_ginibre(int rows, int cols, const RngStream& stream);
template <class Scalar>
Mat<Scalar> sample_haar_unitary(int d, const RngStream& stream);
/// Top-left d x d corner of an m x m Haar matrix.
template <class Scalar>
Mat<Scalar> sample_truncated_haar(int m, int d, const RngStream& stream);

/// Diagonal of D, descending and strictly positive.
RVector sample_singular_values(const EnsembleSpec& spec, const RngStream& stream);

template <class Scalar>
Mat<Scalar> sample_isotropic(const EnsembleSpec& spec, const RngStream& stream);

/// u_fixed * diag(D) * v with v Haar. u_fixed must be unitary.
template <class Scalar>
Mat<Scalar> sample_right_isotropic(const EnsembleSpec& spec, const Mat<Scalar>& u_fixed,
                                   const RngStream& stream);

}  // namespace isolyap
