#pragma once

#include <stdexcept>
#include <string>

namespace isolyap {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments (bad index sets, non-unitary frames, shape mismatch).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Numerically rank-deficient input to a factorization.
class SingularInputError : public Error {
 public:
  using Error::Error;
};

/// An iterative routine failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The log-singular-value spread exceeds the double exponent budget.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Invalid ensemble description or a sampled value outside its law's support.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Operation not defined for the requested ensemble kind.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Special-function argument outside the domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Configuration text rejected; message names the key and line.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Output file could not be written or read back.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace isolyap
