#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kphase {

/// Invalid user-supplied configuration (unknown key, malformed value, range violation).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data, e.g. a counts file. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Base for numerical degeneracies: zero evidence, zero-mean Fano, too few GOF bins.
class NumericalError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Every grid point assigns zero likelihood to the data.
class DegenerateEvidence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Fano factor undefined (zero mean photon number).
class UndefinedFano : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Chi-square pooling left fewer than two bins.
class InsufficientSupport : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace kphase
