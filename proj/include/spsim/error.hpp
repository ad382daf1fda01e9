#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spsim {

/// Base of every exception thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-domain arguments (non-positive wavelength, bin width 0, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Resonator geometry that violates 0 < L < R or a cap deeper than a hemisphere.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an estimator (V <= 0, saturated rate, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

/// Normal matrix is singular; carries the parameters spanning the null space.
class RankDeficiencyError : public FitError {
 public:
  RankDeficiencyError(const std::string& what, std::vector<std::string> params)
      : FitError(what), params_(std::move(params)) {}
  const std::vector<std::string>& parameters() const noexcept { return params_; }

 private:
  std::vector<std::string> params_;
};

/// A measurement could not be extracted (fit did not converge, undefined ratio, ...).
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Configuration problem; line is 0 when the problem is not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Malformed binary or text file; offset is the byte offset of the first bad record.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace spsim
