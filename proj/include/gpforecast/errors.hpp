#pragma once

#include <stdexcept>
#include <string>

namespace gpf {

// Bad arguments to a library call (shape mismatches, empty inputs, ...).
class InputError : public std::invalid_argument {
public:
  explicit InputError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Invalid user-facing configuration (flags, config files, generator settings).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; carries the offending line when known.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& msg, std::size_t line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

// Well-formed input that violates a data constraint (grid months, score range, ...).
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Factorization failed even at the maximum jitter.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// A metric was requested on a record set that cannot define it.
class MetricError : public std::runtime_error {
public:
  explicit MetricError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gpf
