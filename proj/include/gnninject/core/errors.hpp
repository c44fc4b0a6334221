#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gnninject {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number of the offending line.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// API misuse (backward on a non-scalar, success() on a live episode, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation precondition (e.g. a masked action was submitted).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class EpisodeFinished : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss during optimisation.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace gnninject
