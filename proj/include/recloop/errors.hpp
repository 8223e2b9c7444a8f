#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace recloop {

/// Base class of all recloop failures. The CLI maps each subclass to a
/// distinct exit code.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input text: wrong field count, non-numeric value, value out of
/// range. Carries the 1-based line number when one is known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Unusable data: missing group mapping, non-finite values, schema mismatch,
/// not enough eligible users.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A precondition was broken by the caller: index out of range, empty
/// candidate set, recommendation length exceeding the pool, delta outside
/// (0, 1].
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Numeric failure while fitting the model. Carries the epoch at which the
/// divergence was detected.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t epoch)
      : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace recloop
