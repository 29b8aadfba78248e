#pragma once

#include <stdexcept>
#include <string>

namespace uforge {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Rejected input: shape mismatch, bad label, inconsistent spec. Maps to
/// CLI exit code 2.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Text input that failed to parse; carries a 1-based row/line number.
class ParseError : public InvalidInputError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InvalidInputError(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Optimization produced a non-finite value. Carries the offending entry
/// name (parameter tensor or learning rate tag). Maps to CLI exit code 3.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::string entry)
      : Error(what + " [" + entry + "]"), entry_(std::move(entry)) {}
  const std::string& entry() const { return entry_; }

 private:
  std::string entry_;
};

/// Two values that must agree by construction do not (trace/params, layouts).
class InternalConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Missing or unreadable file/artifact. Maps to CLI exit code 3.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace uforge
