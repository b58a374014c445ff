#pragma once

#include <stdexcept>
#include <string>

namespace ause {

/// Base class for all errors raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Binary file problems: bad magic, unsupported version, truncation, checksum.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A caller or plug-in broke an interface contract (bad distribution, reserved token, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace ause
