#pragma once

#include <stdexcept>
#include <string>

namespace detkit {

// Exit codes used by the CLI; documented in the README.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitValidation = 3,
  kExitRuntime = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data that violates an invariant: out-of-range ids, broken box extents,
// non-finite costs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; always carries file and line context.
class ParseError : public ValidationError {
 public:
  ParseError(std::string file, int line, const std::string& message)
      : ValidationError(file + ":" + std::to_string(line) + ": " + message),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  int line() const noexcept { return line_; }

 private:
  std::string file_;
  int line_;
};

// Argument outside the mathematical domain of an operation (e.g. a
// probability at 0 or 1 where a logarithm is required).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Bad invocation: unknown mode, missing input, unusable configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace detkit
