#pragma once

#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace unideal {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller supplied a value outside an operation's domain.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Matrix / tensor dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A head snapshot's dimension signature does not match the receiving model.
class IncompatibleHeadError : public Error {
 public:
  using Error::Error;
};

// A self-check (e.g. the finite-difference harness) could not run.
class DiagnosticError : public Error {
 public:
  using Error::Error;
};

// CSV ingestion failed.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration. Carries every violation found, not just
// the first one.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg), violations_{msg} {}

  explicit ConfigError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid configuration:";
    for (const auto& msg : v) {
      out += "\n  - " + msg;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

}  // namespace unideal
