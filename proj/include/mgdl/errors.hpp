#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mgdl {

/// Base class for every error raised by the library. `kind()` is a stable,
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error("usage", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

/// Raised when optimization produces a non-finite loss or gradient.
/// grade is 0 for the single-grade baseline, -1 when unknown.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int grade, std::int64_t step)
      : Error("training", what + " (grade " + std::to_string(grade) +
                              ", step " + std::to_string(step) + ")"),
        grade_(grade),
        step_(step) {}
  int grade() const noexcept { return grade_; }
  std::int64_t step() const noexcept { return step_; }

 private:
  int grade_;
  std::int64_t step_;
};

}  // namespace mgdl
