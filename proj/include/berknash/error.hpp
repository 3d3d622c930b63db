#pragma once

#include <stdexcept>
#include <string>

namespace berknash {

// Broad failure categories; the CLI maps each to a distinct exit code.
enum class ErrorCategory {
  kValidation,
  kReducibleChain,
  kAbsoluteContinuity,
  kConvergence,
  kLpInfeasible,
  kLpUnbounded,
  kConfig,
  kIo,
};

const char* category_name(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorCategory::kValidation, what) {}
};

class ReducibleChainError : public Error {
 public:
  // `from` cannot reach `to` on the support graph.
  ReducibleChainError(int from, int to);

  int from() const { return from_; }
  int to() const { return to_; }

 private:
  int from_;
  int to_;
};

class AbsoluteContinuityError : public Error {
 public:
  explicit AbsoluteContinuityError(const std::string& what)
      : Error(ErrorCategory::kAbsoluteContinuity, what) {}
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what)
      : Error(ErrorCategory::kConvergence, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIo, what) {}
};

}  // namespace berknash
