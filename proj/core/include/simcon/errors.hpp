#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace simcon {

// Base class for all library errors. Carries a stable machine-readable code
// so the CLI can map failures onto exit statuses.
class Error : public std::runtime_error {
 public:
  enum class Code {
    kZeroRow,
    kDimMismatch,
    kShapeMismatch,
    kEmptyInput,
    kNonFinite,
    kNonFiniteEvaluation,
    kEmptyPositiveSet,
    kInvalidSpec,
    kConfigError,
    kNonFiniteLoss,
    kUsage,
    kIo,
  };

  Error(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

class ZeroRowError : public Error {
 public:
  explicit ZeroRowError(std::size_t row)
      : Error(Code::kZeroRow, "row " + std::to_string(row) + " has L2 norm <= 1e-12"),
        row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class DimMismatchError : public Error {
 public:
  explicit DimMismatchError(const std::string& what) : Error(Code::kDimMismatch, what) {}
};

class ShapeMismatchError : public Error {
 public:
  explicit ShapeMismatchError(const std::string& what) : Error(Code::kShapeMismatch, what) {}
};

class EmptyInputError : public Error {
 public:
  explicit EmptyInputError(const std::string& what) : Error(Code::kEmptyInput, what) {}
};

class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& what) : Error(Code::kNonFinite, what) {}
};

class NonFiniteEvaluationError : public Error {
 public:
  explicit NonFiniteEvaluationError(const std::string& what)
      : Error(Code::kNonFiniteEvaluation, what) {}
};

class EmptyPositiveSetError : public Error {
 public:
  explicit EmptyPositiveSetError(std::size_t anchor)
      : Error(Code::kEmptyPositiveSet,
              "positive set for anchor " + std::to_string(anchor) + " is empty"),
        anchor_(anchor) {}
  std::size_t anchor() const { return anchor_; }

 private:
  std::size_t anchor_;
};

class InvalidSpecError : public Error {
 public:
  explicit InvalidSpecError(const std::string& what) : Error(Code::kInvalidSpec, what) {}
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(Code::kConfigError, "config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(std::size_t step, const std::string& what)
      : Error(Code::kNonFiniteLoss, "non-finite loss at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(Code::kUsage, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Code::kIo, what) {}
};

}  // namespace simcon
