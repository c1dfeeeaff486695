#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace survim {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input, bad configuration, or an unidentifiable target. CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed on otherwise valid input. CLI exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DataValidationError : public ValidationError {
 public:
  DataValidationError(std::size_t row, const std::string& what)
      : ValidationError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class DegenerateDataError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigurationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ContractError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// The landmark/restriction time cannot be supported by the observed data.
class IdentificationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnsupportedSetError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class FitError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public FitError {
 public:
  ConvergenceError(const std::string& what, double last_gradient_norm)
      : FitError(what + " (last gradient sup-norm " + std::to_string(last_gradient_norm) + ")"),
        gradient_norm_(last_gradient_norm) {}
  double gradient_norm() const noexcept { return gradient_norm_; }

 private:
  double gradient_norm_;
};

class SeparationError : public FitError {
 public:
  using FitError::FitError;
};

class HazardDerivationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateMeasureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class FoldDegeneracyError : public NumericalError {
 public:
  FoldDegeneracyError(int fold, const std::string& what)
      : NumericalError("fold " + std::to_string(fold) + ": " + what), fold_(fold) {}
  int fold() const noexcept { return fold_; }

 private:
  int fold_;
};

class InversionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StudyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace survim
