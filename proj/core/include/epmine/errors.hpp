#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace epmine {

/// Coarse failure class. The CLI maps each to a distinct exit code.
enum class ErrorKind { Config, Data, Numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

// linalg
class ZeroRow : public NumericError {
 public:
  explicit ZeroRow(std::size_t index)
      : NumericError("row " + std::to_string(index) + " has (near) zero norm"),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class DomainError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ShapeMismatch : public NumericError {
 public:
  using NumericError::NumericError;
};

// data
class GenerationFailure : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& where, const std::string& what)
      : DataError("parse error at " + where + ": " + what) {}
};

class DimensionMismatch : public DataError {
 public:
  using DataError::DataError;
};

class EmptyDataset : public DataError {
 public:
  EmptyDataset() : DataError("dataset is empty") {}
};

class TooFewClasses : public DataError {
 public:
  using DataError::DataError;
};

class NoPositivePair : public DataError {
 public:
  NoPositivePair()
      : DataError("NoPositivePair: batch needs two classes and at least one class with two items") {}
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

// losses
class EmptyNegatives : public NumericError {
 public:
  EmptyNegatives() : NumericError("nca term requires at least one negative") {}
};

class NoValidTriplet : public NumericError {
 public:
  NoValidTriplet() : NumericError("no anchor in the batch produced a loss term") {}
};

// eval
class KTooLarge : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DegenerateCovariance : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace epmine
