#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace grace {

// Coarse error classes; the CLI maps these onto exit codes.
enum class ErrorClass {
  kData,     // malformed input, violated preconditions, I/O
  kBackend,  // prediction backends, credentials, transport
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(what), cls_(cls) {}

  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorClass::kData, what) {}
};

class BackendFailure : public Error {
 public:
  explicit BackendFailure(const std::string& what)
      : Error(ErrorClass::kBackend, what) {}
};

// edit_model
class SpanMismatch : public DataError {
 public:
  using DataError::DataError;
};

// association
class PoolExhausted : public DataError {
 public:
  using DataError::DataError;
};

// prompting
class BudgetImpossible : public DataError {
 public:
  using DataError::DataError;
};

class CounterUnavailable : public DataError {
 public:
  using DataError::DataError;
};

class SentinelCollision : public DataError {
 public:
  using DataError::DataError;
};

// evaluation
class MissingPredictions : public DataError {
 public:
  using DataError::DataError;
};

// dataset_pipeline
class VcsUnavailable : public DataError {
 public:
  using DataError::DataError;
};

class PatchParseError : public DataError {
 public:
  PatchParseError(const std::string& file, std::size_t line, const std::string& msg)
      : DataError(file + ":" + std::to_string(line) + ": " + msg),
        file_(file),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class SchemaError : public DataError {
 public:
  // `line` is 1-based; 0 means "not tied to a line".
  SchemaError(std::size_t line, const std::string& msg)
      : DataError(line ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class BadRatios : public DataError {
 public:
  using DataError::DataError;
};

// backends
class AuthError : public BackendFailure {
 public:
  using BackendFailure::BackendFailure;
};

class TransportError : public BackendFailure {
 public:
  using BackendFailure::BackendFailure;
};

class BackendError : public BackendFailure {
 public:
  using BackendFailure::BackendFailure;
};

}  // namespace grace
