#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tabkit {

// Base class for everything thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- configuration ---

class FileNotFound : public Error {
 public:
  explicit FileNotFound(const std::string& path)
      : Error("file not found: " + path) {}
};

class MalformedYaml : public Error {
 public:
  MalformedYaml(int line, const std::string& message)
      : Error("malformed YAML at line " + std::to_string(line) + ": " + message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class UnknownTopLevelKey : public Error {
 public:
  explicit UnknownTopLevelKey(const std::string& key)
      : Error("unknown top-level config key: " + key), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class DisjointnessViolation : public Error {
 public:
  explicit DisjointnessViolation(const std::string& column)
      : Error("column listed in more than one role: " + column), column_(column) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

class InvalidValue : public Error {
 public:
  InvalidValue(const std::string& field, const std::string& reason)
      : Error("invalid value for " + field + ": " + reason), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class IncompatibleLossTask : public Error {
 public:
  IncompatibleLossTask(const std::string& loss, const std::string& task)
      : Error("loss " + loss + " is incompatible with task " + task) {}
};

class UnknownModelType : public Error {
 public:
  explicit UnknownModelType(const std::string& name)
      : Error("unknown model type: " + name) {}
};

// --- data ---

class RaggedRow : public Error {
 public:
  explicit RaggedRow(std::size_t line)
      : Error("CSV row at line " + std::to_string(line) +
              " has a different field count than the header"),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyFile : public Error {
 public:
  explicit EmptyFile(const std::string& path) : Error("empty CSV file: " + path) {}
};

class TooFewRows : public Error {
 public:
  explicit TooFewRows(std::size_t rows)
      : Error("need at least 2 rows to split, got " + std::to_string(rows)) {}
};

class MissingColumn : public Error {
 public:
  explicit MissingColumn(const std::string& name)
      : Error("column not present in frame: " + name), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class NullTarget : public Error {
 public:
  explicit NullTarget(std::size_t row)
      : Error("null target value at row " + std::to_string(row)) {}
};

class NonNumericContinuous : public Error {
 public:
  explicit NonNumericContinuous(const std::string& column)
      : Error("continuous column is not numeric: " + column) {}
};

class NotFitted : public Error {
 public:
  NotFitted() : Error("pipeline/model has not been fitted") {}
  explicit NotFitted(const std::string& what) : Error(what) {}
};

// --- autodiff ---

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& what) : Error("shape mismatch: " + what) {}
};

class IndexOutOfRange : public Error {
 public:
  IndexOutOfRange(std::size_t position, std::size_t index, std::size_t bound)
      : Error("index " + std::to_string(index) + " at position " +
              std::to_string(position) + " exceeds bound " + std::to_string(bound)) {}
};

class DegenerateBatch : public Error {
 public:
  explicit DegenerateBatch(std::size_t rows)
      : Error("batch norm in training mode needs >= 2 rows, got " +
              std::to_string(rows)) {}
};

class BisectionNonConvergence : public Error {
 public:
  BisectionNonConvergence() : Error("entmax bisection did not converge") {}
};

class NonScalarLoss : public Error {
 public:
  NonScalarLoss() : Error("backward requires a scalar loss tensor") {}
};

// --- trainer ---

class GradMissing : public Error {
 public:
  explicit GradMissing(const std::string& param)
      : Error("gradient missing for parameter: " + param) {}
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(std::size_t batch_index)
      : Error("non-finite loss at batch " + std::to_string(batch_index)),
        batch_index_(batch_index) {}
  std::size_t batch_index() const { return batch_index_; }

 private:
  std::size_t batch_index_;
};

// --- tracking / api ---

class IoError : public Error {
 public:
  explicit IoError(const std::string& path) : Error("I/O error: " + path) {}
};

class NoCheckpoint : public Error {
 public:
  explicit NoCheckpoint(const std::string& path)
      : Error("no checkpoint found at: " + path) {}
};

class BadCheckpoint : public Error {
 public:
  explicit BadCheckpoint(const std::string& reason)
      : Error("bad checkpoint: " + reason) {}
};

class VersionMismatch : public Error {
 public:
  explicit VersionMismatch(int found)
      : Error("unsupported checkpoint format_version " + std::to_string(found)) {}
};

class AlreadyFitted : public Error {
 public:
  AlreadyFitted() : Error("fit may only be called once per TabularModel") {}
};

class MetricTaskMismatch : public Error {
 public:
  MetricTaskMismatch(const std::string& metric, const std::string& task)
      : Error("metric " + metric + " is not defined for task " + task) {}
};

class DimensionNotDivisible : public Error {
 public:
  DimensionNotDivisible(std::size_t dim, std::size_t heads)
      : Error("embed_dim " + std::to_string(dim) +
              " is not divisible by num_heads " + std::to_string(heads)) {}
};

}  // namespace tabkit
