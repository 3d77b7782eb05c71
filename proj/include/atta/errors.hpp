#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace atta {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Train-mode batch normalization needs at least two rows.
class BatchSizeError : public Error {
 public:
  using Error::Error;
};

/// A row that should be a probability distribution is not one.
class DistributionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data is unusable (too short, empty, missing class...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input with the wrong layout (column count, tensor names).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A class prototype collapsed to (near) zero norm.
class DegeneratePrototypeError : public Error {
 public:
  DegeneratePrototypeError(const std::string& what, int class_id)
      : Error(what), class_id_(class_id) {}
  int class_id() const noexcept { return class_id_; }

 private:
  int class_id_;
};

/// Parameters became non-finite during adaptation.
class StateCorruptionError : public Error {
 public:
  using Error::Error;
};

/// Wraps an error from one pipeline stage with that stage's tag.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace atta
