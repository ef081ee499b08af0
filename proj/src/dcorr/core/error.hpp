#pragma once

#include <stdexcept>
#include <string>

namespace dcorr {

// Error categories surface unchanged through the C API as status codes.
enum class ErrorKind {
  Argument,
  Data,
  Format,
  Configuration,
  Computation,
  Invariant,
  Training,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& m) : Error(ErrorKind::Argument, m) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& m) : Error(ErrorKind::Data, m) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& m) : Error(ErrorKind::Format, m) {}
};

class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& m)
      : Error(ErrorKind::Configuration, m) {}
};

class ComputationError : public Error {
 public:
  explicit ComputationError(const std::string& m)
      : Error(ErrorKind::Computation, m) {}
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& m) : Error(ErrorKind::Invariant, m) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& m) : Error(ErrorKind::Training, m) {}
};

// Raised by the revolute fit when the rotation is too small to observe an axis.
class DegenerateMotionError : public DataError {
 public:
  explicit DegenerateMotionError(const std::string& m) : DataError(m) {}
};

// Raised by the revolute fit when the source points do not span a plane.
class RankError : public DataError {
 public:
  explicit RankError(const std::string& m) : DataError(m) {}
};

}  // namespace dcorr
