#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace implreg {

enum class ErrorKind {
  input,
  parse,
  io,
  spectral_floor,
  pole,
  out_of_range,
  infeasible_path,
  numerical,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::parse: return "parse";
    case ErrorKind::io: return "io";
    case ErrorKind::spectral_floor: return "spectral_floor";
    case ErrorKind::pole: return "pole";
    case ErrorKind::out_of_range: return "out_of_range";
    case ErrorKind::infeasible_path: return "infeasible_path";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

/// Base of every error thrown by the library. Input-class errors (bad
/// arguments, malformed files) are distinguished from numerical failures so
/// that front ends can map them to different exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  bool is_input_error() const noexcept {
    return kind_ == ErrorKind::input || kind_ == ErrorKind::parse ||
           kind_ == ErrorKind::io;
  }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

/// Malformed file content. `position` is a byte offset for binary input and a
/// 1-based line number for text input.
class ParseError : public Error {
 public:
  enum class Unit { byte_offset, line };

  ParseError(const std::string& what, std::size_t position, Unit unit)
      : Error(ErrorKind::parse, what), position_(position), unit_(unit) {}

  std::size_t position() const noexcept { return position_; }
  Unit unit() const noexcept { return unit_; }

 private:
  std::size_t position_;
  Unit unit_;
};

/// Ridge level at or below the negative of the smallest positive Gram
/// eigenvalue; the resolvent is unbounded there.
class SpectralFloorError : public Error {
 public:
  SpectralFloorError(double lambda, double lambda_min_positive)
      : Error(ErrorKind::spectral_floor,
              "regularization below spectral floor: lambda=" +
                  std::to_string(lambda) + " but lambda_min^+=" +
                  std::to_string(lambda_min_positive)),
        lambda_(lambda),
        floor_(lambda_min_positive) {}

  double lambda() const noexcept { return lambda_; }
  double lambda_min_positive() const noexcept { return floor_; }

 private:
  double lambda_;
  double floor_;
};

class PoleError : public Error {
 public:
  PoleError(const std::string& what, double at)
      : Error(ErrorKind::pole, what), at_(at) {}
  double at() const noexcept { return at_; }

 private:
  double at_;
};

/// Argument outside the open interval (lo, hi) on which an operation is
/// defined.
class RangeError : public Error {
 public:
  RangeError(const std::string& what, double value, double lo, double hi)
      : Error(ErrorKind::out_of_range,
              what + ": value " + std::to_string(value) + " outside (" +
                  std::to_string(lo) + ", " + std::to_string(hi) + ")"),
        value_(value),
        lo_(lo),
        hi_(hi) {}

  double value() const noexcept { return value_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  double value_;
  double lo_;
  double hi_;
};

class InfeasiblePathError : public Error {
 public:
  explicit InfeasiblePathError(const std::string& what)
      : Error(ErrorKind::infeasible_path, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

}  // namespace implreg
