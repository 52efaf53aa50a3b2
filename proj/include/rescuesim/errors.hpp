#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rescuesim {

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A query or a robot footprint fell outside the terrain grid.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters, configuration or scenario content.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Fewer than three non-collinear contact points.
class SingularSupportError : public Error {
 public:
  using Error::Error;
};

/// A joint angle outside its configured limits.
class LimitError : public Error {
 public:
  using Error::Error;
};

/// Inverse kinematics did not converge. Carries the best residual reached.
class UnreachableTargetError : public Error {
 public:
  UnreachableTargetError(const std::string& what, double position_residual,
                         double orientation_residual)
      : Error(what),
        position_residual_(position_residual),
        orientation_residual_(orientation_residual) {}

  double position_residual() const noexcept { return position_residual_; }
  double orientation_residual() const noexcept { return orientation_residual_; }

 private:
  double position_residual_;
  double orientation_residual_;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// A metric whose denominator is zero.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// A malformed wire frame or file line. `line()` is the offending text.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string line)
      : Error(what + ": '" + line + "'"), line_(std::move(line)) {}

  const std::string& line() const noexcept { return line_; }

 private:
  std::string line_;
};

class UnknownTypeError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Replay diverged from the recorded log at `tick()`.
class ReplayMismatchError : public Error {
 public:
  ReplayMismatchError(const std::string& what, std::int64_t tick)
      : Error(what), tick_(tick) {}

  std::int64_t tick() const noexcept { return tick_; }

 private:
  std::int64_t tick_;
};

}  // namespace rescuesim
