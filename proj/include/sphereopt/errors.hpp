#pragma once

#include <stdexcept>
#include <string>

namespace sphereopt {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ZeroVector : Error {
  explicit ZeroVector(const std::string& msg = "vector has zero norm") : Error(msg) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg = "dimension mismatch") : Error(msg) {}
};

struct NotUnit : Error {
  explicit NotUnit(const std::string& msg = "vector is not unit norm") : Error(msg) {}
};

struct NotTangent : Error {
  explicit NotTangent(const std::string& msg = "vector is not tangent") : Error(msg) {}
};

struct StepTooLarge : Error {
  explicit StepTooLarge(const std::string& msg = "geodesic step length must be < pi") : Error(msg) {}
};

struct DegenerateBatch : Error {
  explicit DegenerateBatch(const std::string& msg = "batch column has zero variance") : Error(msg) {}
};

struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& msg = "shape mismatch") : Error(msg) {}
};

struct NonPositiveDenominator : Error {
  explicit NonPositiveDenominator(const std::string& msg = "divisor must be elementwise positive")
      : Error(msg) {}
};

struct AssumptionViolated : Error {
  explicit AssumptionViolated(const std::string& msg = "1 - A<c,u> must stay positive")
      : Error(msg) {}
};

struct UnknownVariant : Error {
  explicit UnknownVariant(const std::string& msg = "unknown scheme variant") : Error(msg) {}
};

struct EmptyHistory : Error {
  explicit EmptyHistory(const std::string& msg = "history must be nonempty") : Error(msg) {}
};

struct InvalidHyperparameters : Error {
  explicit InvalidHyperparameters(const std::string& msg = "invalid hyperparameters") : Error(msg) {}
};

struct DegenerateDeviation : Error {
  explicit DegenerateDeviation(const std::string& msg =
                                   "deviations below floating-point floor; cannot fit an exponent")
      : Error(msg) {}
};

// Config-layer errors carry the offending line number (0 when not line-bound).
struct ConfigError : Error {
  int line;
  ConfigError(const std::string& msg, int line_no) : Error(msg), line(line_no) {}
};

struct ParseError : ConfigError {
  ParseError(const std::string& msg, int line_no) : ConfigError(msg, line_no) {}
};

struct ValidationError : ConfigError {
  ValidationError(const std::string& msg, int line_no) : ConfigError(msg, line_no) {}
};

struct UnknownKey : ConfigError {
  UnknownKey(const std::string& msg, int line_no) : ConfigError(msg, line_no) {}
};

}  // namespace sphereopt
