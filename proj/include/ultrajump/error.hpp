#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ultrajump {

enum class ErrorKind {
  NonPositiveMass,
  InconsistentWeights,
  EmptyWindow,
  MixedSpaces,
  LevelOutOfWindow,
  DiagonalQuery,
  NonMonotoneLambda,
  AsymmetricKernel,
  ComponentCountMismatch,
  InconsistentGamma,
  LevelOrderViolation,
  LevelMismatch,
  NegativeRate,
  NegativeTime,
  NonPositiveLambda,
  SingularSystem,
  K0BelowM,
  NonPositiveHorizon,
  ZeroDensity,
  InsufficientSamples,
  ConfigParseError,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries one of the kinds above so that
// callers (tests, the CLI) can dispatch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ultrajump
