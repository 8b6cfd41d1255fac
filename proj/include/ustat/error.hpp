#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ustat {

enum class ErrorKind {
  InvalidMeasure,
  NotProbability,
  TooLarge,
  BadAxis,
  BadLevel,
  BadSpec,
  NotNonnegative,
  HigherLevelsPresent,
  NotADecomposition,
  BadThreshold,
  NotCanonical,
  Undefined,
  BadCheck,
  BadInstance,
  BadConfig,
  NonFinite,
  Parse,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so that
/// callers (tests, the experiment runner) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& what);

}  // namespace ustat
