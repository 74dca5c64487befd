#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace srender {

enum class Errc {
  InvalidImage,
  CoincidentLandmarks,
  OutOfBounds,
  BadConfig,
  OddDimensions,
  UnknownOperator,
  WrongDomainTag,
  BadShape,
  ShapeMismatch,
  NegativeWeight,
  PsiNotFrozen,
  DegenerateDataset,
  EpochOutOfRange,
  NonFiniteLoss,
  ChecksumMismatch,
  FingerprintMismatch,
  PatchTooLarge,
  DimensionMismatch,
  EmptySet,
  TooFewIdentities,
  UnknownProbeId,
  ParseError,
  UnknownKey,
  UnknownCommand,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library. The code names the contract that was
/// violated so callers (and tests) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace srender
