#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace riskmp {

enum class Errc {
  NonPositiveHorizon,
  ZeroSteps,
  InvalidArgument,
  NumericalBlowup,
  AlphaOutOfRange,
  IncompatiblePolicies,
  DegenerateSample,
  RankDeficient,
  InvalidBounds,
  NonPositiveAdjustment,
  ConfigInvalid,
  HashMismatch,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::NonPositiveHorizon: return "NonPositiveHorizon";
    case Errc::ZeroSteps: return "ZeroSteps";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NumericalBlowup: return "NumericalBlowup";
    case Errc::AlphaOutOfRange: return "AlphaOutOfRange";
    case Errc::IncompatiblePolicies: return "IncompatiblePolicies";
    case Errc::DegenerateSample: return "DegenerateSample";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::InvalidBounds: return "InvalidBounds";
    case Errc::NonPositiveAdjustment: return "NonPositiveAdjustment";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::HashMismatch: return "HashMismatch";
  }
  return "Unknown";
}

/// Library error. `step()` is set for errors raised at a specific grid step
/// (NumericalBlowup).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::optional<std::size_t> step = std::nullopt)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), step_(step) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> step() const noexcept { return step_; }

 private:
  Errc code_;
  std::optional<std::size_t> step_;
};

}  // namespace riskmp
