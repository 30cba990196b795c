#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hdk {

// Every failure raised by the library carries one of these codes. The CLI maps
// codes to exit statuses, so keep input/schema errors grouped in is_input_error.
enum class Errc {
  // core types
  UnknownToken,
  MalformedPair,
  EmptyList,
  MalformedList,
  EmptySequence,
  // labeler
  InsufficientCoverage,
  NonMonotoneTime,
  TooFewPoints,
  InvalidConfig,
  SpeedMutated,
  WrongArity,
  IllegalLabel,
  ScoreOutOfRange,
  // reward
  EmptyFrequencyTable,
  NegativeCount,
  WeightLookupOutOfRange,
  // grpo
  SamplerFailure,
  OddGroupSize,
  EmptyGroup,
  QuotaViolation,
  // protocol
  TotalGarbage,
  UnknownTool,
  MissingParam,
  BadEnumValue,
  BadBBox,
  MalformedParams,
  SessionTerminated,
  FrameUnavailable,
  FixtureMissing,
  CropOutOfBounds,
  // metrics
  EmptyDataset,
  MissingModeData,
  // data pipeline
  OracleFailure,
  InsufficientData,
  // io
  SchemaError,
  IoError,
};

constexpr std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::UnknownToken: return "UnknownToken";
    case Errc::MalformedPair: return "MalformedPair";
    case Errc::EmptyList: return "EmptyList";
    case Errc::MalformedList: return "MalformedList";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::InsufficientCoverage: return "InsufficientCoverage";
    case Errc::NonMonotoneTime: return "NonMonotoneTime";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::SpeedMutated: return "SpeedMutated";
    case Errc::WrongArity: return "WrongArity";
    case Errc::IllegalLabel: return "IllegalLabel";
    case Errc::ScoreOutOfRange: return "ScoreOutOfRange";
    case Errc::EmptyFrequencyTable: return "EmptyFrequencyTable";
    case Errc::NegativeCount: return "NegativeCount";
    case Errc::WeightLookupOutOfRange: return "WeightLookupOutOfRange";
    case Errc::SamplerFailure: return "SamplerFailure";
    case Errc::OddGroupSize: return "OddGroupSize";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::QuotaViolation: return "QuotaViolation";
    case Errc::TotalGarbage: return "TotalGarbage";
    case Errc::UnknownTool: return "UnknownTool";
    case Errc::MissingParam: return "MissingParam";
    case Errc::BadEnumValue: return "BadEnumValue";
    case Errc::BadBBox: return "BadBBox";
    case Errc::MalformedParams: return "MalformedParams";
    case Errc::SessionTerminated: return "SessionTerminated";
    case Errc::FrameUnavailable: return "FrameUnavailable";
    case Errc::FixtureMissing: return "FixtureMissing";
    case Errc::CropOutOfBounds: return "CropOutOfBounds";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::MissingModeData: return "MissingModeData";
    case Errc::OracleFailure: return "OracleFailure";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::SchemaError: return "SchemaError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

// Errors caused by the caller's data (as opposed to internal/runtime failures).
constexpr bool is_input_error(Errc code) noexcept {
  switch (code) {
    case Errc::SamplerFailure:
    case Errc::OracleFailure:
    case Errc::IoError:
    case Errc::SessionTerminated:
      return false;
    default:
      return true;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace hdk
