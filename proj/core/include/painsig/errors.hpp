#pragma once

#include <stdexcept>
#include <string>

namespace painsig {

// Every failure raised by this library carries one of these codes so callers
// can branch on the condition without parsing message text.
enum class Errc {
  MissingFile,
  MalformedRow,
  DuplicateSegmentId,
  InconsistentSubject,
  NonPositiveFs,
  InvalidFs,
  InvalidBpm,
  InvalidDuration,
  InvalidNoise,
  AgeOutOfSchemeRange,
  SegmentTooShort,
  SignalTooShort,
  NoQrsFound,
  InsufficientPeaks,
  InsufficientIbis,
  NoComputableWindow,
  DimensionMismatch,
  DegenerateClass,
  SingularCovariance,
  InvalidParameter,
  ShapeMismatch,
  MissingTaskLabels,
  InvalidEpsilon,
  NonFiniteLoss,
  GroupTooSmall,
  EmptyConfusion,
  InvalidConfig,
  IoFailure,
};

inline const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingFile: return "MissingFile";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::DuplicateSegmentId: return "DuplicateSegmentId";
    case Errc::InconsistentSubject: return "InconsistentSubject";
    case Errc::NonPositiveFs: return "NonPositiveFs";
    case Errc::InvalidFs: return "InvalidFs";
    case Errc::InvalidBpm: return "InvalidBpm";
    case Errc::InvalidDuration: return "InvalidDuration";
    case Errc::InvalidNoise: return "InvalidNoise";
    case Errc::AgeOutOfSchemeRange: return "AgeOutOfSchemeRange";
    case Errc::SegmentTooShort: return "SegmentTooShort";
    case Errc::SignalTooShort: return "SignalTooShort";
    case Errc::NoQrsFound: return "NoQrsFound";
    case Errc::InsufficientPeaks: return "InsufficientPeaks";
    case Errc::InsufficientIbis: return "InsufficientIbis";
    case Errc::NoComputableWindow: return "NoComputableWindow";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DegenerateClass: return "DegenerateClass";
    case Errc::SingularCovariance: return "SingularCovariance";
    case Errc::InvalidParameter: return "InvalidParameter";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::MissingTaskLabels: return "MissingTaskLabels";
    case Errc::InvalidEpsilon: return "InvalidEpsilon";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::GroupTooSmall: return "GroupTooSmall";
    case Errc::EmptyConfusion: return "EmptyConfusion";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::IoFailure: return "IoFailure";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace painsig
