#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace otrom {

// Failure categories surfaced by every module. The CLI maps them to exit codes.
enum class ErrorCode {
    InvalidArgument,
    AllZeroField,
    NegativeField,
    IndexOutOfGrid,
    ShapeMismatch,
    NotConverged,
    NumericalOverflow,
    TooLarge,
    InvalidAlpha,
    IntervalOutOfRange,
    EmptyMatrix,
    ZeroNorm,
    DegenerateData,
    CholeskyFailure,
    TooFewSnapshots,
    InvalidCounts,
    TimeOutOfDomain,
    EmptyDictionary,
    NoCorrector,
    ZeroReferenceNorm,
    CflViolation,
    UnsupportedSpec,
    BadMagic,
    VersionMismatch,
    TruncatedFile,
    Io,
    ConfigInvalid,
    MissingArtifact,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace otrom
