#include "otrom/error.hpp"

namespace otrom {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::AllZeroField: return "AllZeroField";
        case ErrorCode::NegativeField: return "NegativeField";
        case ErrorCode::IndexOutOfGrid: return "IndexOutOfGrid";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NotConverged: return "NotConverged";
        case ErrorCode::NumericalOverflow: return "NumericalOverflow";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::InvalidAlpha: return "InvalidAlpha";
        case ErrorCode::IntervalOutOfRange: return "IntervalOutOfRange";
        case ErrorCode::EmptyMatrix: return "EmptyMatrix";
        case ErrorCode::ZeroNorm: return "ZeroNorm";
        case ErrorCode::DegenerateData: return "DegenerateData";
        case ErrorCode::CholeskyFailure: return "CholeskyFailure";
        case ErrorCode::TooFewSnapshots: return "TooFewSnapshots";
        case ErrorCode::InvalidCounts: return "InvalidCounts";
        case ErrorCode::TimeOutOfDomain: return "TimeOutOfDomain";
        case ErrorCode::EmptyDictionary: return "EmptyDictionary";
        case ErrorCode::NoCorrector: return "NoCorrector";
        case ErrorCode::ZeroReferenceNorm: return "ZeroReferenceNorm";
        case ErrorCode::CflViolation: return "CflViolation";
        case ErrorCode::UnsupportedSpec: return "UnsupportedSpec";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::TruncatedFile: return "TruncatedFile";
        case ErrorCode::Io: return "Io";
        case ErrorCode::ConfigInvalid: return "ConfigInvalid";
        case ErrorCode::MissingArtifact: return "MissingArtifact";
    }
    return "Unknown";
}

}  // namespace otrom
