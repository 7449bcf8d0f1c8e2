#include "trapcert/errors.hpp"

namespace trapcert {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NonConfining: return "NonConfining";
        case ErrorKind::MalformedSpec: return "MalformedSpec";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::EigensolverFailure: return "EigensolverFailure";
        case ErrorKind::CorridorViolation: return "CorridorViolation";
        case ErrorKind::CurvatureUnavailable: return "CurvatureUnavailable";
        case ErrorKind::GridTooCoarse: return "GridTooCoarse";
        case ErrorKind::ZeroField: return "ZeroField";
        case ErrorKind::TooLarge: return "TooLarge";
        case ErrorKind::OutOfValidity: return "OutOfValidity";
        case ErrorKind::BadDensity: return "BadDensity";
        case ErrorKind::ThresholdSensitive: return "ThresholdSensitive";
    }
    return "Unknown";
}

TrapError::TrapError(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace trapcert
