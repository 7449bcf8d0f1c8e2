#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trapcert {

enum class ErrorKind {
    NonConfining,
    MalformedSpec,
    NoConvergence,
    EigensolverFailure,
    CorridorViolation,
    CurvatureUnavailable,
    GridTooCoarse,
    ZeroField,
    TooLarge,
    OutOfValidity,
    BadDensity,
    ThresholdSensitive,
};

std::string_view to_string(ErrorKind kind);

// Every recoverable failure in the library is reported through this type so
// callers can dispatch on kind() and still print what().
class TrapError : public std::runtime_error {
public:
    TrapError(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace trapcert
