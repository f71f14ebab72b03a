#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prorl {

enum class ErrorKind {
    InvalidToken,
    EmptyBatch,
    ShapeMismatch,
    DegenerateGroup,
    NonFiniteGradient,
    InvalidDifficulty,
    InstanceSpaceExhausted,
    VerifierError,
    InvalidK,
    EmptyMatrix,
    InvalidMoments,
    InvalidConfig,
    CorruptCheckpoint,
    Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; `kind()` identifies the failure.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised while decoding a checkpoint; `field()` names the header field or
/// array that failed to validate.
class CheckpointError : public Error {
public:
    CheckpointError(std::string field, const std::string& what)
        : Error(ErrorKind::CorruptCheckpoint, "field '" + field + "': " + what),
          field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

} // namespace prorl
