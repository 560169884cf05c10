#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mwpipe {

enum class ErrorCode {
    InvalidArgument,
    // bus
    DuplicateTopic,
    InvalidName,
    UnknownTopic,
    TimestampRegression,
    SchemaMismatch,
    QueueOverflow,
    BusClosed,
    // synthesis
    InvalidProfile,
    EmptySeries,
    InvalidRate,
    OverlapTooDense,
    InvalidBase,
    OverlappingEvents,
    // features
    WindowTooShort,
    TooManyInvalidSamples,
    // task simulation / session
    IncompleteTrace,
    PlanInvalid,
    ScaleOutOfRange,
    // persistence
    IoError,
    CorruptBag,
    UnknownMagic,
    ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DuplicateTopic: return "DuplicateTopic";
    case ErrorCode::InvalidName: return "InvalidName";
    case ErrorCode::UnknownTopic: return "UnknownTopic";
    case ErrorCode::TimestampRegression: return "TimestampRegression";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::QueueOverflow: return "QueueOverflow";
    case ErrorCode::BusClosed: return "BusClosed";
    case ErrorCode::InvalidProfile: return "InvalidProfile";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::InvalidRate: return "InvalidRate";
    case ErrorCode::OverlapTooDense: return "OverlapTooDense";
    case ErrorCode::InvalidBase: return "InvalidBase";
    case ErrorCode::OverlappingEvents: return "OverlappingEvents";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::TooManyInvalidSamples: return "TooManyInvalidSamples";
    case ErrorCode::IncompleteTrace: return "IncompleteTrace";
    case ErrorCode::PlanInvalid: return "PlanInvalid";
    case ErrorCode::ScaleOutOfRange: return "ScaleOutOfRange";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::CorruptBag: return "CorruptBag";
    case ErrorCode::UnknownMagic: return "UnknownMagic";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure class.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace mwpipe
