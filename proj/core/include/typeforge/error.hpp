// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace typeforge {

enum class ErrorCode {
    RootNotFound,
    PermissionDenied,
    AmbiguousModule,
    UnknownUnit,
    UnknownParameter,
    EmptyText,
    MissingSummary,
    DuplicateDocId,
    PreconditionFailed,
    NoCandidates,
    LlmFailure,
    RateLimited,
    Timeout,
    CassetteMiss,
    MalformedResponse,
    BudgetTooSmall,
    NoCodeInResponse,
    SandboxUnavailable,
    MalformedRunnerOutput,
    SnapshotMismatch,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    /// what() without the leading "<Code>: ".
    std::string_view message() const noexcept
    {
        return std::string_view(what()).substr(to_string(code_).size() + 2);
    }

private:
    ErrorCode code_;
};

} // namespace typeforge
