#pragma once

#include <stdexcept>
#include <string>

namespace termharness {

enum class ErrorKind {
    WorkdirMissing,
    SpawnFailure,
    GatewayFailure,
    ScriptExhausted,
    FixtureAssertion,
    PlanParseFailure,
    GradeParseFailure,
    JudgeParseFailure,
    PatchApplyFailure,
    WorkspaceSetupFailure,
    ConfigConflict,
    ConfigInvalid,
    ManifestInvalid,
    NonFiniteInput,
    IoFailure,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::WorkdirMissing: return "WorkdirMissing";
        case ErrorKind::SpawnFailure: return "SpawnFailure";
        case ErrorKind::GatewayFailure: return "GatewayFailure";
        case ErrorKind::ScriptExhausted: return "ScriptExhausted";
        case ErrorKind::FixtureAssertion: return "FixtureAssertion";
        case ErrorKind::PlanParseFailure: return "PlanParseFailure";
        case ErrorKind::GradeParseFailure: return "GradeParseFailure";
        case ErrorKind::JudgeParseFailure: return "JudgeParseFailure";
        case ErrorKind::PatchApplyFailure: return "PatchApplyFailure";
        case ErrorKind::WorkspaceSetupFailure: return "WorkspaceSetupFailure";
        case ErrorKind::ConfigConflict: return "ConfigConflict";
        case ErrorKind::ConfigInvalid: return "ConfigInvalid";
        case ErrorKind::ManifestInvalid: return "ManifestInvalid";
        case ErrorKind::NonFiniteInput: return "NonFiniteInput";
        case ErrorKind::IoFailure: return "IoFailure";
    }
    return "Unknown";
}

// Single exception type used across the library. `kind` is the stable,
// machine-readable discriminator that also ends up in CLI error JSON.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace termharness
