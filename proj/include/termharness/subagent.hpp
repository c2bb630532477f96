#pragma once

#include "termharness/gateway.hpp"
#include "termharness/message.hpp"
#include "termharness/prompts.hpp"
#include "termharness/terminal.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace termharness {

struct SubagentConfig {
    int turn_limit = 10;
    std::string model = "subagent-model";
    std::string system_prompt;             // empty -> checked-in default
    int64_t max_trajectory_tokens = 30000; // consumed by reward penalties
    double temperature = 0.0;
    int64_t max_output_tokens = 4096;
    int64_t default_timeout_ms = 30000;    // when the model omits a timeout
    int64_t timeout_ceiling_ms = 300000;   // hard cap on model-chosen timeouts
    std::filesystem::path workdir;         // where commands run; empty = inherited cwd
};

struct SubagentOutcome {
    Trajectory trajectory;
    FinalAnswer final_answer;
    std::vector<CommandRun> commands;
    bool coaxed = false;
    int turns_used = 0;
    // Turns where the model emitted more than one tool call (only the first
    // was executed) or tool-called on the coax turn.
    int tool_protocol_violations = 0;
};

// The single tool exposed to the subagent.
ToolSchema run_in_terminal_schema();

std::string render_subagent_system_prompt(const SubagentConfig& config);

// Runs one subagent session to completion: at most config.turn_limit
// assistant turns, plus one coaxed final turn (without tools) if no
// well-formed final answer appeared. Always returns an outcome; only
// gateway failures propagate.
SubagentOutcome run_subagent(const SubagentQuery& query, const SubagentConfig& config,
                             ChatGateway& llm, TerminalExecutor& term,
                             const TokenCounter& counter = default_token_counter());

} // namespace termharness
