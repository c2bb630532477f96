#pragma once

#include "termharness/terminal.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace termharness {

// Embedded prompt asset by file name (e.g. "subagent_system.txt"); the bytes
// match the checked-in assets/prompts files exactly.
std::string_view asset_text(std::string_view name);

// User message injected when the subagent hits its turn limit.
std::string_view coax_message();

// System prompt for the execution subagent (run_in_terminal rules, required
// output format, worked example).
std::string_view subagent_system_prompt();

// Main agent system prompt, optionally augmented with the
// ExecutionSubagent usage section.
std::string main_system_prompt(bool with_subagent_section);
std::string_view main_subagent_section();

// Wraps a pre-generated query in the pass-through forwarding instruction.
std::string wrap_query(std::string_view query);

struct CommandRun {
    TerminalCommand command;
    TerminalResult result;
};

struct PromptPair {
    std::string system;
    std::string user;
};

// Clip used for command output inside the plan prompt: first and last 500
// characters.
inline constexpr size_t kPlanOutputHeadChars = 500;
inline constexpr size_t kPlanOutputTailChars = 500;
inline constexpr std::string_view kPlanOutputMarker = "\n[...truncated...]\n";

PromptPair build_plan_prompt(std::string_view query, const std::vector<CommandRun>& commands,
                             std::string_view final_answer_text);

PromptPair build_grade_prompt(std::string_view query, std::string_view reference_plan,
                              std::string_view candidate_plan);

PromptPair build_judge_prompt(std::string_view system_excerpt, std::string_view problem_statement,
                              std::string_view trajectory_before, std::string_view subagent_query,
                              std::string_view subagent_response, std::string_view trajectory_after,
                              int n_after);

} // namespace termharness
