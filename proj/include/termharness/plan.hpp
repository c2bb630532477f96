#pragma once

#include "termharness/gateway.hpp"
#include "termharness/prompts.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace termharness {

enum class TaskOutcome { success, failure, partial };

const char* to_string(TaskOutcome outcome);
std::optional<TaskOutcome> task_outcome_from_string(std::string_view text);

struct PlanCommand {
    std::string command;
    std::string rationale;
    std::string result;
    std::optional<int> exit_code;

    bool operator==(const PlanCommand&) const = default;
};

// Five-section structured summary of a trajectory, the unit of reward
// comparison. error_recovery may be empty when nothing failed.
struct ExecutionPlan {
    TaskOutcome outcome = TaskOutcome::partial;
    std::string outcome_text; // one sentence after the outcome label
    std::vector<PlanCommand> commands_executed;
    std::string key_findings;
    std::string error_recovery;
    std::string final_state;

    bool operator==(const ExecutionPlan&) const = default;
};

// Canonical rendering with the five headings; plan_from_text(plan_to_text(p))
// round-trips.
std::string plan_to_text(const ExecutionPlan& plan);

// Tolerant of section reordering, markdown bullets and bold headings, but all
// five headings must be present. Throws PlanParseFailure otherwise.
ExecutionPlan plan_from_text(std::string_view text);

std::string plan_to_json_text(const ExecutionPlan& plan);
ExecutionPlan plan_from_json_text(std::string_view text);

// Sends the plan prompt for one trajectory to the plan model and parses the
// reply; one reprompt retry before PlanParseFailure.
ExecutionPlan extract_execution_plan(std::string_view query, const std::vector<CommandRun>& commands,
                                     std::string_view final_answer_text, ChatGateway& llm,
                                     const std::string& model = "plan-model");

} // namespace termharness
