#pragma once

#include "termharness/reward.hpp"
#include "termharness/subagent.hpp"
#include "termharness/task.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace termharness {

// Main agent tool surface. The three supported configurations mirror the
// tool ablations: Terminal only, subagent plus Terminal, subagent only.
struct MainAgentConfig {
    bool enable_subagent = true;
    bool enable_terminal = true;
};

struct ToolRegistration {
    std::vector<ToolSchema> tools;
    std::string system_prompt;
};

ToolSchema execution_subagent_schema();
ToolSchema terminal_tool_schema();

// ConfigConflict when both tools are disabled. The subagent section is added
// to the main system prompt only when the subagent is registered.
ToolRegistration register_subagent_tool(const MainAgentConfig& config);

enum class PassthroughMode { deterministic, llm };

struct RolloutOptions {
    PassthroughMode mode = PassthroughMode::deterministic;
    SubagentConfig subagent;
    SandboxSettings sandbox;
    std::string main_model = "main-model";
    // Fresh gateway per rollout keeps scripted cursors independent.
    GatewayFactory subagent_gateway;
    GatewayFactory main_gateway; // only used in llm mode
};

struct RolloutRecord {
    std::string instance_id;
    int group_index = 0;
    Trajectory main_trajectory;
    SubagentOutcome outcome;
    std::optional<Reward> reward; // filled by the grading stage
    int64_t wall_clock_ms = 0;
    std::string workspace_hash; // tree hash before the subagent's first command
    bool protocol_violation = false;
    std::string error; // empty on success
};

// One pass-through rollout in an already prepared workspace: the main agent
// issues exactly one ExecutionSubagent call carrying the instance query,
// then stops after the subagent response.
RolloutRecord passthrough_main_agent(const TaskInstance& instance, const RolloutOptions& options,
                                     const std::filesystem::path& workspace);

// G rollouts per instance, each in a fresh isolated workspace, at most
// `parallelism` in flight. Per-rollout failures are captured in the records
// and never abort the batch. Records come back ordered by (instance, group).
std::vector<RolloutRecord> run_rollout_batch(const std::vector<TaskInstance>& instances, int group_size,
                                             int parallelism, const RolloutOptions& options);

// Rollout persistence under <dir>/<instance_id>/g<k>/ : main.jsonl,
// subagent.jsonl and record.json.
void save_rollout_record(const RolloutRecord& record, const std::filesystem::path& dir);
RolloutRecord load_rollout_record(const std::filesystem::path& rollout_dir);
std::vector<RolloutRecord> load_rollout_records(const std::filesystem::path& dir);

} // namespace termharness
