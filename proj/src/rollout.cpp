#include "termharness/rollout.hpp"

#include "termharness/errors.hpp"
#include "termharness/log.hpp"
#include "termharness/util.hpp"
#include "termharness/workspace.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace termharness {

namespace {
constexpr std::string_view kSubagentToolName = "ExecutionSubagent";
constexpr std::string_view kTerminalToolName = "Terminal";
} // namespace

ToolSchema execution_subagent_schema() {
    return ToolSchema{
        std::string(kSubagentToolName),
        "Delegate a terminal execution task to the Execution Subagent and receive a structured "
        "summary of what happened",
        R"({"type":"object","properties":{"query":{"type":"string","description":"Natural language description of the execution task: what to run and what to report back"},"description":{"type":"string","description":"Short summary shown to the user while the subagent runs"}},"required":["query","description"]})"};
}

ToolSchema terminal_tool_schema() {
    return ToolSchema{
        std::string(kTerminalToolName),
        "Execute a shell command and return its full output (truncated to 60KB)",
        R"({"type":"object","properties":{"command":{"type":"string"},"mode":{"type":"string","enum":["sync","async"]},"timeout":{"type":"integer","description":"Timeout in milliseconds"}},"required":["command","mode","timeout"]})"};
}

ToolRegistration register_subagent_tool(const MainAgentConfig& config) {
    if (!config.enable_subagent && !config.enable_terminal) {
        throw Error(ErrorKind::ConfigConflict, "both ExecutionSubagent and Terminal are disabled");
    }
    ToolRegistration registration;
    if (config.enable_subagent) registration.tools.push_back(execution_subagent_schema());
    if (config.enable_terminal) registration.tools.push_back(terminal_tool_schema());
    registration.system_prompt = main_system_prompt(config.enable_subagent);
    return registration;
}

namespace {

std::string subagent_visible_response(const SubagentOutcome& outcome) {
    // Only the final answer crosses back to the main agent; raw terminal
    // bytes stay inside the subagent trajectory.
    if (outcome.final_answer.well_formed) {
        return std::string(kFinalAnswerOpenTag) + outcome.final_answer.raw_text +
               std::string(kFinalAnswerCloseTag);
    }
    return "[Execution Subagent returned no well-formed final answer]";
}

} // namespace

RolloutRecord passthrough_main_agent(const TaskInstance& instance, const RolloutOptions& options,
                                     const fs::path& workspace) {
    RolloutRecord record;
    record.instance_id = instance.id;

    ToolRegistration registration = register_subagent_tool({true, false});

    Trajectory& main = record.main_trajectory;
    main.meta["role"] = "main";
    main.meta["instance_id"] = instance.id;
    main.meta["model"] =
        options.mode == PassthroughMode::deterministic ? "deterministic" : options.main_model;
    main.meta["token_counter"] = default_token_counter().name();
    main.messages.push_back(make_system_message(registration.system_prompt));
    main.messages.push_back(make_user_message(wrap_query(instance.query)));

    ChatMessage assistant;
    if (options.mode == PassthroughMode::deterministic) {
        // No model call: the forwarding turn is hard-coded.
        ToolCall call;
        call.id = "sub-1";
        call.name = std::string(kSubagentToolName);
        call.arguments["query"] = instance.query;
        call.arguments["description"] = "Delegated execution task";
        assistant = make_assistant_message("", {std::move(call)});
    } else {
        if (!options.main_gateway) {
            throw Error(ErrorKind::GatewayFailure, "llm passthrough mode requires a main gateway");
        }
        auto gateway = options.main_gateway();
        ChatRequest request;
        request.messages = main.messages;
        request.tools = registration.tools;
        request.model = options.main_model;
        ChatResponse response = gateway->complete(request);
        assistant = response.message;
        if (assistant.token_count <= 0) {
            assistant = make_assistant_message(std::move(assistant.content),
                                               std::move(assistant.tool_calls));
        }
    }
    main.messages.push_back(assistant);

    bool exact = assistant.tool_calls.size() == 1 &&
                 assistant.tool_calls[0].name == kSubagentToolName &&
                 assistant.tool_calls[0].arguments.count("query") &&
                 assistant.tool_calls[0].arguments.at("query") == instance.query;
    if (!exact) {
        record.protocol_violation = true;
        record.error = "protocol_violation: main agent deviated from the exact query";
        return record;
    }

    record.workspace_hash = tree_hash(workspace);

    SandboxSettings sandbox = options.sandbox;
    auto executor = make_executor(sandbox);
    if (!options.subagent_gateway) {
        throw Error(ErrorKind::GatewayFailure, "rollout requires a subagent gateway factory");
    }
    auto subagent_gateway = options.subagent_gateway();

    SubagentQuery query{instance.query, assistant.tool_calls[0].arguments.count("description")
                                            ? assistant.tool_calls[0].arguments.at("description")
                                            : "Delegated execution task"};

    // The subagent runs its commands inside the prepared workspace.
    SubagentConfig subagent_config = options.subagent;
    subagent_config.workdir = workspace;

    record.outcome = run_subagent(query, subagent_config, *subagent_gateway, *executor);
    record.outcome.trajectory.meta["instance_id"] = instance.id;

    main.messages.push_back(
        make_tool_message(assistant.tool_calls[0].id, subagent_visible_response(record.outcome)));
    return record;
}

std::vector<RolloutRecord> run_rollout_batch(const std::vector<TaskInstance>& instances, int group_size,
                                             int parallelism, const RolloutOptions& options) {
    if (group_size < 1) throw Error(ErrorKind::ConfigInvalid, "group size must be >= 1");
    if (parallelism < 1) throw Error(ErrorKind::ConfigInvalid, "parallelism must be >= 1");

    struct Job {
        size_t instance_index;
        int group_index;
    };
    std::vector<Job> jobs;
    for (size_t i = 0; i < instances.size(); ++i) {
        for (int g = 0; g < group_size; ++g) jobs.push_back({i, g});
    }

    std::vector<RolloutRecord> records(jobs.size());
    std::atomic<size_t> next_job{0};

    auto worker = [&]() {
        for (;;) {
            size_t index = next_job.fetch_add(1);
            if (index >= jobs.size()) return;
            const Job& job = jobs[index];
            const TaskInstance& instance = instances[job.instance_index];

            RolloutRecord record;
            record.instance_id = instance.id;
            record.group_index = job.group_index;
            auto started = std::chrono::steady_clock::now();
            try {
                TempDir workspace("ws-" + instance.id + "-g" + std::to_string(job.group_index));
                prepare_workspace({instance.repo_source, instance.base_commit, instance.pre_patch},
                                  workspace.path());
                record = passthrough_main_agent(instance, options, workspace.path());
                record.group_index = job.group_index;
            } catch (const std::exception& e) {
                record.error = e.what();
                log::warn("rollout " + instance.id + "/g" + std::to_string(job.group_index) +
                          " failed: " + e.what());
            }
            record.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                       std::chrono::steady_clock::now() - started)
                                       .count();
            records[index] = std::move(record);
        }
    };

    size_t thread_count = std::min<size_t>(static_cast<size_t>(parallelism), jobs.size());
    std::vector<std::thread> threads;
    threads.reserve(thread_count);
    for (size_t i = 0; i < thread_count; ++i) threads.emplace_back(worker);
    for (auto& thread : threads) thread.join();

    return records;
}

namespace {

json final_answer_to_json(const FinalAnswer& answer) {
    json entries = json::array();
    for (const auto& entry : answer.entries) {
        entries.push_back({{"command", entry.command}, {"summary", entry.summary}});
    }
    return json{{"raw_text", answer.raw_text},
                {"well_formed", answer.well_formed},
                {"entries", std::move(entries)}};
}

FinalAnswer final_answer_from_json(const json& j) {
    FinalAnswer answer;
    answer.raw_text = j.value("raw_text", "");
    answer.well_formed = j.value("well_formed", false);
    if (j.contains("entries")) {
        for (const auto& e : j.at("entries")) {
            answer.entries.push_back({e.at("command").get<std::string>(),
                                      e.at("summary").get<std::string>()});
        }
    }
    return answer;
}

json reward_to_json(const Reward& reward) {
    json j{{"value", reward.value},
           {"s_pos_mean", reward.s_pos_mean},
           {"s_pit_mean", reward.s_pit_mean},
           {"s_fa_mean", reward.s_fa_mean},
           {"graded", reward.graded}};
    if (reward.penalty_applied) j["penalty_applied"] = to_string(*reward.penalty_applied);
    return j;
}

Reward reward_from_json(const json& j) {
    Reward reward;
    reward.value = j.at("value").get<double>();
    reward.s_pos_mean = j.value("s_pos_mean", 0.0);
    reward.s_pit_mean = j.value("s_pit_mean", 0.0);
    reward.s_fa_mean = j.value("s_fa_mean", 0.0);
    reward.graded = j.value("graded", false);
    if (j.contains("penalty_applied")) {
        reward.penalty_applied = penalty_from_string(j.at("penalty_applied").get<std::string>());
    }
    return reward;
}

} // namespace

void save_rollout_record(const RolloutRecord& record, const fs::path& dir) {
    fs::path rollout_dir = dir / record.instance_id / ("g" + std::to_string(record.group_index));
    fs::create_directories(rollout_dir);
    save_trajectory(record.main_trajectory, rollout_dir / "main.jsonl");
    save_trajectory(record.outcome.trajectory, rollout_dir / "subagent.jsonl");

    json commands = json::array();
    for (const auto& run : record.outcome.commands) {
        commands.push_back({{"command", run.command.command},
                            {"workdir", run.command.workdir.string()},
                            {"timeout_ms", run.command.timeout_ms},
                            {"exit_code", run.result.exit_code},
                            {"output", sanitize_utf8(run.result.output)},
                            {"truncated", run.result.truncated},
                            {"duration_ms", run.result.duration_ms},
                            {"timed_out", run.result.timed_out}});
    }
    json j{{"instance_id", record.instance_id},
           {"group_index", record.group_index},
           {"wall_clock_ms", record.wall_clock_ms},
           {"workspace_hash", record.workspace_hash},
           {"protocol_violation", record.protocol_violation},
           {"error", record.error},
           {"coaxed", record.outcome.coaxed},
           {"turns_used", record.outcome.turns_used},
           {"tool_protocol_violations", record.outcome.tool_protocol_violations},
           {"final_answer", final_answer_to_json(record.outcome.final_answer)},
           {"commands", std::move(commands)}};
    if (record.reward) j["reward"] = reward_to_json(*record.reward);
    write_text_file(rollout_dir / "record.json", j.dump(2) + "\n");
}

RolloutRecord load_rollout_record(const fs::path& rollout_dir) {
    RolloutRecord record;
    json j = json::parse(read_text_file(rollout_dir / "record.json"));
    record.instance_id = j.at("instance_id").get<std::string>();
    record.group_index = j.at("group_index").get<int>();
    record.wall_clock_ms = j.value("wall_clock_ms", int64_t{0});
    record.workspace_hash = j.value("workspace_hash", "");
    record.protocol_violation = j.value("protocol_violation", false);
    record.error = j.value("error", "");
    record.outcome.coaxed = j.value("coaxed", false);
    record.outcome.turns_used = j.value("turns_used", 0);
    record.outcome.tool_protocol_violations = j.value("tool_protocol_violations", 0);
    record.outcome.final_answer = final_answer_from_json(j.at("final_answer"));
    for (const auto& c : j.at("commands")) {
        CommandRun run;
        run.command.command = c.at("command").get<std::string>();
        run.command.workdir = c.value("workdir", "");
        run.command.timeout_ms = c.value("timeout_ms", int64_t{30000});
        run.result.exit_code = c.at("exit_code").get<int>();
        run.result.output = c.value("output", "");
        run.result.truncated = c.value("truncated", false);
        run.result.duration_ms = c.value("duration_ms", int64_t{0});
        run.result.timed_out = c.value("timed_out", false);
        record.outcome.commands.push_back(std::move(run));
    }
    if (j.contains("reward")) record.reward = reward_from_json(j.at("reward"));

    record.main_trajectory = load_trajectory(rollout_dir / "main.jsonl");
    record.outcome.trajectory = load_trajectory(rollout_dir / "subagent.jsonl");
    return record;
}

std::vector<RolloutRecord> load_rollout_records(const fs::path& dir) {
    std::vector<RolloutRecord> records;
    if (!fs::is_directory(dir)) return records;
    for (const auto& instance_entry : fs::directory_iterator(dir)) {
        if (!instance_entry.is_directory()) continue;
        for (const auto& group_entry : fs::directory_iterator(instance_entry.path())) {
            if (!group_entry.is_directory()) continue;
            if (!fs::exists(group_entry.path() / "record.json")) continue;
            records.push_back(load_rollout_record(group_entry.path()));
        }
    }
    std::sort(records.begin(), records.end(), [](const RolloutRecord& a, const RolloutRecord& b) {
        return a.instance_id != b.instance_id ? a.instance_id < b.instance_id
                                              : a.group_index < b.group_index;
    });
    return records;
}

} // namespace termharness
