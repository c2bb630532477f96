#include "termharness/subagent.hpp"

#include "termharness/errors.hpp"
#include "termharness/log.hpp"
#include "termharness/util.hpp"

#include <algorithm>
#include <sstream>

namespace termharness {

ToolSchema run_in_terminal_schema() {
    return ToolSchema{
        "run_in_terminal",
        "Execute a shell command",
        R"({"type":"object","properties":{"command":{"type":"string","description":"Shell command to run"},"mode":{"type":"string","enum":["sync","async"],"description":"Always use sync"},"timeout":{"type":"integer","description":"Timeout in milliseconds"}},"required":["command","mode","timeout"]})"};
}

std::string render_subagent_system_prompt(const SubagentConfig& config) {
    if (!config.system_prompt.empty()) return config.system_prompt;
    return std::string(subagent_system_prompt());
}

namespace {

struct ValidatedArgs {
    TerminalCommand command;
    std::vector<std::string> warnings;
    bool runnable = true;
};

int64_t parse_timeout(const std::string& raw, bool& ok) {
    ok = false;
    try {
        size_t end = 0;
        // Tolerates JSON-ish encodings like "30000" and 30000.0.
        double value = std::stod(raw, &end);
        if (end == 0 || value <= 0) return 0;
        ok = true;
        return static_cast<int64_t>(value);
    } catch (const std::exception&) {
        return 0;
    }
}

// Imperfect model output is corrected rather than fatal: missing timeout
// gets the default, async mode is forced back to sync, oversized timeouts
// are capped. Each correction lands as a warning in the tool message.
ValidatedArgs validate_tool_args(const ToolCall& call, const SubagentConfig& config) {
    ValidatedArgs out;
    auto it = call.arguments.find("command");
    if (it == call.arguments.end() || trim(it->second).empty()) {
        out.runnable = false;
        out.warnings.push_back("missing required argument \"command\"; nothing was executed");
        return out;
    }
    out.command.command = it->second;
    out.command.mode = ExecMode::sync;
    out.command.workdir = config.workdir;

    auto mode_it = call.arguments.find("mode");
    if (mode_it == call.arguments.end()) {
        out.warnings.push_back("missing \"mode\"; ran with mode=sync");
    } else if (mode_it->second != "sync") {
        out.warnings.push_back("mode \"" + mode_it->second + "\" is not allowed here; ran with mode=sync");
    }

    auto timeout_it = call.arguments.find("timeout");
    bool ok = false;
    int64_t timeout = timeout_it == call.arguments.end() ? 0 : parse_timeout(timeout_it->second, ok);
    if (!ok) {
        timeout = config.default_timeout_ms;
        out.warnings.push_back("missing or invalid \"timeout\"; ran with timeout=" +
                               std::to_string(timeout) + " ms");
    } else if (timeout > config.timeout_ceiling_ms) {
        out.warnings.push_back("timeout " + std::to_string(timeout) + " ms capped to " +
                               std::to_string(config.timeout_ceiling_ms) + " ms");
        timeout = config.timeout_ceiling_ms;
    }
    out.command.timeout_ms = timeout;
    return out;
}

// Durations stay out of the message text so scripted rollouts replay
// byte-identically; they live in the TerminalResult and the rollout record.
std::string format_terminal_result(const TerminalResult& result,
                                   const std::vector<std::string>& warnings) {
    std::ostringstream out;
    for (const auto& warning : warnings) out << "[warning: " << warning << "]\n";
    out << "Exit code: " << result.exit_code;
    if (result.timed_out) out << " [timed out after " << result.duration_ms << " ms]";
    if (result.truncated) out << " [output truncated]";
    out << "\n";
    out << sanitize_utf8(result.output);
    return out.str();
}

} // namespace

SubagentOutcome run_subagent(const SubagentQuery& query, const SubagentConfig& config,
                             ChatGateway& llm, TerminalExecutor& term,
                             const TokenCounter& counter) {
    SubagentOutcome outcome;
    Trajectory& trajectory = outcome.trajectory;
    trajectory.meta["role"] = "subagent";
    trajectory.meta["model"] = config.model;
    trajectory.meta["token_counter"] = counter.name();

    trajectory.messages.push_back(make_system_message(render_subagent_system_prompt(config), counter));
    trajectory.messages.push_back(make_user_message(query.query, counter));

    const std::vector<ToolSchema> tools{run_in_terminal_schema()};
    bool backend_counts_seen = false;

    auto ask_model = [&](bool with_tools) -> ChatMessage {
        ChatRequest request;
        request.messages = trajectory.messages;
        if (with_tools) request.tools = tools;
        request.model = config.model;
        request.temperature = config.temperature;
        request.max_output_tokens = config.max_output_tokens;
        ChatResponse response = llm.complete(request);
        ChatMessage message = response.message;
        message.role = Role::assistant;
        if (message.token_count > 0) {
            backend_counts_seen = true;
        } else {
            message = make_assistant_message(std::move(message.content),
                                             std::move(message.tool_calls), counter);
        }
        return message;
    };

    bool answered = false;
    for (int turn = 0; turn < config.turn_limit && !answered; ++turn) {
        ChatMessage assistant = ask_model(true);
        trajectory.messages.push_back(assistant);
        ++outcome.turns_used;

        if (assistant.tool_calls.empty()) {
            if (parse_final_answer(assistant.content).well_formed) answered = true;
            continue;
        }

        if (assistant.tool_calls.size() > 1) {
            ++outcome.tool_protocol_violations;
            log::warn("subagent emitted " + std::to_string(assistant.tool_calls.size()) +
                      " tool calls in one turn; executing only the first");
        }

        for (size_t i = 0; i < assistant.tool_calls.size(); ++i) {
            const ToolCall& call = assistant.tool_calls[i];
            if (i > 0) {
                trajectory.messages.push_back(make_tool_message(
                    call.id,
                    "Error: only one run_in_terminal call is allowed per turn; this call was not "
                    "executed. Re-issue it on the next turn if still needed.",
                    counter));
                continue;
            }
            if (call.name != "run_in_terminal") {
                trajectory.messages.push_back(make_tool_message(
                    call.id, "Error: unknown tool \"" + call.name + "\"; only run_in_terminal exists.",
                    counter));
                continue;
            }
            ValidatedArgs args = validate_tool_args(call, config);
            if (!args.runnable) {
                std::string note;
                for (const auto& warning : args.warnings) note += "[warning: " + warning + "]\n";
                trajectory.messages.push_back(make_tool_message(call.id, note, counter));
                continue;
            }
            TerminalResult result = term.execute(args.command);
            outcome.commands.push_back({args.command, result});
            trajectory.messages.push_back(
                make_tool_message(call.id, format_terminal_result(result, args.warnings), counter));
        }
    }

    if (!answered) {
        outcome.coaxed = true;
        trajectory.messages.push_back(make_user_message(std::string(coax_message()), counter));
        ChatMessage final_turn = ask_model(false); // tool schema removed on the coax turn
        if (!final_turn.tool_calls.empty()) {
            ++outcome.tool_protocol_violations;
            log::warn("subagent tool-called on the coax turn; call ignored");
        }
        trajectory.messages.push_back(final_turn);
        ++outcome.turns_used;
    }

    // Assistant counts come from the backend when it reports them, local
    // counting otherwise; the trajectory records which.
    trajectory.meta["token_source"] =
        backend_counts_seen ? "backend+" + counter.name() : counter.name();

    // The answer is whatever the last assistant turn produced; malformed
    // content yields well_formed=false and is handled by reward penalties.
    for (auto it = trajectory.messages.rbegin(); it != trajectory.messages.rend(); ++it) {
        if (it->role == Role::assistant) {
            outcome.final_answer = parse_final_answer(it->content);
            break;
        }
    }
    return outcome;
}

} // namespace termharness
