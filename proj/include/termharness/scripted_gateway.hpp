#pragma once

#include "termharness/gateway.hpp"

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace termharness {

// One fixture step: optional assertions on the incoming request, and the
// canned response returned for it.
struct ScriptStep {
    // expect.*
    std::optional<std::string> expect_last_role;
    std::optional<std::string> expect_contains;      // substring of the last message content
    std::optional<std::string> expect_has_tool;      // tool schema with this name offered
    std::optional<bool> expect_no_tools;             // request must carry no tool schemas
    std::optional<size_t> expect_min_messages;

    // respond.*
    std::string content;
    std::vector<ToolCall> tool_calls;
    int64_t prompt_tokens = 0;
    int64_t completion_tokens = 0;
};

// Fixture file format: {"loop_last": bool, "script": [{"expect": {...},
// "respond": {...}}, ...]}.
struct Script {
    std::vector<ScriptStep> steps;
    bool loop_last = false;

    static Script from_json_text(const std::string& text);
    static Script from_file(const std::filesystem::path& path);
};

// Deterministic fixture-driven backend: responses come from an ordered
// script keyed by call index. Exhausting the script raises ScriptExhausted
// unless loop_last is set, in which case the final step repeats forever.
class ScriptedGateway final : public ChatGateway {
public:
    explicit ScriptedGateway(Script script);
    ScriptedGateway(std::vector<ScriptStep> steps, bool loop_last = false);

    ChatResponse complete(const ChatRequest& request) override;

    size_t calls_made() const;

private:
    Script script_;
    mutable std::mutex mutex_;
    size_t cursor_ = 0;
};

// Convenience for tests: a step that answers with one tool call.
ScriptStep tool_call_step(std::string tool_name, std::map<std::string, std::string> arguments,
                          std::string id = "", std::string content = "");
// Convenience for tests: a plain text answer.
ScriptStep text_step(std::string content);

} // namespace termharness
