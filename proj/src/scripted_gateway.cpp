#include "termharness/scripted_gateway.hpp"

#include "termharness/errors.hpp"
#include "termharness/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

using json = nlohmann::json;

namespace termharness {

ScriptedGateway::ScriptedGateway(Script script) : script_(std::move(script)) {}

ScriptedGateway::ScriptedGateway(std::vector<ScriptStep> steps, bool loop_last)
    : script_{std::move(steps), loop_last} {}

size_t ScriptedGateway::calls_made() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cursor_;
}

ChatResponse ScriptedGateway::complete(const ChatRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);

    const auto& steps = script_.steps;
    size_t index = cursor_;
    if (index >= steps.size()) {
        if (!script_.loop_last || steps.empty()) {
            throw Error(ErrorKind::ScriptExhausted,
                        "script has " + std::to_string(steps.size()) + " steps, call " +
                            std::to_string(index + 1) + " requested");
        }
        index = steps.size() - 1;
    }
    ++cursor_;
    const ScriptStep& step = steps[index];

    auto fail = [&](const std::string& what) {
        throw Error(ErrorKind::FixtureAssertion,
                    "script step " + std::to_string(index) + ": " + what);
    };

    if (step.expect_min_messages && request.messages.size() < *step.expect_min_messages) {
        fail("expected at least " + std::to_string(*step.expect_min_messages) + " messages, got " +
             std::to_string(request.messages.size()));
    }
    if (request.messages.empty()) fail("request has no messages");
    const ChatMessage& last = request.messages.back();
    if (step.expect_last_role && to_string(last.role) != *step.expect_last_role) {
        fail("expected last role " + *step.expect_last_role + ", got " + to_string(last.role));
    }
    if (step.expect_contains && last.content.find(*step.expect_contains) == std::string::npos) {
        fail("last message does not contain \"" + *step.expect_contains + "\"");
    }
    if (step.expect_has_tool) {
        bool found = std::any_of(request.tools.begin(), request.tools.end(),
                                 [&](const ToolSchema& t) { return t.name == *step.expect_has_tool; });
        if (!found) fail("request must contain tool " + *step.expect_has_tool);
    }
    if (step.expect_no_tools && *step.expect_no_tools && !request.tools.empty()) {
        fail("request must carry no tool schemas, got " + std::to_string(request.tools.size()));
    }

    ChatResponse response;
    std::vector<ToolCall> calls = step.tool_calls;
    for (size_t i = 0; i < calls.size(); ++i) {
        if (calls[i].id.empty()) calls[i].id = "call-" + std::to_string(index) + "-" + std::to_string(i);
    }
    response.message = make_assistant_message(step.content, std::move(calls));
    // token_count carries backend-reported usage only; callers fill in a
    // local count when it is absent.
    response.message.token_count = step.completion_tokens > 0 ? step.completion_tokens : 0;
    response.prompt_tokens = step.prompt_tokens;
    response.completion_tokens = step.completion_tokens;
    response.finish_reason =
        response.message.tool_calls.empty() ? FinishReason::stop : FinishReason::tool_call;
    return response;
}

namespace {

ScriptStep step_from_json(const json& j) {
    ScriptStep step;
    if (j.contains("expect")) {
        const json& e = j.at("expect");
        if (e.contains("last_role")) step.expect_last_role = e.at("last_role").get<std::string>();
        if (e.contains("contains")) step.expect_contains = e.at("contains").get<std::string>();
        if (e.contains("has_tool")) step.expect_has_tool = e.at("has_tool").get<std::string>();
        if (e.contains("no_tools")) step.expect_no_tools = e.at("no_tools").get<bool>();
        if (e.contains("min_messages")) step.expect_min_messages = e.at("min_messages").get<size_t>();
    }
    const json& r = j.at("respond");
    step.content = r.value("content", "");
    if (r.contains("tool_calls")) {
        for (const auto& c : r.at("tool_calls")) {
            ToolCall call;
            call.id = c.value("id", "");
            call.name = c.at("name").get<std::string>();
            if (c.contains("arguments")) {
                for (const auto& [key, value] : c.at("arguments").items()) {
                    call.arguments[key] = value.is_string() ? value.get<std::string>() : value.dump();
                }
            }
            step.tool_calls.push_back(std::move(call));
        }
    }
    step.prompt_tokens = r.value("prompt_tokens", int64_t{0});
    step.completion_tokens = r.value("completion_tokens", int64_t{0});
    return step;
}

} // namespace

Script Script::from_json_text(const std::string& text) {
    json j = json::parse(text);
    Script script;
    for (const auto& entry : j.at("script")) script.steps.push_back(step_from_json(entry));
    script.loop_last = j.value("loop_last", false);
    return script;
}

Script Script::from_file(const std::filesystem::path& path) {
    return from_json_text(read_text_file(path));
}

ScriptStep tool_call_step(std::string tool_name, std::map<std::string, std::string> arguments,
                          std::string id, std::string content) {
    ScriptStep step;
    step.content = std::move(content);
    ToolCall call;
    call.id = std::move(id);
    call.name = std::move(tool_name);
    call.arguments = std::move(arguments);
    step.tool_calls.push_back(std::move(call));
    return step;
}

ScriptStep text_step(std::string content) {
    ScriptStep step;
    step.content = std::move(content);
    return step;
}

} // namespace termharness
