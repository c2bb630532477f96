#include "termharness/http_gateway.hpp"

#include "termharness/errors.hpp"
#include "termharness/log.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <thread>

using json = nlohmann::json;

namespace termharness {

namespace {

// Splits "http://host:port/v1" into origin and path prefix.
std::pair<std::string, std::string> split_url(const std::string& url) {
    size_t scheme_end = url.find("://");
    size_t path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string path = url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {url.substr(0, path_start), path};
}

json message_to_wire(const ChatMessage& message) {
    json j{{"role", to_string(message.role)}, {"content", message.content}};
    if (!message.tool_calls.empty()) {
        json calls = json::array();
        for (const auto& call : message.tool_calls) {
            json args = json::object();
            for (const auto& [key, value] : call.arguments) {
                // Arguments are stored as raw strings; pass JSON values through
                // when they parse, otherwise send the string itself.
                json parsed = json::parse(value, nullptr, false);
                args[key] = parsed.is_discarded() ? json(value) : parsed;
            }
            calls.push_back({{"id", call.id},
                             {"type", "function"},
                             {"function", {{"name", call.name}, {"arguments", args.dump()}}}});
        }
        j["tool_calls"] = std::move(calls);
    }
    if (message.tool_call_id) j["tool_call_id"] = *message.tool_call_id;
    return j;
}

} // namespace

HttpGateway::HttpGateway(HttpGatewaySettings settings) : settings_(std::move(settings)) {
    auto [host, path] = split_url(settings_.base_url);
    host_ = host;
    path_ = path;
}

std::string HttpGateway::request_body(const ChatRequest& request) {
    json body;
    body["model"] = request.model;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_output_tokens;
    json messages = json::array();
    for (const auto& message : request.messages) messages.push_back(message_to_wire(message));
    body["messages"] = std::move(messages);
    if (!request.tools.empty()) {
        json tools = json::array();
        for (const auto& tool : request.tools) {
            json params = json::parse(tool.parameters_json, nullptr, false);
            if (params.is_discarded()) params = json::object();
            tools.push_back({{"type", "function"},
                             {"function",
                              {{"name", tool.name},
                               {"description", tool.description},
                               {"parameters", params}}}});
        }
        body["tools"] = std::move(tools);
    }
    return body.dump();
}

ChatResponse HttpGateway::parse_response(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorKind::GatewayFailure, "response is not JSON");
    if (!j.contains("choices") || j["choices"].empty()) {
        throw Error(ErrorKind::GatewayFailure, "response has no choices");
    }
    const json& choice = j["choices"][0];
    const json& message = choice.at("message");

    ChatResponse response;
    std::string content;
    if (message.contains("content") && message["content"].is_string()) {
        content = message["content"].get<std::string>();
    }
    std::vector<ToolCall> calls;
    if (message.contains("tool_calls")) {
        for (const auto& c : message["tool_calls"]) {
            ToolCall call;
            call.id = c.value("id", "");
            call.name = c.at("function").at("name").get<std::string>();
            std::string raw_args = c.at("function").value("arguments", "{}");
            json args = json::parse(raw_args, nullptr, false);
            if (!args.is_discarded() && args.is_object()) {
                for (const auto& [key, value] : args.items()) {
                    call.arguments[key] = value.is_string() ? value.get<std::string>() : value.dump();
                }
            }
            calls.push_back(std::move(call));
        }
    }
    response.message = make_assistant_message(std::move(content), std::move(calls));
    response.message.token_count = 0; // only backend usage counts land here
    if (j.contains("usage")) {
        response.prompt_tokens = j["usage"].value("prompt_tokens", int64_t{0});
        response.completion_tokens = j["usage"].value("completion_tokens", int64_t{0});
        if (response.completion_tokens > 0) response.message.token_count = response.completion_tokens;
    }
    std::string reason = choice.value("finish_reason", "stop");
    if (reason == "tool_calls" || reason == "tool_call") response.finish_reason = FinishReason::tool_call;
    else if (reason == "length") response.finish_reason = FinishReason::length;
    else response.finish_reason = FinishReason::stop;
    if (!response.message.tool_calls.empty()) response.finish_reason = FinishReason::tool_call;
    return response;
}

ChatResponse HttpGateway::complete(const ChatRequest& request) {
    std::string body = request_body(request);
    std::string endpoint = path_ + "/chat/completions";

    httplib::Headers headers;
    if (!settings_.api_key.empty()) headers.emplace("Authorization", "Bearer " + settings_.api_key);

    int64_t backoff = settings_.retry_backoff_ms;
    std::string last_failure;
    for (int attempt = 0; attempt <= settings_.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }
        httplib::Client client(host_);
        client.set_connection_timeout(settings_.timeout_sec, 0);
        client.set_read_timeout(settings_.timeout_sec, 0);
        auto result = client.Post(endpoint, headers, body, "application/json");
        if (!result) {
            last_failure = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        if (result->status >= 500 || result->status == 429) {
            last_failure = "HTTP " + std::to_string(result->status);
            continue;
        }
        if (result->status != 200) {
            throw Error(ErrorKind::GatewayFailure,
                        "HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 200));
        }
        return parse_response(result->body);
    }
    throw Error(ErrorKind::GatewayFailure,
                "gave up after " + std::to_string(settings_.retries + 1) + " attempts (" +
                    last_failure + ")");
}

} // namespace termharness
