#include "termharness/message.hpp"

#include "termharness/errors.hpp"
#include "termharness/util.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <numeric>
#include <sstream>

using json = nlohmann::json;

namespace termharness {

const char* to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
        case Role::tool: return "tool";
    }
    return "user";
}

std::optional<Role> role_from_string(std::string_view text) {
    if (text == "system") return Role::system;
    if (text == "user") return Role::user;
    if (text == "assistant") return Role::assistant;
    if (text == "tool") return Role::tool;
    return std::nullopt;
}

namespace {

int64_t message_tokens(const ChatMessage& message, const TokenCounter& counter) {
    int64_t total = counter.count(message.content);
    for (const auto& call : message.tool_calls) {
        total += counter.count(call.name);
        for (const auto& [key, value] : call.arguments) {
            total += counter.count(key) + counter.count(value);
        }
    }
    return total;
}

} // namespace

ChatMessage make_system_message(std::string content, const TokenCounter& counter) {
    ChatMessage message{Role::system, std::move(content), {}, std::nullopt, 0};
    message.token_count = message_tokens(message, counter);
    return message;
}

ChatMessage make_user_message(std::string content, const TokenCounter& counter) {
    ChatMessage message{Role::user, std::move(content), {}, std::nullopt, 0};
    message.token_count = message_tokens(message, counter);
    return message;
}

ChatMessage make_assistant_message(std::string content, std::vector<ToolCall> tool_calls,
                                   const TokenCounter& counter) {
    ChatMessage message{Role::assistant, std::move(content), std::move(tool_calls), std::nullopt, 0};
    message.token_count = message_tokens(message, counter);
    return message;
}

ChatMessage make_tool_message(std::string tool_call_id, std::string content,
                              const TokenCounter& counter) {
    ChatMessage message{Role::tool, std::move(content), {}, std::move(tool_call_id), 0};
    message.token_count = message_tokens(message, counter);
    return message;
}

int64_t Trajectory::total_tokens() const {
    return std::accumulate(messages.begin(), messages.end(), int64_t{0},
                           [](int64_t sum, const ChatMessage& m) { return sum + m.token_count; });
}

namespace {

json tool_call_to_json(const ToolCall& call) {
    json args = json::object();
    for (const auto& [key, value] : call.arguments) args[key] = value;
    return json{{"id", call.id}, {"name", call.name}, {"arguments", args}};
}

ToolCall tool_call_from_json(const json& j) {
    ToolCall call;
    call.id = j.at("id").get<std::string>();
    call.name = j.at("name").get<std::string>();
    if (j.contains("arguments")) {
        for (const auto& [key, value] : j.at("arguments").items()) {
            call.arguments[key] = value.get<std::string>();
        }
    }
    return call;
}

json message_to_json(const ChatMessage& message) {
    json j{{"role", to_string(message.role)},
           {"content", message.content},
           {"token_count", message.token_count}};
    if (!message.tool_calls.empty()) {
        json calls = json::array();
        for (const auto& call : message.tool_calls) calls.push_back(tool_call_to_json(call));
        j["tool_calls"] = std::move(calls);
    }
    if (message.tool_call_id) j["tool_call_id"] = *message.tool_call_id;
    return j;
}

ChatMessage message_from_json(const json& j) {
    ChatMessage message;
    auto role = role_from_string(j.at("role").get<std::string>());
    if (!role) throw Error(ErrorKind::IoFailure, "unknown role in trajectory line");
    message.role = *role;
    message.content = j.at("content").get<std::string>();
    message.token_count = j.at("token_count").get<int64_t>();
    if (j.contains("tool_calls")) {
        for (const auto& call : j.at("tool_calls")) {
            message.tool_calls.push_back(tool_call_from_json(call));
        }
    }
    if (j.contains("tool_call_id")) message.tool_call_id = j.at("tool_call_id").get<std::string>();
    return message;
}

} // namespace

std::string trajectory_to_jsonl(const Trajectory& trajectory) {
    std::ostringstream out;
    json header{{"meta", trajectory.meta}, {"total_tokens", trajectory.total_tokens()}};
    out << header.dump() << '\n';
    for (const auto& message : trajectory.messages) {
        out << message_to_json(message).dump() << '\n';
    }
    return out.str();
}

Trajectory trajectory_from_jsonl(std::string_view jsonl) {
    Trajectory trajectory;
    bool header_seen = false;
    for (const auto& line : split_lines(jsonl)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        if (!header_seen) {
            header_seen = true;
            if (j.contains("meta")) {
                for (const auto& [key, value] : j.at("meta").items()) {
                    trajectory.meta[key] = value.get<std::string>();
                }
                continue;
            }
            // Header missing: fall through and treat the line as a message.
        }
        trajectory.messages.push_back(message_from_json(j));
    }
    return trajectory;
}

void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& path) {
    write_text_file(path, trajectory_to_jsonl(trajectory));
}

Trajectory load_trajectory(const std::filesystem::path& path) {
    return trajectory_from_jsonl(read_text_file(path));
}

FinalAnswer parse_final_answer(std::string_view text) {
    FinalAnswer answer;
    size_t open_count = count_occurrences(text, kFinalAnswerOpenTag);
    size_t close_count = count_occurrences(text, kFinalAnswerCloseTag);
    // The closing tag contains the opening tag's text nowhere, but every
    // "</final_answer>" does not embed "<final_answer>", so the counts are
    // independent. Exactly one matched pair is required.
    if (open_count != 1 || close_count != 1) return answer;

    size_t open_pos = text.find(kFinalAnswerOpenTag);
    size_t close_pos = text.find(kFinalAnswerCloseTag);
    if (close_pos < open_pos) return answer;

    answer.well_formed = true;
    size_t body_begin = open_pos + kFinalAnswerOpenTag.size();
    answer.raw_text = std::string(text.substr(body_begin, close_pos - body_begin));

    // Entries are consecutive "Command:" / "Summary:" line pairs; a summary
    // runs until the next "Command:" line or the end of the body.
    std::optional<std::string> pending_command;
    std::optional<std::string> summary;
    auto flush = [&]() {
        if (pending_command && summary) {
            answer.entries.push_back({trim(*pending_command), trim(*summary)});
        }
        pending_command.reset();
        summary.reset();
    };
    for (const auto& line : split_lines(answer.raw_text)) {
        std::string stripped = trim(line);
        if (starts_with(stripped, "Command:")) {
            flush();
            pending_command = stripped.substr(std::string_view("Command:").size());
        } else if (pending_command && !summary && starts_with(stripped, "Summary:")) {
            summary = stripped.substr(std::string_view("Summary:").size());
        } else if (summary) {
            *summary += "\n" + line;
        } else if (pending_command && !stripped.empty()) {
            // Non-summary content between Command: and Summary: breaks the pair.
            pending_command.reset();
        }
    }
    flush();
    return answer;
}

} // namespace termharness
