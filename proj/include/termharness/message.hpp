#pragma once

#include "termharness/token_counter.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace termharness {

enum class Role { system, user, assistant, tool };

const char* to_string(Role role);
std::optional<Role> role_from_string(std::string_view text);

struct ToolCall {
    std::string id;
    std::string name;
    // Argument name -> JSON-encoded value. Kept as strings so the wire shape
    // survives round-trips without type coercion.
    std::map<std::string, std::string> arguments;

    bool operator==(const ToolCall&) const = default;
};

struct ChatMessage {
    Role role = Role::user;
    std::string content;
    std::vector<ToolCall> tool_calls;          // assistant only
    std::optional<std::string> tool_call_id;   // tool only
    int64_t token_count = 0;

    bool operator==(const ChatMessage&) const = default;
};

ChatMessage make_system_message(std::string content, const TokenCounter& counter = default_token_counter());
ChatMessage make_user_message(std::string content, const TokenCounter& counter = default_token_counter());
ChatMessage make_assistant_message(std::string content, std::vector<ToolCall> tool_calls = {},
                                   const TokenCounter& counter = default_token_counter());
ChatMessage make_tool_message(std::string tool_call_id, std::string content,
                              const TokenCounter& counter = default_token_counter());

struct Trajectory {
    std::vector<ChatMessage> messages;
    // Instance id, role label (main|subagent), model name, token counter name.
    std::map<std::string, std::string> meta;

    int64_t total_tokens() const;

    bool operator==(const Trajectory&) const = default;
};

// JSONL persistence: one header line carrying meta, then one message per
// line with fields role/content/tool_calls/tool_call_id/token_count.
std::string trajectory_to_jsonl(const Trajectory& trajectory);
Trajectory trajectory_from_jsonl(std::string_view jsonl);
void save_trajectory(const Trajectory& trajectory, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);

struct FinalAnswerEntry {
    std::string command;
    std::string summary;

    bool operator==(const FinalAnswerEntry&) const = default;
};

struct FinalAnswer {
    std::vector<FinalAnswerEntry> entries;
    std::string raw_text;     // verbatim content between the tags
    bool well_formed = false; // exactly one opening and one closing tag

    bool operator==(const FinalAnswer&) const = default;
};

inline constexpr std::string_view kFinalAnswerOpenTag = "<final_answer>";
inline constexpr std::string_view kFinalAnswerCloseTag = "</final_answer>";

// Total over arbitrary input: malformed text yields well_formed=false,
// never a failure.
FinalAnswer parse_final_answer(std::string_view text);

struct SubagentQuery {
    std::string query;       // what to run and what to report back
    std::string description; // short UI summary
};

} // namespace termharness
