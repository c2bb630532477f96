#include "termharness/judge.hpp"

#include "termharness/errors.hpp"
#include "termharness/log.hpp"
#include "termharness/prompts.hpp"
#include "termharness/util.hpp"

#include <map>
#include <numeric>
#include <sstream>

namespace termharness {

JudgeScore make_judge_score(const std::array<double, 5>& d) {
    JudgeScore score;
    score.task_completion = d[0];
    score.factual_accuracy = d[1];
    score.informativeness = d[2];
    score.relevance = d[3];
    score.actionability = d[4];
    score.overall = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    return score;
}

JudgeScore parse_judge_scores(std::string_view text) {
    std::map<std::string, double> found;
    for (const auto& raw : split_lines(text)) {
        std::string line = trim(raw);
        if (starts_with(line, "-")) line = trim(line.substr(1));
        if (starts_with(line, "```")) continue;
        size_t colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string name = to_lower(trim(line.substr(0, colon)));
        name = replace_all(std::move(name), "`", "");
        name = replace_all(std::move(name), "*", "");
        name = replace_all(std::move(name), " ", "_");
        try {
            size_t end = 0;
            double value = std::stod(trim(line.substr(colon + 1)), &end);
            if (end > 0) found[name] = value;
        } catch (const std::exception&) {
        }
    }

    std::array<double, 5> dimensions{};
    std::vector<std::string> missing;
    for (size_t i = 0; i < kJudgeDimensions.size(); ++i) {
        auto it = found.find(std::string(kJudgeDimensions[i]));
        if (it == found.end()) {
            missing.push_back(std::string(kJudgeDimensions[i]));
            continue;
        }
        double value = it->second;
        if (value < 0.0 || value > 1.0) {
            log::warn("judge score " + std::string(kJudgeDimensions[i]) + "=" +
                      std::to_string(value) + " outside [0,1], clamping");
            value = std::min(1.0, std::max(0.0, value));
        }
        dimensions[i] = value;
    }
    if (!missing.empty()) {
        std::string names;
        for (const auto& name : missing) names += (names.empty() ? "" : ", ") + name;
        throw Error(ErrorKind::JudgeParseFailure, "missing dimensions: " + names);
    }
    return make_judge_score(dimensions);
}

std::string render_messages(const std::vector<ChatMessage>& messages) {
    std::ostringstream out;
    for (const auto& message : messages) {
        out << "[" << to_string(message.role) << "] ";
        if (!message.content.empty()) out << message.content;
        for (const auto& call : message.tool_calls) {
            out << "\n-> tool call " << call.name << "(";
            bool first = true;
            for (const auto& [key, value] : call.arguments) {
                if (!first) out << ", ";
                first = false;
                out << key << "=" << value;
            }
            out << ")";
        }
        out << "\n";
    }
    return out.str();
}

JudgeInputs build_judge_inputs(const Trajectory& main_trajectory, size_t call_message_index,
                               int n_after) {
    const auto& messages = main_trajectory.messages;
    if (call_message_index >= messages.size() ||
        messages[call_message_index].role != Role::assistant) {
        throw Error(ErrorKind::JudgeParseFailure, "call_message_index is not an assistant message");
    }
    const ChatMessage& call_message = messages[call_message_index];

    JudgeInputs inputs;
    inputs.n_after = n_after;
    for (const auto& message : messages) {
        if (message.role == Role::system) {
            inputs.system_excerpt = message.content.substr(
                0, std::min(message.content.size(), kJudgeSystemExcerptChars));
            break;
        }
    }
    for (const auto& message : messages) {
        if (message.role == Role::user) {
            inputs.problem_statement = message.content;
            break;
        }
    }

    for (const auto& call : call_message.tool_calls) {
        if (call.name != "ExecutionSubagent") continue;
        auto it = call.arguments.find("query");
        if (it != call.arguments.end()) inputs.subagent_query = it->second;
        // The paired tool message carries the response the main agent saw.
        for (size_t i = call_message_index + 1; i < messages.size(); ++i) {
            if (messages[i].role == Role::tool && messages[i].tool_call_id == call.id) {
                inputs.subagent_response = messages[i].content;
                break;
            }
        }
        break;
    }

    std::vector<ChatMessage> before(messages.begin() + 1,
                                    messages.begin() + static_cast<long>(call_message_index));
    inputs.trajectory_before = render_messages(before);

    // Subsequent trajectory: everything after the response, up to and
    // including n_after assistant turns.
    std::vector<ChatMessage> after;
    int assistant_turns = 0;
    bool response_seen = false;
    for (size_t i = call_message_index + 1; i < messages.size(); ++i) {
        if (!response_seen) {
            if (messages[i].role == Role::tool) response_seen = true;
            continue;
        }
        if (messages[i].role == Role::assistant) {
            if (assistant_turns == n_after) break;
            ++assistant_turns;
        }
        after.push_back(messages[i]);
    }
    inputs.turns_available = assistant_turns;
    inputs.trajectory_after = render_messages(after);
    return inputs;
}

JudgeScore judge_response(const JudgeInputs& inputs, ChatGateway& llm, const std::string& model) {
    PromptPair prompt = build_judge_prompt(inputs.system_excerpt, inputs.problem_statement,
                                           inputs.trajectory_before, inputs.subagent_query,
                                           inputs.subagent_response, inputs.trajectory_after,
                                           inputs.n_after);
    ChatRequest request;
    request.model = model;
    request.messages.push_back(make_system_message(prompt.system));
    request.messages.push_back(make_user_message(prompt.user));

    std::string first_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        ChatResponse response = llm.complete(request);
        try {
            return parse_judge_scores(response.message.content);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::JudgeParseFailure) throw;
            first_error = e.what();
            log::warn(std::string("judge parse failed, reprompting: ") + e.what());
            request.messages.push_back(response.message);
            request.messages.push_back(make_user_message(
                "The score block was incomplete. Reply again with one `dimension: score` line for "
                "each of the five dimensions."));
        }
    }
    throw Error(ErrorKind::JudgeParseFailure, "after retry: " + first_error);
}

} // namespace termharness
