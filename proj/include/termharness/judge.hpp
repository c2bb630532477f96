#pragma once

#include "termharness/gateway.hpp"
#include "termharness/message.hpp"

#include <array>
#include <string>
#include <string_view>

namespace termharness {

inline constexpr std::array<std::string_view, 5> kJudgeDimensions = {
    "task_completion", "factual_accuracy", "informativeness", "relevance", "actionability"};

struct JudgeScore {
    double task_completion = 0.0;
    double factual_accuracy = 0.0;
    double informativeness = 0.0;
    double relevance = 0.0;
    double actionability = 0.0;
    double overall = 0.0; // arithmetic mean, computed locally

    std::array<double, 5> dimensions() const {
        return {task_completion, factual_accuracy, informativeness, relevance, actionability};
    }
};

JudgeScore make_judge_score(const std::array<double, 5>& dimensions);

// Parses five `dimension: score` lines; out-of-range values are clamped to
// [0,1] with a warning. Throws JudgeParseFailure naming missing dimensions.
// The overall score is always recomputed locally, never taken from the judge.
JudgeScore parse_judge_scores(std::string_view text);

struct JudgeInputs {
    std::string system_excerpt; // first chars of the main system prompt
    std::string problem_statement;
    std::string trajectory_before;
    std::string subagent_query;
    std::string subagent_response;
    std::string trajectory_after;
    int n_after = 5;
    int turns_available = 0; // actual turns found (may be < n_after near the end)
};

inline constexpr size_t kJudgeSystemExcerptChars = 2000;

// Slices a recorded main trajectory around the ExecutionSubagent call at
// message index `call_message_index`: context before the call, the query and
// response, and the next n_after assistant turns.
JudgeInputs build_judge_inputs(const Trajectory& main_trajectory, size_t call_message_index,
                               int n_after = 5);

JudgeScore judge_response(const JudgeInputs& inputs, ChatGateway& llm,
                          const std::string& model = "judge-model");

// Human-readable rendering of messages used inside judge prompts.
std::string render_messages(const std::vector<ChatMessage>& messages);

} // namespace termharness
