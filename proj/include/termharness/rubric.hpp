#pragma once

#include "termharness/gateway.hpp"
#include "termharness/plan.hpp"

#include <array>
#include <string>
#include <string_view>

namespace termharness {

inline constexpr std::array<std::string_view, 7> kPositiveDimensions = {
    "command_correctness", "error_handling",  "outcome_accuracy", "key_information_extraction",
    "completeness",        "efficiency",      "actionability"};
// Higher pitfall score = more severe failure; subtracted when blending.
inline constexpr std::array<std::string_view, 4> kPitfallDimensions = {
    "hallucinated_results", "missed_errors", "wrong_diagnosis", "unnecessary_commands"};
inline constexpr std::array<std::string_view, 3> kFinalAnswerDimensions = {
    "detail_level", "factual_accuracy", "informativeness"};

// 14 scores in [0, 100], grouped 7 + 4 + 3.
struct RubricScores {
    std::array<double, 7> positive{};
    std::array<double, 4> pitfall{};
    std::array<double, 3> final_answer{};

    double positive_mean() const;
    double pitfall_mean() const;
    double final_answer_mean() const;

    bool operator==(const RubricScores&) const = default;
};

// Parses `dimension: score` lines (fenced or bare). All 14 dimensions must
// appear; out-of-range values are clamped to [0, 100] with a warning.
// Throws GradeParseFailure naming the missing dimensions.
RubricScores parse_rubric_scores(std::string_view text);

// One grading call scoring the candidate plan against the reference plan
// across all 14 dimensions; one retry before GradeParseFailure.
RubricScores grade_rubric(const ExecutionPlan& candidate, const ExecutionPlan& reference,
                          std::string_view query, ChatGateway& llm,
                          const std::string& model = "grader-model");

} // namespace termharness
