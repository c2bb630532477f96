#pragma once

#include "termharness/rubric.hpp"
#include "termharness/subagent.hpp"

#include <optional>
#include <span>
#include <string_view>

namespace termharness {

struct RewardConfig {
    double alpha = 0.5;
    double penalty_overlength = -100.0;
    double penalty_missing_final_answer = -100.0;
    double penalty_no_commands = -50.0;
    int64_t max_trajectory_tokens = 30000;
    double sigma_min = 0.01;
};

enum class PenaltyKind { overlength, missing_final_answer, no_commands };

const char* to_string(PenaltyKind kind);
std::optional<PenaltyKind> penalty_from_string(std::string_view text);

struct Reward {
    double value = 0.0;
    double s_pos_mean = 0.0;
    double s_pit_mean = 0.0;
    double s_fa_mean = 0.0;
    std::optional<PenaltyKind> penalty_applied;
    bool graded = false; // false when a hard penalty short-circuited grading
};

// What the penalty ladder needs to know about a rollout.
struct RewardInputs {
    int64_t trajectory_tokens = 0;
    bool final_answer_well_formed = false;
    size_t command_count = 0;
};

// Penalty ladder first (overlength, then missing final answer, then no
// commands), otherwise the blend
//   value = (1 - alpha) * (s_pos_mean - s_pit_mean) + alpha * s_fa_mean.
Reward compute_reward(const std::optional<RubricScores>& scores, const RewardInputs& inputs,
                      const RewardConfig& cfg);
Reward compute_reward(const std::optional<RubricScores>& scores, const SubagentOutcome& outcome,
                      const RewardConfig& cfg);

double population_stddev(std::span<const double> values);

// keep = population stddev of the group's rewards >= cfg.sigma_min.
// Near-identical rewards across the group carry no gradient signal.
bool filter_group(std::span<const double> rewards, const RewardConfig& cfg);

} // namespace termharness
