#include "termharness/reward.hpp"

#include "termharness/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace termharness {

const char* to_string(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::overlength: return "overlength";
        case PenaltyKind::missing_final_answer: return "missing_final_answer";
        case PenaltyKind::no_commands: return "no_commands";
    }
    return "?";
}

std::optional<PenaltyKind> penalty_from_string(std::string_view text) {
    if (text == "overlength") return PenaltyKind::overlength;
    if (text == "missing_final_answer") return PenaltyKind::missing_final_answer;
    if (text == "no_commands") return PenaltyKind::no_commands;
    return std::nullopt;
}

Reward compute_reward(const std::optional<RubricScores>& scores, const RewardInputs& inputs,
                      const RewardConfig& cfg) {
    Reward reward;
    if (inputs.trajectory_tokens > cfg.max_trajectory_tokens) {
        reward.value = cfg.penalty_overlength;
        reward.penalty_applied = PenaltyKind::overlength;
        return reward;
    }
    if (!inputs.final_answer_well_formed) {
        reward.value = cfg.penalty_missing_final_answer;
        reward.penalty_applied = PenaltyKind::missing_final_answer;
        return reward;
    }
    if (inputs.command_count == 0) {
        reward.value = cfg.penalty_no_commands;
        reward.penalty_applied = PenaltyKind::no_commands;
        return reward;
    }
    if (!scores) {
        throw std::logic_error("compute_reward: rubric scores required when no penalty applies");
    }
    reward.graded = true;
    reward.s_pos_mean = scores->positive_mean();
    reward.s_pit_mean = scores->pitfall_mean();
    reward.s_fa_mean = scores->final_answer_mean();
    reward.value = (1.0 - cfg.alpha) * (reward.s_pos_mean - reward.s_pit_mean) +
                   cfg.alpha * reward.s_fa_mean;
    return reward;
}

Reward compute_reward(const std::optional<RubricScores>& scores, const SubagentOutcome& outcome,
                      const RewardConfig& cfg) {
    RewardInputs inputs;
    inputs.trajectory_tokens = outcome.trajectory.total_tokens();
    inputs.final_answer_well_formed = outcome.final_answer.well_formed;
    inputs.command_count = outcome.commands.size();
    return compute_reward(scores, inputs, cfg);
}

double population_stddev(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double variance = 0.0;
    for (double v : values) variance += (v - mean) * (v - mean);
    variance /= static_cast<double>(values.size());
    return std::sqrt(variance);
}

bool filter_group(std::span<const double> rewards, const RewardConfig& cfg) {
    return population_stddev(rewards) >= cfg.sigma_min;
}

} // namespace termharness
