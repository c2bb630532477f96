#include "termharness/grpo.hpp"

#include "termharness/errors.hpp"
#include "termharness/reward.hpp"

#include <algorithm>
#include <cmath>

namespace termharness {

std::vector<double> normalize_advantages(std::span<const double> rewards, const GrpoConfig& cfg) {
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    double sigma = population_stddev(rewards);
    double denom = std::max(sigma, cfg.sigma_guard);
    std::vector<double> advantages;
    advantages.reserve(rewards.size());
    for (double r : rewards) advantages.push_back((r - mean) / denom);
    return advantages;
}

double clipped_term(double ratio, double advantage, const GrpoConfig& cfg) {
    double clipped = std::clamp(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high);
    return std::min(ratio * advantage, clipped * advantage);
}

double kl_estimate(double logp_new, double logp_ref) {
    double t = logp_ref - logp_new;
    return std::exp(t) - t - 1.0;
}

GroupObjective clipped_objective(std::span<const RolloutLogprobs> group, const GrpoConfig& cfg) {
    if (group.empty()) throw Error(ErrorKind::NonFiniteInput, "empty group");
    std::vector<double> rewards;
    rewards.reserve(group.size());
    for (const auto& rollout : group) {
        if (!std::isfinite(rollout.logp_new) || !std::isfinite(rollout.logp_old) ||
            !std::isfinite(rollout.logp_ref) || !std::isfinite(rollout.reward)) {
            throw Error(ErrorKind::NonFiniteInput, "non-finite rollout logprob or reward");
        }
        rewards.push_back(rollout.reward);
    }
    std::vector<double> advantages = normalize_advantages(rewards, cfg);

    GroupObjective result;
    result.per_rollout.reserve(group.size());
    double term_sum = 0.0;
    double kl_sum = 0.0;
    for (size_t i = 0; i < group.size(); ++i) {
        RolloutObjective ro;
        ro.ratio = std::exp(group[i].logp_new - group[i].logp_old);
        ro.advantage = advantages[i];
        ro.term = clipped_term(ro.ratio, ro.advantage, cfg);
        ro.kl = kl_estimate(group[i].logp_new, group[i].logp_ref);
        term_sum += ro.term;
        kl_sum += ro.kl;
        result.per_rollout.push_back(ro);
    }
    double n = static_cast<double>(group.size());
    result.objective = term_sum / n - cfg.beta * (kl_sum / n);
    return result;
}

} // namespace termharness
