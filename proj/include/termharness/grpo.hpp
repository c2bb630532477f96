#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace termharness {

struct GrpoConfig {
    double eps_low = 0.20;   // clip floor at 1 - eps_low
    double eps_high = 0.28;  // clip ceiling at 1 + eps_high
    double beta = 0.02;      // KL penalty weight
    int group_size = 8;
    double sigma_guard = 1e-8; // lower bound on sigma for degenerate groups
};

// Sequence-level log-probabilities of one rollout under the three policies
// involved, plus its scalar reward.
struct RolloutLogprobs {
    double logp_new = 0.0; // current policy
    double logp_old = 0.0; // behavior policy the rollout was sampled from
    double logp_ref = 0.0; // reference policy for the KL penalty
    double reward = 0.0;
};

// A_i = (r_i - mean) / max(sigma, sigma_guard), population sigma.
std::vector<double> normalize_advantages(std::span<const double> rewards, const GrpoConfig& cfg);

// min(ratio * adv, clip(ratio, 1 - eps_low, 1 + eps_high) * adv).
double clipped_term(double ratio, double advantage, const GrpoConfig& cfg);

// Non-negative k3 estimator on the sequence log-ratio t = logp_ref - logp_new:
// exp(t) - t - 1.
double kl_estimate(double logp_new, double logp_ref);

struct RolloutObjective {
    double ratio = 0.0;
    double advantage = 0.0;
    double term = 0.0;
    double kl = 0.0;
};

struct GroupObjective {
    double objective = 0.0; // mean(term) - beta * mean(kl)
    std::vector<RolloutObjective> per_rollout;
};

// Evaluates the group objective over supplied log-probabilities. Throws
// NonFiniteInput on non-finite inputs; no parameter updates happen here.
GroupObjective clipped_objective(std::span<const RolloutLogprobs> group, const GrpoConfig& cfg);

} // namespace termharness
