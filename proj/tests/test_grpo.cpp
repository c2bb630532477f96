#include "termharness/grpo.hpp"

#include "termharness/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace termharness;

TEST_CASE("normalize_advantages: normalization identity") {
    GrpoConfig cfg;
    std::vector<double> rewards{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<double> advantages = normalize_advantages(rewards, cfg);

    double mean = 0.0;
    for (double a : advantages) mean += a;
    mean /= static_cast<double>(advantages.size());
    CHECK(std::abs(mean) < 1e-12);

    double var = 0.0;
    for (double a : advantages) var += (a - mean) * (a - mean);
    double stddev = std::sqrt(var / static_cast<double>(advantages.size()));
    CHECK(stddev == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize_advantages: degenerate group goes through the sigma guard") {
    GrpoConfig cfg;
    std::vector<double> rewards(8, 42.0);
    for (double a : normalize_advantages(rewards, cfg)) CHECK(a == 0.0);
}

TEST_CASE("normalize_advantages: two-point group lands on unit advantages") {
    GrpoConfig cfg;
    std::vector<double> rewards{0.0, 10.0}; // mean 5, sigma 5
    std::vector<double> advantages = normalize_advantages(rewards, cfg);
    CHECK(advantages[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(advantages[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("clipped_term: worked examples with the asymmetric thresholds") {
    GrpoConfig cfg;
    CHECK(clipped_term(2.0, 1.0, cfg) == doctest::Approx(1.28).epsilon(1e-15));
    CHECK(clipped_term(0.5, -1.0, cfg) == doctest::Approx(-0.80).epsilon(1e-15));
    CHECK(clipped_term(1.0, 0.7, cfg) == doctest::Approx(0.7));
}

TEST_CASE("clipped_term: clip is inert inside the trust region") {
    GrpoConfig cfg;
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> ratio_dist(0.80, 1.28);
    std::uniform_real_distribution<double> adv_dist(-3.0, 3.0);
    for (int i = 0; i < 500; ++i) {
        double ratio = ratio_dist(rng);
        double advantage = adv_dist(rng);
        CHECK(clipped_term(ratio, advantage, cfg) == ratio * advantage);
    }
}

TEST_CASE("kl_estimate: zero at equality, positive elsewhere, hand value") {
    CHECK(kl_estimate(-12.5, -12.5) == 0.0);
    double t = std::log(2.0);
    CHECK(kl_estimate(-1.0, -1.0 + t) == doctest::Approx(2.0 - std::log(2.0) - 1.0).epsilon(1e-12));

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> dist(-20.0, 20.0);
    for (int i = 0; i < 1000; ++i) {
        CHECK(kl_estimate(dist(rng), dist(rng)) >= 0.0);
    }
}

TEST_CASE("clipped_objective: on-policy with zero beta is exactly zero") {
    GrpoConfig cfg;
    cfg.beta = 0.0;
    std::vector<RolloutLogprobs> group;
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> reward_dist(-100.0, 100.0);
    for (int i = 0; i < 8; ++i) {
        double logp = -50.0 + static_cast<double>(i);
        group.push_back({logp, logp, logp, reward_dist(rng)});
    }
    GroupObjective result = clipped_objective(group, cfg);
    CHECK(std::abs(result.objective) < 1e-12);
    for (const auto& rollout : result.per_rollout) CHECK(rollout.ratio == 1.0);
}

TEST_CASE("clipped_objective: worked two-rollout group") {
    GrpoConfig cfg;
    cfg.beta = 0.0;
    // Rewards [0, 10] give advantages [-1, +1]; log-ratios ln(0.5) and ln(2).
    std::vector<RolloutLogprobs> group{
        {-10.0 + std::log(0.5), -10.0, -10.0, 0.0},
        {-10.0 + std::log(2.0), -10.0, -10.0, 10.0},
    };
    GroupObjective result = clipped_objective(group, cfg);
    REQUIRE(result.per_rollout.size() == 2);
    CHECK(result.per_rollout[0].advantage == doctest::Approx(-1.0));
    CHECK(result.per_rollout[0].ratio == doctest::Approx(0.5));
    CHECK(result.per_rollout[0].term == doctest::Approx(-0.80));
    CHECK(result.per_rollout[1].advantage == doctest::Approx(1.0));
    CHECK(result.per_rollout[1].term == doctest::Approx(1.28));
    CHECK(result.objective == doctest::Approx((1.28 - 0.80) / 2.0).epsilon(1e-12));
}

TEST_CASE("clipped_objective: reward shift invariance") {
    GrpoConfig cfg;
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    for (int round = 0; round < 50; ++round) {
        std::vector<RolloutLogprobs> group;
        for (int i = 0; i < 8; ++i) {
            double base = dist(rng) - 30.0;
            group.push_back({base + dist(rng) * 0.1, base, base + dist(rng) * 0.1, dist(rng) * 20});
        }
        std::vector<RolloutLogprobs> shifted = group;
        double shift = dist(rng) * 100;
        for (auto& rollout : shifted) rollout.reward += shift;

        GroupObjective a = clipped_objective(group, cfg);
        GroupObjective b = clipped_objective(shifted, cfg);
        CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-9));
    }
}

TEST_CASE("clipped_objective: finite-difference gradient direction") {
    GrpoConfig cfg; // beta 0.02 included
    std::vector<RolloutLogprobs> group{
        {-20.0, -20.0, -20.1, 0.0},
        {-21.0, -21.0, -21.2, 10.0}, // positive advantage, ratio 1 (unclipped)
    };

    const double h = 1e-6;
    auto objective_at = [&](double delta) {
        std::vector<RolloutLogprobs> perturbed = group;
        perturbed[1].logp_new += delta;
        return clipped_objective(perturbed, cfg).objective;
    };

    double plus = objective_at(h);
    double minus = objective_at(-h);
    CHECK(plus > objective_at(0.0)); // upward perturbation helps
    double numeric = (plus - minus) / (2 * h);

    // Analytic: d/dlogp [ratio * A]/G - beta/G * d kl/dlogp, with
    // kl = exp(t) - t - 1, t = ref - new, dkl/dlogp_new = -exp(t) + 1.
    double ratio = std::exp(group[1].logp_new - group[1].logp_old);
    double advantage = 1.0; // two-point group, high reward side
    double t = group[1].logp_ref - group[1].logp_new;
    double analytic = (ratio * advantage) / 2.0 - cfg.beta * (1.0 - std::exp(t)) / 2.0;
    CHECK(numeric == doctest::Approx(analytic).epsilon(1e-3));
}

TEST_CASE("clipped_objective: non-finite input raises") {
    GrpoConfig cfg;
    std::vector<RolloutLogprobs> group{{std::nan(""), -1.0, -1.0, 0.0}, {-1.0, -1.0, -1.0, 1.0}};
    try {
        clipped_objective(group, cfg);
        FAIL("expected NonFiniteInput");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonFiniteInput);
    }
}

TEST_CASE("clipped_objective matches a hand-coded per-rollout oracle on random groups") {
    GrpoConfig cfg;
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> logp(-80.0, -1.0);
    std::uniform_real_distribution<double> jitter(-0.4, 0.4);
    std::uniform_real_distribution<double> reward(-100.0, 100.0);

    for (int round = 0; round < 200; ++round) {
        std::vector<RolloutLogprobs> group;
        for (int i = 0; i < cfg.group_size; ++i) {
            double old_logp = logp(rng);
            group.push_back({old_logp + jitter(rng), old_logp, old_logp + jitter(rng), reward(rng)});
        }

        // Oracle: direct transcription of the objective, one rollout at a time.
        double mean = 0.0;
        for (const auto& r : group) mean += r.reward;
        mean /= static_cast<double>(group.size());
        double variance = 0.0;
        for (const auto& r : group) variance += (r.reward - mean) * (r.reward - mean);
        double sigma = std::sqrt(variance / static_cast<double>(group.size()));
        double denom = std::max(sigma, cfg.sigma_guard);

        double term_sum = 0.0;
        double kl_sum = 0.0;
        for (const auto& r : group) {
            double advantage = (r.reward - mean) / denom;
            double ratio = std::exp(r.logp_new - r.logp_old);
            double clipped = ratio;
            if (clipped < 1.0 - cfg.eps_low) clipped = 1.0 - cfg.eps_low;
            if (clipped > 1.0 + cfg.eps_high) clipped = 1.0 + cfg.eps_high;
            double term = std::min(ratio * advantage, clipped * advantage);
            double t = r.logp_ref - r.logp_new;
            term_sum += term;
            kl_sum += std::exp(t) - t - 1.0;
        }
        double n = static_cast<double>(group.size());
        double expected = term_sum / n - cfg.beta * kl_sum / n;

        GroupObjective actual = clipped_objective(group, cfg);
        CHECK(actual.objective == doctest::Approx(expected).epsilon(1e-9));
    }
}
