#pragma once

#include "termharness/gateway.hpp"
#include "termharness/grpo.hpp"
#include "termharness/reward.hpp"
#include "termharness/subagent.hpp"
#include "termharness/terminal.hpp"

#include <filesystem>
#include <string>

namespace termharness {

// Which model/script a gateway is built for.
enum class GatewayRole { subagent, main, plan, grader, judge };

// Runtime configuration: a flat key = value file with TERMHARNESS_*
// environment overrides. Unknown keys are rejected at load.
struct Config {
    // gateway.*
    std::string gateway_backend = "scripted"; // scripted | http
    std::string gateway_base_url = "http://localhost:8000/v1";
    std::string gateway_api_key_env = "LLM_API_KEY";
    int gateway_retries = 3;
    int64_t gateway_retry_backoff_ms = 250;
    int gateway_concurrency = 4;
    std::string subagent_model = "subagent-model";
    std::string main_model = "main-model";
    std::string plan_model = "plan-model";
    std::string grader_model = "grader-model";
    std::string judge_model = "judge-model";
    std::string script_subagent;
    std::string script_main;
    std::string script_plan;
    std::string script_grader;
    std::string script_judge;

    // sandbox.*
    SandboxSettings sandbox;

    // subagent.*
    int subagent_turn_limit = 10;
    int64_t subagent_max_trajectory_tokens = 30000;

    // reward.* and grpo.*
    RewardConfig reward;
    GrpoConfig grpo;

    // metrics.*
    int judge_n_after = 5;
    bool metrics_strict_adjacency = false;

    static Config load(const std::filesystem::path& path);
    static Config defaults_with_env();

    void validate() const;
    void apply_env_overrides();

    SubagentConfig subagent_config() const;
    GatewayFactory gateway_factory(GatewayRole role) const;
    std::string model_for(GatewayRole role) const;
};

} // namespace termharness
