#include "termharness/config.hpp"

#include "termharness/errors.hpp"
#include "termharness/http_gateway.hpp"
#include "termharness/scripted_gateway.hpp"
#include "termharness/util.hpp"

#include <cctype>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>

namespace termharness {

namespace {

using Setter = std::function<void(Config&, const std::string&)>;

int64_t to_int(const std::string& key, const std::string& value) {
    try {
        size_t end = 0;
        int64_t parsed = std::stoll(value, &end);
        if (end != value.size()) throw std::invalid_argument("trailing characters");
        return parsed;
    } catch (const std::exception&) {
        throw Error(ErrorKind::ConfigInvalid, key + ": expected integer, got \"" + value + "\"");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        size_t end = 0;
        double parsed = std::stod(value, &end);
        if (end != value.size()) throw std::invalid_argument("trailing characters");
        return parsed;
    } catch (const std::exception&) {
        throw Error(ErrorKind::ConfigInvalid, key + ": expected number, got \"" + value + "\"");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    std::string lower = to_lower(value);
    if (lower == "true" || lower == "1" || lower == "yes") return true;
    if (lower == "false" || lower == "0" || lower == "no") return false;
    throw Error(ErrorKind::ConfigInvalid, key + ": expected boolean, got \"" + value + "\"");
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"gateway.backend", [](Config& c, const std::string& v) { c.gateway_backend = v; }},
        {"gateway.base_url", [](Config& c, const std::string& v) { c.gateway_base_url = v; }},
        {"gateway.api_key_env", [](Config& c, const std::string& v) { c.gateway_api_key_env = v; }},
        {"gateway.retries",
         [](Config& c, const std::string& v) { c.gateway_retries = static_cast<int>(to_int("gateway.retries", v)); }},
        {"gateway.retry_backoff_ms",
         [](Config& c, const std::string& v) { c.gateway_retry_backoff_ms = to_int("gateway.retry_backoff_ms", v); }},
        {"gateway.concurrency",
         [](Config& c, const std::string& v) { c.gateway_concurrency = static_cast<int>(to_int("gateway.concurrency", v)); }},
        {"gateway.subagent_model", [](Config& c, const std::string& v) { c.subagent_model = v; }},
        {"gateway.main_model", [](Config& c, const std::string& v) { c.main_model = v; }},
        {"gateway.plan_model", [](Config& c, const std::string& v) { c.plan_model = v; }},
        {"gateway.grader_model", [](Config& c, const std::string& v) { c.grader_model = v; }},
        {"gateway.judge_model", [](Config& c, const std::string& v) { c.judge_model = v; }},
        {"gateway.script_subagent", [](Config& c, const std::string& v) { c.script_subagent = v; }},
        {"gateway.script_main", [](Config& c, const std::string& v) { c.script_main = v; }},
        {"gateway.script_plan", [](Config& c, const std::string& v) { c.script_plan = v; }},
        {"gateway.script_grader", [](Config& c, const std::string& v) { c.script_grader = v; }},
        {"gateway.script_judge", [](Config& c, const std::string& v) { c.script_judge = v; }},
        {"sandbox.backend", [](Config& c, const std::string& v) { c.sandbox.backend = v; }},
        {"sandbox.shell", [](Config& c, const std::string& v) { c.sandbox.shell = v; }},
        {"sandbox.hard_timeout_ms",
         [](Config& c, const std::string& v) { c.sandbox.hard_timeout_ms = to_int("sandbox.hard_timeout_ms", v); }},
        {"sandbox.output_limit_bytes",
         [](Config& c, const std::string& v) {
             c.sandbox.output_limit_bytes = static_cast<size_t>(to_int("sandbox.output_limit_bytes", v));
         }},
        {"sandbox.container_name", [](Config& c, const std::string& v) { c.sandbox.container_name = v; }},
        {"sandbox.container_exec", [](Config& c, const std::string& v) { c.sandbox.container_exec = v; }},
        {"subagent.turn_limit",
         [](Config& c, const std::string& v) { c.subagent_turn_limit = static_cast<int>(to_int("subagent.turn_limit", v)); }},
        {"subagent.max_trajectory_tokens",
         [](Config& c, const std::string& v) {
             c.subagent_max_trajectory_tokens = to_int("subagent.max_trajectory_tokens", v);
         }},
        {"reward.alpha", [](Config& c, const std::string& v) { c.reward.alpha = to_double("reward.alpha", v); }},
        {"reward.penalty_overlength",
         [](Config& c, const std::string& v) { c.reward.penalty_overlength = to_double("reward.penalty_overlength", v); }},
        {"reward.penalty_missing_final_answer",
         [](Config& c, const std::string& v) {
             c.reward.penalty_missing_final_answer = to_double("reward.penalty_missing_final_answer", v);
         }},
        {"reward.penalty_no_commands",
         [](Config& c, const std::string& v) { c.reward.penalty_no_commands = to_double("reward.penalty_no_commands", v); }},
        {"reward.max_trajectory_tokens",
         [](Config& c, const std::string& v) { c.reward.max_trajectory_tokens = to_int("reward.max_trajectory_tokens", v); }},
        {"reward.sigma_min",
         [](Config& c, const std::string& v) { c.reward.sigma_min = to_double("reward.sigma_min", v); }},
        {"grpo.eps_low", [](Config& c, const std::string& v) { c.grpo.eps_low = to_double("grpo.eps_low", v); }},
        {"grpo.eps_high", [](Config& c, const std::string& v) { c.grpo.eps_high = to_double("grpo.eps_high", v); }},
        {"grpo.beta", [](Config& c, const std::string& v) { c.grpo.beta = to_double("grpo.beta", v); }},
        {"grpo.group_size",
         [](Config& c, const std::string& v) { c.grpo.group_size = static_cast<int>(to_int("grpo.group_size", v)); }},
        {"grpo.sigma_guard",
         [](Config& c, const std::string& v) { c.grpo.sigma_guard = to_double("grpo.sigma_guard", v); }},
        {"metrics.judge_n_after",
         [](Config& c, const std::string& v) { c.judge_n_after = static_cast<int>(to_int("metrics.judge_n_after", v)); }},
        {"metrics.strict_adjacency",
         [](Config& c, const std::string& v) { c.metrics_strict_adjacency = to_bool("metrics.strict_adjacency", v); }},
    };
    return table;
}

std::string env_name_for(const std::string& key) {
    std::string name = "TERMHARNESS_";
    for (char c : key) {
        if (c == '.') name += '_';
        else name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return name;
}

} // namespace

Config Config::load(const std::filesystem::path& path) {
    Config config;
    std::string text = read_text_file(path);
    size_t line_number = 0;
    for (const auto& raw : split_lines(text)) {
        ++line_number;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::ConfigInvalid,
                        path.string() + ":" + std::to_string(line_number) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        auto it = setters().find(key);
        if (it == setters().end()) {
            throw Error(ErrorKind::ConfigInvalid,
                        path.string() + ":" + std::to_string(line_number) + ": unknown key \"" + key +
                            "\"");
        }
        it->second(config, value);
    }
    config.apply_env_overrides();
    config.validate();
    return config;
}

Config Config::defaults_with_env() {
    Config config;
    config.apply_env_overrides();
    config.validate();
    return config;
}

void Config::apply_env_overrides() {
    for (const auto& [key, setter] : setters()) {
        const char* value = std::getenv(env_name_for(key).c_str());
        if (value != nullptr) setter(*this, value);
    }
}

void Config::validate() const {
    if (gateway_backend != "scripted" && gateway_backend != "http") {
        throw Error(ErrorKind::ConfigInvalid, "gateway.backend must be scripted or http");
    }
    if (sandbox.backend != "local" && sandbox.backend != "container") {
        throw Error(ErrorKind::ConfigInvalid, "sandbox.backend must be local or container");
    }
    if (subagent_turn_limit < 1) {
        throw Error(ErrorKind::ConfigInvalid, "subagent.turn_limit must be >= 1");
    }
    if (reward.alpha < 0.0 || reward.alpha > 1.0) {
        throw Error(ErrorKind::ConfigInvalid, "reward.alpha must be in [0, 1]");
    }
    if (grpo.eps_low <= 0.0 || grpo.eps_high < grpo.eps_low) {
        throw Error(ErrorKind::ConfigInvalid, "grpo clip thresholds need 0 < eps_low <= eps_high");
    }
    if (grpo.group_size < 2) {
        throw Error(ErrorKind::ConfigInvalid, "grpo.group_size must be >= 2");
    }
    if (judge_n_after < 0) {
        throw Error(ErrorKind::ConfigInvalid, "metrics.judge_n_after must be >= 0");
    }
}

SubagentConfig Config::subagent_config() const {
    SubagentConfig sub;
    sub.turn_limit = subagent_turn_limit;
    sub.model = subagent_model;
    sub.max_trajectory_tokens = subagent_max_trajectory_tokens;
    sub.timeout_ceiling_ms = sandbox.hard_timeout_ms;
    return sub;
}

std::string Config::model_for(GatewayRole role) const {
    switch (role) {
        case GatewayRole::subagent: return subagent_model;
        case GatewayRole::main: return main_model;
        case GatewayRole::plan: return plan_model;
        case GatewayRole::grader: return grader_model;
        case GatewayRole::judge: return judge_model;
    }
    return subagent_model;
}

GatewayFactory Config::gateway_factory(GatewayRole role) const {
    if (gateway_backend == "scripted") {
        std::string path;
        switch (role) {
            case GatewayRole::subagent: path = script_subagent; break;
            case GatewayRole::main: path = script_main; break;
            case GatewayRole::plan: path = script_plan; break;
            case GatewayRole::grader: path = script_grader; break;
            case GatewayRole::judge: path = script_judge; break;
        }
        if (path.empty()) {
            throw Error(ErrorKind::ConfigInvalid,
                        "scripted backend needs a gateway.script_* fixture for this role");
        }
        Script script = Script::from_file(path);
        return [script]() { return std::make_unique<ScriptedGateway>(script); };
    }

    HttpGatewaySettings settings;
    settings.base_url = gateway_base_url;
    settings.retries = gateway_retries;
    settings.retry_backoff_ms = gateway_retry_backoff_ms;
    const char* key = std::getenv(gateway_api_key_env.c_str());
    if (key != nullptr) settings.api_key = key;
    auto cap = std::make_shared<ConcurrencyCap>(gateway_concurrency);
    return [settings, cap]() -> std::unique_ptr<ChatGateway> {
        return std::make_unique<CappedGateway>(std::make_unique<HttpGateway>(settings), cap);
    };
}

} // namespace termharness
