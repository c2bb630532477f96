#include "termharness/pipeline.hpp"

#include "termharness/errors.hpp"
#include "termharness/judge.hpp"
#include "termharness/log.hpp"
#include "termharness/plan.hpp"
#include "termharness/rubric.hpp"
#include "termharness/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace termharness {

namespace {

bool stage_done(const fs::path& marker) { return fs::exists(marker); }

void mark_done(const fs::path& marker) {
    fs::create_directories(marker.parent_path());
    write_text_file(marker, "done\n");
}

RewardInputs inputs_for(const RolloutRecord& record) {
    RewardInputs inputs;
    inputs.trajectory_tokens = record.outcome.trajectory.total_tokens();
    inputs.final_answer_well_formed = record.outcome.final_answer.well_formed;
    inputs.command_count = record.outcome.commands.size();
    return inputs;
}

bool penalty_would_apply(const RolloutRecord& record, const RewardConfig& cfg) {
    RewardInputs inputs = inputs_for(record);
    return inputs.trajectory_tokens > cfg.max_trajectory_tokens ||
           !inputs.final_answer_well_formed || inputs.command_count == 0;
}

fs::path plan_path(const fs::path& plans_dir, const RolloutRecord& record) {
    return plans_dir / record.instance_id / ("g" + std::to_string(record.group_index) + ".json");
}

} // namespace

std::string reward_row_to_json_text(const RewardRow& row) {
    json j{{"instance_id", row.instance_id},
           {"group_index", row.group_index},
           {"value", row.value},
           {"s_pos_mean", row.s_pos_mean},
           {"s_pit_mean", row.s_pit_mean},
           {"s_fa_mean", row.s_fa_mean},
           {"penalty_applied", row.penalty_applied.empty() ? json(nullptr) : json(row.penalty_applied)},
           {"kept", row.kept}};
    return j.dump();
}

RewardRow reward_row_from_json_text(std::string_view text) {
    json j = json::parse(text);
    RewardRow row;
    row.instance_id = j.at("instance_id").get<std::string>();
    row.group_index = j.at("group_index").get<int>();
    row.value = j.at("value").get<double>();
    row.s_pos_mean = j.value("s_pos_mean", 0.0);
    row.s_pit_mean = j.value("s_pit_mean", 0.0);
    row.s_fa_mean = j.value("s_fa_mean", 0.0);
    if (j.contains("penalty_applied") && !j.at("penalty_applied").is_null()) {
        row.penalty_applied = j.at("penalty_applied").get<std::string>();
    }
    row.kept = j.value("kept", true);
    return row;
}

std::vector<RewardRow> load_rewards_jsonl(const fs::path& path) {
    std::vector<RewardRow> rows;
    for (const auto& line : split_lines(read_text_file(path))) {
        if (trim(line).empty()) continue;
        rows.push_back(reward_row_from_json_text(line));
    }
    return rows;
}

std::vector<RolloutRecord> stage_rollout(const std::vector<TaskInstance>& instances,
                                         const PipelineOptions& options, const Config& config) {
    fs::path rollouts_dir = options.out_dir / "rollouts";
    fs::path marker = rollouts_dir / ".done";
    if (stage_done(marker)) {
        log::info("rollout stage already complete, loading records");
        return load_rollout_records(rollouts_dir);
    }

    RolloutOptions rollout_options;
    rollout_options.mode = options.mode;
    rollout_options.subagent = config.subagent_config();
    rollout_options.sandbox = config.sandbox;
    rollout_options.main_model = config.main_model;
    rollout_options.subagent_gateway = config.gateway_factory(GatewayRole::subagent);
    if (options.mode == PassthroughMode::llm) {
        rollout_options.main_gateway = config.gateway_factory(GatewayRole::main);
    }

    std::vector<RolloutRecord> records =
        run_rollout_batch(instances, options.group_size, options.parallelism, rollout_options);
    for (const auto& record : records) save_rollout_record(record, rollouts_dir);
    mark_done(marker);
    return records;
}

void extract_plans(const std::vector<RolloutRecord>& records, const fs::path& plans_dir,
                   const Config& config) {
    // One gateway per stage: scripted cursors advance across rollouts in
    // record order, which is deterministic.
    auto gateway = config.gateway_factory(GatewayRole::plan)();
    for (const auto& record : records) {
        if (!record.error.empty()) continue;
        if (penalty_would_apply(record, config.reward)) continue; // grading short-circuits
        std::string query;
        for (const auto& message : record.outcome.trajectory.messages) {
            if (message.role == Role::user) {
                query = message.content;
                break;
            }
        }
        try {
            ExecutionPlan plan = extract_execution_plan(query, record.outcome.commands,
                                                        record.outcome.final_answer.raw_text,
                                                        *gateway, config.plan_model);
            write_text_file(plan_path(plans_dir, record), plan_to_json_text(plan) + "\n");
        } catch (const Error& e) {
            // Per-rollout failure: the missing plan file turns into the
            // failure penalty at grading time, the rest of the batch proceeds.
            log::warn("plan extraction failed for " + record.instance_id + "/g" +
                      std::to_string(record.group_index) + ": " + e.what());
        }
    }
}

std::vector<RewardRow> grade_rollouts(const std::vector<RolloutRecord>& records,
                                      const std::vector<TaskInstance>& instances,
                                      const fs::path& plans_dir, const Config& config) {
    std::map<std::string, const TaskInstance*> by_id;
    for (const auto& instance : instances) by_id[instance.id] = &instance;

    auto grader = config.gateway_factory(GatewayRole::grader)();

    std::vector<RewardRow> rows;
    for (const auto& record : records) {
        RewardRow row;
        row.instance_id = record.instance_id;
        row.group_index = record.group_index;

        Reward reward;
        if (!record.error.empty()) {
            // Failed rollouts (gateway/spawn crashes) carry the no-commands
            // penalty so the group stays complete.
            reward.value = config.reward.penalty_no_commands;
            reward.penalty_applied = PenaltyKind::no_commands;
        } else if (penalty_would_apply(record, config.reward)) {
            reward = compute_reward(std::nullopt, inputs_for(record), config.reward);
        } else {
            auto instance_it = by_id.find(record.instance_id);
            if (instance_it == by_id.end()) {
                throw Error(ErrorKind::ManifestInvalid,
                            "rollout references unknown instance " + record.instance_id);
            }
            try {
                ExecutionPlan candidate =
                    plan_from_json_text(read_text_file(plan_path(plans_dir, record)));
                RubricScores scores = grade_rubric(candidate, instance_it->second->reference_plan,
                                                   instance_it->second->query, *grader,
                                                   config.grader_model);
                reward = compute_reward(scores, inputs_for(record), config.reward);
            } catch (const Error& e) {
                // Missing plan or a grader that never produced a parseable
                // block: score it like a failed rollout.
                log::warn("grading failed for " + record.instance_id + "/g" +
                          std::to_string(record.group_index) + ": " + e.what());
                reward = Reward{};
                reward.value = config.reward.penalty_no_commands;
                reward.penalty_applied = PenaltyKind::no_commands;
            }
        }
        row.value = reward.value;
        row.s_pos_mean = reward.s_pos_mean;
        row.s_pit_mean = reward.s_pit_mean;
        row.s_fa_mean = reward.s_fa_mean;
        if (reward.penalty_applied) row.penalty_applied = to_string(*reward.penalty_applied);
        rows.push_back(std::move(row));
    }

    // Sigma filter per instance group.
    std::map<std::string, std::vector<double>> groups;
    for (const auto& row : rows) groups[row.instance_id].push_back(row.value);
    for (auto& row : rows) {
        row.kept = filter_group(groups[row.instance_id], config.reward);
    }

    std::sort(rows.begin(), rows.end(), [](const RewardRow& a, const RewardRow& b) {
        return a.instance_id != b.instance_id ? a.instance_id < b.instance_id
                                              : a.group_index < b.group_index;
    });
    return rows;
}

void write_rewards_jsonl(const std::vector<RewardRow>& rows, const fs::path& path) {
    std::string out;
    for (const auto& row : rows) out += reward_row_to_json_text(row) + "\n";
    write_text_file(path, out);
}

void stage_plans(const std::vector<RolloutRecord>& records, const PipelineOptions& options,
                 const Config& config) {
    fs::path marker = options.out_dir / "plans" / ".done";
    if (stage_done(marker)) {
        log::info("plan stage already complete");
        return;
    }
    extract_plans(records, options.out_dir / "plans", config);
    mark_done(marker);
}

std::vector<RewardRow> stage_grade(const std::vector<RolloutRecord>& records,
                                   const std::vector<TaskInstance>& instances,
                                   const PipelineOptions& options, const Config& config) {
    fs::path rewards_path = options.out_dir / "rewards.jsonl";
    fs::path marker = options.out_dir / ".graded";
    if (stage_done(marker)) {
        log::info("grade stage already complete, loading rewards");
        return load_rewards_jsonl(rewards_path);
    }
    std::vector<RewardRow> rows = grade_rollouts(records, instances, options.out_dir / "plans", config);
    write_rewards_jsonl(rows, rewards_path);
    mark_done(marker);
    return rows;
}

PipelineResult run_pipeline(const PipelineOptions& options, const Config& config) {
    ManifestLoad load = load_manifest(options.manifest);
    fs::create_directories(options.out_dir);
    if (!load.failed.empty()) {
        std::string lines;
        for (const auto& failure : load.failed) {
            lines += json{{"instance_id", failure.id}, {"reason", failure.reason}}.dump() + "\n";
            log::warn("instance " + failure.id + " failed at load: " + failure.reason);
        }
        write_text_file(options.out_dir / "load_failures.jsonl", lines);
    }

    std::vector<RolloutRecord> records = stage_rollout(load.instances, options, config);
    stage_plans(records, options, config);
    std::vector<RewardRow> rows = stage_grade(records, load.instances, options, config);

    PipelineResult result;
    result.instance_count = load.instances.size();
    result.rollout_count = records.size();
    result.rewards_path = options.out_dir / "rewards.jsonl";
    std::map<std::string, bool> kept_by_instance;
    for (const auto& row : rows) kept_by_instance[row.instance_id] = row.kept;
    result.groups_total = kept_by_instance.size();
    for (const auto& [id, kept] : kept_by_instance) {
        if (kept) ++result.groups_kept;
    }
    return result;
}

GrpoEvalResult run_grpo_eval(const fs::path& rewards_path, const fs::path& logprobs_path,
                             const GrpoConfig& cfg) {
    std::vector<RewardRow> rewards = load_rewards_jsonl(rewards_path);

    struct Logprobs {
        double logp_new, logp_old, logp_ref;
    };
    std::map<std::pair<std::string, int>, Logprobs> logprobs;
    for (const auto& line : split_lines(read_text_file(logprobs_path))) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        logprobs[{j.at("instance_id").get<std::string>(), j.at("group_index").get<int>()}] = {
            j.at("logp_new").get<double>(), j.at("logp_old").get<double>(),
            j.at("logp_ref").get<double>()};
    }

    std::map<std::string, std::vector<std::pair<int, RolloutLogprobs>>> groups;
    for (const auto& row : rewards) {
        if (!row.kept) continue; // filtered groups carry no gradient signal
        auto it = logprobs.find({row.instance_id, row.group_index});
        if (it == logprobs.end()) {
            throw Error(ErrorKind::ManifestInvalid,
                        "no logprobs for " + row.instance_id + "/g" + std::to_string(row.group_index));
        }
        groups[row.instance_id].push_back(
            {row.group_index,
             {it->second.logp_new, it->second.logp_old, it->second.logp_ref, row.value}});
    }

    GrpoEvalResult result;
    double sum = 0.0;
    for (auto& [instance_id, members] : groups) {
        std::sort(members.begin(), members.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        GrpoEvalGroup group;
        group.instance_id = instance_id;
        std::vector<RolloutLogprobs> rollouts;
        for (const auto& [index, lp] : members) {
            group.group_indices.push_back(index);
            rollouts.push_back(lp);
        }
        group.objective = clipped_objective(rollouts, cfg);
        sum += group.objective.objective;
        result.groups.push_back(std::move(group));
    }
    if (!result.groups.empty()) result.mean_objective = sum / static_cast<double>(result.groups.size());
    return result;
}

std::string grpo_eval_to_json_text(const GrpoEvalResult& result) {
    json groups = json::array();
    for (const auto& group : result.groups) {
        json per_rollout = json::array();
        for (size_t i = 0; i < group.objective.per_rollout.size(); ++i) {
            const auto& rollout = group.objective.per_rollout[i];
            per_rollout.push_back({{"group_index", group.group_indices[i]},
                                   {"ratio", rollout.ratio},
                                   {"advantage", rollout.advantage},
                                   {"term", rollout.term},
                                   {"kl", rollout.kl}});
        }
        groups.push_back({{"instance_id", group.instance_id},
                          {"objective", group.objective.objective},
                          {"per_rollout", std::move(per_rollout)}});
    }
    json j{{"groups", std::move(groups)}, {"mean_objective", result.mean_objective}};
    return j.dump(2) + "\n";
}

std::vector<JudgeRow> run_judge(const fs::path& runs_dir, int n_after,
                                const GatewayFactory& judge_gateway, const std::string& model) {
    std::vector<RolloutRecord> records = load_rollout_records(runs_dir);
    auto gateway = judge_gateway();

    std::vector<JudgeRow> rows;
    for (const auto& record : records) {
        if (!record.error.empty()) continue;
        const auto& messages = record.main_trajectory.messages;
        for (size_t i = 0; i < messages.size(); ++i) {
            if (messages[i].role != Role::assistant) continue;
            bool has_subagent_call = false;
            for (const auto& call : messages[i].tool_calls) {
                if (call.name == "ExecutionSubagent") has_subagent_call = true;
            }
            if (!has_subagent_call) continue;

            JudgeInputs inputs = build_judge_inputs(record.main_trajectory, i, n_after);
            JudgeScore score = judge_response(inputs, *gateway, model);
            rows.push_back({record.instance_id, record.group_index, score.task_completion,
                            score.factual_accuracy, score.informativeness, score.relevance,
                            score.actionability, score.overall, inputs.turns_available});
        }
    }
    return rows;
}

std::string judge_rows_to_jsonl(const std::vector<JudgeRow>& rows) {
    std::string out;
    for (const auto& row : rows) {
        json j{{"instance_id", row.instance_id},
               {"group_index", row.group_index},
               {"task_completion", row.task_completion},
               {"factual_accuracy", row.factual_accuracy},
               {"informativeness", row.informativeness},
               {"relevance", row.relevance},
               {"actionability", row.actionability},
               {"overall", row.overall},
               {"turns_available", row.turns_available}};
        out += j.dump() + "\n";
    }
    return out;
}

MetricsReport run_report(const fs::path& runs_dir, const ModelTagMap& tags,
                         const MetricsOptions& options) {
    std::vector<RolloutRecord> records = load_rollout_records(runs_dir);
    std::vector<InstanceMetrics> per_rollout;
    for (const auto& record : records) {
        if (!record.error.empty()) continue;
        per_rollout.push_back(
            compute_metrics(record.main_trajectory, {record.outcome}, tags, options));
    }
    return aggregate_metrics(per_rollout);
}

} // namespace termharness
