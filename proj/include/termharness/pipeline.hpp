#pragma once

#include "termharness/config.hpp"
#include "termharness/metrics.hpp"
#include "termharness/rollout.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace termharness {

struct PipelineOptions {
    std::filesystem::path manifest;
    std::filesystem::path out_dir;
    int group_size = 8;
    int parallelism = 4;
    PassthroughMode mode = PassthroughMode::deterministic;
};

struct RewardRow {
    std::string instance_id;
    int group_index = 0;
    double value = 0.0;
    double s_pos_mean = 0.0;
    double s_pit_mean = 0.0;
    double s_fa_mean = 0.0;
    std::string penalty_applied; // empty when graded
    bool kept = true;            // sigma filter verdict for the whole group
};

std::string reward_row_to_json_text(const RewardRow& row);
RewardRow reward_row_from_json_text(std::string_view text);
std::vector<RewardRow> load_rewards_jsonl(const std::filesystem::path& path);

// Plan extraction and grading over recorded rollouts, with explicit paths
// (shared by the pipeline stages and the standalone CLI commands).
void extract_plans(const std::vector<RolloutRecord>& records, const std::filesystem::path& plans_dir,
                   const Config& config);
std::vector<RewardRow> grade_rollouts(const std::vector<RolloutRecord>& records,
                                      const std::vector<TaskInstance>& instances,
                                      const std::filesystem::path& plans_dir, const Config& config);
void write_rewards_jsonl(const std::vector<RewardRow>& rows, const std::filesystem::path& path);

// Individual stages; each writes a .done marker under out_dir and is skipped
// when its marker already exists.
std::vector<RolloutRecord> stage_rollout(const std::vector<TaskInstance>& instances,
                                         const PipelineOptions& options, const Config& config);
void stage_plans(const std::vector<RolloutRecord>& records, const PipelineOptions& options,
                 const Config& config);
std::vector<RewardRow> stage_grade(const std::vector<RolloutRecord>& records,
                                   const std::vector<TaskInstance>& instances,
                                   const PipelineOptions& options, const Config& config);

struct PipelineResult {
    size_t instance_count = 0;
    size_t rollout_count = 0;
    size_t groups_kept = 0;
    size_t groups_total = 0;
    std::filesystem::path rewards_path;
};

// rollout -> plan -> grade -> filter. Idempotent per output directory.
PipelineResult run_pipeline(const PipelineOptions& options, const Config& config);

// Offline objective evaluation: joins rewards.jsonl with logprobs.jsonl rows
// {instance_id, group_index, logp_new, logp_old, logp_ref} and evaluates the
// group objective per instance.
struct GrpoEvalGroup {
    std::string instance_id;
    std::vector<int> group_indices;
    GroupObjective objective;
};

struct GrpoEvalResult {
    std::vector<GrpoEvalGroup> groups;
    double mean_objective = 0.0;
};

GrpoEvalResult run_grpo_eval(const std::filesystem::path& rewards_path,
                             const std::filesystem::path& logprobs_path, const GrpoConfig& cfg);
std::string grpo_eval_to_json_text(const GrpoEvalResult& result);

// Judges every recorded subagent call under a rollout directory; one JSONL
// row per call.
struct JudgeRow {
    std::string instance_id;
    int group_index = 0;
    double task_completion = 0.0;
    double factual_accuracy = 0.0;
    double informativeness = 0.0;
    double relevance = 0.0;
    double actionability = 0.0;
    double overall = 0.0;
    int turns_available = 0;
};

std::vector<JudgeRow> run_judge(const std::filesystem::path& runs_dir, int n_after,
                                const GatewayFactory& judge_gateway, const std::string& model);
std::string judge_rows_to_jsonl(const std::vector<JudgeRow>& rows);

// Behavioral metrics over every rollout record under runs_dir.
MetricsReport run_report(const std::filesystem::path& runs_dir, const ModelTagMap& tags,
                         const MetricsOptions& options = {});

} // namespace termharness
