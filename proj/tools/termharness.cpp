#include "termharness/config.hpp"
#include "termharness/errors.hpp"
#include "termharness/log.hpp"
#include "termharness/metrics.hpp"
#include "termharness/pipeline.hpp"
#include "termharness/rollout.hpp"
#include "termharness/subagent.hpp"
#include "termharness/util.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>

using namespace termharness;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void print_error(const std::string& kind, const std::string& message) {
    json j{{"error", {{"kind", kind}, {"message", message}}}};
    std::fprintf(stderr, "%s\n", j.dump().c_str());
}

Config make_config(const std::string& config_path) {
    return config_path.empty() ? Config::defaults_with_env() : Config::load(config_path);
}

PassthroughMode parse_mode(const std::string& mode) {
    if (mode == "deterministic") return PassthroughMode::deterministic;
    if (mode == "llm") return PassthroughMode::llm;
    throw Error(ErrorKind::ConfigInvalid, "mode must be deterministic or llm");
}

int cmd_subagent(const Config& config, const std::string& query, const std::string& description,
                 const fs::path& workdir, const fs::path& out_dir) {
    SubagentConfig subagent = config.subagent_config();
    subagent.workdir = workdir;
    auto gateway = config.gateway_factory(GatewayRole::subagent)();
    auto executor = make_executor(config.sandbox);

    SubagentOutcome outcome = run_subagent({query, description}, subagent, *gateway, *executor);

    fs::create_directories(out_dir);
    save_trajectory(outcome.trajectory, out_dir / "trajectory.jsonl");
    write_text_file(out_dir / "final_answer.txt", outcome.final_answer.raw_text);

    json summary{{"turns_used", outcome.turns_used},
                 {"coaxed", outcome.coaxed},
                 {"commands", outcome.commands.size()},
                 {"well_formed", outcome.final_answer.well_formed},
                 {"trajectory_tokens", outcome.trajectory.total_tokens()},
                 {"token_counter", default_token_counter().name()}};
    std::printf("%s\n", summary.dump(2).c_str());
    return outcome.final_answer.well_formed ? 0 : 1;
}

int cmd_rollout(const Config& config, const fs::path& manifest, int group_size, int parallelism,
                const std::string& mode, const fs::path& out_dir) {
    ManifestLoad load = load_manifest(manifest);
    for (const auto& failure : load.failed) {
        log::warn("instance " + failure.id + " failed at load: " + failure.reason);
    }

    RolloutOptions options;
    options.mode = parse_mode(mode);
    options.subagent = config.subagent_config();
    options.sandbox = config.sandbox;
    options.main_model = config.main_model;
    options.subagent_gateway = config.gateway_factory(GatewayRole::subagent);
    if (options.mode == PassthroughMode::llm) {
        options.main_gateway = config.gateway_factory(GatewayRole::main);
    }

    std::vector<RolloutRecord> records =
        run_rollout_batch(load.instances, group_size, parallelism, options);
    for (const auto& record : records) save_rollout_record(record, out_dir);

    size_t failed = 0;
    for (const auto& record : records) {
        if (!record.error.empty()) ++failed;
    }
    json summary{{"instances", load.instances.size()},
                 {"rollouts", records.size()},
                 {"failed", failed},
                 {"out", out_dir.string()}};
    std::printf("%s\n", summary.dump(2).c_str());
    return 0;
}

int cmd_plan(const Config& config, const fs::path& rollouts_dir, const fs::path& out_dir) {
    std::vector<RolloutRecord> records = load_rollout_records(rollouts_dir);
    extract_plans(records, out_dir, config);
    std::printf("{\"rollouts\": %zu, \"plans_dir\": \"%s\"}\n", records.size(),
                out_dir.string().c_str());
    return 0;
}

int cmd_grade(Config config, const fs::path& rollouts_dir, const fs::path& manifest,
              const fs::path& plans_dir, double alpha, const fs::path& out_path) {
    config.reward.alpha = alpha;
    std::vector<RolloutRecord> records = load_rollout_records(rollouts_dir);
    ManifestLoad load = load_manifest(manifest, false);
    std::vector<RewardRow> rows = grade_rollouts(records, load.instances, plans_dir, config);
    write_rewards_jsonl(rows, out_path);

    size_t kept = 0;
    for (const auto& row : rows) {
        if (row.kept) ++kept;
    }
    json summary{{"rows", rows.size()}, {"kept_rows", kept}, {"out", out_path.string()}};
    std::printf("%s\n", summary.dump(2).c_str());
    return 0;
}

int cmd_grpo_eval(const Config& config, const fs::path& rewards, const fs::path& logprobs,
                  const fs::path& out_path) {
    GrpoEvalResult result = run_grpo_eval(rewards, logprobs, config.grpo);
    write_text_file(out_path, grpo_eval_to_json_text(result));
    std::printf("{\"groups\": %zu, \"mean_objective\": %.12g}\n", result.groups.size(),
                result.mean_objective);
    return 0;
}

int cmd_judge(const Config& config, const fs::path& runs_dir, int n_after, const fs::path& out_path) {
    std::vector<JudgeRow> rows =
        run_judge(runs_dir, n_after, config.gateway_factory(GatewayRole::judge), config.judge_model);
    write_text_file(out_path, judge_rows_to_jsonl(rows));
    std::printf("{\"judged_calls\": %zu, \"out\": \"%s\"}\n", rows.size(), out_path.string().c_str());
    return 0;
}

int cmd_report(const Config& config, const fs::path& runs_dir, const fs::path& tags_path,
               const fs::path& out_path) {
    ModelTagMap tags;
    if (!tags_path.empty()) {
        json j = json::parse(read_text_file(tags_path));
        for (const auto& [model, tag] : j.items()) tags[model] = tag.get<std::string>();
    }
    MetricsOptions options;
    options.strict_adjacency = config.metrics_strict_adjacency;
    MetricsReport report = run_report(runs_dir, tags, options);

    std::string rendered = out_path.extension() == ".md" ? metrics_report_to_markdown(report)
                                                         : metrics_report_to_json_text(report);
    write_text_file(out_path, rendered);
    std::printf("%s", metrics_report_to_json_text(report).c_str());
    return 0;
}

int cmd_pipeline(const Config& config, const fs::path& manifest, const fs::path& out_dir,
                 int group_size, int parallelism, const std::string& mode) {
    PipelineOptions options;
    options.manifest = manifest;
    options.out_dir = out_dir;
    options.group_size = group_size;
    options.parallelism = parallelism;
    options.mode = parse_mode(mode);

    PipelineResult result = run_pipeline(options, config);
    json summary{{"instances", result.instance_count},
                 {"rollouts", result.rollout_count},
                 {"groups_total", result.groups_total},
                 {"groups_kept", result.groups_kept},
                 {"rewards", result.rewards_path.string()}};
    std::printf("%s\n", summary.dump(2).c_str());
    return result.groups_kept >= 1 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Terminal-execution subagent harness"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t seed = 0;
    bool verbose = false;
    app.add_option("--config", config_path, "Path to a key = value config file");
    app.add_option("--seed", seed,
                   "Seed for randomized backends (scripted runs are seed-independent)");
    app.add_flag("--verbose", verbose, "Enable debug logging");

    auto* subagent = app.add_subcommand("subagent", "Run one execution-subagent session");
    std::string query, description = "Delegated execution task";
    std::string workdir = ".", sub_out = ".";
    subagent->add_option("--query", query, "Execution task for the subagent")->required();
    subagent->add_option("--description", description, "Short UI summary");
    subagent->add_option("--workdir", workdir, "Directory the commands run in")->required();
    subagent->add_option("--out", sub_out, "Output directory for trajectory and final answer");

    auto* rollout = app.add_subcommand("rollout", "Run a batch of pass-through rollouts");
    std::string manifest, rollout_out;
    int group_size = 8, parallelism = 4;
    std::string mode = "deterministic";
    rollout->add_option("--manifest", manifest, "Task manifest (JSONL)")->required();
    rollout->add_option("--group-size", group_size, "Rollouts per instance (G)");
    rollout->add_option("--parallelism", parallelism, "Rollouts in flight");
    rollout->add_option("--mode", mode, "deterministic | llm");
    rollout->add_option("--out", rollout_out, "Directory for rollout records")->required();

    auto* plan = app.add_subcommand("plan", "Extract execution plans from recorded rollouts");
    std::string plan_rollouts, plan_manifest, plan_out = "plans";
    plan->add_option("--rollouts", plan_rollouts, "Rollout records directory")->required();
    plan->add_option("--manifest", plan_manifest, "Task manifest (accepted for symmetry)");
    plan->add_option("--out", plan_out, "Directory for extracted plans");

    auto* grade = app.add_subcommand("grade", "Grade rollouts against reference plans");
    std::string grade_rollouts_dir, grade_manifest, grade_plans, grade_out = "rewards.jsonl";
    double alpha = 0.5;
    grade->add_option("--rollouts", grade_rollouts_dir, "Rollout records directory")->required();
    grade->add_option("--manifest", grade_manifest, "Task manifest with reference plans")->required();
    grade->add_option("--plans", grade_plans, "Extracted plans directory (default <rollouts>/../plans)");
    grade->add_option("--alpha", alpha, "Final-answer blend weight");
    grade->add_option("--out", grade_out, "rewards.jsonl path");

    auto* grpo = app.add_subcommand("grpo-eval", "Evaluate the group objective on exported data");
    std::string grpo_rewards, grpo_logprobs, grpo_out = "objective.json";
    grpo->add_option("--rewards", grpo_rewards, "rewards.jsonl")->required();
    grpo->add_option("--logprobs", grpo_logprobs, "logprobs.jsonl")->required();
    grpo->add_option("--out", grpo_out, "objective.json path");

    auto* judge = app.add_subcommand("judge", "Judge recorded subagent responses");
    std::string judge_runs, judge_out = "judge.jsonl";
    int n_after = 5;
    judge->add_option("--runs", judge_runs, "Rollout records directory")->required();
    judge->add_option("--n-after", n_after, "Main-agent turns after the call shown to the judge");
    judge->add_option("--out", judge_out, "judge.jsonl path");

    auto* report = app.add_subcommand("report", "Behavioral metrics over recorded runs");
    std::string report_runs, report_tags, report_out = "report.json";
    report->add_option("--runs", report_runs, "Rollout records directory")->required();
    report->add_option("--model-tags", report_tags, "JSON map model -> frontier|slm");
    report->add_option("--out", report_out, "report.json or report.md");

    auto* pipeline = app.add_subcommand("pipeline", "rollout -> plan -> grade -> filter");
    std::string pipe_manifest, pipe_out;
    int pipe_group_size = 8, pipe_parallelism = 4;
    std::string pipe_mode = "deterministic";
    pipeline->add_option("--manifest", pipe_manifest, "Task manifest (JSONL)")->required();
    pipeline->add_option("--out", pipe_out, "Run directory")->required();
    pipeline->add_option("--group-size", pipe_group_size, "Rollouts per instance (G)");
    pipeline->add_option("--parallelism", pipe_parallelism, "Rollouts in flight");
    pipeline->add_option("--mode", pipe_mode, "deterministic | llm");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // usage error
    }

    if (verbose) log::set_threshold(log::Level::debug);
    (void)seed; // scripted backends are deterministic regardless of the seed

    try {
        Config config = make_config(config_path);
        if (subagent->parsed()) return cmd_subagent(config, query, description, workdir, sub_out);
        if (rollout->parsed()) {
            return cmd_rollout(config, manifest, group_size, parallelism, mode, rollout_out);
        }
        if (plan->parsed()) return cmd_plan(config, plan_rollouts, plan_out);
        if (grade->parsed()) {
            fs::path plans = grade_plans.empty()
                                 ? fs::path(grade_rollouts_dir).parent_path() / "plans"
                                 : fs::path(grade_plans);
            return cmd_grade(config, grade_rollouts_dir, grade_manifest, plans, alpha, grade_out);
        }
        if (grpo->parsed()) return cmd_grpo_eval(config, grpo_rewards, grpo_logprobs, grpo_out);
        if (judge->parsed()) return cmd_judge(config, judge_runs, n_after, judge_out);
        if (report->parsed()) return cmd_report(config, report_runs, report_tags, report_out);
        if (pipeline->parsed()) {
            return cmd_pipeline(config, pipe_manifest, pipe_out, pipe_group_size, pipe_parallelism,
                                pipe_mode);
        }
    } catch (const Error& e) {
        print_error(to_string(e.kind()), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("Internal", e.what());
        return 1;
    }
    return 0;
}
