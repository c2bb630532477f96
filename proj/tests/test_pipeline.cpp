#include "termharness/pipeline.hpp"

#include "termharness/errors.hpp"
#include "termharness/plan.hpp"
#include "termharness/rubric.hpp"
#include "termharness/scripted_gateway.hpp"
#include "termharness/util.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>

using namespace termharness;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string scores_step_json(double positive, double pitfall, double final_answer) {
    std::string block = "```\n";
    auto add = [&](std::string_view name, double value) {
        block += std::string(name) + ": " + std::to_string(value) + "\n";
    };
    for (auto name : kPositiveDimensions) add(name, positive);
    for (auto name : kPitfallDimensions) add(name, pitfall);
    for (auto name : kFinalAnswerDimensions) add(name, final_answer);
    block += "```";
    return json{{"respond", {{"content", block}}}}.dump();
}

// A complete scripted pipeline environment in one temp directory.
struct PipelineFixture {
    TempDir root{"pipe"};
    Config config;
    PipelineOptions options;

    explicit PipelineFixture(int group_size = 4, bool include_bad_patch_instance = false) {
        fs::path repo = root.path() / "repo";
        write_text_file(repo / "data.txt", "probe\n");

        ExecutionPlan reference;
        reference.outcome = TaskOutcome::success;
        reference.outcome_text = "Read the file.";
        reference.commands_executed.push_back({"cat data.txt", "inspect", "exit code 0; probe", 0});
        reference.key_findings = "file holds probe";
        reference.final_state = "reported";

        std::vector<TaskInstance> instances;
        for (const char* id : {"inst-a", "inst-b"}) {
            TaskInstance instance;
            instance.id = id;
            instance.repo_source = repo.string();
            instance.query = std::string("Read data.txt for ") + id;
            instance.reference_plan = reference;
            instance.language = "shell";
            instances.push_back(std::move(instance));
        }
        if (include_bad_patch_instance) {
            TaskInstance bad;
            bad.id = "inst-broken";
            bad.repo_source = repo.string();
            bad.query = "never runs";
            bad.pre_patch =
                "--- a/data.txt\n+++ b/data.txt\n@@ -1,1 +1,1 @@\n-wrong context\n+nope\n";
            bad.reference_plan = reference;
            instances.push_back(std::move(bad));
        }
        save_manifest(instances, root.path() / "manifest.jsonl");

        // Subagent: one command, then a tagged final answer.
        json subagent_script{
            {"loop_last", true},
            {"script",
             {{{"respond",
                {{"content", ""},
                 {"tool_calls",
                  {{{"name", "run_in_terminal"},
                    {"arguments",
                     {{"command", "cat data.txt"}, {"mode", "sync"}, {"timeout", "5000"}}}}}}}}},
              {{"respond",
                {{"content",
                  "<final_answer>\nCommand: cat data.txt\nSummary: Holds probe.\n</final_answer>"}}}}}}};
        write_text_file(root.path() / "subagent.json", subagent_script.dump());

        ExecutionPlan candidate = reference;
        candidate.outcome_text = "Read the file again.";
        json plan_script{{"loop_last", true},
                         {"script", {{{"respond", {{"content", plan_to_text(candidate)}}}}}}};
        write_text_file(root.path() / "plan.json", plan_script.dump());

        // First group gets varying scores, later calls repeat the last step.
        std::string grader_script = R"({"loop_last": true, "script": [)" +
                                    scores_step_json(80, 10, 90) + "," + scores_step_json(70, 10, 90) +
                                    "," + scores_step_json(60, 10, 90) + "," +
                                    scores_step_json(50, 10, 90) + "]}";
        write_text_file(root.path() / "grader.json", grader_script);

        config.gateway_backend = "scripted";
        config.script_subagent = (root.path() / "subagent.json").string();
        config.script_plan = (root.path() / "plan.json").string();
        config.script_grader = (root.path() / "grader.json").string();

        options.manifest = root.path() / "manifest.jsonl";
        options.out_dir = root.path() / "out";
        options.group_size = group_size;
        options.parallelism = 2;
    }
};

} // namespace

TEST_CASE("pipeline: end-to-end scripted run produces filtered reward rows") {
    PipelineFixture fixture;
    PipelineResult result = run_pipeline(fixture.options, fixture.config);

    CHECK(result.instance_count == 2);
    CHECK(result.rollout_count == 8);
    CHECK(result.groups_total == 2);
    CHECK(result.groups_kept == 1); // inst-b's grades are flat, sigma < 0.01

    std::vector<RewardRow> rows = load_rewards_jsonl(result.rewards_path);
    REQUIRE(rows.size() == 8);

    // Scores (80,10,90), alpha 0.5: r = 0.5*(80-10) + 0.5*90 = 80.
    CHECK(rows[0].instance_id == "inst-a");
    CHECK(rows[0].group_index == 0);
    CHECK(rows[0].value == doctest::Approx(80.0).epsilon(1e-12));
    CHECK(rows[1].value == doctest::Approx(75.0));
    CHECK(rows[2].value == doctest::Approx(70.0));
    CHECK(rows[3].value == doctest::Approx(65.0));
    for (int i = 0; i < 4; ++i) CHECK(rows[static_cast<size_t>(i)].kept);
    for (int i = 4; i < 8; ++i) {
        CHECK(rows[static_cast<size_t>(i)].instance_id == "inst-b");
        CHECK(rows[static_cast<size_t>(i)].value == doctest::Approx(65.0));
        CHECK_FALSE(rows[static_cast<size_t>(i)].kept);
    }
}

TEST_CASE("pipeline: rerun on a completed directory does not re-execute stages") {
    PipelineFixture fixture(2);
    run_pipeline(fixture.options, fixture.config);

    fs::path rewards = fixture.options.out_dir / "rewards.jsonl";
    auto mtime_before = fs::last_write_time(rewards);
    std::string content_before = read_text_file(rewards);

    run_pipeline(fixture.options, fixture.config);
    CHECK(fs::last_write_time(rewards) == mtime_before);
    CHECK(read_text_file(rewards) == content_before);
}

TEST_CASE("pipeline: unappliable pre_patch fails one instance, others proceed") {
    PipelineFixture fixture(2, true);
    PipelineResult result = run_pipeline(fixture.options, fixture.config);

    CHECK(result.instance_count == 2); // inst-broken excluded at load
    CHECK(result.rollout_count == 4);
    std::string failures = read_text_file(fixture.options.out_dir / "load_failures.jsonl");
    CHECK(failures.find("inst-broken") != std::string::npos);
    CHECK(failures.find("pre_patch") != std::string::npos);
}

TEST_CASE("pipeline: repeated batches are byte-identical") {
    PipelineFixture first(8);
    PipelineFixture second(8);
    // Align the two runs on identical queries (ids already match).
    run_pipeline(first.options, first.config);
    run_pipeline(second.options, second.config);
    CHECK(read_text_file(first.options.out_dir / "rewards.jsonl") ==
          read_text_file(second.options.out_dir / "rewards.jsonl"));
}

TEST_CASE("pipeline: a plan-parse failure penalizes one rollout, not the batch") {
    PipelineFixture fixture(2);
    // First rollout's plan model never produces a parseable plan (two garbage
    // replies exhaust the retry); later rollouts get a good plan.
    ExecutionPlan good;
    good.outcome = TaskOutcome::success;
    good.outcome_text = "fine";
    good.final_state = "done";
    json plan_script{{"loop_last", true},
                     {"script",
                      {{{"respond", {{"content", "garbage"}}}},
                       {{"respond", {{"content", "still garbage"}}}},
                       {{"respond", {{"content", plan_to_text(good)}}}}}}};
    write_text_file(fixture.root.path() / "plan.json", plan_script.dump());

    PipelineResult result = run_pipeline(fixture.options, fixture.config);
    CHECK(result.rollout_count == 4);

    std::vector<RewardRow> rows = load_rewards_jsonl(result.rewards_path);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].value == doctest::Approx(-50.0));
    CHECK(rows[0].penalty_applied == "no_commands");
    CHECK(rows[1].penalty_applied.empty());
    CHECK(rows[1].value > 0.0);
}

TEST_CASE("grpo-eval joins rewards with logprobs and evaluates groups") {
    TempDir dir;
    std::string rewards;
    std::string logprobs;
    // One kept group of 2 with rewards 0 and 10 (advantages -1, +1) and
    // ratios 0.5 / 2.0; one discarded group that must be ignored.
    rewards += json{{"instance_id", "a"}, {"group_index", 0}, {"value", 0.0}, {"s_pos_mean", 0.0},
                    {"s_pit_mean", 0.0}, {"s_fa_mean", 0.0}, {"penalty_applied", nullptr},
                    {"kept", true}}.dump() + "\n";
    rewards += json{{"instance_id", "a"}, {"group_index", 1}, {"value", 10.0}, {"s_pos_mean", 0.0},
                    {"s_pit_mean", 0.0}, {"s_fa_mean", 0.0}, {"penalty_applied", nullptr},
                    {"kept", true}}.dump() + "\n";
    rewards += json{{"instance_id", "b"}, {"group_index", 0}, {"value", 50.0}, {"s_pos_mean", 0.0},
                    {"s_pit_mean", 0.0}, {"s_fa_mean", 0.0}, {"penalty_applied", nullptr},
                    {"kept", false}}.dump() + "\n";

    auto lp = [](const std::string& id, int g, double lnew, double lold, double lref) {
        return json{{"instance_id", id}, {"group_index", g}, {"logp_new", lnew},
                    {"logp_old", lold}, {"logp_ref", lref}}.dump() + "\n";
    };
    logprobs += lp("a", 0, -10.0 + std::log(0.5), -10.0, -10.0);
    logprobs += lp("a", 1, -10.0 + std::log(2.0), -10.0, -10.0);
    logprobs += lp("b", 0, -5.0, -5.0, -5.0);

    write_text_file(dir.path() / "rewards.jsonl", rewards);
    write_text_file(dir.path() / "logprobs.jsonl", logprobs);

    GrpoConfig cfg;
    cfg.beta = 0.0;
    GrpoEvalResult result =
        run_grpo_eval(dir.path() / "rewards.jsonl", dir.path() / "logprobs.jsonl", cfg);
    REQUIRE(result.groups.size() == 1); // the discarded group is skipped
    CHECK(result.groups[0].instance_id == "a");
    CHECK(result.groups[0].objective.objective == doctest::Approx((1.28 - 0.80) / 2).epsilon(1e-12));
    CHECK(result.mean_objective == doctest::Approx((1.28 - 0.80) / 2));

    std::string rendered = grpo_eval_to_json_text(result);
    CHECK(rendered.find("mean_objective") != std::string::npos);
}
