#include "termharness/rollout.hpp"

#include "termharness/errors.hpp"
#include "termharness/prompts.hpp"
#include "termharness/scripted_gateway.hpp"
#include "termharness/util.hpp"
#include "termharness/workspace.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace termharness;
namespace fs = std::filesystem;

namespace {

const std::string kAnswer =
    "<final_answer>\nCommand: cat data.txt\nSummary: File holds the probe value.\n</final_answer>";

GatewayFactory scripted_subagent_factory() {
    return []() {
        return std::make_unique<ScriptedGateway>(std::vector<ScriptStep>{
            tool_call_step("run_in_terminal",
                           {{"command", "cat data.txt"}, {"mode", "sync"}, {"timeout", "5000"}}),
            text_step(kAnswer)});
    };
}

struct Fixture {
    TempDir repo{"repo"};
    TaskInstance instance;

    Fixture() {
        write_text_file(repo.path() / "data.txt", "probe-value\n");
        instance.id = "inst-a";
        instance.repo_source = repo.path().string();
        instance.query = "Read data.txt and report its contents";
        instance.reference_plan.outcome = TaskOutcome::success;
        instance.reference_plan.outcome_text = "File read.";
        instance.reference_plan.final_state = "Contents reported.";
    }

    RolloutOptions options() const {
        RolloutOptions opts;
        opts.subagent_gateway = scripted_subagent_factory();
        return opts;
    }
};

} // namespace

TEST_CASE("register_subagent_tool: three tool configurations") {
    ToolRegistration subagent_only = register_subagent_tool({true, false});
    REQUIRE(subagent_only.tools.size() == 1);
    CHECK(subagent_only.tools[0].name == "ExecutionSubagent");
    CHECK(subagent_only.system_prompt.find("== Using ExecutionSubagent ==") != std::string::npos);

    ToolRegistration both = register_subagent_tool({true, true});
    REQUIRE(both.tools.size() == 2);
    CHECK(both.tools[0].name == "ExecutionSubagent");
    CHECK(both.tools[1].name == "Terminal");

    ToolRegistration terminal_only = register_subagent_tool({false, true});
    REQUIRE(terminal_only.tools.size() == 1);
    CHECK(terminal_only.tools[0].name == "Terminal");
    // Baseline prompt stays unmodified.
    CHECK(terminal_only.system_prompt.find("ExecutionSubagent") == std::string::npos);
    CHECK(terminal_only.system_prompt == main_system_prompt(false));

    try {
        register_subagent_tool({false, false});
        FAIL("expected ConfigConflict");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigConflict);
    }
}

TEST_CASE("main prompt augmentation carries the no-parallel-subagent rule") {
    std::string augmented = main_system_prompt(true);
    CHECK(augmented.find("Don't call ExecutionSubagent multiple times in parallel.") !=
          std::string::npos);
    CHECK(augmented.find(main_subagent_section()) != std::string::npos);
}

TEST_CASE("wrap_query embeds the query verbatim inside the tags") {
    std::string wrapped = wrap_query("run tests");
    CHECK(wrapped.find("<query>\nrun tests\n</query>") != std::string::npos);
    CHECK(wrapped.find("EXACT query") != std::string::npos);
    CHECK(wrap_query("alpha") != wrap_query("beta"));
}

TEST_CASE("passthrough deterministic: one assistant turn, exact query") {
    Fixture fixture;
    TempDir ws;
    prepare_workspace({fixture.instance.repo_source, "", ""}, ws.path() / "w");
    RolloutRecord record = passthrough_main_agent(fixture.instance, fixture.options(), ws.path() / "w");

    CHECK(record.error.empty());
    CHECK_FALSE(record.protocol_violation);
    int assistant_turns = 0;
    const ChatMessage* call_message = nullptr;
    for (const auto& message : record.main_trajectory.messages) {
        if (message.role == Role::assistant) {
            ++assistant_turns;
            call_message = &message;
        }
    }
    CHECK(assistant_turns == 1);
    REQUIRE(call_message != nullptr);
    REQUIRE(call_message->tool_calls.size() == 1);
    CHECK(call_message->tool_calls[0].name == "ExecutionSubagent");
    CHECK(call_message->tool_calls[0].arguments.at("query") == fixture.instance.query);
    CHECK_FALSE(record.workspace_hash.empty());
    CHECK(record.outcome.final_answer.well_formed);

    // Main agent saw only the structured final answer.
    const ChatMessage& tool_reply = record.main_trajectory.messages.back();
    CHECK(tool_reply.role == Role::tool);
    CHECK(tool_reply.content.find("probe-value") == std::string::npos);
    CHECK(tool_reply.content.find("<final_answer>") != std::string::npos);
}

TEST_CASE("passthrough llm mode with exact scripted forwarding matches deterministic") {
    Fixture fixture;
    RolloutOptions llm_options = fixture.options();
    llm_options.mode = PassthroughMode::llm;
    llm_options.main_gateway = [&]() {
        ScriptStep forward;
        forward.tool_calls.push_back({"fwd-1", "ExecutionSubagent",
                                      {{"query", fixture.instance.query},
                                       {"description", "Delegated execution task"}}});
        return std::make_unique<ScriptedGateway>(std::vector<ScriptStep>{forward});
    };

    TempDir ws_a;
    prepare_workspace({fixture.instance.repo_source, "", ""}, ws_a.path() / "w");
    RolloutRecord llm_record =
        passthrough_main_agent(fixture.instance, llm_options, ws_a.path() / "w");

    TempDir ws_b;
    prepare_workspace({fixture.instance.repo_source, "", ""}, ws_b.path() / "w");
    RolloutRecord det_record =
        passthrough_main_agent(fixture.instance, fixture.options(), ws_b.path() / "w");

    CHECK_FALSE(llm_record.protocol_violation);
    CHECK(llm_record.outcome.final_answer.raw_text == det_record.outcome.final_answer.raw_text);
    CHECK(llm_record.outcome.commands.size() == det_record.outcome.commands.size());
    CHECK(llm_record.workspace_hash == det_record.workspace_hash);
}

TEST_CASE("passthrough llm mode flags a rewritten query") {
    Fixture fixture;
    RolloutOptions llm_options = fixture.options();
    llm_options.mode = PassthroughMode::llm;
    llm_options.main_gateway = []() {
        ScriptStep deviate;
        deviate.tool_calls.push_back({"fwd-1", "ExecutionSubagent",
                                      {{"query", "something else entirely"},
                                       {"description", "oops"}}});
        return std::make_unique<ScriptedGateway>(std::vector<ScriptStep>{deviate});
    };

    TempDir ws;
    prepare_workspace({fixture.instance.repo_source, "", ""}, ws.path() / "w");
    RolloutRecord record = passthrough_main_agent(fixture.instance, llm_options, ws.path() / "w");
    CHECK(record.protocol_violation);
    CHECK_FALSE(record.error.empty());
    CHECK(record.outcome.commands.empty());
}

TEST_CASE("run_rollout_batch: G rollouts per instance with unique workspaces") {
    Fixture fixture;
    TaskInstance second = fixture.instance;
    second.id = "inst-b";
    std::vector<TaskInstance> instances{fixture.instance, second};

    std::vector<RolloutRecord> records = run_rollout_batch(instances, 8, 4, fixture.options());
    REQUIRE(records.size() == 16);

    std::map<std::string, std::set<int>> groups;
    std::set<std::string> workdirs;
    std::map<std::string, std::set<std::string>> hashes;
    for (const auto& record : records) {
        CHECK(record.error.empty());
        groups[record.instance_id].insert(record.group_index);
        hashes[record.instance_id].insert(record.workspace_hash);
        REQUIRE(record.outcome.commands.size() == 1);
        workdirs.insert(record.outcome.commands[0].command.workdir.string());
    }
    CHECK(groups["inst-a"] == std::set<int>{0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(groups["inst-b"] == std::set<int>{0, 1, 2, 3, 4, 5, 6, 7});
    // Workspace isolation: every rollout ran in its own directory.
    CHECK(workdirs.size() == 16);
    // Identical starting tree per instance group.
    CHECK(hashes["inst-a"].size() == 1);
    CHECK(hashes["inst-b"].size() == 1);
}

TEST_CASE("run_rollout_batch: repeated single-rollout batches are identical") {
    Fixture fixture;
    std::vector<TaskInstance> instances{fixture.instance};
    std::vector<RolloutRecord> first = run_rollout_batch(instances, 1, 1, fixture.options());
    std::vector<RolloutRecord> second = run_rollout_batch(instances, 1, 1, fixture.options());
    REQUIRE(first.size() == 1);
    REQUIRE(second.size() == 1);
    CHECK(first[0].main_trajectory == second[0].main_trajectory);
    // Byte-identical subagent trajectories, durations and all.
    CHECK(trajectory_to_jsonl(first[0].outcome.trajectory) ==
          trajectory_to_jsonl(second[0].outcome.trajectory));
    CHECK(first[0].outcome.final_answer == second[0].outcome.final_answer);
    CHECK(first[0].workspace_hash == second[0].workspace_hash);
}

TEST_CASE("run_rollout_batch: parallelism does not change outcomes") {
    Fixture fixture;
    std::vector<TaskInstance> instances{fixture.instance};

    auto run_with = [&](int parallelism) {
        std::vector<RolloutRecord> records =
            run_rollout_batch(instances, 4, parallelism, fixture.options());
        std::multiset<std::pair<std::string, bool>> outcomes;
        for (const auto& record : records) {
            outcomes.insert({record.instance_id, record.outcome.final_answer.well_formed});
        }
        return outcomes;
    };
    CHECK(run_with(1) == run_with(8));
}

TEST_CASE("run_rollout_batch: scripted failures are captured, not fatal") {
    Fixture fixture;
    RolloutOptions options = fixture.options();
    options.subagent_gateway = []() {
        // Script that exhausts on the first call.
        return std::make_unique<ScriptedGateway>(std::vector<ScriptStep>{});
    };
    std::vector<RolloutRecord> records = run_rollout_batch({fixture.instance}, 2, 2, options);
    REQUIRE(records.size() == 2);
    for (const auto& record : records) {
        CHECK_FALSE(record.error.empty());
        CHECK(record.error.find("ScriptExhausted") != std::string::npos);
    }
}

TEST_CASE("rollout records persist and reload") {
    Fixture fixture;
    std::vector<RolloutRecord> records = run_rollout_batch({fixture.instance}, 2, 2, fixture.options());
    TempDir out;
    for (const auto& record : records) save_rollout_record(record, out.path());

    std::vector<RolloutRecord> loaded = load_rollout_records(out.path());
    REQUIRE(loaded.size() == records.size());
    std::sort(records.begin(), records.end(),
              [](const RolloutRecord& a, const RolloutRecord& b) {
                  return a.group_index < b.group_index;
              });
    for (size_t i = 0; i < records.size(); ++i) {
        CHECK(loaded[i].instance_id == records[i].instance_id);
        CHECK(loaded[i].group_index == records[i].group_index);
        CHECK(loaded[i].workspace_hash == records[i].workspace_hash);
        CHECK(loaded[i].outcome.final_answer.well_formed ==
              records[i].outcome.final_answer.well_formed);
        CHECK(loaded[i].outcome.commands.size() == records[i].outcome.commands.size());
        CHECK(loaded[i].main_trajectory == records[i].main_trajectory);
        CHECK(loaded[i].outcome.trajectory == records[i].outcome.trajectory);
    }
}
