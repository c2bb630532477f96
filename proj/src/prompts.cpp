#include "termharness/prompts.hpp"

#include "termharness/assets_gen.hpp"
#include "termharness/errors.hpp"
#include "termharness/util.hpp"

#include <sstream>

namespace termharness {

std::string_view asset_text(std::string_view name) {
    for (unsigned long i = 0; i < assets_gen::kAssetCount; ++i) {
        const auto& entry = assets_gen::kAssets[i];
        if (name == entry.name) return std::string_view(entry.data, entry.size);
    }
    throw Error(ErrorKind::IoFailure, "unknown prompt asset: " + std::string(name));
}

std::string_view coax_message() { return asset_text("coax_message.txt"); }

std::string_view subagent_system_prompt() { return asset_text("subagent_system.txt"); }

std::string_view main_subagent_section() { return asset_text("main_subagent_section.txt"); }

std::string main_system_prompt(bool with_subagent_section) {
    std::string base(asset_text("main_system_base.txt"));
    if (!with_subagent_section) return base;
    // The subagent section sits between the tool-preference paragraph and the
    // absolute-path paragraph.
    const std::string anchor = "When invoking a tool that takes a file path";
    size_t pos = base.find(anchor);
    std::string section(main_subagent_section());
    if (pos == std::string::npos) return base + "\n" + section;
    return base.substr(0, pos) + section + "\n\n" + base.substr(pos);
}

std::string wrap_query(std::string_view query) {
    std::string wrapped(asset_text("query_wrapper.txt"));
    return replace_all(std::move(wrapped), "{query}", query);
}

PromptPair build_plan_prompt(std::string_view query, const std::vector<CommandRun>& commands,
                             std::string_view final_answer_text) {
    std::ostringstream blocks;
    for (size_t i = 0; i < commands.size(); ++i) {
        const CommandRun& run = commands[i];
        std::string output = sanitize_utf8(run.result.output);
        output = head_tail_clip(output, kPlanOutputHeadChars, kPlanOutputTailChars, kPlanOutputMarker);
        blocks << "### Command " << (i + 1) << ": `" << run.command.command << "`\n"
               << "Exit Code: " << run.result.exit_code << "\n"
               << "Output: " << output << "\n\n";
    }
    std::string user(asset_text("plan_user.txt"));
    user = replace_all(std::move(user), "{query}", query);
    user = replace_all(std::move(user), "{commands}", blocks.str());
    user = replace_all(std::move(user), "{final_answer}", final_answer_text);
    return {std::string(asset_text("plan_system.txt")), std::move(user)};
}

PromptPair build_grade_prompt(std::string_view query, std::string_view reference_plan,
                              std::string_view candidate_plan) {
    std::string user(asset_text("grader_user.txt"));
    user = replace_all(std::move(user), "{query}", query);
    user = replace_all(std::move(user), "{reference}", reference_plan);
    user = replace_all(std::move(user), "{candidate}", candidate_plan);
    return {std::string(asset_text("grader_system.txt")), std::move(user)};
}

PromptPair build_judge_prompt(std::string_view system_excerpt, std::string_view problem_statement,
                              std::string_view trajectory_before, std::string_view subagent_query,
                              std::string_view subagent_response, std::string_view trajectory_after,
                              int n_after) {
    std::string user(asset_text("judge_user.txt"));
    user = replace_all(std::move(user), "{system_prompt}", system_excerpt);
    user = replace_all(std::move(user), "{problem_statement}", problem_statement);
    user = replace_all(std::move(user), "{trajectory}", trajectory_before);
    user = replace_all(std::move(user), "{subagent_query}", subagent_query);
    user = replace_all(std::move(user), "{subagent_response}", subagent_response);
    user = replace_all(std::move(user), "{trajectory_after}", trajectory_after);
    user = replace_all(std::move(user), "{n}", std::to_string(n_after));
    return {std::string(asset_text("judge_system.txt")), std::move(user)};
}

} // namespace termharness
