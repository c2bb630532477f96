#include "termharness/metrics.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

using json = nlohmann::json;

namespace termharness {

namespace {

struct SeqCall {
    size_t turn_ordinal; // index among assistant messages
    std::string name;
};

std::vector<SeqCall> tool_call_sequence(const Trajectory& trajectory) {
    std::vector<SeqCall> calls;
    size_t ordinal = 0;
    for (const auto& message : trajectory.messages) {
        if (message.role != Role::assistant) continue;
        for (const auto& call : message.tool_calls) calls.push_back({ordinal, call.name});
        ++ordinal;
    }
    return calls;
}

bool is_frontier(const ModelTagMap& tags, const std::string& model) {
    auto it = tags.find(model);
    return it != tags.end() && it->second == "frontier";
}

} // namespace

InstanceMetrics compute_metrics(const Trajectory& main_trajectory,
                                const std::vector<SubagentOutcome>& sub_outcomes,
                                const ModelTagMap& model_tags, const MetricsOptions& options) {
    InstanceMetrics metrics;
    metrics.main_agent_tokens = main_trajectory.total_tokens();
    for (const auto& outcome : sub_outcomes) {
        metrics.subagent_tokens += outcome.trajectory.total_tokens();
    }

    std::vector<SeqCall> calls = tool_call_sequence(main_trajectory);
    for (size_t i = 0; i < calls.size(); ++i) {
        if (calls[i].name == "Terminal") ++metrics.main_terminal_calls;
        if (calls[i].name == "ExecutionSubagent") {
            ++metrics.subagent_calls;
            if (i + 1 < calls.size()) {
                bool adjacent = !options.strict_adjacency ||
                                calls[i + 1].turn_ordinal <= calls[i].turn_ordinal + 1;
                if (adjacent && calls[i + 1].name == "Terminal") ++metrics.subagent_to_terminal;
                if (adjacent && calls[i + 1].name == "ExecutionSubagent") {
                    ++metrics.subagent_to_subagent;
                }
            }
        }
    }

    if (!sub_outcomes.empty()) {
        for (const auto& outcome : sub_outcomes) {
            if (outcome.final_answer.well_formed) ++metrics.well_formed_final_answers;
        }
        metrics.final_answer_rate = static_cast<double>(metrics.well_formed_final_answers) /
                                    static_cast<double>(sub_outcomes.size());
    } else if (metrics.subagent_calls > 0) {
        // Recorded main trajectory only: derive well-formedness from the tool
        // results attached to each subagent call.
        std::map<std::string, bool> by_call_id;
        for (const auto& message : main_trajectory.messages) {
            if (message.role != Role::assistant) continue;
            for (const auto& call : message.tool_calls) {
                if (call.name == "ExecutionSubagent") by_call_id[call.id] = false;
            }
        }
        for (const auto& message : main_trajectory.messages) {
            if (message.role != Role::tool || !message.tool_call_id) continue;
            auto it = by_call_id.find(*message.tool_call_id);
            if (it != by_call_id.end()) {
                it->second = parse_final_answer(message.content).well_formed;
            }
        }
        for (const auto& [id, ok] : by_call_id) {
            if (ok) ++metrics.well_formed_final_answers;
        }
        metrics.final_answer_rate = static_cast<double>(metrics.well_formed_final_answers) /
                                    static_cast<double>(metrics.subagent_calls);
    }

    std::string subagent_model;
    if (!sub_outcomes.empty()) {
        auto it = sub_outcomes.front().trajectory.meta.find("model");
        if (it != sub_outcomes.front().trajectory.meta.end()) subagent_model = it->second;
    }
    metrics.frontier_tokens = metrics.main_agent_tokens;
    if (is_frontier(model_tags, subagent_model)) {
        metrics.frontier_tokens += metrics.subagent_tokens;
    } else {
        metrics.slm_tokens = metrics.subagent_tokens;
    }
    return metrics;
}

MetricsReport aggregate_metrics(const std::vector<InstanceMetrics>& instances) {
    MetricsReport report;
    report.instance_count = static_cast<int>(instances.size());
    if (instances.empty()) return report;

    int64_t total_calls = 0;
    int64_t total_well_formed = 0;
    int instances_with_calls = 0;
    for (const auto& m : instances) {
        report.main_agent_tokens += static_cast<double>(m.main_agent_tokens);
        report.subagent_tokens += static_cast<double>(m.subagent_tokens);
        report.frontier_tokens += static_cast<double>(m.frontier_tokens);
        report.slm_tokens += static_cast<double>(m.slm_tokens);
        report.main_terminal_calls += m.main_terminal_calls;
        report.subagent_calls += m.subagent_calls;
        report.subagent_to_terminal += m.subagent_to_terminal;
        report.subagent_to_subagent += m.subagent_to_subagent;
        total_calls += m.subagent_calls;
        total_well_formed += m.well_formed_final_answers;
        if (m.subagent_calls > 0) ++instances_with_calls;
    }
    double n = static_cast<double>(instances.size());
    report.main_agent_tokens /= n;
    report.subagent_tokens /= n;
    report.frontier_tokens /= n;
    report.slm_tokens /= n;
    report.main_terminal_calls /= n;
    report.subagent_calls /= n;
    report.subagent_to_terminal /= n;
    report.subagent_to_subagent /= n;
    if (total_calls > 0) {
        report.final_answer_rate =
            static_cast<double>(total_well_formed) / static_cast<double>(total_calls);
    }
    report.subagent_call_rate = static_cast<double>(instances_with_calls) / n;
    return report;
}

std::string metrics_report_to_json_text(const MetricsReport& report) {
    json j{{"instance_count", report.instance_count},
           {"main_agent_tokens", report.main_agent_tokens},
           {"subagent_tokens", report.subagent_tokens},
           {"frontier_tokens", report.frontier_tokens},
           {"slm_tokens", report.slm_tokens},
           {"main_terminal_calls", report.main_terminal_calls},
           {"subagent_calls", report.subagent_calls},
           {"subagent_to_terminal", report.subagent_to_terminal},
           {"subagent_to_subagent", report.subagent_to_subagent},
           {"subagent_call_rate", report.subagent_call_rate}};
    if (report.final_answer_rate) j["final_answer_rate"] = *report.final_answer_rate;
    else j["final_answer_rate"] = nullptr;
    return j.dump(2) + "\n";
}

std::string metrics_report_to_markdown(const MetricsReport& report) {
    std::ostringstream out;
    out << "| Metric | Value |\n|---|---|\n";
    out << "| Instances | " << report.instance_count << " |\n";
    out << "| Main Agent Tokens | " << report.main_agent_tokens << " |\n";
    out << "| Subagent Tokens | " << report.subagent_tokens << " |\n";
    out << "| Frontier Tokens | " << report.frontier_tokens << " |\n";
    out << "| SLM Tokens | " << report.slm_tokens << " |\n";
    out << "| Main Agent Terminal Calls | " << report.main_terminal_calls << " |\n";
    out << "| Subagent Calls | " << report.subagent_calls << " |\n";
    out << "| Subagent->Terminal | " << report.subagent_to_terminal << " |\n";
    out << "| Subagent->Subagent | " << report.subagent_to_subagent << " |\n";
    if (report.final_answer_rate) {
        out << "| Final Answer Rate | " << *report.final_answer_rate << " |\n";
    } else {
        out << "| Final Answer Rate | n/a |\n";
    }
    out << "| Subagent Call Rate | " << report.subagent_call_rate << " |\n";
    return out.str();
}

} // namespace termharness
