#pragma once

#include "termharness/subagent.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace termharness {

// Model name -> "frontier" | "slm". Token columns split on this tag: the
// frontier column includes subagent tokens only when the subagent model is a
// frontier model.
using ModelTagMap = std::map<std::string, std::string>;

struct InstanceMetrics {
    int64_t main_agent_tokens = 0;
    int64_t subagent_tokens = 0;
    int64_t frontier_tokens = 0;
    int64_t slm_tokens = 0;
    int main_terminal_calls = 0;
    int subagent_calls = 0;
    int subagent_to_terminal = 0;
    int subagent_to_subagent = 0;
    int well_formed_final_answers = 0;
    std::optional<double> final_answer_rate; // null when no subagent calls
};

struct MetricsOptions {
    // Default: "next tool call after" skips non-tool messages. Strict mode
    // additionally requires the following call to come from the same or the
    // immediately next assistant turn.
    bool strict_adjacency = false;
};

InstanceMetrics compute_metrics(const Trajectory& main_trajectory,
                                const std::vector<SubagentOutcome>& sub_outcomes,
                                const ModelTagMap& model_tags, const MetricsOptions& options = {});

struct MetricsReport {
    int instance_count = 0;
    double main_agent_tokens = 0.0; // means per instance
    double subagent_tokens = 0.0;
    double frontier_tokens = 0.0;
    double slm_tokens = 0.0;
    double main_terminal_calls = 0.0;
    double subagent_calls = 0.0;
    double subagent_to_terminal = 0.0;
    double subagent_to_subagent = 0.0;
    std::optional<double> final_answer_rate; // pooled over all subagent calls
    double subagent_call_rate = 0.0;         // fraction of instances with >= 1 call
};

MetricsReport aggregate_metrics(const std::vector<InstanceMetrics>& instances);

std::string metrics_report_to_json_text(const MetricsReport& report);
std::string metrics_report_to_markdown(const MetricsReport& report);

} // namespace termharness
