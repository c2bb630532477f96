#include "termharness/plan.hpp"

#include "termharness/errors.hpp"
#include "termharness/log.hpp"
#include "termharness/util.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cctype>
#include <sstream>

using json = nlohmann::json;

namespace termharness {

const char* to_string(TaskOutcome outcome) {
    switch (outcome) {
        case TaskOutcome::success: return "success";
        case TaskOutcome::failure: return "failure";
        case TaskOutcome::partial: return "partial";
    }
    return "partial";
}

std::optional<TaskOutcome> task_outcome_from_string(std::string_view text) {
    std::string lower = to_lower(trim(text));
    if (lower == "success") return TaskOutcome::success;
    if (lower == "failure") return TaskOutcome::failure;
    if (lower == "partial") return TaskOutcome::partial;
    return std::nullopt;
}

namespace {

constexpr std::array<std::string_view, 5> kHeadings = {
    "Task Outcome:", "Commands Executed:", "Key Findings:", "Error Recovery:", "Final State:"};

// Strips markdown decoration ("**", "##", leading bullets) so headings match
// however the model dresses them up.
std::string undecorate(std::string_view line) {
    std::string out = trim(line);
    while (!out.empty() && (out.front() == '#' || out.front() == '*' || out.front() == '-')) {
        out.erase(out.begin());
    }
    out = replace_all(out, "**", "");
    return trim(out);
}

std::optional<size_t> match_heading(const std::string& undecorated) {
    for (size_t i = 0; i < kHeadings.size(); ++i) {
        if (starts_with(undecorated, kHeadings[i])) return i;
    }
    return std::nullopt;
}

std::optional<int> find_exit_code(std::string_view text) {
    std::string lower = to_lower(text);
    size_t pos = lower.find("exit code");
    if (pos == std::string::npos) return std::nullopt;
    pos += std::string_view("exit code").size();
    while (pos < lower.size() && (lower[pos] == ' ' || lower[pos] == ':')) ++pos;
    size_t end = pos;
    if (end < lower.size() && lower[end] == '-') ++end;
    while (end < lower.size() && std::isdigit(static_cast<unsigned char>(lower[end]))) ++end;
    if (end == pos || (end == pos + 1 && lower[pos] == '-')) return std::nullopt;
    try {
        return std::stoi(std::string(text.substr(pos, end - pos)));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::string first_backticked(std::string_view text) {
    size_t open = text.find('`');
    if (open == std::string_view::npos) return "";
    size_t close = text.find('`', open + 1);
    if (close == std::string_view::npos) return "";
    return std::string(text.substr(open + 1, close - open - 1));
}

std::vector<PlanCommand> parse_command_entries(const std::string& section) {
    std::vector<PlanCommand> entries;
    PlanCommand current;
    bool open = false;
    std::string* sink = nullptr;

    auto flush = [&]() {
        if (open && !current.command.empty()) {
            current.rationale = trim(current.rationale);
            current.result = trim(current.result);
            if (!current.exit_code) current.exit_code = find_exit_code(current.result);
            entries.push_back(current);
        }
        current = PlanCommand{};
        open = false;
        sink = nullptr;
    };

    for (const auto& raw : split_lines(section)) {
        std::string line = undecorate(raw);
        if (starts_with(line, "Command:")) {
            flush();
            open = true;
            std::string rest = trim(line.substr(std::string_view("Command:").size()));
            std::string ticked = first_backticked(rest);
            current.command = ticked.empty() ? rest : ticked;
            continue;
        }
        if (!open && !line.empty() && line.find('`') != std::string::npos) {
            // Loose bullet form: "- `cmd`: what happened".
            flush();
            open = true;
            current.command = first_backticked(line);
            size_t close = line.find('`', line.find('`') + 1);
            std::string rest = close == std::string::npos ? "" : trim(line.substr(close + 1));
            if (starts_with(rest, ":")) rest = trim(rest.substr(1));
            current.result = rest;
            sink = &current.result;
            continue;
        }
        if (open && starts_with(line, "Why:")) {
            current.rationale = trim(line.substr(std::string_view("Why:").size()));
            sink = &current.rationale;
            continue;
        }
        if (open && starts_with(line, "Result:")) {
            current.result = trim(line.substr(std::string_view("Result:").size()));
            sink = &current.result;
            continue;
        }
        if (open && sink && !line.empty()) {
            *sink += "\n" + line;
        }
    }
    flush();
    return entries;
}

} // namespace

std::string plan_to_text(const ExecutionPlan& plan) {
    std::ostringstream out;
    out << "EXECUTION PLAN\n\n";
    out << "Task Outcome: " << to_string(plan.outcome) << ". " << plan.outcome_text << "\n\n";
    out << "Commands Executed:\n";
    for (const auto& entry : plan.commands_executed) {
        out << "- Command: `" << entry.command << "`\n";
        if (!entry.rationale.empty()) out << "  Why: " << entry.rationale << "\n";
        out << "  Result: " << entry.result;
        if (entry.exit_code && !find_exit_code(entry.result)) {
            out << " (exit code " << *entry.exit_code << ")";
        }
        out << "\n";
    }
    out << "\n";
    out << "Key Findings: " << plan.key_findings << "\n\n";
    out << "Error Recovery: " << plan.error_recovery << "\n\n";
    out << "Final State: " << plan.final_state << "\n";
    return out.str();
}

ExecutionPlan plan_from_text(std::string_view text) {
    std::array<std::optional<std::string>, 5> sections;
    std::optional<size_t> active;

    for (const auto& raw : split_lines(text)) {
        std::string line = undecorate(raw);
        if (auto heading = match_heading(line)) {
            active = *heading;
            std::string rest = trim(line.substr(kHeadings[*heading].size()));
            sections[*heading] = rest;
            continue;
        }
        if (active && sections[*active]) {
            *sections[*active] += "\n" + std::string(raw);
        }
    }

    std::vector<std::string> missing;
    for (size_t i = 0; i < kHeadings.size(); ++i) {
        if (!sections[i]) missing.push_back(std::string(kHeadings[i].substr(0, kHeadings[i].size() - 1)));
    }
    if (!missing.empty()) {
        std::string names;
        for (const auto& name : missing) names += (names.empty() ? "" : ", ") + name;
        throw Error(ErrorKind::PlanParseFailure, "missing sections: " + names);
    }

    ExecutionPlan plan;
    std::string outcome_line = trim(*sections[0]);
    // Leading "success / failure / partial" token, optionally bracketed.
    std::string head = outcome_line;
    if (!head.empty() && head.front() == '[') head.erase(head.begin());
    size_t cut = head.find_first_of(".,;:\n ");
    std::string label = cut == std::string::npos ? head : head.substr(0, cut);
    if (auto outcome = task_outcome_from_string(label)) {
        plan.outcome = *outcome;
        std::string rest = cut == std::string::npos ? "" : head.substr(cut);
        while (!rest.empty() && (rest.front() == '.' || rest.front() == ',' || rest.front() == ':' ||
                                 rest.front() == ';' || rest.front() == ' ')) {
            rest.erase(rest.begin());
        }
        if (!rest.empty() && rest.back() == ']') rest.pop_back();
        plan.outcome_text = trim(rest);
    } else {
        plan.outcome = TaskOutcome::partial;
        plan.outcome_text = outcome_line;
    }
    plan.commands_executed = parse_command_entries(*sections[1]);
    plan.key_findings = trim(*sections[2]);
    plan.error_recovery = trim(*sections[3]);
    plan.final_state = trim(*sections[4]);
    return plan;
}

std::string plan_to_json_text(const ExecutionPlan& plan) {
    json commands = json::array();
    for (const auto& entry : plan.commands_executed) {
        json c{{"command", entry.command}, {"rationale", entry.rationale}, {"result", entry.result}};
        if (entry.exit_code) c["exit_code"] = *entry.exit_code;
        commands.push_back(std::move(c));
    }
    json j{{"task_outcome", to_string(plan.outcome)},
           {"outcome_text", plan.outcome_text},
           {"commands_executed", std::move(commands)},
           {"key_findings", plan.key_findings},
           {"error_recovery", plan.error_recovery},
           {"final_state", plan.final_state}};
    return j.dump();
}

ExecutionPlan plan_from_json_text(std::string_view text) {
    json j = json::parse(text);
    ExecutionPlan plan;
    auto outcome = task_outcome_from_string(j.at("task_outcome").get<std::string>());
    plan.outcome = outcome.value_or(TaskOutcome::partial);
    plan.outcome_text = j.value("outcome_text", "");
    if (j.contains("commands_executed")) {
        for (const auto& c : j.at("commands_executed")) {
            PlanCommand entry;
            entry.command = c.at("command").get<std::string>();
            entry.rationale = c.value("rationale", "");
            entry.result = c.value("result", "");
            if (c.contains("exit_code")) entry.exit_code = c.at("exit_code").get<int>();
            plan.commands_executed.push_back(std::move(entry));
        }
    }
    plan.key_findings = j.value("key_findings", "");
    plan.error_recovery = j.value("error_recovery", "");
    plan.final_state = j.value("final_state", "");
    return plan;
}

ExecutionPlan extract_execution_plan(std::string_view query, const std::vector<CommandRun>& commands,
                                     std::string_view final_answer_text, ChatGateway& llm,
                                     const std::string& model) {
    PromptPair prompt = build_plan_prompt(query, commands, final_answer_text);
    ChatRequest request;
    request.model = model;
    request.messages.push_back(make_system_message(prompt.system));
    request.messages.push_back(make_user_message(prompt.user));

    std::string first_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        ChatResponse response = llm.complete(request);
        try {
            return plan_from_text(response.message.content);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::PlanParseFailure) throw;
            first_error = e.what();
            log::warn(std::string("plan parse failed, reprompting: ") + e.what());
            request.messages.push_back(response.message);
            request.messages.push_back(make_user_message(
                "That reply did not follow the template. Rewrite it with all five sections: "
                "Task Outcome, Commands Executed, Key Findings, Error Recovery, Final State."));
        }
    }
    throw Error(ErrorKind::PlanParseFailure, "after retry: " + first_error);
}

} // namespace termharness
