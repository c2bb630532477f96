#include "termharness/rubric.hpp"

#include "termharness/errors.hpp"
#include "termharness/log.hpp"
#include "termharness/util.hpp"

#include <map>
#include <numeric>

namespace termharness {

namespace {

double mean_of(const double* values, size_t count) {
    return std::accumulate(values, values + count, 0.0) / static_cast<double>(count);
}

} // namespace

double RubricScores::positive_mean() const { return mean_of(positive.data(), positive.size()); }
double RubricScores::pitfall_mean() const { return mean_of(pitfall.data(), pitfall.size()); }
double RubricScores::final_answer_mean() const {
    return mean_of(final_answer.data(), final_answer.size());
}

RubricScores parse_rubric_scores(std::string_view text) {
    std::map<std::string, double> found;
    for (const auto& raw : split_lines(text)) {
        std::string line = trim(raw);
        if (starts_with(line, "-")) line = trim(line.substr(1));
        if (starts_with(line, "```")) continue;
        size_t colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string name = to_lower(trim(line.substr(0, colon)));
        name = replace_all(std::move(name), "`", "");
        name = replace_all(std::move(name), "*", "");
        name = replace_all(std::move(name), " ", "_");
        std::string value_text = trim(line.substr(colon + 1));
        try {
            size_t end = 0;
            double value = std::stod(value_text, &end);
            if (end > 0) found[name] = value;
        } catch (const std::exception&) {
            // Not a score line.
        }
    }

    auto take = [&](std::string_view name, double& slot, std::vector<std::string>& missing) {
        auto it = found.find(std::string(name));
        if (it == found.end()) {
            missing.push_back(std::string(name));
            return;
        }
        double value = it->second;
        if (value < 0.0 || value > 100.0) {
            log::warn("rubric score " + std::string(name) + "=" + std::to_string(value) +
                      " outside [0,100], clamping");
            value = std::min(100.0, std::max(0.0, value));
        }
        slot = value;
    };

    RubricScores scores;
    std::vector<std::string> missing;
    for (size_t i = 0; i < kPositiveDimensions.size(); ++i) {
        take(kPositiveDimensions[i], scores.positive[i], missing);
    }
    for (size_t i = 0; i < kPitfallDimensions.size(); ++i) {
        take(kPitfallDimensions[i], scores.pitfall[i], missing);
    }
    for (size_t i = 0; i < kFinalAnswerDimensions.size(); ++i) {
        take(kFinalAnswerDimensions[i], scores.final_answer[i], missing);
    }
    if (!missing.empty()) {
        std::string names;
        for (const auto& name : missing) names += (names.empty() ? "" : ", ") + name;
        throw Error(ErrorKind::GradeParseFailure, "missing dimensions: " + names);
    }
    return scores;
}

RubricScores grade_rubric(const ExecutionPlan& candidate, const ExecutionPlan& reference,
                          std::string_view query, ChatGateway& llm, const std::string& model) {
    PromptPair prompt = build_grade_prompt(query, plan_to_text(reference), plan_to_text(candidate));
    ChatRequest request;
    request.model = model;
    request.messages.push_back(make_system_message(prompt.system));
    request.messages.push_back(make_user_message(prompt.user));

    std::string first_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        ChatResponse response = llm.complete(request);
        try {
            return parse_rubric_scores(response.message.content);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::GradeParseFailure) throw;
            first_error = e.what();
            log::warn(std::string("rubric parse failed, reprompting: ") + e.what());
            request.messages.push_back(response.message);
            request.messages.push_back(make_user_message(
                "The score block was incomplete. Reply again with one `dimension: score` line for "
                "each of the 14 dimensions."));
        }
    }
    throw Error(ErrorKind::GradeParseFailure, "after retry: " + first_error);
}

} // namespace termharness
