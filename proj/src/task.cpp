#include "termharness/task.hpp"

#include "termharness/errors.hpp"
#include "termharness/util.hpp"
#include "termharness/workspace.hpp"

#include <nlohmann/json.hpp>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace termharness {

std::string task_instance_to_json_text(const TaskInstance& instance) {
    json j{{"id", instance.id},
           {"repo_source", instance.repo_source},
           {"base_commit", instance.base_commit},
           {"pre_patch", instance.pre_patch},
           {"query", instance.query},
           {"reference_plan", json::parse(plan_to_json_text(instance.reference_plan))},
           {"language", instance.language}};
    return j.dump();
}

TaskInstance task_instance_from_json_text(std::string_view text, const fs::path& manifest_dir) {
    json j = json::parse(text);
    TaskInstance instance;
    instance.id = j.at("id").get<std::string>();
    instance.repo_source = j.at("repo_source").get<std::string>();
    instance.base_commit = j.value("base_commit", "");
    instance.pre_patch = j.value("pre_patch", "");
    instance.query = j.at("query").get<std::string>();
    if (j.contains("reference_plan")) {
        instance.reference_plan = plan_from_json_text(j.at("reference_plan").dump());
    }
    instance.language = j.value("language", "");

    if (!manifest_dir.empty()) {
        fs::path repo(instance.repo_source);
        if (repo.is_relative()) instance.repo_source = (manifest_dir / repo).lexically_normal().string();
    }
    return instance;
}

ManifestLoad load_manifest(const fs::path& path, bool check_patches) {
    std::string text = read_text_file(path);
    fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");

    ManifestLoad load;
    size_t line_number = 0;
    for (const auto& line : split_lines(text)) {
        ++line_number;
        if (trim(line).empty()) continue;
        TaskInstance instance;
        try {
            instance = task_instance_from_json_text(line, dir);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ManifestInvalid,
                        path.string() + ":" + std::to_string(line_number) + ": " + e.what());
        }
        if (instance.query.empty()) {
            throw Error(ErrorKind::ManifestInvalid,
                        path.string() + ":" + std::to_string(line_number) + ": empty query for " +
                            instance.id);
        }
        // A failing instance is excluded here, at load time, so the rest of
        // the batch still runs.
        if (!fs::is_directory(instance.repo_source)) {
            load.failed.push_back({instance.id, "repo_source not found: " + instance.repo_source});
            continue;
        }
        if (check_patches && !trim(instance.pre_patch).empty() &&
            !fs::exists(fs::path(instance.repo_source) / ".git")) {
            // Plain trees can be checked in place; git-backed repos are only
            // checked at workspace preparation, after the base commit checkout.
            std::string reason;
            if (!patch_applies(instance.repo_source, instance.pre_patch, &reason)) {
                load.failed.push_back({instance.id, "pre_patch does not apply: " + reason});
                continue;
            }
        }
        load.instances.push_back(std::move(instance));
    }
    if (load.instances.empty() && load.failed.empty()) {
        throw Error(ErrorKind::ManifestInvalid, path.string() + ": no instances");
    }
    return load;
}

void save_manifest(const std::vector<TaskInstance>& instances, const fs::path& path) {
    std::string out;
    for (const auto& instance : instances) {
        out += task_instance_to_json_text(instance);
        out += '\n';
    }
    write_text_file(path, out);
}

} // namespace termharness
