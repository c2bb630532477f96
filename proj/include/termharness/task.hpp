#pragma once

#include "termharness/plan.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace termharness {

struct TaskInstance {
    std::string id;
    std::string repo_source;  // directory path, resolved relative to the manifest
    std::string base_commit;  // revision identifier, empty for plain trees
    std::string pre_patch;    // unified diff text, possibly empty
    std::string query;
    ExecutionPlan reference_plan;
    std::string language;
};

struct ManifestLoadFailure {
    std::string id;
    std::string reason;
};

struct ManifestLoad {
    std::vector<TaskInstance> instances;
    std::vector<ManifestLoadFailure> failed; // bad pre_patch or missing repo
};

// Manifest: JSONL, one TaskInstance per line. Malformed lines and empty
// queries throw ManifestInvalid; an instance whose pre_patch does not apply
// cleanly (or whose repo is missing) fails at load and lands in `failed`
// while the rest proceed.
ManifestLoad load_manifest(const std::filesystem::path& path, bool check_patches = true);
void save_manifest(const std::vector<TaskInstance>& instances, const std::filesystem::path& path);

std::string task_instance_to_json_text(const TaskInstance& instance);
TaskInstance task_instance_from_json_text(std::string_view text,
                                          const std::filesystem::path& manifest_dir = {});

} // namespace termharness
