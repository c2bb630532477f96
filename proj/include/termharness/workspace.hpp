#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace termharness {

struct PatchHunk {
    long old_start = 0; // 1-based; 0 for file creation
    long old_count = 0;
    long new_start = 0;
    long new_count = 0;
    std::vector<std::string> lines; // with leading ' ', '-', '+', or '\'
};

struct FilePatch {
    std::string old_path; // empty for /dev/null (new file)
    std::string new_path; // empty for /dev/null (deleted file)
    std::vector<PatchHunk> hunks;
};

// Unified diff parser; a/ and b/ prefixes are stripped. Throws
// PatchApplyFailure on malformed input.
std::vector<FilePatch> parse_unified_diff(std::string_view diff_text);

// Strict application: context and deletion lines must match the file at the
// hunk's stated position exactly (no fuzz, no offset search). Throws
// PatchApplyFailure on the first mismatch.
void apply_patch(const std::filesystem::path& root, std::string_view diff_text);

// Dry-run: true when apply_patch would succeed.
bool patch_applies(const std::filesystem::path& root, std::string_view diff_text,
                   std::string* reason = nullptr);

// Copies repo_source into workspace_dir, checks out base_commit when the
// copy carries a .git directory, then applies pre_patch. Returns the content
// hash of the prepared tree.
struct WorkspaceSpec {
    std::filesystem::path repo_source;
    std::string base_commit; // ignored when the tree has no .git
    std::string pre_patch;   // unified diff text, possibly empty
};

std::string prepare_workspace(const WorkspaceSpec& spec, const std::filesystem::path& workspace_dir);

} // namespace termharness
