#include "termharness/workspace.hpp"

#include "termharness/errors.hpp"
#include "termharness/terminal.hpp"
#include "termharness/util.hpp"

#include <algorithm>
#include <map>

namespace fs = std::filesystem;

namespace termharness {

namespace {

std::string strip_diff_prefix(std::string path) {
    if (path == "/dev/null") return "";
    if (starts_with(path, "a/") || starts_with(path, "b/")) return path.substr(2);
    return path;
}

// "--- a/src/x.cpp\t2024-01-01" -> "a/src/x.cpp"
std::string header_path(std::string_view line, std::string_view marker) {
    std::string rest = std::string(line.substr(marker.size()));
    size_t tab = rest.find('\t');
    if (tab != std::string::npos) rest = rest.substr(0, tab);
    return trim(rest);
}

bool parse_hunk_header(const std::string& line, PatchHunk& hunk) {
    // @@ -old_start[,old_count] +new_start[,new_count] @@ [context]
    if (!starts_with(line, "@@ ")) return false;
    size_t close = line.find(" @@", 3);
    if (close == std::string::npos) return false;
    std::string ranges = line.substr(3, close - 3);
    long values[4] = {0, 1, 0, 1}; // counts default to 1
    size_t field = 0;
    size_t i = 0;
    auto read_number = [&](long& out) {
        size_t start = i;
        while (i < ranges.size() && std::isdigit(static_cast<unsigned char>(ranges[i]))) ++i;
        if (i == start) return false;
        out = std::stol(ranges.substr(start, i - start));
        return true;
    };
    // -l[,c]
    if (i >= ranges.size() || ranges[i] != '-') return false;
    ++i;
    if (!read_number(values[0])) return false;
    if (i < ranges.size() && ranges[i] == ',') {
        ++i;
        if (!read_number(values[1])) return false;
    }
    while (i < ranges.size() && ranges[i] == ' ') ++i;
    if (i >= ranges.size() || ranges[i] != '+') return false;
    ++i;
    if (!read_number(values[2])) return false;
    if (i < ranges.size() && ranges[i] == ',') {
        ++i;
        if (!read_number(values[3])) return false;
    }
    (void)field;
    hunk.old_start = values[0];
    hunk.old_count = values[1];
    hunk.new_start = values[2];
    hunk.new_count = values[3];
    return true;
}

struct FileLines {
    std::vector<std::string> lines;
    bool trailing_newline = true;
};

FileLines split_file(const std::string& content) {
    FileLines out;
    if (content.empty()) {
        out.trailing_newline = true;
        return out;
    }
    out.lines = split_lines(content);
    if (!out.lines.empty() && out.lines.back().empty() && content.back() == '\n') {
        out.lines.pop_back();
        out.trailing_newline = true;
    } else {
        out.trailing_newline = false;
    }
    return out;
}

std::string join_file(const FileLines& file) {
    std::string out;
    for (size_t i = 0; i < file.lines.size(); ++i) {
        out += file.lines[i];
        if (i + 1 < file.lines.size() || file.trailing_newline) out += '\n';
    }
    return out;
}

// Applies one file's hunks to its current content; throws on any mismatch.
std::string apply_file_patch(const FilePatch& patch, const std::string& original,
                             const std::string& display_path) {
    FileLines file = split_file(original);
    FileLines result;
    result.trailing_newline = file.trailing_newline;
    size_t cursor = 0; // index into file.lines

    auto fail = [&](const std::string& what, long line_number) {
        throw Error(ErrorKind::PatchApplyFailure,
                    display_path + ":" + std::to_string(line_number) + ": " + what);
    };

    for (const auto& hunk : patch.hunks) {
        size_t hunk_begin = hunk.old_start > 0 ? static_cast<size_t>(hunk.old_start - 1) : 0;
        if (hunk_begin > file.lines.size()) {
            fail("hunk starts beyond end of file", hunk.old_start);
        }
        if (hunk_begin < cursor) fail("overlapping hunks", hunk.old_start);
        // Copy untouched lines up to the hunk.
        while (cursor < hunk_begin) {
            result.lines.push_back(file.lines[cursor]);
            ++cursor;
        }
        const std::string* last_emitted = nullptr;
        bool last_was_removal = false;
        for (const auto& line : hunk.lines) {
            if (line.empty()) {
                // A fully blank line inside a hunk body is a context line for
                // an empty source line (some generators drop the leading space).
                if (cursor >= file.lines.size() || !file.lines[cursor].empty()) {
                    fail("context mismatch (expected empty line)", static_cast<long>(cursor + 1));
                }
                result.lines.push_back(file.lines[cursor]);
                ++cursor;
                last_emitted = &result.lines.back();
                last_was_removal = false;
                continue;
            }
            char tag = line[0];
            std::string body = line.substr(1);
            switch (tag) {
                case ' ': {
                    if (cursor >= file.lines.size() || file.lines[cursor] != body) {
                        fail("context mismatch: expected \"" + body + "\"",
                             static_cast<long>(cursor + 1));
                    }
                    result.lines.push_back(file.lines[cursor]);
                    ++cursor;
                    last_emitted = &result.lines.back();
                    last_was_removal = false;
                    break;
                }
                case '-': {
                    if (cursor >= file.lines.size() || file.lines[cursor] != body) {
                        fail("removal mismatch: expected \"" + body + "\"",
                             static_cast<long>(cursor + 1));
                    }
                    ++cursor;
                    last_emitted = nullptr;
                    last_was_removal = true;
                    break;
                }
                case '+': {
                    result.lines.push_back(body);
                    last_emitted = &result.lines.back();
                    last_was_removal = false;
                    break;
                }
                case '\\': {
                    // "\ No newline at end of file"
                    if (last_was_removal) {
                        // The removed final line had no newline; the (possibly
                        // new) final content regains one unless stated again.
                        result.trailing_newline = true;
                    } else if (last_emitted != nullptr) {
                        result.trailing_newline = false;
                    }
                    break;
                }
                default:
                    fail(std::string("unknown hunk line tag '") + tag + "'",
                         static_cast<long>(cursor + 1));
            }
        }
    }
    while (cursor < file.lines.size()) {
        result.lines.push_back(file.lines[cursor]);
        ++cursor;
    }
    return join_file(result);
}

} // namespace

std::vector<FilePatch> parse_unified_diff(std::string_view diff_text) {
    std::vector<FilePatch> patches;
    std::vector<std::string> lines = split_lines(diff_text);
    size_t i = 0;
    while (i < lines.size()) {
        if (!starts_with(lines[i], "--- ")) {
            ++i;
            continue;
        }
        if (i + 1 >= lines.size() || !starts_with(lines[i + 1], "+++ ")) {
            throw Error(ErrorKind::PatchApplyFailure,
                        "line " + std::to_string(i + 1) + ": '---' header without '+++'");
        }
        FilePatch patch;
        patch.old_path = strip_diff_prefix(header_path(lines[i], "--- "));
        patch.new_path = strip_diff_prefix(header_path(lines[i + 1], "+++ "));
        if (patch.old_path.empty() && patch.new_path.empty()) {
            throw Error(ErrorKind::PatchApplyFailure, "patch with both sides /dev/null");
        }
        i += 2;
        while (i < lines.size() && starts_with(lines[i], "@@ ")) {
            PatchHunk hunk;
            if (!parse_hunk_header(lines[i], hunk)) {
                throw Error(ErrorKind::PatchApplyFailure,
                            "line " + std::to_string(i + 1) + ": bad hunk header: " + lines[i]);
            }
            ++i;
            long seen_old = 0;
            long seen_new = 0;
            while (i < lines.size() && (seen_old < hunk.old_count || seen_new < hunk.new_count)) {
                const std::string& line = lines[i];
                char tag = line.empty() ? ' ' : line[0];
                if (tag == ' ') {
                    ++seen_old;
                    ++seen_new;
                } else if (tag == '-') {
                    ++seen_old;
                } else if (tag == '+') {
                    ++seen_new;
                } else if (tag == '\\') {
                    // no-newline marker, counts for neither side
                } else {
                    throw Error(ErrorKind::PatchApplyFailure,
                                "line " + std::to_string(i + 1) + ": unexpected hunk body: " + line);
                }
                hunk.lines.push_back(line);
                ++i;
            }
            // Trailing no-newline marker after the counted lines.
            if (i < lines.size() && starts_with(lines[i], "\\")) {
                hunk.lines.push_back(lines[i]);
                ++i;
            }
            if (seen_old != hunk.old_count || seen_new != hunk.new_count) {
                throw Error(ErrorKind::PatchApplyFailure, "hunk body shorter than its header counts");
            }
            patch.hunks.push_back(std::move(hunk));
        }
        if (patch.hunks.empty()) {
            throw Error(ErrorKind::PatchApplyFailure, "file header without hunks: " + patch.old_path);
        }
        patches.push_back(std::move(patch));
    }
    if (patches.empty()) {
        throw Error(ErrorKind::PatchApplyFailure, "no file patches found in diff");
    }
    return patches;
}

void apply_patch(const fs::path& root, std::string_view diff_text) {
    std::vector<FilePatch> patches = parse_unified_diff(diff_text);

    // Stage all results first so a mismatch in a later file leaves the tree
    // untouched.
    std::map<fs::path, std::optional<std::string>> staged; // nullopt = delete
    for (const auto& patch : patches) {
        bool is_new = patch.old_path.empty();
        bool is_delete = patch.new_path.empty();
        fs::path source = root / (is_new ? patch.new_path : patch.old_path);
        fs::path target = root / (is_delete ? patch.old_path : patch.new_path);

        std::string original;
        if (!is_new) {
            if (!fs::exists(source)) {
                throw Error(ErrorKind::PatchApplyFailure, "missing file: " + patch.old_path);
            }
            original = read_text_file(source);
        } else if (fs::exists(target)) {
            throw Error(ErrorKind::PatchApplyFailure, "file already exists: " + patch.new_path);
        }

        std::string display = is_new ? patch.new_path : patch.old_path;
        std::string updated = apply_file_patch(patch, original, display);
        if (is_delete) {
            if (!updated.empty()) {
                throw Error(ErrorKind::PatchApplyFailure,
                            "delete patch leaves content in " + patch.old_path);
            }
            staged[source] = std::nullopt;
            continue;
        }
        if (!is_new && patch.old_path != patch.new_path) staged[source] = std::nullopt; // rename
        staged[target] = std::move(updated);
    }

    for (const auto& [path, content] : staged) {
        if (!content) {
            std::error_code ec;
            fs::remove(path, ec);
        } else {
            write_text_file(path, *content);
        }
    }
}

bool patch_applies(const fs::path& root, std::string_view diff_text, std::string* reason) {
    try {
        std::vector<FilePatch> patches = parse_unified_diff(diff_text);
        for (const auto& patch : patches) {
            bool is_new = patch.old_path.empty();
            fs::path source = root / (is_new ? patch.new_path : patch.old_path);
            std::string original;
            if (!is_new) {
                if (!fs::exists(source)) {
                    throw Error(ErrorKind::PatchApplyFailure, "missing file: " + patch.old_path);
                }
                original = read_text_file(source);
            } else if (fs::exists(source)) {
                throw Error(ErrorKind::PatchApplyFailure, "file already exists: " + patch.new_path);
            }
            (void)apply_file_patch(patch, original, patch.old_path);
        }
        return true;
    } catch (const Error& e) {
        if (reason) *reason = e.what();
        return false;
    }
}

std::string prepare_workspace(const WorkspaceSpec& spec, const fs::path& workspace_dir) {
    if (!fs::is_directory(spec.repo_source)) {
        throw Error(ErrorKind::WorkspaceSetupFailure,
                    "repo source is not a directory: " + spec.repo_source.string());
    }
    try {
        fs::create_directories(workspace_dir);
        for (const auto& entry : fs::directory_iterator(spec.repo_source)) {
            copy_tree(entry.path(), workspace_dir / entry.path().filename());
        }
    } catch (const Error& e) {
        throw Error(ErrorKind::WorkspaceSetupFailure, e.what());
    }

    if (!spec.base_commit.empty() && fs::exists(workspace_dir / ".git")) {
        LocalExecutor git;
        TerminalCommand checkout;
        checkout.command = "git checkout -q -f " + spec.base_commit;
        checkout.workdir = workspace_dir;
        checkout.timeout_ms = 60000;
        TerminalResult result = git.execute(checkout);
        if (result.exit_code != 0) {
            throw Error(ErrorKind::WorkspaceSetupFailure,
                        "git checkout " + spec.base_commit + " failed: " +
                            sanitize_utf8(result.output).substr(0, 300));
        }
    }

    if (!trim(spec.pre_patch).empty()) {
        apply_patch(workspace_dir, spec.pre_patch);
    }
    return tree_hash(workspace_dir);
}

} // namespace termharness
