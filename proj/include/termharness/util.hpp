#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace termharness {

std::string trim(std::string_view text);
bool starts_with(std::string_view text, std::string_view prefix);
std::vector<std::string> split_lines(std::string_view text);
std::string to_lower(std::string_view text);
std::string replace_all(std::string text, std::string_view needle, std::string_view replacement);

// Occurrence count of a non-empty needle (non-overlapping).
size_t count_occurrences(std::string_view text, std::string_view needle);

// Replaces invalid UTF-8 byte sequences with U+FFFD so arbitrary command
// output can be embedded in JSON and prompts.
std::string sanitize_utf8(std::string_view bytes);

// First `head` chars + marker + last `tail` chars; identity when the text
// already fits.
std::string head_tail_clip(std::string_view text, size_t head, size_t tail, std::string_view marker);

uint64_t fnv1a64(std::string_view bytes, uint64_t seed = 1469598103934665603ull);
std::string hex64(uint64_t value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

// Recursive copy that preserves file permissions; refuses to overwrite.
void copy_tree(const std::filesystem::path& from, const std::filesystem::path& to);

// Content hash over sorted relative paths and file bytes of a directory tree.
std::string tree_hash(const std::filesystem::path& root);

// RAII temp directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "termharness");
    ~TempDir();

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    TempDir(TempDir&& other) noexcept;
    TempDir& operator=(TempDir&& other) noexcept;

    const std::filesystem::path& path() const { return path_; }
    // Gives up ownership; the directory is no longer removed.
    std::filesystem::path release();

private:
    std::filesystem::path path_;
};

} // namespace termharness
