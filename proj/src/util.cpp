#include "termharness/util.hpp"

#include "termharness/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace termharness {

std::string trim(std::string_view text) {
    size_t begin = 0;
    size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return std::string(text.substr(begin, end - begin));
}

bool starts_with(std::string_view text, std::string_view prefix) {
    return text.size() >= prefix.size() && text.substr(0, prefix.size()) == prefix;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t eol = text.find('\n', start);
        if (eol == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, eol - start));
        start = eol + 1;
    }
    return lines;
}

std::string to_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string replace_all(std::string text, std::string_view needle, std::string_view replacement) {
    if (needle.empty()) return text;
    size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), replacement);
        pos += replacement.size();
    }
    return text;
}

size_t count_occurrences(std::string_view text, std::string_view needle) {
    if (needle.empty()) return 0;
    size_t count = 0;
    size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

std::string sanitize_utf8(std::string_view bytes) {
    static const std::string replacement = "\xEF\xBF\xBD"; // U+FFFD
    std::string out;
    out.reserve(bytes.size());
    size_t i = 0;
    while (i < bytes.size()) {
        unsigned char c = static_cast<unsigned char>(bytes[i]);
        size_t len = 0;
        if (c < 0x80) len = 1;
        else if ((c & 0xE0) == 0xC0 && c >= 0xC2) len = 2;
        else if ((c & 0xF0) == 0xE0) len = 3;
        else if ((c & 0xF8) == 0xF0 && c <= 0xF4) len = 4;

        bool ok = len > 0 && i + len <= bytes.size();
        for (size_t k = 1; ok && k < len; ++k) {
            unsigned char cont = static_cast<unsigned char>(bytes[i + k]);
            if ((cont & 0xC0) != 0x80) ok = false;
        }
        if (ok && len == 3) {
            unsigned char c1 = static_cast<unsigned char>(bytes[i + 1]);
            if (c == 0xE0 && c1 < 0xA0) ok = false;           // overlong
            if (c == 0xED && c1 >= 0xA0) ok = false;          // surrogates
        }
        if (ok && len == 4) {
            unsigned char c1 = static_cast<unsigned char>(bytes[i + 1]);
            if (c == 0xF0 && c1 < 0x90) ok = false;           // overlong
            if (c == 0xF4 && c1 >= 0x90) ok = false;          // > U+10FFFF
        }

        if (ok) {
            out.append(bytes.substr(i, len));
            i += len;
        } else {
            out.append(replacement);
            i += 1;
        }
    }
    return out;
}

std::string head_tail_clip(std::string_view text, size_t head, size_t tail, std::string_view marker) {
    if (text.size() <= head + tail) return std::string(text);
    std::string out;
    out.reserve(head + marker.size() + tail);
    out.append(text.substr(0, head));
    out.append(marker);
    out.append(text.substr(text.size() - tail));
    return out;
}

uint64_t fnv1a64(std::string_view bytes, uint64_t seed) {
    uint64_t hash = seed;
    for (char c : bytes) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 1099511628211ull;
    }
    return hash;
}

std::string hex64(uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

void copy_tree(const fs::path& from, const fs::path& to) {
    std::error_code ec;
    fs::copy(from, to,
             fs::copy_options::recursive | fs::copy_options::copy_symlinks,
             ec);
    if (ec) {
        throw Error(ErrorKind::IoFailure,
                    "copy " + from.string() + " -> " + to.string() + ": " + ec.message());
    }
}

std::string tree_hash(const fs::path& root) {
    // Sorted map keeps the hash independent of directory iteration order.
    std::map<std::string, fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        files.emplace(fs::relative(entry.path(), root).generic_string(), entry.path());
    }
    uint64_t hash = fnv1a64("tree");
    for (const auto& [rel, path] : files) {
        hash = fnv1a64(rel, hash);
        hash = fnv1a64("\0", hash);
        hash = fnv1a64(read_text_file(path), hash);
        hash = fnv1a64("\1", hash);
    }
    return hex64(hash);
}

namespace {
std::atomic<uint64_t> g_tempdir_counter{0};
}

TempDir::TempDir(const std::string& prefix) {
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    std::mt19937_64 rng(static_cast<uint64_t>(stamp) ^ (g_tempdir_counter.fetch_add(1) << 32));
    for (int attempt = 0; attempt < 16; ++attempt) {
        fs::path candidate = fs::temp_directory_path() /
                             (prefix + "-" + hex64(rng()).substr(0, 12));
        std::error_code ec;
        if (fs::create_directories(candidate, ec) && !ec) {
            path_ = candidate;
            return;
        }
    }
    throw Error(ErrorKind::IoFailure, "cannot create temp directory for prefix " + prefix);
}

TempDir::~TempDir() {
    if (!path_.empty()) {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
}

TempDir::TempDir(TempDir&& other) noexcept : path_(std::move(other.path_)) {
    other.path_.clear();
}

TempDir& TempDir::operator=(TempDir&& other) noexcept {
    if (this != &other) {
        if (!path_.empty()) {
            std::error_code ec;
            fs::remove_all(path_, ec);
        }
        path_ = std::move(other.path_);
        other.path_.clear();
    }
    return *this;
}

std::filesystem::path TempDir::release() {
    fs::path out = path_;
    path_.clear();
    return out;
}

} // namespace termharness
