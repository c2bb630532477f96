#pragma once

#include <sys/types.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace termharness {

// 60KB interpreted as binary kilobytes.
inline constexpr size_t kOutputLimitBytes = 61440;
inline constexpr std::string_view kElisionMarker = "\n[...output truncated...]\n";
// Reserved exit code outside the normal shell range; timed_out is the
// authoritative signal.
inline constexpr int kTimeoutExitCode = -1;

enum class ExecMode { sync, async };

struct TerminalCommand {
    std::string command;
    ExecMode mode = ExecMode::sync;
    int64_t timeout_ms = 30000;
    std::filesystem::path workdir;
};

struct TerminalResult {
    int exit_code = 0;
    std::string output; // combined stdout+stderr bytes, interleaved by arrival
    bool truncated = false;
    int64_t duration_ms = 0;
    bool timed_out = false;
    std::optional<std::string> async_handle;

    bool operator==(const TerminalResult&) const = default;
};

// Head-half + marker + tail-half whose total length is exactly `limit`;
// identity with truncated=false when the input already fits.
std::pair<std::string, bool> truncate_output(std::string_view raw, size_t limit = kOutputLimitBytes);

// Streaming equivalent of truncate_output: feeds chunks, remembers the first
// and last `limit` bytes, and finalizes to the same bytes truncate_output
// would produce on the concatenated input.
class OutputCapture {
public:
    explicit OutputCapture(size_t limit = kOutputLimitBytes);

    void append(std::string_view chunk);
    size_t total_bytes() const { return total_; }
    std::pair<std::string, bool> finalize() const;

private:
    size_t limit_;
    size_t total_ = 0;
    std::string head_;
    std::string tail_ring_;
    size_t tail_pos_ = 0;
};

struct SandboxSettings {
    std::string backend = "local"; // local | container
    std::string shell = "/bin/sh";
    int64_t hard_timeout_ms = 300000;
    size_t output_limit_bytes = kOutputLimitBytes;
    std::string container_name;
    std::string container_exec = "docker";
};

class TerminalExecutor {
public:
    virtual ~TerminalExecutor() = default;
    // Sync mode blocks until exit or timeout; async mode spawns and returns a
    // handle id immediately.
    virtual TerminalResult execute(const TerminalCommand& cmd) = 0;
};

// Runs commands through a shell interpreter in the given workdir. Each
// instance serializes commands; distinct instances run fully concurrently.
class LocalExecutor final : public TerminalExecutor {
public:
    explicit LocalExecutor(SandboxSettings settings = {});
    ~LocalExecutor() override;

    TerminalResult execute(const TerminalCommand& cmd) override;

    // Process group of the most recent sync spawn, for leak checks in tests.
    pid_t last_process_group() const { return last_pgid_; }

private:
    TerminalResult run_argv(const std::vector<std::string>& argv,
                            const std::filesystem::path& workdir, int64_t timeout_ms);

    SandboxSettings settings_;
    std::mutex mutex_;
    pid_t last_pgid_ = -1;
    uint64_t async_counter_ = 0;
    std::map<std::string, pid_t> async_handles_;

    friend class ContainerExecutor;
};

// Wraps each command in a container-exec invocation against a named,
// already-running container.
class ContainerExecutor final : public TerminalExecutor {
public:
    explicit ContainerExecutor(SandboxSettings settings);

    TerminalResult execute(const TerminalCommand& cmd) override;

    static std::vector<std::string> build_argv(const SandboxSettings& settings,
                                               const TerminalCommand& cmd);

private:
    SandboxSettings settings_;
    LocalExecutor runner_;
};

// Backend chosen by settings.backend.
std::unique_ptr<TerminalExecutor> make_executor(const SandboxSettings& settings);

} // namespace termharness
