#include "termharness/terminal.hpp"

#include "termharness/errors.hpp"
#include "termharness/util.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstring>

namespace fs = std::filesystem;

namespace termharness {

namespace {

struct SplitSizes {
    size_t head;
    size_t tail;
    bool with_marker;
};

SplitSizes truncation_split(size_t limit) {
    if (limit <= kElisionMarker.size()) {
        // Degenerate limits cannot fit the marker; split the budget plainly.
        size_t head = limit / 2;
        return {head, limit - head, false};
    }
    size_t budget = limit - kElisionMarker.size();
    size_t head = budget / 2;
    return {head, budget - head, true};
}

} // namespace

std::pair<std::string, bool> truncate_output(std::string_view raw, size_t limit) {
    if (raw.size() <= limit) return {std::string(raw), false};
    auto split = truncation_split(limit);
    std::string out;
    out.reserve(limit);
    out.append(raw.substr(0, split.head));
    if (split.with_marker) out.append(kElisionMarker);
    out.append(raw.substr(raw.size() - split.tail));
    return {std::move(out), true};
}

OutputCapture::OutputCapture(size_t limit) : limit_(limit) {
    head_.reserve(std::min<size_t>(limit, 4096));
}

void OutputCapture::append(std::string_view chunk) {
    total_ += chunk.size();
    if (head_.size() < limit_) {
        size_t take = std::min(limit_ - head_.size(), chunk.size());
        head_.append(chunk.substr(0, take));
    }
    if (limit_ == 0) return;
    if (tail_ring_.size() != limit_) tail_ring_.resize(limit_);
    // Only the last `limit_` bytes of the chunk can matter for the tail.
    std::string_view relevant = chunk.size() > limit_ ? chunk.substr(chunk.size() - limit_) : chunk;
    for (char c : relevant) {
        tail_ring_[tail_pos_] = c;
        tail_pos_ = (tail_pos_ + 1) % limit_;
    }
}

std::pair<std::string, bool> OutputCapture::finalize() const {
    if (total_ <= limit_) return {head_, false};
    auto split = truncation_split(limit_);
    std::string out;
    out.reserve(limit_);
    out.append(head_.substr(0, split.head));
    if (split.with_marker) out.append(kElisionMarker);
    // Last split.tail bytes, read from the ring ending at tail_pos_.
    std::string tail(split.tail, '\0');
    size_t start = (tail_pos_ + limit_ - split.tail) % limit_;
    for (size_t i = 0; i < split.tail; ++i) {
        tail[i] = tail_ring_[(start + i) % limit_];
    }
    out.append(tail);
    return {std::move(out), true};
}

LocalExecutor::LocalExecutor(SandboxSettings settings) : settings_(std::move(settings)) {}

LocalExecutor::~LocalExecutor() {
    for (const auto& [handle, pgid] : async_handles_) {
        ::killpg(pgid, SIGKILL);
        int status = 0;
        ::waitpid(pgid, &status, WNOHANG);
    }
}

TerminalResult LocalExecutor::run_argv(const std::vector<std::string>& argv,
                                       const fs::path& workdir, int64_t timeout_ms) {
    int pipefd[2];
    if (::pipe(pipefd) != 0) {
        throw Error(ErrorKind::SpawnFailure, std::string("pipe: ") + std::strerror(errno));
    }

    pid_t pid = ::fork();
    if (pid < 0) {
        ::close(pipefd[0]);
        ::close(pipefd[1]);
        throw Error(ErrorKind::SpawnFailure, std::string("fork: ") + std::strerror(errno));
    }

    if (pid == 0) {
        ::setpgid(0, 0);
        ::close(pipefd[0]);
        ::dup2(pipefd[1], STDOUT_FILENO);
        ::dup2(pipefd[1], STDERR_FILENO);
        ::close(pipefd[1]);
        if (!workdir.empty() && ::chdir(workdir.c_str()) != 0) _exit(126);
        std::vector<char*> args;
        args.reserve(argv.size() + 1);
        for (const auto& arg : argv) args.push_back(const_cast<char*>(arg.c_str()));
        args.push_back(nullptr);
        ::execvp(args[0], args.data());
        _exit(127);
    }

    ::setpgid(pid, pid); // also from the parent, to close the race
    last_pgid_ = pid;
    ::close(pipefd[1]);

    auto start = std::chrono::steady_clock::now();
    auto deadline = start + std::chrono::milliseconds(timeout_ms);

    OutputCapture capture(settings_.output_limit_bytes);
    bool timed_out = false;
    std::chrono::steady_clock::time_point killed_at;
    char buffer[8192];

    for (;;) {
        auto now = std::chrono::steady_clock::now();
        int64_t remaining =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        if (!timed_out && remaining <= 0) {
            timed_out = true;
            killed_at = now;
            ::killpg(pid, SIGKILL);
        }
        if (timed_out && now - killed_at > std::chrono::seconds(2)) {
            break; // a writer escaped the process group; stop draining
        }
        struct pollfd pfd{pipefd[0], POLLIN, 0};
        int rc = ::poll(&pfd, 1, timed_out ? 100 : static_cast<int>(std::min<int64_t>(remaining, 1000)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (rc == 0) continue; // poll timeout slice; loop re-checks the deadline
        ssize_t n = ::read(pipefd[0], buffer, sizeof(buffer));
        if (n > 0) {
            capture.append(std::string_view(buffer, static_cast<size_t>(n)));
        } else {
            break; // EOF: every writer in the process group is gone
        }
    }
    ::close(pipefd[0]);

    int status = 0;
    ::waitpid(pid, &status, 0);
    auto end = std::chrono::steady_clock::now();

    TerminalResult result;
    result.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
    result.timed_out = timed_out;
    if (timed_out) {
        result.exit_code = kTimeoutExitCode;
        result.duration_ms = std::max(result.duration_ms, timeout_ms);
    } else if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.exit_code = 128 + WTERMSIG(status);
    }
    auto [output, truncated] = capture.finalize();
    result.output = std::move(output);
    result.truncated = truncated;
    return result;
}

TerminalResult LocalExecutor::execute(const TerminalCommand& cmd) {
    std::lock_guard<std::mutex> lock(mutex_);

    if (cmd.command.empty()) {
        throw Error(ErrorKind::SpawnFailure, "empty command");
    }
    if (!cmd.workdir.empty() && !fs::is_directory(cmd.workdir)) {
        throw Error(ErrorKind::WorkdirMissing, cmd.workdir.string());
    }
    if (::access(settings_.shell.c_str(), X_OK) != 0) {
        throw Error(ErrorKind::SpawnFailure, "shell not executable: " + settings_.shell);
    }

    int64_t timeout = cmd.timeout_ms > 0 ? cmd.timeout_ms : 30000;
    timeout = std::min(timeout, settings_.hard_timeout_ms);

    std::vector<std::string> argv{settings_.shell, "-c", cmd.command};

    if (cmd.mode == ExecMode::async) {
        pid_t pid = ::fork();
        if (pid < 0) throw Error(ErrorKind::SpawnFailure, std::string("fork: ") + std::strerror(errno));
        if (pid == 0) {
            ::setpgid(0, 0);
            int devnull = ::open("/dev/null", O_RDWR);
            if (devnull >= 0) {
                ::dup2(devnull, STDOUT_FILENO);
                ::dup2(devnull, STDERR_FILENO);
                ::close(devnull);
            }
            if (!cmd.workdir.empty() && ::chdir(cmd.workdir.c_str()) != 0) _exit(126);
            ::execl(settings_.shell.c_str(), settings_.shell.c_str(), "-c", cmd.command.c_str(),
                    static_cast<char*>(nullptr));
            _exit(127);
        }
        ::setpgid(pid, pid);
        std::string handle = "async-" + std::to_string(++async_counter_);
        async_handles_[handle] = pid;
        TerminalResult result;
        result.async_handle = handle;
        result.output = "[started " + handle + "]";
        return result;
    }

    return run_argv(argv, cmd.workdir, timeout);
}

ContainerExecutor::ContainerExecutor(SandboxSettings settings)
    : settings_(std::move(settings)), runner_(settings_) {}

std::vector<std::string> ContainerExecutor::build_argv(const SandboxSettings& settings,
                                                       const TerminalCommand& cmd) {
    std::vector<std::string> argv{settings.container_exec, "exec"};
    if (!cmd.workdir.empty()) {
        argv.push_back("-w");
        argv.push_back(cmd.workdir.string());
    }
    argv.push_back(settings.container_name);
    argv.push_back(settings.shell);
    argv.push_back("-c");
    argv.push_back(cmd.command);
    return argv;
}

TerminalResult ContainerExecutor::execute(const TerminalCommand& cmd) {
    if (settings_.container_name.empty()) {
        throw Error(ErrorKind::SpawnFailure, "container backend requires sandbox.container_name");
    }
    if (cmd.command.empty()) {
        throw Error(ErrorKind::SpawnFailure, "empty command");
    }
    int64_t timeout = cmd.timeout_ms > 0 ? cmd.timeout_ms : 30000;
    timeout = std::min(timeout, settings_.hard_timeout_ms);
    // The workdir lives inside the container, so it is passed to container
    // exec rather than used as a local chdir.
    return runner_.run_argv(build_argv(settings_, cmd), fs::path{}, timeout);
}

std::unique_ptr<TerminalExecutor> make_executor(const SandboxSettings& settings) {
    if (settings.backend == "local") return std::make_unique<LocalExecutor>(settings);
    if (settings.backend == "container") return std::make_unique<ContainerExecutor>(settings);
    throw Error(ErrorKind::ConfigInvalid, "unknown sandbox.backend: " + settings.backend);
}

} // namespace termharness
