#include "termharness/log.hpp"

#include <atomic>
#include <mutex>

namespace termharness::log {

namespace {

std::atomic<Level> g_threshold{Level::warn};
std::mutex g_mutex;

const char* tag(Level level) {
    switch (level) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
    }
    return "?";
}

} // namespace

Level threshold() { return g_threshold.load(std::memory_order_relaxed); }

void set_threshold(Level level) { g_threshold.store(level, std::memory_order_relaxed); }

void write(Level level, const std::string& message) {
    if (level < threshold()) return;
    std::lock_guard<std::mutex> lock(g_mutex);
    std::fprintf(stderr, "[%s] %s\n", tag(level), message.c_str());
    std::fflush(stderr);
}

} // namespace termharness::log
