#include "qunet/core/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace qunet {

namespace {

bool g_verbose = false;

void default_sink(LogLevel level, std::string_view message) {
    if (level == LogLevel::warning) {
        std::cerr << "warning: " << message << '\n';
    } else if (g_verbose) {
        std::cerr << message << '\n';
    }
}

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

LogSink& sink() {
    static LogSink s = default_sink;
    return s;
}

}  // namespace

LogSink set_log_sink(LogSink s) {
    std::lock_guard lock(sink_mutex());
    auto previous = std::exchange(sink(), s ? std::move(s) : LogSink(default_sink));
    return previous;
}

void set_verbose(bool verbose) { g_verbose = verbose; }

void log_info(std::string_view message) {
    std::lock_guard lock(sink_mutex());
    sink()(LogLevel::info, message);
}

void log_warning(std::string_view message) {
    std::lock_guard lock(sink_mutex());
    sink()(LogLevel::warning, message);
}

}  // namespace qunet
