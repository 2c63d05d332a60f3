#pragma once

#include <functional>
#include <string_view>

namespace qunet {

enum class LogLevel { info, warning };

using LogSink = std::function<void(LogLevel, std::string_view)>;

/// Replaces the process-wide sink and returns the previous one. The default
/// sink writes warnings to stderr and drops info messages unless verbose.
LogSink set_log_sink(LogSink sink);
void set_verbose(bool verbose);

void log_info(std::string_view message);
void log_warning(std::string_view message);

}  // namespace qunet
