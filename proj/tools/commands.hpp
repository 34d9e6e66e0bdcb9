#pragma once

#include "config.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>

namespace pderm::cli {

/**
 * Run one command on a resolved config. Reports go to the [output] dir
 * together with config.ini; progress and timings go to `log`.
 * Returns the process exit code (0, or 1 when `check` finds a failure).
 */
int run_command(const std::string& command, const RunConfig& cfg, std::size_t threads, std::ostream& log);

/// Machine-readable single-line error record.
std::string error_line(const std::string& kind, const std::string& message);

}  // namespace pderm::cli
