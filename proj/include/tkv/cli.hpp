#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace tkv::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitGateFailed = 1;  // run completed but missed its success bar
inline constexpr int kExitConstraint = 2;  // instance or parameters violate a domain constraint
inline constexpr int kExitUsage = 64;
inline constexpr int kExitIo = 74;

/// Parses a flat `key = value` file. '#' starts a comment; blank lines are
/// skipped. Throws std::runtime_error on unreadable files or malformed lines.
std::vector<std::pair<std::string, std::string>> read_flat_config(const std::string& path);

/// Runs the command line (without the program name) and returns the exit code.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace tkv::cli
