#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace implreg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kSchemaVersion = 1;

/// Parses argv (without the program name), runs one subcommand and returns
/// the process exit code. Result files go to the configured output
/// directory; errors are written to `err` as one JSON line.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Validates a config document (or a run manifest wrapping one) and returns
/// it with every default made explicit.
nlohmann::json resolve_config(const nlohmann::json& doc);

}  // namespace implreg::cli
