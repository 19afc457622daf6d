#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "donorspin/run_config.hpp"

namespace donorspin {

// Exit status contract of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitValidation = 2,
  kExitNumerical = 3,
  kExitIo = 4,
};

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;  // overrides output_dir
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::vector<std::string> overrides;  // key=value
  std::vector<std::filesystem::path> data;  // fit
  std::vector<std::string> compare;         // fit
  std::string axis;                         // sweep
  std::vector<std::string> values;          // sweep
  std::ostream* log = nullptr;
};

struct CommandResult {
  int exit_code = kExitOk;
  std::filesystem::path run_dir;  // empty on failure
  std::string message;
};

// Each command writes into a staging directory that is renamed to
// <out>/<UTC timestamp>-<command>-<config hash> only on success, so a failed
// run leaves nothing behind.
std::filesystem::path cmd_simulate(const CommandOptions& opt);
std::filesystem::path cmd_estimate(const CommandOptions& opt);
std::filesystem::path cmd_fit(const CommandOptions& opt);
std::filesystem::path cmd_sweep(const CommandOptions& opt);

// Runs `command` (simulate, estimate, fit, sweep) and maps exceptions onto
// exit codes: ValidationError 2, NumericalError 3, IoError 4.
CommandResult run_command(std::string_view command, const CommandOptions& opt);

// Config document after the file, --set overrides, --seed and --jobs.
nlohmann::json resolve_document(const CommandOptions& opt);

// Runs the configured experiment and writes <experiment>_trace.csv (and
// <experiment>_windows.csv for ramsey and echo) into `dir`. Returns the
// results object stored in the metadata.
nlohmann::json simulate_into(const RunConfig& config, const std::filesystem::path& dir);

}  // namespace donorspin
