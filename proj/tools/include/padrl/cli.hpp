#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "padrl/trainer.hpp"

namespace padrl::cli {

enum class LogLevel { quiet, error, info, debug };

/// Reads PADRL_LOG (quiet, error, info, debug); defaults to info.
LogLevel log_level_from_env();
LogLevel parse_log_level(std::string_view name);

class Logger {
public:
  Logger(LogLevel level, std::ostream& sink) : level_(level), sink_(&sink) {}
  void error(std::string_view msg) const { write(LogLevel::error, "error", msg); }
  void info(std::string_view msg) const { write(LogLevel::info, "info", msg); }
  void debug(std::string_view msg) const { write(LogLevel::debug, "debug", msg); }

private:
  void write(LogLevel at, std::string_view tag, std::string_view msg) const;
  LogLevel level_;
  std::ostream* sink_;
};

// A failed command. `code` is a stable identifier for scripts; `problems`
// lists every violated constraint when the failure is a validation error.
class CommandError : public std::runtime_error {
public:
  CommandError(std::string code, const std::string& message, std::vector<std::string> problems = {})
      : std::runtime_error(message), code(std::move(code)), problems(std::move(problems)) {}
  std::string code;
  std::vector<std::string> problems;
};

/// The error as a single-line JSON object.
std::string error_line(const CommandError& e);

struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::vector<std::string> overrides;
};

struct AblateOptions {
  std::filesystem::path config;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out;
  std::vector<std::string> overrides;
  unsigned threads = 0;
};

struct ReportOptions {
  std::vector<std::filesystem::path> runs;
  std::filesystem::path out;
};

/// Loads a config file (or the `config` of a run manifest), applies the
/// overrides and validates. Throws CommandError.
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

/// "<config stem>-<16 hex digits of the resolved config hash>".
std::string run_id(const std::filesystem::path& config_path, const ExperimentConfig& cfg);

void cmd_train(const TrainOptions& opts, const Logger& log);
void cmd_ablate(const AblateOptions& opts, const Logger& log);
void cmd_report(const ReportOptions& opts, const Logger& log);

/// Full command line. Returns the process exit status: 0 when every artifact
/// was written, 1 on a command error, 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace padrl::cli
