#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "anisobn/config.hpp"

namespace anisobn::runner {

enum ExitCode : int { Ok = 0, Invalid = 2, ToleranceFailure = 3, SolverFailure = 4 };

inline constexpr const char* tool_version = "1.0.0";
inline const std::vector<std::string> tasks{"verify-norms", "bubble-asymptotics", "eigen", "solve", "sweep-lambda",
                                           "pohozaev"};

struct TaskOutcome {
    int exit_code{Ok};
    std::string status;
    std::string message;
    std::vector<std::string> artifacts;  // paths relative to the run directory
};

/// Writes `content` to `path` through a temporary sibling and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Each command writes only inside `task_dir`.
TaskOutcome cmd_verify_norms(const ExperimentConfig& c, const std::filesystem::path& task_dir, int jobs);
TaskOutcome cmd_bubble_asymptotics(const ExperimentConfig& c, const std::filesystem::path& task_dir, int jobs);
TaskOutcome cmd_eigen(const ExperimentConfig& c, const std::filesystem::path& task_dir, int jobs);
TaskOutcome cmd_solve(const ExperimentConfig& c, const std::filesystem::path& task_dir, int jobs);
TaskOutcome cmd_sweep_lambda(const ExperimentConfig& c, const std::filesystem::path& task_dir, int jobs);
TaskOutcome cmd_pohozaev(const ExperimentConfig& c, const std::filesystem::path& task_dir, int jobs);

/// Runs the named tasks (concurrently up to `jobs`) under <output_dir>/<config hash>/ and writes
/// manifest.json once at the end. Returns the largest task exit code.
int run_tasks(const ExperimentConfig& c, const std::vector<std::string>& names, int jobs);

}  // namespace anisobn::runner
