#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "smiling/imitation.hpp"

namespace smiling::tools {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2, kExitDiagnostic = 3 };

/// Environment variable that overrides output.dir.
inline constexpr const char* kOutputDirEnv = "SMILING_OUTPUT_DIR";

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            std::ostream& out, std::ostream& err);
int cmd_collect_demos(const std::string& config_path, const std::vector<std::string>& overrides,
                      std::ostream& out, std::ostream& err);
int cmd_diag(const std::string& suite, const std::string& config_path,
             const std::vector<std::string>& overrides, std::ostream& out, std::ostream& err);
int cmd_eval(const std::string& config_path, const std::vector<std::string>& overrides,
             const std::string& policy_path, int episodes, std::ostream& out, std::ostream& err);

std::string csv_header();
std::string result_csv(const imitation::RunResult& r);
/// Mean and standard error per iteration across seeds.
std::string aggregate_csv(const std::vector<imitation::RunResult>& runs);

}  // namespace smiling::tools
