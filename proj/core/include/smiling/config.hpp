#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "smiling/imitation.hpp"

namespace smiling::config {

/// Everything a run needs, including the pieces the library itself does not
/// read (seeds, file locations).
struct ExperimentConfig {
  imitation::SmilingConfig smiling;
  imitation::Method method = imitation::Method::smiling;
  std::vector<std::uint64_t> seeds = {0};
  std::string output_dir = "out";
  std::string demos_path = "demos.bin";
  int demo_episodes = 5;
  bool demos_with_actions = false;
  std::uint64_t demos_seed = 1000;
  int horizon_override = 0;  // 0 keeps the task's horizon
  int euler_steps = 200;     // reverse sampler, diagnostics only

  /// Applies the task defaults and the horizon override to smiling.env.
  void finalize();
};

struct KeyInfo {
  std::string name;
  std::string help;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

/// Every accepted key, in documentation order.
const std::vector<KeyInfo>& registry();

/// Sets one key; unknown keys and malformed values throw ConfigError naming
/// the key.
void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// "key=value" form used by command-line overrides.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

/// Line-based key = value text; '#' starts a comment.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical "key=value" dump of every key except output.dir.
std::string canonical(const ExperimentConfig& cfg);
/// FNV-1a 64 of canonical(cfg), as 16 hex digits.
std::string digest(const ExperimentConfig& cfg);

/// Defaults table for --help.
std::string describe_keys();

}  // namespace smiling::config
