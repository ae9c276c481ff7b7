#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smiling/imitation.hpp"

namespace smiling::theory_probe {

struct ProbeCase {
  imitation::SmilingConfig cfg;
  int demo_episodes = 5;
  std::uint64_t demo_seed = 1000;
};

struct ProbeRow {
  double dynamics_noise = 0.0;
  int demo_episodes = 0;
  std::uint64_t seed = 0;
  double gap = 0.0;         // V^pi - V^expert in cumulative true cost
  double var_expert = 0.0;  // variance of the expert's cumulative cost
  double var_pi = 0.0;
  double min_var = 0.0;
  double ds_value = 0.0;  // last iteration's divergence column
};

struct ProbeReport {
  std::vector<ProbeRow> rows;
  /// Spearman rank correlation between min_var and gap; NaN with fewer than
  /// two rows or constant columns.
  double spearman_minvar_gap = 0.0;
};

/// Runs smiling_run once per case and measures the learned and expert
/// policies under the true cost. Read-only with respect to the runs.
ProbeReport probe_second_order(std::span<const ProbeCase> cases, int value_episodes = 200);

/// Average-rank Spearman correlation.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace smiling::theory_probe
