#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace smiling::tools {

struct Check {
  std::string name;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Conditional-score identity, posterior-mean oracle, and the constant
/// offset between conditional and marginal regression targets.
std::vector<Check> identities_suite(std::uint64_t seed = 1);

/// Monte-Carlo DS estimates against the closed form on five Gaussian pairs,
/// the closed form's known value, and the Gaussian Hellinger distance.
std::vector<Check> oracles_suite(std::uint64_t seed = 2, long draws = 1000000);

struct GapPoint {
  double shift = 0.0;
  double naive_err = 0.0;
  double corrected_err = 0.0;
  double corrected_std_error = 0.0;
  double fit_error = 0.0;
};

/// Plug-in versus corrected objective on the N(0, 1) testbed at the given
/// expert-score shifts.
std::vector<GapPoint> shift_gap_sweep(const std::vector<double>& shifts, long draws,
                                       std::uint64_t seed = 3);
std::vector<Check> shift_gap_suite(std::uint64_t seed = 3, long draws = 1000000);

void print_checks(std::ostream& os, const std::string& suite, const std::vector<Check>& checks);
bool all_passed(const std::vector<Check>& checks);

}  // namespace smiling::tools
