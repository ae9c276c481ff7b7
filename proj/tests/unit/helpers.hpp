#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include <doctest.h>

#include "smiling/diffusion.hpp"
#include "smiling/types.hpp"

namespace smiling::testing {

inline Vec v1(double x) { return Vec::Constant(1, x); }

inline Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

/// E_{t, x ~ p_t} ||g(x, t) - truth(x, t)||^2 with x drawn by diffusing
/// `clean` samples.
inline double weighted_score_error(const diffusion::ScoreFn& g, const diffusion::ScoreFn& truth,
                                   const Mat& clean, const diffusion::DiffusionSchedule& sched,
                                   Rng& rng) {
  const auto batch = diffusion::diffuse(clean, 1, sched, rng);
  return (g(batch.noisy, batch.times) - truth(batch.noisy, batch.times)).colwise().squaredNorm().mean();
}

/// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("smiling_test_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace smiling::testing
