#pragma once

#include <functional>
#include <span>
#include <vector>

#include "smiling/types.hpp"

/// Ornstein-Uhlenbeck forward process dx = -x dt + sqrt(2) dB.
///
/// Conditional law: x_t | x_0 ~ N(x_0 e^{-t}, (1 - e^{-2t}) I); stationary law
/// N(0, I). Training and cost evaluation draw t uniformly from a finite grid
/// on [t_min, T]; the grid index doubles as the time-embedding bin.
namespace smiling::diffusion {

inline constexpr double kDefaultTMin = 1e-2;

struct DiffusionSchedule {
  double horizon = 3.0;  // T
  int n_steps = 5000;
  double t_min = kDefaultTMin;

  /// 0 < t_min < T and n_steps >= 2, or the single-point form made by fixed().
  void validate() const;
  double time_at(int bin) const;
  int nearest_bin(double t) const;
  /// Degenerate one-point grid {t}, used by diagnostics that hold t fixed.
  static DiffusionSchedule fixed(double t);
};

struct TimePoint {
  int bin = 0;
  double t = 0.0;
};

/// A draw of diffusion time and standard-normal noise.
struct NoisePair {
  TimePoint time;
  Vec eps;
};

/// Batched score function: column j of the result is the score at column j of
/// `xs` and time `ts[j]`.
using ScoreFn = std::function<Mat(const Mat& xs, std::span<const TimePoint> ts)>;

TimePoint sample_time(const DiffusionSchedule& schedule, Rng& rng);

/// s_t = s e^{-t} + sqrt(1 - e^{-2t}) eps.
Vec forward_sample(const Vec& s, double t, const Vec& eps);

/// grad log q_t(s_t | s) = (s e^{-t} - s_t) / (1 - e^{-2t}). Throws below t_min.
Vec conditional_score(const Vec& s, const Vec& s_t, double t, double t_min = kDefaultTMin);

/// Exact score of N(mu, sigma2 I) pushed through the forward process to time t.
Vec gaussian_marginal_score(const Vec& mu, double sigma2, const Vec& x, double t);
ScoreFn gaussian_score_fn(Vec mu, double sigma2);

/// Draws for a batch of clean points: column i * n_mc + j of every matrix
/// belongs to point i, draw j.
struct DiffusedBatch {
  Mat clean;    // replicated clean points
  Mat noisy;    // s_t
  Mat targets;  // conditional scores
  Mat eps;
  std::vector<TimePoint> times;

  std::vector<int> bins() const;
};

DiffusedBatch diffuse(const Mat& points, int n_mc, const DiffusionSchedule& schedule, Rng& rng);

/// Euler-Maruyama integration of dz = (z + 2 score(z, T - tau)) dtau + sqrt(2) dB
/// from z_0 ~ N(0, I) over tau in [0, T - t_min]. Returns the final states.
std::vector<Vec> reverse_sample(const ScoreFn& score, const DiffusionSchedule& schedule,
                                int dim, int n_samples, int n_euler_steps, Rng& rng);

}  // namespace smiling::diffusion
