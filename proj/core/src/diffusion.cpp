#include "smiling/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace smiling::diffusion {

void DiffusionSchedule::validate() const {
  if (n_steps == 1) {
    if (!(t_min > 0.0) || t_min != horizon) {
      throw ConfigError("single-point schedule needs t_min == T > 0");
    }
    return;
  }
  if (n_steps < 2) throw ConfigError("diffusion.n_steps must be >= 2");
  if (!(t_min > 0.0)) throw ConfigError("diffusion.t_min must be positive");
  if (!(t_min < horizon)) throw ConfigError("diffusion.t_min must be below diffusion.T");
}

double DiffusionSchedule::time_at(int bin) const {
  if (n_steps == 1) return t_min;
  return t_min + bin * (horizon - t_min) / (n_steps - 1);
}

int DiffusionSchedule::nearest_bin(double t) const {
  if (n_steps == 1) return 0;
  const double u = (t - t_min) / (horizon - t_min) * (n_steps - 1);
  return std::clamp(static_cast<int>(std::lround(u)), 0, n_steps - 1);
}

DiffusionSchedule DiffusionSchedule::fixed(double t) {
  DiffusionSchedule s;
  s.horizon = t;
  s.t_min = t;
  s.n_steps = 1;
  s.validate();
  return s;
}

TimePoint sample_time(const DiffusionSchedule& schedule, Rng& rng) {
  const int bin = schedule.n_steps == 1 ? 0 : rng.uniform_int(schedule.n_steps);
  return {bin, schedule.time_at(bin)};
}

Vec forward_sample(const Vec& s, double t, const Vec& eps) {
  if (!(t > 0.0)) throw DomainError("forward_sample: t must be positive");
  if (s.size() != eps.size()) throw ShapeError("forward_sample: eps dimension mismatch");
  return s * std::exp(-t) + std::sqrt(1.0 - std::exp(-2.0 * t)) * eps;
}

Vec conditional_score(const Vec& s, const Vec& s_t, double t, double t_min) {
  if (!(t >= t_min)) {
    std::ostringstream msg;
    msg << "conditional_score: t=" << t << " is below t_min=" << t_min;
    throw DomainError(msg.str());
  }
  if (s.size() != s_t.size()) throw ShapeError("conditional_score: dimension mismatch");
  return (s * std::exp(-t) - s_t) / (1.0 - std::exp(-2.0 * t));
}

Vec gaussian_marginal_score(const Vec& mu, double sigma2, const Vec& x, double t) {
  if (mu.size() != x.size()) throw ShapeError("gaussian_marginal_score: dimension mismatch");
  const double decay = std::exp(-t);
  const double var_t = sigma2 * decay * decay + 1.0 - decay * decay;
  return (mu * decay - x) / var_t;
}

ScoreFn gaussian_score_fn(Vec mu, double sigma2) {
  return [mu = std::move(mu), sigma2](const Mat& xs, std::span<const TimePoint> ts) {
    Mat out(xs.rows(), xs.cols());
    for (Eigen::Index j = 0; j < xs.cols(); ++j) {
      out.col(j) = gaussian_marginal_score(mu, sigma2, xs.col(j), ts[j].t);
    }
    return out;
  };
}

std::vector<int> DiffusedBatch::bins() const {
  std::vector<int> b(times.size());
  std::transform(times.begin(), times.end(), b.begin(), [](const TimePoint& tp) { return tp.bin; });
  return b;
}

DiffusedBatch diffuse(const Mat& points, int n_mc, const DiffusionSchedule& schedule, Rng& rng) {
  if (n_mc < 1) throw ArgumentError("diffuse: n_mc must be >= 1");
  const Eigen::Index d = points.rows();
  const Eigen::Index n = points.cols() * n_mc;
  DiffusedBatch b;
  b.clean.resize(d, n);
  b.noisy.resize(d, n);
  b.targets.resize(d, n);
  b.eps.resize(d, n);
  b.times.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    for (int j = 0; j < n_mc; ++j) {
      const Eigen::Index c = i * n_mc + j;
      const TimePoint tp = sample_time(schedule, rng);
      b.times[static_cast<std::size_t>(c)] = tp;
      for (Eigen::Index k = 0; k < d; ++k) b.eps(k, c) = rng.normal();
      const double decay = std::exp(-tp.t);
      const double sd = std::sqrt(1.0 - std::exp(-2.0 * tp.t));
      b.clean.col(c) = points.col(i);
      b.noisy.col(c) = points.col(i) * decay + sd * b.eps.col(c);
      b.targets.col(c) = (points.col(i) * decay - b.noisy.col(c)) / (1.0 - std::exp(-2.0 * tp.t));
    }
  }
  return b;
}

std::vector<Vec> reverse_sample(const ScoreFn& score, const DiffusionSchedule& schedule, int dim,
                                int n_samples, int n_euler_steps, Rng& rng) {
  schedule.validate();
  if (n_euler_steps < 10) throw ArgumentError("reverse_sample: n_euler_steps must be >= 10");
  if (dim < 1) throw ArgumentError("reverse_sample: dim must be positive");
  if (n_samples <= 0) return {};

  Mat z(dim, n_samples);
  rng.fill_normal(z);
  const double span = schedule.horizon - schedule.t_min;
  const double dtau = span / n_euler_steps;
  const double noise_scale = std::sqrt(2.0 * dtau);
  std::vector<TimePoint> ts(static_cast<std::size_t>(n_samples));
  Mat xi(dim, n_samples);
  for (int k = 0; k < n_euler_steps; ++k) {
    const double tau = k * dtau;
    const double t = schedule.horizon - tau;
    std::fill(ts.begin(), ts.end(), TimePoint{schedule.nearest_bin(t), t});
    const Mat g = score(z, ts);
    if (!g.allFinite()) {
      std::ostringstream msg;
      msg << "reverse_sample: non-finite score at tau=" << tau;
      throw NumericError(msg.str());
    }
    rng.fill_normal(xi);
    z += (z + 2.0 * g) * dtau + noise_scale * xi;
  }
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  for (int j = 0; j < n_samples; ++j) out.emplace_back(z.col(j));
  return out;
}

}  // namespace smiling::diffusion
