#include "smiling/divergence.hpp"

#include <algorithm>
#include <cmath>

namespace smiling::divergence {

using diffusion::DiffusionSchedule;
using diffusion::ScoreFn;

namespace {

constexpr long kChunk = 1 << 16;
constexpr int kQuadraturePoints = 10000;

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  long n = 0;

  void add(const Eigen::ArrayXd& v) {
    sum += v.sum();
    sum_sq += v.square().sum();
    n += static_cast<long>(v.size());
  }
  double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
  double std_error() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) / (n - 1));
    return std::sqrt(var / static_cast<double>(n));
  }
};

Mat checked(const ScoreFn& f, const Mat& xs, std::span<const diffusion::TimePoint> ts,
            const char* which) {
  Mat out = f(xs, ts);
  if (out.rows() != xs.rows() || out.cols() != xs.cols()) {
    throw ShapeError(std::string(which) + " returned the wrong shape");
  }
  if (!out.allFinite()) throw NumericError(std::string(which) + " returned non-finite values");
  return out;
}

// Gather columns (s cycling through `samples`) for draws [start, start + n).
Mat cycle_columns(const Mat& samples, long start, long n) {
  Mat out(samples.rows(), n);
  for (long j = 0; j < n; ++j) out.col(j) = samples.col((start + j) % samples.cols());
  return out;
}

}  // namespace

DsEstimate ds_divergence_mc(const ScoreFn& score_p, const ScoreFn& score_q, const Mat& samples_p,
                            const DiffusionSchedule& schedule, long n_mc, Rng& rng) {
  if (samples_p.cols() == 0) throw ArgumentError("ds_divergence_mc: no samples from P");
  if (n_mc < 1) throw ArgumentError("ds_divergence_mc: n_mc must be >= 1");
  schedule.validate();
  Moments m;
  for (long start = 0; start < n_mc; start += kChunk) {
    const long n = std::min(kChunk, n_mc - start);
    const auto batch = diffusion::diffuse(cycle_columns(samples_p, start, n), 1, schedule, rng);
    const Mat gp = checked(score_p, batch.noisy, batch.times, "score_p");
    const Mat gq = checked(score_q, batch.noisy, batch.times, "score_q");
    m.add((gp - gq).colwise().squaredNorm().transpose().array());
  }
  return {m.mean(), m.std_error(), n_mc};
}

double ds_divergence_gaussian(const Vec& mu1, double s1, const Vec& mu2, double s2,
                              const DiffusionSchedule& schedule) {
  if (!(s1 > 0.0) || !(s2 > 0.0)) throw DomainError("ds_divergence_gaussian: variances must be positive");
  if (mu1.size() != mu2.size()) throw ShapeError("ds_divergence_gaussian: mean dimensions differ");
  schedule.validate();
  const double d = static_cast<double>(mu1.size());
  const double dmu2 = (mu1 - mu2).squaredNorm();

  // With v_i = s_i e^{-2t} + 1 - e^{-2t}, m_i = mu_i e^{-t} and x ~ N(m1, v1 I):
  //   score_p - score_q = (m1 - m2) / v2 - (1/v1 - 1/v2)(x - m1)
  //   E||.||^2 = ||mu1 - mu2||^2 e^{-2t} / v2^2 + d v1 (1/v1 - 1/v2)^2
  auto integrand = [&](double t) {
    const double e2 = std::exp(-2.0 * t);
    const double v1 = s1 * e2 + 1.0 - e2;
    const double v2 = s2 * e2 + 1.0 - e2;
    const double a = 1.0 / v1 - 1.0 / v2;
    return dmu2 * e2 / (v2 * v2) + d * v1 * a * a;
  };

  if (schedule.n_steps == 1) return integrand(schedule.t_min);
  const double lo = schedule.t_min, hi = schedule.horizon;
  const double h = (hi - lo) / (kQuadraturePoints - 1);
  double acc = 0.5 * (integrand(lo) + integrand(hi));
  for (int i = 1; i < kQuadraturePoints - 1; ++i) acc += integrand(lo + i * h);
  return acc * h / (hi - lo);
}

double hellinger_grid(const std::function<double(double)>& pdf_p,
                      const std::function<double(double)>& pdf_q, std::span<const double> grid) {
  if (grid.size() < 2) return 0.0;
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw ArgumentError("hellinger_grid: grid must be sorted");
  }
  auto f = [&](double x) {
    const double p = pdf_p(x), q = pdf_q(x);
    if (p < 0.0 || q < 0.0) throw ArgumentError("hellinger_grid: negative density");
    const double r = std::sqrt(p) - std::sqrt(q);
    return r * r;
  };
  double acc = 0.0;
  double prev = f(grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur = f(grid[i]);
    acc += 0.5 * (prev + cur) * (grid[i] - grid[i - 1]);
    prev = cur;
  }
  return 0.5 * acc;
}

GapReport naive_vs_corrected_gap(const ScoreFn& g_e, const ScoreFn& g_pi, const ScoreFn& score_true,
                                 const Mat& states, const DiffusionSchedule& schedule, int n_mc,
                                 Rng& rng) {
  if (states.cols() == 0) throw ArgumentError("naive_vs_corrected_gap: no states");
  if (n_mc < 1) throw ArgumentError("naive_vs_corrected_gap: n_mc must be >= 1");
  schedule.validate();
  const long total = static_cast<long>(states.cols()) * n_mc;
  Moments truth, naive_diff, corrected_diff, naive, corrected;
  for (long start = 0; start < total; start += kChunk) {
    const long n = std::min(kChunk, total - start);
    const auto batch = diffusion::diffuse(cycle_columns(states, start, n), 1, schedule, rng);
    const Mat ge = checked(g_e, batch.noisy, batch.times, "g_e");
    const Mat gp = checked(g_pi, batch.noisy, batch.times, "g_pi");
    const Mat gt = checked(score_true, batch.noisy, batch.times, "score_true");
    const Eigen::ArrayXd true_terms = (ge - gt).colwise().squaredNorm().transpose().array();
    const Eigen::ArrayXd naive_terms = (ge - gp).colwise().squaredNorm().transpose().array();
    const Eigen::ArrayXd corrected_terms =
        (ge - batch.targets).colwise().squaredNorm().transpose().array() -
        (gp - batch.targets).colwise().squaredNorm().transpose().array();
    truth.add(true_terms);
    naive.add(naive_terms);
    corrected.add(corrected_terms);
    naive_diff.add(naive_terms - true_terms);
    corrected_diff.add(corrected_terms - true_terms);
  }
  GapReport r;
  r.true_value = truth.mean();
  r.naive_estimate = naive.mean();
  r.corrected_estimate = corrected.mean();
  r.naive_err = std::abs(naive_diff.mean());
  r.corrected_err = std::abs(corrected_diff.mean());
  r.naive_std_error = naive_diff.std_error();
  r.corrected_std_error = corrected_diff.std_error();
  return r;
}

}  // namespace smiling::divergence
