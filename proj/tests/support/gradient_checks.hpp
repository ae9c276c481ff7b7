#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "smiling/envs.hpp"
#include "smiling/nn.hpp"
#include "smiling/rl.hpp"

namespace smiling::testing {

/// |a - n| / max(|a|, |n|, floor).
inline double mixed_error(double a, double n, double floor = 1e-4) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

inline double nn_gradient_check(int trials, int coords_per_trial, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const auto act = trial % 2 == 0 ? nn::Activation::relu : nn::Activation::identity;
    nn::MlpParams p = nn::init_params(std::vector<int>{3, 32, 3}, 40, act, rng.engine()(), 8);
    nn::SqBatch b;
    b.inputs = Mat(3, 6);
    rng.fill_normal(b.inputs);
    b.targets = Mat(3, 6);
    rng.fill_normal(b.targets);
    for (int j = 0; j < 6; ++j) b.t_bins.push_back(rng.uniform_int(40));
    const auto analytic = nn::flatten(nn::sq_loss_grad(p, b).grads);
    auto flat = nn::flatten(p);
    for (int k = 0; k < coords_per_trial; ++k) {
      const int i = rng.uniform_int(static_cast<int>(flat.size()));
      const double keep = flat[i], h = 1e-5;
      flat[i] = keep + h;
      nn::unflatten(flat, p);
      const double up = nn::sq_loss_grad(p, b).loss;
      flat[i] = keep - h;
      nn::unflatten(flat, p);
      const double down = nn::sq_loss_grad(p, b).loss;
      flat[i] = keep;
      nn::unflatten(flat, p);
      worst = std::max(worst, mixed_error(analytic[i], (up - down) / (2 * h)));
    }
  }
  return worst;
}

/// Likelihood-ratio gradient of J = mean_s E_{a ~ pi(.|s)} ||a - c||^2 against
/// central differences of its closed form ||mu(s) - c||^2 + sum sigma^2.
/// Roughly n_samples actions on a stratified, moment-matched normal grid are
/// split over four states.
inline double policy_gradient_check(long n_samples, std::uint64_t seed) {
  const envs::Env env(envs::EnvSpec::defaults(envs::EnvName::point_goal));
  envs::GaussianPolicy pi = envs::make_policy(env, envs::PolicyInit{{8}, 0.4, 0.5}, seed);
  Rng rng(seed + 1);
  constexpr int n_states = 4;
  const long per_state = n_samples / n_states;
  Mat states(2, n_states);
  rng.fill_normal(states);
  const Vec c = Vec::Constant(2, 0.3);

  // Product grid of stratified normal quantiles: odd moments and cross
  // moments of the two action dimensions vanish exactly.
  const boost::math::normal_distribution<double> unit;
  const long m = std::max(2L, static_cast<long>(std::sqrt(static_cast<double>(per_state))));
  std::vector<double> z(static_cast<std::size_t>(m));
  for (long i = 0; i < m; ++i) {
    z[static_cast<std::size_t>(i)] = boost::math::quantile(unit, (i + 0.5) / static_cast<double>(m));
  }
  // The weights are quadratic in the action, so the estimate needs exact
  // moments up to order four. The nodes are symmetric, which makes odd moments
  // vanish; z -> a z + b z^3 matches the second and fourth by Newton steps.
  auto moments = [&](double a, double b) {
    double m2 = 0.0, m4 = 0.0;
    for (double x : z) {
      const double y = a * x + b * x * x * x;
      m2 += y * y / static_cast<double>(m);
      m4 += y * y * y * y / static_cast<double>(m);
    }
    return std::pair{m2 - 1.0, m4 - 3.0};
  };
  double a = 1.0, b = 0.0;
  for (int it = 0; it < 50; ++it) {
    const auto [f1, f2] = moments(a, b);
    if (std::abs(f1) + std::abs(f2) < 1e-14) break;
    const double h = 1e-7;
    const auto [a1, a2] = moments(a + h, b);
    const auto [b1, b2] = moments(a, b + h);
    const double j11 = (a1 - f1) / h, j12 = (b1 - f1) / h, j21 = (a2 - f2) / h, j22 = (b2 - f2) / h;
    const double det = j11 * j22 - j12 * j21;
    a -= (j22 * f1 - j12 * f2) / det;
    b -= (-j21 * f1 + j11 * f2) / det;
  }
  for (double& x : z) x = a * x + b * x * x * x;

  const Mat mu = pi.mean_batch(states);
  const Vec sigma = pi.log_std.array().exp();
  const long cols = n_states * m * m;
  Mat S(2, cols), A(2, cols);
  Vec w(cols);
  long col = 0;
  for (int s = 0; s < n_states; ++s) {
    for (long i = 0; i < m; ++i) {
      for (long j = 0; j < m; ++j, ++col) {
        S.col(col) = states.col(s);
        A(0, col) = mu(0, s) + sigma(0) * z[static_cast<std::size_t>(i)];
        A(1, col) = mu(1, s) + sigma(1) * z[static_cast<std::size_t>(j)];
        w(col) = (A.col(col) - c).squaredNorm();
      }
    }
  }
  const rl::PolicyGrad g = rl::likelihood_ratio_gradient(pi, S, A, w, 0.0);

  auto objective = [&](const envs::GaussianPolicy& p) {
    const Mat m = p.mean_batch(states);
    return (m.colwise() - c).colwise().squaredNorm().mean() + (2.0 * p.log_std.array()).exp().sum();
  };
  std::vector<double> analytic = nn::flatten(g.mean_grad);
  for (Eigen::Index i = 0; i < g.log_std_grad.size(); ++i) analytic.push_back(g.log_std_grad(i));

  double worst = 0.0;
  auto flat = nn::flatten(pi.mean_net);
  const std::size_t n_net = flat.size();
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    envs::GaussianPolicy up = pi, down = pi;
    const double h = 1e-6;
    if (i < n_net) {
      auto f = flat;
      f[i] += h;
      nn::unflatten(f, up.mean_net);
      f[i] -= 2 * h;
      nn::unflatten(f, down.mean_net);
    } else {
      up.log_std(static_cast<Eigen::Index>(i - n_net)) += h;
      down.log_std(static_cast<Eigen::Index>(i - n_net)) -= h;
    }
    const double numeric = (objective(up) - objective(down)) / (2 * h);
    worst = std::max(worst, mixed_error(analytic[i], numeric, 1e-3));
  }
  return worst;
}

}  // namespace smiling::testing
