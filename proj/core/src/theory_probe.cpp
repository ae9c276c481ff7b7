#include "smiling/theory_probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "smiling/rl.hpp"

namespace smiling::theory_probe {

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("spearman: lengths differ");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (x.size() < 2) return nan;
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return nan;
  return sxy / std::sqrt(sxx * syy);
}

ProbeReport probe_second_order(std::span<const ProbeCase> cases, int value_episodes) {
  ProbeReport report;
  for (const auto& c : cases) {
    const envs::Env env(c.cfg.env);
    const auto demos = envs::collect_demos(env, c.demo_episodes, false, c.demo_seed);
    const auto run = imitation::smiling_run(c.cfg, demos);

    Rng rng(splitmix64(c.cfg.seed + 0x70726f6265ULL));
    envs::ExpertPolicy expert(env);
    envs::GaussianPolicy learned = run.final_policy;
    const auto ve = rl::policy_value(env, expert, value_episodes, rng);
    const auto vp = rl::policy_value(env, learned, value_episodes, rng);

    ProbeRow row;
    row.dynamics_noise = c.cfg.env.dynamics_noise;
    row.demo_episodes = c.demo_episodes;
    row.seed = c.cfg.seed;
    row.gap = vp.mean - ve.mean;
    row.var_expert = ve.variance;
    row.var_pi = vp.variance;
    row.min_var = std::min(ve.variance, vp.variance);
    row.ds_value = run.result.records.empty() ? 0.0 : run.result.records.back().ds.value;
    report.rows.push_back(row);
  }
  std::vector<double> mv, gap;
  for (const auto& r : report.rows) {
    mv.push_back(r.min_var);
    gap.push_back(r.gap);
  }
  report.spearman_minvar_gap = spearman(mv, gap);
  return report;
}

}  // namespace smiling::theory_probe
