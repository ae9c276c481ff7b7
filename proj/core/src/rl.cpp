#include "smiling/rl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smiling/cost.hpp"

namespace smiling::rl {

using envs::GaussianPolicy;
using envs::ObservedTrajectory;

namespace {

// Value-net input: the pre-action state and the normalized step index.
Mat value_inputs(std::span<const ObservedTrajectory> trajs, int H) {
  const Eigen::Index d = trajs.front().states.rows();
  Mat x(d + 1, static_cast<Eigen::Index>(trajs.size()) * H);
  for (std::size_t e = 0; e < trajs.size(); ++e) {
    for (int h = 0; h < H; ++h) {
      const Eigen::Index c = static_cast<Eigen::Index>(e) * H + h;
      x.col(c).head(d) = trajs[e].states.col(h);
      x(d, c) = static_cast<double>(h) / H;
    }
  }
  return x;
}

struct Batch {
  std::vector<ObservedTrajectory> trajs;
  Mat costs;  // (H x E), as supplied
  Vec episode_costs;
};

Batch collect(const envs::Env& env, GaussianPolicy& policy, CostSource& source, int n, Rng& rng) {
  Batch b;
  b.trajs.reserve(static_cast<std::size_t>(n));
  for (int e = 0; e < n; ++e) b.trajs.push_back(envs::learner_rollout(env, policy, rng));
  b.costs = source.episode_costs(b.trajs, rng);
  if (b.costs.rows() != env.horizon() || b.costs.cols() != n) {
    throw ShapeError("cost source returned the wrong shape");
  }
  if (!b.costs.allFinite()) throw NumericError("cost source returned non-finite costs");
  b.episode_costs = b.costs.colwise().sum().transpose();
  return b;
}

double mean_of(const Vec& v) { return v.mean(); }

double std_error_of(const Vec& v) {
  if (v.size() < 2) return 0.0;
  const double var = (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
  return std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace

void RlConfig::validate() const {
  if (episodes_per_update < 1) throw ConfigError("rl.episodes_per_update must be positive");
  if (updates_per_iteration < 0) throw ConfigError("rl.updates_per_iteration must be non-negative");
  if (!(policy_lr > 0.0)) throw ConfigError("rl.policy_lr must be positive");
  if (!(value_lr > 0.0)) throw ConfigError("rl.value_lr must be positive");
  if (!(entropy_bonus >= 0.0)) throw ConfigError("rl.entropy_bonus must be non-negative");
  if (!(norm_std > 0.0)) throw ConfigError("rl.norm_std must be positive");
  if (value_steps < 0) throw ConfigError("rl.value_steps must be non-negative");
  if (guard_episodes < 0) throw ConfigError("rl.guard_episodes must be non-negative");
  if (!(min_log_std < max_log_std)) throw ConfigError("rl log_std bounds are inverted");
  for (int h : value_hidden) {
    if (h < 1) throw ConfigError("rl.value_hidden sizes must be positive");
  }
}

Mat StateCost::episode_costs(std::span<const ObservedTrajectory> trajs, Rng&) {
  if (trajs.empty()) return {};
  const Eigen::Index H = trajs.front().actions.cols();
  Mat c(H, static_cast<Eigen::Index>(trajs.size()));
  for (std::size_t e = 0; e < trajs.size(); ++e) {
    for (Eigen::Index h = 0; h < H; ++h) c(h, static_cast<Eigen::Index>(e)) = f_(trajs[e].states.col(h + 1));
  }
  return c;
}

StateCost oracle_cost(const envs::EnvSpec& spec) {
  const envs::TrueCost truth(spec);
  if (spec.name == envs::EnvName::bimodal_goal) {
    throw ArgumentError("oracle_cost: bimodal_goal cost depends on the hidden goal");
  }
  return StateCost([truth](const Vec& s) { return truth.of_state(s); });
}

PolicyGrad likelihood_ratio_gradient(const GaussianPolicy& policy, const Mat& states,
                                     const Mat& raw_actions, const Vec& weights,
                                     double entropy_bonus) {
  const Eigen::Index n = states.cols();
  if (n == 0) throw ArgumentError("likelihood_ratio_gradient: empty batch");
  if (raw_actions.cols() != n || weights.size() != n) {
    throw ShapeError("likelihood_ratio_gradient: batch sizes differ");
  }
  const Mat mu = policy.mean_batch(states);
  const Eigen::ArrayXd inv_var = (-2.0 * policy.log_std.array()).exp();
  Mat grad_mu(mu.rows(), n);
  Vec grad_ls = Vec::Zero(policy.log_std.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::ArrayXd z = (raw_actions.col(j) - mu.col(j)).array();
    // d log pi / d mu = z / sigma^2, d log pi / d log_sigma = z^2 / sigma^2 - 1
    grad_mu.col(j) = (weights(j) / n * z * inv_var).matrix();
    grad_ls += (weights(j) / n * (z.square() * inv_var - 1.0)).matrix();
  }
  PolicyGrad g;
  g.mean_grad = nn::backward_batch(policy.mean_net, states, {}, grad_mu);
  // H(pi) = sum log_sigma + const
  g.log_std_grad = grad_ls - Vec::Constant(grad_ls.size(), entropy_bonus);
  return g;
}

RlResult rl_solve(const envs::Env& env, CostSource& costs, const GaussianPolicy& pi_init,
                  const RlConfig& cfg, Rng& rng) {
  cfg.validate();
  if (pi_init.mean_net.input_dim() != env.state_dim() ||
      pi_init.mean_net.output_dim() != env.action_dim()) {
    throw ShapeError("rl_solve: policy does not match the environment");
  }
  const int H = env.horizon();
  const int E = cfg.episodes_per_update;

  RlResult out;
  out.policy = pi_init;
  GaussianPolicy& pi = out.policy;

  std::vector<int> vsizes{env.state_dim() + 1};
  vsizes.insert(vsizes.end(), cfg.value_hidden.begin(), cfg.value_hidden.end());
  vsizes.push_back(1);
  nn::MlpParams value = nn::init_params(vsizes, 0, nn::Activation::relu, rng.engine()());
  value.weights.back().setZero();
  nn::AdamState value_opt = nn::make_adam(value, cfg.value_lr);
  nn::AdamState policy_opt = nn::make_adam(pi.mean_net, cfg.policy_lr);
  nn::VecAdam log_std_opt(pi.log_std.size(), cfg.policy_lr);

  double init_mean = 0.0, init_se = 0.0;
  bool have_init = false;

  for (int u = 0; u < cfg.updates_per_iteration; ++u) {
    Batch b = collect(env, pi, costs, E, rng);
    out.env_steps += static_cast<long>(E) * H;
    if (!have_init) {
      init_mean = mean_of(b.episode_costs);
      init_se = std_error_of(b.episode_costs);
      have_init = true;
    }

    Mat c = b.costs;
    if (cfg.normalize_costs) {
      const Vec flat = Eigen::Map<const Vec>(c.data(), c.size());
      const Vec norm = cost::cost_batch_normalize(flat, cfg.norm_std);
      c = Eigen::Map<const Mat>(norm.data(), c.rows(), c.cols());
    }
    // Return-to-go, laid out like value_inputs (episode-major, step-minor).
    Vec G(static_cast<Eigen::Index>(E) * H);
    for (int e = 0; e < E; ++e) {
      double acc = 0.0;
      for (int h = H - 1; h >= 0; --h) {
        acc += c(h, e);
        G(static_cast<Eigen::Index>(e) * H + h) = acc;
      }
    }

    const Mat vin = value_inputs(b.trajs, H);
    const Vec baseline = nn::forward_batch(value, vin, {}).row(0).transpose();
    const Vec adv = G - baseline;

    Mat S(env.state_dim(), G.size());
    Mat A(env.action_dim(), G.size());
    for (int e = 0; e < E; ++e) {
      S.middleCols(static_cast<Eigen::Index>(e) * H, H) = b.trajs[e].states.leftCols(H);
      A.middleCols(static_cast<Eigen::Index>(e) * H, H) = b.trajs[e].raw_actions;
    }
    // Per-episode sum of step terms, averaged over episodes.
    const PolicyGrad g =
        likelihood_ratio_gradient(pi, S, A, adv * static_cast<double>(H), cfg.entropy_bonus);
    nn::adam_update(pi.mean_net, g.mean_grad, policy_opt);
    log_std_opt.update(pi.log_std, g.log_std_grad);
    pi.log_std = pi.log_std.cwiseMax(cfg.min_log_std).cwiseMin(cfg.max_log_std);

    nn::SqBatch vb{vin, {}, G.transpose()};
    for (int k = 0; k < cfg.value_steps; ++k) {
      const auto lg = nn::sq_loss_grad(value, vb);
      if (!std::isfinite(lg.loss)) {
        throw TrainingError("value regression diverged at update " + std::to_string(u));
      }
      nn::adam_update(value, lg.grads, value_opt);
    }
  }

  out.initial_cost = init_mean;
  out.final_cost = init_mean;
  if (cfg.guard_episodes > 0 && have_init) {
    Batch fin = collect(env, pi, costs, cfg.guard_episodes, rng);
    out.env_steps += static_cast<long>(cfg.guard_episodes) * H;
    const double fin_mean = mean_of(fin.episode_costs);
    const double fin_se = std_error_of(fin.episode_costs);
    out.final_cost = fin_mean;
    if (fin_mean - init_mean > cfg.guard_sigmas * std::hypot(init_se, fin_se)) {
      out.policy = pi_init;
      out.final_cost = init_mean;
      out.reverted = true;
    }
  }
  return out;
}

PolicyValue policy_value(const envs::Env& env, envs::Actor& actor, int n_episodes, Rng& rng) {
  if (n_episodes < 1) throw ArgumentError("policy_value: n_episodes must be >= 1");
  Vec totals(n_episodes);
  for (int e = 0; e < n_episodes; ++e) totals(e) = envs::rollout(env, actor, rng).total_cost();
  PolicyValue v;
  v.n_episodes = n_episodes;
  v.mean = totals.mean();
  v.single_episode = n_episodes == 1;
  v.variance = n_episodes > 1
                   ? (totals.array() - v.mean).square().sum() / static_cast<double>(n_episodes - 1)
                   : 0.0;
  return v;
}

}  // namespace smiling::rl
