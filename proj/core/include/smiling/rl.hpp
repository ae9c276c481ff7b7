#pragma once

#include <functional>
#include <span>
#include <vector>

#include "smiling/envs.hpp"
#include "smiling/nn.hpp"
#include "smiling/types.hpp"

namespace smiling::rl {

struct RlConfig {
  int episodes_per_update = 16;
  int updates_per_iteration = 8;
  double policy_lr = 1e-2;
  double value_lr = 1e-2;
  double entropy_bonus = 1e-3;
  bool warm_start = true;
  bool normalize_costs = true;
  double norm_std = 0.1;
  std::vector<int> value_hidden = {64};
  int value_steps = 20;  // full-batch value-regression steps per update
  /// Final evaluation batch compared against the first batch; the initial
  /// policy is returned if the final one is worse by more than `guard_sigmas`
  /// combined standard errors. Zero disables the guard.
  int guard_episodes = 16;
  double guard_sigmas = 2.0;
  double min_log_std = -5.0;
  double max_log_std = 1.0;

  void validate() const;
};

/// Supplies per-step costs for observed trajectories. Implementations see
/// states and actions only.
class CostSource {
 public:
  virtual ~CostSource() = default;
  /// Column e of the result holds the H step costs of trajectory e; step h is
  /// charged for the transition (s_h, a_h) -> s_{h+1}.
  virtual Mat episode_costs(std::span<const envs::ObservedTrajectory> trajs, Rng& rng) = 0;
};

/// Cost of the reached state only: c_h = f(s_{h+1}).
class StateCost : public CostSource {
 public:
  explicit StateCost(std::function<double(const Vec&)> f) : f_(std::move(f)) {}
  Mat episode_costs(std::span<const envs::ObservedTrajectory> trajs, Rng& rng) override;

 private:
  std::function<double(const Vec&)> f_;
};

/// c* written as a function of the state; defined for tasks whose goal is
/// fixed (point_goal, expfam_gauss).
StateCost oracle_cost(const envs::EnvSpec& spec);

struct PolicyGrad {
  nn::MlpParams mean_grad;
  Vec log_std_grad;
};

/// Gradient of (1/n) sum_j w_j log pi(raw_j | s_j) - entropy_bonus * H(pi),
/// i.e. the likelihood-ratio estimate of d/dtheta E[w] minus the entropy term.
PolicyGrad likelihood_ratio_gradient(const envs::GaussianPolicy& policy, const Mat& states,
                                     const Mat& raw_actions, const Vec& weights,
                                     double entropy_bonus);

struct RlResult {
  envs::GaussianPolicy policy;
  double initial_cost = 0.0;  // mean episode cost of the first batch
  double final_cost = 0.0;    // mean episode cost of the returned policy's batch
  long env_steps = 0;
  bool reverted = false;
};

/// Episodic policy gradient with a learned baseline V(s_h, h/H), minimizing
/// the expected cumulative cost supplied by `costs`.
RlResult rl_solve(const envs::Env& env, CostSource& costs, const envs::GaussianPolicy& pi_init,
                  const RlConfig& cfg, Rng& rng);

struct PolicyValue {
  double mean = 0.0;      // mean episode cost under c*
  double variance = 0.0;  // sample variance; 0 when n_episodes == 1
  bool single_episode = false;
  int n_episodes = 0;
};

/// Empirical mean and variance of the true cumulative cost.
PolicyValue policy_value(const envs::Env& env, envs::Actor& actor, int n_episodes, Rng& rng);

}  // namespace smiling::rl
