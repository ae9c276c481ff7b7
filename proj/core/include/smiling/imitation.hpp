#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smiling/cost.hpp"
#include "smiling/diffusion.hpp"
#include "smiling/divergence.hpp"
#include "smiling/envs.hpp"
#include "smiling/rl.hpp"
#include "smiling/scorematch.hpp"

namespace smiling::imitation {

enum class Method { smiling, bc, dac_lite };

Method parse_method(const std::string& name);
std::string to_string(Method m);

struct DiscriminatorConfig {
  int steps = 200;  // Adam steps per outer iteration
  int batch_size = 256;
  double learning_rate = 1e-3;
};

struct BcConfig {
  int epochs = 200;
  int batch_size = 256;
  double learning_rate = 5e-3;
  int checkpoints = 10;  // evaluated checkpoints spread over training
};

struct SmilingConfig {
  envs::EnvSpec env;
  diffusion::DiffusionSchedule schedule;
  scorematch::ScoreTrainConfig expert_score{.epochs = 2000};
  /// One pass over a fresh buffer subsample per iteration, warm-started.
  scorematch::ScoreTrainConfig learner_score{.epochs = 1};
  rl::RlConfig rl;
  cost::CostConfig cost;
  envs::PolicyInit policy;
  DiscriminatorConfig disc;
  BcConfig bc;
  int K = 10;
  int learner_episodes = 16;  // rollouts of pi^(k-1) appended per iteration
  int eval_episodes = 50;
  int reference_episodes = 200;  // expert and random reference values
  int ds_eval_states = 128;
  bool state_action_mode = false;
  bool linear_mode = false;
  std::uint64_t seed = 0;
  std::string config_digest;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  long env_steps = 0;  // cumulative learner interaction
  double norm_return_current = 0.0;
  double norm_return_mixture = 0.0;
  /// Mean cost over states of the current policy: the corrected estimate of
  /// the divergence to the expert (discriminator cost for dac_lite, 0 for bc).
  divergence::DsEstimate ds;
  double score_loss = 0.0;  // held-out score loss, discriminator or BC loss
  double rl_cost_mean = 0.0;
};

struct RunResult {
  Method method = Method::smiling;
  std::vector<IterationRecord> records;
  double final_norm_return = 0.0;  // last iterate; best checkpoint for bc
  double expert_value = 0.0;       // mean episode cost, reference
  double random_value = 0.0;
  double wall_seconds = 0.0;
  std::string config_digest;
  std::uint64_t seed = 0;
};

struct References {
  double expert = 0.0;  // mean episode cost of the scripted expert
  double random = 0.0;  // mean episode cost of uniform random actions
};

/// Reference values for the normalized return, from a seed-derived stream
/// shared by every method.
References reference_values(const envs::Env& env, const SmilingConfig& cfg);

/// Uniform choice of one member per episode, held for the whole episode.
class MixturePolicy : public envs::Actor {
 public:
  MixturePolicy() = default;
  explicit MixturePolicy(std::vector<envs::GaussianPolicy> members);

  void begin_episode(const envs::EpisodeContext& ctx, Rng& rng) override;
  envs::ActionSample act(const Vec& s, Rng& rng) override;

  const std::vector<envs::GaussianPolicy>& members() const { return members_; }
  void add(envs::GaussianPolicy p) { members_.push_back(std::move(p)); }
  int last_choice() const { return choice_; }

 private:
  std::vector<envs::GaussianPolicy> members_;
  int choice_ = 0;
};

MixturePolicy mixture_policy(std::vector<envs::GaussianPolicy> policies);

struct RunOutput {
  RunResult result;
  envs::GaussianPolicy final_policy;
  MixturePolicy mixture;
};

/// Features the score models see: the visited states s_{h+1}, or [s_h; a_h]
/// in state-action mode.
Mat trajectory_features(const envs::ObservedTrajectory& tr, bool state_action);
Mat demo_features(const envs::Demonstrations& demos, bool state_action);

/// Per-step SMILING cost of observed trajectories.
class ScoreCost : public rl::CostSource {
 public:
  ScoreCost(cost::CostFn cf, bool state_action) : cf_(std::move(cf)), state_action_(state_action) {}
  Mat episode_costs(std::span<const envs::ObservedTrajectory> trajs, Rng& rng) override;
  const cost::CostFn& cost_fn() const { return cf_; }

 private:
  cost::CostFn cf_;
  bool state_action_;
};

/// Discriminator D = sigmoid(f) of expert (label 1) against learner features.
struct Discriminator {
  nn::MlpParams net;

  Vec logits(const Mat& features) const;
  /// log(1 - D) - log D = -f.
  Vec cost(const Mat& features) const;
};

Discriminator make_discriminator(int dim, const scorematch::ScoreTrainConfig& arch,
                                 std::uint64_t seed);

/// Binary cross-entropy steps; returns the final minibatch loss.
double train_discriminator(Discriminator& d, const Mat& expert, const scorematch::StateBuffer& learner,
                           const DiscriminatorConfig& cfg, nn::AdamState& opt, Rng& rng);

class DiscriminatorCost : public rl::CostSource {
 public:
  DiscriminatorCost(Discriminator d, bool state_action) : d_(std::move(d)), state_action_(state_action) {}
  Mat episode_costs(std::span<const envs::ObservedTrajectory> trajs, Rng& rng) override;

 private:
  Discriminator d_;
  bool state_action_;
};

RunOutput smiling_run(const SmilingConfig& cfg, const envs::Demonstrations& demos);
RunOutput dac_lite_run(const SmilingConfig& cfg, const envs::Demonstrations& demos);
/// Gaussian maximum likelihood on expert (state, action) pairs.
RunOutput bc_run(const SmilingConfig& cfg, const envs::Demonstrations& demos);
RunOutput run_method(Method m, const SmilingConfig& cfg, const envs::Demonstrations& demos);

}  // namespace smiling::imitation
