#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "smiling/nn.hpp"
#include "smiling/types.hpp"

namespace smiling::envs {

enum class EnvName { point_goal, bimodal_goal, expfam_gauss };

EnvName parse_env_name(const std::string& name);
std::string to_string(EnvName name);

inline constexpr double kExpfamTarget = 1.5;
inline constexpr double kExpfamActionBound = 4.0;

struct EnvSpec {
  EnvName name = EnvName::point_goal;
  int state_dim = 2;
  int action_dim = 2;
  int horizon = 32;
  double dynamics_noise = 0.01;
  std::uint64_t seed = 0;

  /// Dimensions and horizon of the named task.
  static EnvSpec defaults(EnvName name);
  void validate() const;
};

/// Per-episode hidden state (the drawn goal). Learners can hold one but cannot
/// read it; only the true cost and the scripted expert can.
class EpisodeContext {
 public:
  EpisodeContext() = default;

 private:
  Vec goal_;
  friend class Env;
  friend class TrueCost;
  friend class ExpertPolicy;
};

/// Learner-facing dynamics. Exposes no cost.
class Env {
 public:
  explicit Env(EnvSpec spec);

  const EnvSpec& spec() const { return spec_; }
  int state_dim() const { return spec_.state_dim; }
  int action_dim() const { return spec_.action_dim; }
  int horizon() const { return spec_.horizon; }
  const Vec& action_low() const { return low_; }
  const Vec& action_high() const { return high_; }

  Vec reset(EpisodeContext& ctx, Rng& rng) const;
  Vec step(const Vec& s, const Vec& a, Rng& rng) const;
  Vec clip_action(const Vec& a) const;

 private:
  EnvSpec spec_;
  Vec low_, high_;
};

Env make_env(const EnvSpec& spec);

/// Hidden ground-truth cost c*, used for evaluation only.
class TrueCost {
 public:
  explicit TrueCost(const EnvSpec& spec) : name_(spec.name) {}
  double operator()(const EpisodeContext& ctx, const Vec& s) const;
  /// c* without a context; only for tasks whose goal never changes.
  double of_state(const Vec& s) const;

 private:
  EnvName name_;
};

struct ActionSample {
  Vec action;  // clipped to the action box
  Vec raw;     // before clipping; what the likelihood is evaluated at
};

class Actor {
 public:
  virtual ~Actor() = default;
  virtual void begin_episode(const EpisodeContext&, Rng&) {}
  virtual ActionSample act(const Vec& s, Rng& rng) = 0;
};

/// Diagonal Gaussian policy with a state-conditioned mean network.
class GaussianPolicy : public Actor {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(nn::MlpParams mean_net, Vec log_std, Vec action_low, Vec action_high);

  ActionSample act(const Vec& s, Rng& rng) override;
  Vec mean(const Vec& s) const;
  Mat mean_batch(const Mat& states) const;
  /// log N(raw | mean(s), diag(exp(2 log_std))) per column.
  Vec log_prob(const Mat& states, const Mat& raw) const;

  nn::MlpParams mean_net;
  Vec log_std;
  Vec action_low, action_high;
};

struct PolicyInit {
  std::vector<int> hidden = {64};
  double init_std = 0.5;
  double output_scale = 0.01;
};

GaussianPolicy make_policy(const Env& env, const PolicyInit& init, std::uint64_t seed);

// "SMILPOL1" | nn checkpoint of the mean network | u32 action_dim
// | f64 log_std | f64 action_low | f64 action_high
void save_policy(const std::filesystem::path& path, const GaussianPolicy& p);
GaussianPolicy load_policy(const std::filesystem::path& path);

inline constexpr double kExpertLogStd = -2.995732273553991;  // log(0.05)

/// Scripted expert: a = clip(2 (goal - s)) on the goal tasks, a = 1.5 on
/// expfam_gauss, plus N(0, 0.05^2) action noise.
class ExpertPolicy : public Actor {
 public:
  explicit ExpertPolicy(const Env& env, double log_std = kExpertLogStd);
  void begin_episode(const EpisodeContext& ctx, Rng& rng) override;
  ActionSample act(const Vec& s, Rng& rng) override;

 private:
  EnvSpec spec_;
  Vec low_, high_;
  double std_;
  Vec goal_;
};

/// The expert written as a GaussianPolicy. Not available on bimodal_goal,
/// whose expert reads the hidden goal.
GaussianPolicy expert_gaussian_policy(const Env& env, double log_std = kExpertLogStd);

/// The "random policy" of the normalized return: actions uniform in the box.
class UniformRandomActor : public Actor {
 public:
  explicit UniformRandomActor(const Env& env);
  ActionSample act(const Vec& s, Rng& rng) override;

 private:
  Vec low_, high_;
};

/// What a learner observes: H+1 states and H actions.
struct ObservedTrajectory {
  Mat states;       // (state_dim x H+1)
  Mat actions;      // (action_dim x H), clipped
  Mat raw_actions;  // (action_dim x H)
};

struct Trajectory : ObservedTrajectory {
  Vec true_costs;  // c*(states[h+1]), h = 0..H-1

  double total_cost() const { return true_costs.sum(); }
};

Trajectory rollout(const Env& env, Actor& actor, Rng& rng);
/// Same draws as rollout, without the hidden costs.
ObservedTrajectory learner_rollout(const Env& env, Actor& actor, Rng& rng);

/// Returns are negated cumulative costs.
double normalized_return(double v_pi, double v_expert, double v_random);

/// Expert demonstrations. Column i of `states` is a visited (post-action)
/// state; with actions, `pre_states`/`actions` column i is the (s_h, a_h) pair
/// that produced it.
struct Demonstrations {
  EnvName env = EnvName::point_goal;
  int n_episodes = 0;
  Mat states;
  Mat pre_states;  // empty in state-only files
  Mat actions;     // empty in state-only files

  bool has_actions() const { return actions.cols() > 0; }
  Demonstrations strip_actions() const;
};

Demonstrations collect_demos(const Env& env, int n_episodes, bool with_actions, std::uint64_t seed,
                             double* mean_return = nullptr);

// "SMILDEMO" | u32 name_len | name | u32 n_episodes | u64 count | u32 state_dim
// | u32 action_dim (0 = state-only) | per column: f64 state[state_dim]
// [| f64 action[action_dim] | f64 pre_state[state_dim]]
void save_demos(const std::filesystem::path& path, const Demonstrations& d);
Demonstrations load_demos(const std::filesystem::path& path);

}  // namespace smiling::envs
