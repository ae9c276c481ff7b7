#include "smiling/imitation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

namespace smiling::imitation {

using envs::Env;
using envs::GaussianPolicy;
using envs::ObservedTrajectory;
using scorematch::StateBuffer;

namespace {

constexpr std::uint64_t kEvalStream = 0x6576616c;
constexpr std::uint64_t kReferenceStream = 0x72656673;

int feature_dim(const SmilingConfig& cfg) {
  return cfg.env.state_dim + (cfg.state_action_mode ? cfg.env.action_dim : 0);
}

Mat features_of(std::span<const ObservedTrajectory> trajs, bool state_action) {
  if (trajs.empty()) return {};
  std::vector<Mat> parts;
  Eigen::Index total = 0;
  for (const auto& tr : trajs) {
    parts.push_back(trajectory_features(tr, state_action));
    total += parts.back().cols();
  }
  Mat out(parts.front().rows(), total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  return out;
}

Mat reshape_costs(const Vec& flat, Eigen::Index H, Eigen::Index E) {
  // features_of is episode-major, so each episode's H costs are contiguous.
  return Eigen::Map<const Mat>(flat.data(), H, E);
}

envs::Demonstrations check_demos(const SmilingConfig& cfg, const envs::Demonstrations& demos) {
  if (demos.env != cfg.env.name) {
    throw ConfigError("demonstrations were collected on " + envs::to_string(demos.env) +
                      ", config selects " + envs::to_string(cfg.env.name));
  }
  if (demos.states.rows() != cfg.env.state_dim || demos.states.cols() < 2) {
    throw ConfigError("demonstrations do not match the environment state dimension");
  }
  if (cfg.state_action_mode) {
    if (!demos.has_actions()) {
      throw ConfigError("state_action_mode needs demonstrations recorded with actions");
    }
    if (demos.actions.rows() != cfg.env.action_dim) {
      throw ConfigError("demonstrations do not match the environment action dimension");
    }
    return demos;
  }
  return demos.strip_actions();
}

double norm_return(double cost_value, const References& ref) {
  return envs::normalized_return(-cost_value, -ref.expert, -ref.random);
}

scorematch::ScoreTrainConfig with_mode(scorematch::ScoreTrainConfig c, bool linear) {
  if (linear) c.activation = nn::Activation::identity;
  return c;
}

std::vector<ObservedTrajectory> rollouts(const Env& env, envs::Actor& actor, int n, Rng& rng) {
  std::vector<ObservedTrajectory> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int e = 0; e < n; ++e) out.push_back(envs::learner_rollout(env, actor, rng));
  return out;
}

divergence::DsEstimate mean_and_error(const Vec& v) {
  divergence::DsEstimate d;
  d.n_mc = v.size();
  if (v.size() == 0) return d;
  d.value = v.mean();
  if (v.size() > 1) {
    const double var = (v.array() - d.value).square().sum() / static_cast<double>(v.size() - 1);
    d.std_error = std::sqrt(var / static_cast<double>(v.size()));
  }
  return d;
}

/// One outer-loop objective: SMILING score models or the DAC-lite discriminator.
class Objective {
 public:
  virtual ~Objective() = default;
  /// Refit on the aggregated buffer; returns the loss to record.
  virtual double update(const StateBuffer& buffer, std::uint64_t seed) = 0;
  virtual std::unique_ptr<rl::CostSource> cost_source() const = 0;
  /// Per-feature-column cost used for the divergence column.
  virtual Vec feature_costs(const Mat& features, Rng& rng) const = 0;
};

class ScoreObjective : public Objective {
 public:
  ScoreObjective(const SmilingConfig& cfg, const Mat& expert_features, Rng& master)
      : cfg_(cfg), learner_cfg_(with_mode(cfg.learner_score, cfg.linear_mode)) {
    const auto expert_cfg = with_mode(cfg.expert_score, cfg.linear_mode);
    expert_ = scorematch::pretrain_expert(expert_features, cfg.schedule, expert_cfg,
                                          master.engine()())
                  .model;
    learner_ = scorematch::make_score_model(static_cast<int>(expert_features.rows()),
                                            cfg.schedule, learner_cfg_, master.engine()());
  }

  double update(const StateBuffer& buffer, std::uint64_t seed) override {
    auto trained = scorematch::ftl_update(learner_, buffer, cfg_.schedule, learner_cfg_, seed);
    learner_ = std::move(trained.model);
    return trained.final_loss;
  }

  std::unique_ptr<rl::CostSource> cost_source() const override {
    return std::make_unique<ScoreCost>(cost_fn(), cfg_.state_action_mode);
  }

  Vec feature_costs(const Mat& features, Rng& rng) const override {
    return cost::cost_eval_batch(cost_fn(), features, rng);
  }

 private:
  cost::CostFn cost_fn() const {
    return cost::CostFn{expert_.fn(), learner_.fn(), cfg_.schedule, cfg_.cost.n_mc};
  }

  const SmilingConfig& cfg_;
  scorematch::ScoreTrainConfig learner_cfg_;
  scorematch::ScoreModel expert_;
  scorematch::ScoreModel learner_;
};

class DiscriminatorObjective : public Objective {
 public:
  DiscriminatorObjective(const SmilingConfig& cfg, const Mat& expert_features, Rng& master)
      : cfg_(cfg), expert_features_(expert_features) {
    disc_ = make_discriminator(static_cast<int>(expert_features.rows()),
                               with_mode(cfg.learner_score, cfg.linear_mode), master.engine()());
    opt_ = nn::make_adam(disc_.net, cfg.disc.learning_rate);
  }

  double update(const StateBuffer& buffer, std::uint64_t seed) override {
    Rng rng(seed);
    return train_discriminator(disc_, expert_features_, buffer, cfg_.disc, opt_, rng);
  }

  std::unique_ptr<rl::CostSource> cost_source() const override {
    return std::make_unique<DiscriminatorCost>(disc_, cfg_.state_action_mode);
  }

  Vec feature_costs(const Mat& features, Rng&) const override { return disc_.cost(features); }

 private:
  const SmilingConfig& cfg_;
  Mat expert_features_;
  Discriminator disc_;
  nn::AdamState opt_;
};

template <typename Fn>
auto with_iteration(int k, Fn&& fn) {
  try {
    return fn();
  } catch (const TrainingError& e) {
    throw TrainingError("iteration " + std::to_string(k) + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("iteration " + std::to_string(k) + ": " + e.what());
  }
}

RunOutput outer_loop(Method method, const SmilingConfig& cfg, const envs::Demonstrations& raw_demos) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const envs::Demonstrations demos = check_demos(cfg, raw_demos);
  const Env env(cfg.env);
  const Mat expert_features = demo_features(demos, cfg.state_action_mode);

  Rng master(cfg.seed);
  Rng eval_rng(splitmix64(cfg.seed ^ kEvalStream));
  const References ref = reference_values(env, cfg);

  std::unique_ptr<Objective> objective;
  if (method == Method::smiling) {
    objective = std::make_unique<ScoreObjective>(cfg, expert_features, master);
  } else {
    objective = std::make_unique<DiscriminatorObjective>(cfg, expert_features, master);
  }

  const GaussianPolicy pi_init = envs::make_policy(env, cfg.policy, master.engine()());
  GaussianPolicy pi = pi_init;
  StateBuffer buffer(feature_dim(cfg));

  RunOutput out;
  out.result.method = method;
  out.result.seed = cfg.seed;
  out.result.config_digest = cfg.config_digest;
  out.result.expert_value = ref.expert;
  out.result.random_value = ref.random;
  long env_steps = 0;

  for (int k = 1; k <= cfg.K; ++k) {
    with_iteration(k, [&] {
      Rng iter_rng(master.engine()());
      const auto trajs = rollouts(env, pi, cfg.learner_episodes, iter_rng);
      env_steps += static_cast<long>(cfg.learner_episodes) * env.horizon();
      buffer.append(features_of(trajs, cfg.state_action_mode));

      IterationRecord rec;
      rec.iter = k;
      rec.score_loss = objective->update(buffer, iter_rng.engine()());

      auto source = objective->cost_source();
      const GaussianPolicy start =
          cfg.rl.warm_start ? pi : envs::make_policy(env, cfg.policy, iter_rng.engine()());
      rl::RlResult res = rl::rl_solve(env, *source, start, cfg.rl, iter_rng);
      env_steps += res.env_steps;
      pi = std::move(res.policy);
      out.mixture.add(pi);
      rec.rl_cost_mean = res.final_cost;
      rec.env_steps = env_steps;

      GaussianPolicy current = pi;
      rec.norm_return_current =
          norm_return(rl::policy_value(env, current, cfg.eval_episodes, eval_rng).mean, ref);
      rec.norm_return_mixture =
          norm_return(rl::policy_value(env, out.mixture, cfg.eval_episodes, eval_rng).mean, ref);

      const int n_ds_eps = (cfg.ds_eval_states + env.horizon() - 1) / env.horizon();
      const Mat feats = features_of(rollouts(env, current, n_ds_eps, eval_rng), cfg.state_action_mode);
      rec.ds = mean_and_error(
          objective->feature_costs(feats.leftCols(std::min<Eigen::Index>(cfg.ds_eval_states, feats.cols())),
                                   eval_rng));
      out.result.records.push_back(rec);
      return 0;
    });
  }

  out.final_policy = pi;
  out.result.final_norm_return =
      out.result.records.empty() ? 0.0 : out.result.records.back().norm_return_current;
  out.result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace

References reference_values(const Env& env, const SmilingConfig& cfg) {
  Rng rng(splitmix64(cfg.seed ^ kReferenceStream));
  envs::ExpertPolicy expert(env);
  envs::UniformRandomActor random(env);
  References r;
  r.expert = rl::policy_value(env, expert, cfg.reference_episodes, rng).mean;
  r.random = rl::policy_value(env, random, cfg.reference_episodes, rng).mean;
  return r;
}

Method parse_method(const std::string& name) {
  if (name == "smiling") return Method::smiling;
  if (name == "bc") return Method::bc;
  if (name == "dac_lite") return Method::dac_lite;
  throw ConfigError("unknown method '" + name + "'");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::smiling:
      return "smiling";
    case Method::bc:
      return "bc";
    case Method::dac_lite:
      return "dac_lite";
  }
  return "unknown";
}

void SmilingConfig::validate() const {
  env.validate();
  schedule.validate();
  expert_score.validate();
  learner_score.validate();
  rl.validate();
  cost.validate();
  if (K < 1) throw ConfigError("run.K must be >= 1");
  if (learner_episodes < 1) throw ConfigError("run.learner_episodes must be >= 1");
  if (eval_episodes < 1) throw ConfigError("run.eval_episodes must be >= 1");
  if (reference_episodes < 1) throw ConfigError("run.reference_episodes must be >= 1");
  if (ds_eval_states < 1) throw ConfigError("run.ds_eval_states must be >= 1");
  if (disc.steps < 0 || disc.batch_size < 1 || !(disc.learning_rate > 0.0)) {
    throw ConfigError("disc.* settings must be positive");
  }
  if (bc.epochs < 0 || bc.batch_size < 1 || !(bc.learning_rate > 0.0) || bc.checkpoints < 1) {
    throw ConfigError("bc.* settings must be positive");
  }
  if (!(policy.init_std > 0.0)) throw ConfigError("policy.init_std must be positive");
  for (int h : policy.hidden) {
    if (h < 1) throw ConfigError("policy.hidden sizes must be positive");
  }
}

MixturePolicy::MixturePolicy(std::vector<GaussianPolicy> members) : members_(std::move(members)) {
  if (members_.empty()) throw ArgumentError("mixture_policy: no members");
}

MixturePolicy mixture_policy(std::vector<GaussianPolicy> policies) {
  return MixturePolicy(std::move(policies));
}

void MixturePolicy::begin_episode(const envs::EpisodeContext& ctx, Rng& rng) {
  if (members_.empty()) throw ArgumentError("mixture_policy: no members");
  const int n = static_cast<int>(members_.size());
  choice_ = n == 1 ? 0 : rng.uniform_int(n);
  members_[static_cast<std::size_t>(choice_)].begin_episode(ctx, rng);
}

envs::ActionSample MixturePolicy::act(const Vec& s, Rng& rng) {
  return members_[static_cast<std::size_t>(choice_)].act(s, rng);
}

Mat trajectory_features(const ObservedTrajectory& tr, bool state_action) {
  const Eigen::Index H = tr.actions.cols();
  if (!state_action) return tr.states.rightCols(H);
  Mat f(tr.states.rows() + tr.actions.rows(), H);
  f.topRows(tr.states.rows()) = tr.states.leftCols(H);
  f.bottomRows(tr.actions.rows()) = tr.actions;
  return f;
}

Mat demo_features(const envs::Demonstrations& demos, bool state_action) {
  if (!state_action) return demos.states;
  if (!demos.has_actions()) {
    throw ConfigError("state-action features need demonstrations recorded with actions");
  }
  Mat f(demos.pre_states.rows() + demos.actions.rows(), demos.actions.cols());
  f.topRows(demos.pre_states.rows()) = demos.pre_states;
  f.bottomRows(demos.actions.rows()) = demos.actions;
  return f;
}

Mat ScoreCost::episode_costs(std::span<const ObservedTrajectory> trajs, Rng& rng) {
  if (trajs.empty()) return {};
  const Mat feats = features_of(trajs, state_action_);
  const Vec c = cost::cost_eval_batch(cf_, feats, rng);
  return reshape_costs(c, trajs.front().actions.cols(), static_cast<Eigen::Index>(trajs.size()));
}

Vec Discriminator::logits(const Mat& features) const {
  return nn::forward_batch(net, features, {}).row(0).transpose();
}

Vec Discriminator::cost(const Mat& features) const { return -logits(features); }

Discriminator make_discriminator(int dim, const scorematch::ScoreTrainConfig& arch,
                                 std::uint64_t seed) {
  std::vector<int> sizes{dim};
  sizes.insert(sizes.end(), arch.hidden.begin(), arch.hidden.end());
  sizes.push_back(1);
  Discriminator d{nn::init_params(sizes, 0, arch.activation, seed)};
  d.net.weights.back().setZero();
  return d;
}

double train_discriminator(Discriminator& d, const Mat& expert, const StateBuffer& learner,
                           const DiscriminatorConfig& cfg, nn::AdamState& opt, Rng& rng) {
  if (expert.cols() == 0 || learner.empty()) {
    throw ArgumentError("train_discriminator: need expert and learner samples");
  }
  const int b = cfg.batch_size;
  const int ne = static_cast<int>(expert.cols());
  double loss = 0.0;
  Mat x(expert.rows(), 2 * b);
  for (int step = 0; step < cfg.steps; ++step) {
    for (int j = 0; j < b; ++j) x.col(j) = expert.col(rng.uniform_int(ne));
    x.rightCols(b) = learner.sample(b, rng);
    const Mat f = nn::forward_batch(d.net, x, {});
    Mat grad(1, 2 * b);
    loss = 0.0;
    for (int j = 0; j < 2 * b; ++j) {
      const double z = f(0, j);
      const double y = j < b ? 1.0 : 0.0;
      // -log sigmoid(z) = softplus(-z), -log(1 - sigmoid(z)) = softplus(z)
      const double sp = y > 0.5 ? std::log1p(std::exp(-std::abs(z))) + std::max(-z, 0.0)
                                : std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0);
      loss += sp / b;
      grad(0, j) = (1.0 / (1.0 + std::exp(-z)) - y) / b;
    }
    if (!std::isfinite(loss)) throw TrainingError("discriminator loss is not finite");
    nn::adam_update(d.net, nn::backward_batch(d.net, x, {}, grad), opt);
  }
  return loss;
}

Mat DiscriminatorCost::episode_costs(std::span<const ObservedTrajectory> trajs, Rng&) {
  if (trajs.empty()) return {};
  const Vec c = d_.cost(features_of(trajs, state_action_));
  return reshape_costs(c, trajs.front().actions.cols(), static_cast<Eigen::Index>(trajs.size()));
}

RunOutput smiling_run(const SmilingConfig& cfg, const envs::Demonstrations& demos) {
  return outer_loop(Method::smiling, cfg, demos);
}

RunOutput dac_lite_run(const SmilingConfig& cfg, const envs::Demonstrations& demos) {
  return outer_loop(Method::dac_lite, cfg, demos);
}

RunOutput bc_run(const SmilingConfig& cfg, const envs::Demonstrations& demos) {
  cfg.validate();
  if (!demos.has_actions()) {
    throw ConfigError(
        "bc needs state-action demonstrations; collect them with demos.with_actions=true");
  }
  if (demos.env != cfg.env.name) throw ConfigError("demonstrations do not match the environment");
  const auto t0 = std::chrono::steady_clock::now();
  const Env env(cfg.env);
  Rng master(cfg.seed);
  Rng eval_rng(splitmix64(cfg.seed ^ kEvalStream));
  const References ref = reference_values(env, cfg);

  GaussianPolicy pi = envs::make_policy(env, cfg.policy, master.engine()());
  nn::AdamState opt = nn::make_adam(pi.mean_net, cfg.bc.learning_rate);
  const rl::RlConfig bounds;
  nn::VecAdam ls_opt(pi.log_std.size(), cfg.bc.learning_rate);

  const Eigen::Index n = demos.pre_states.cols();
  const int every = std::max(1, cfg.bc.epochs / cfg.bc.checkpoints);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  RunOutput out;
  out.result.method = Method::bc;
  out.result.seed = cfg.seed;
  out.result.config_digest = cfg.config_digest;
  out.result.expert_value = ref.expert;
  out.result.random_value = ref.random;
  double best = -std::numeric_limits<double>::infinity();
  double last_loss = 0.0;

  auto checkpoint = [&](int epoch) {
    IterationRecord rec;
    rec.iter = epoch;
    rec.score_loss = last_loss;
    GaussianPolicy current = pi;
    rec.norm_return_current =
        norm_return(rl::policy_value(env, current, cfg.eval_episodes, eval_rng).mean, ref);
    rec.norm_return_mixture = rec.norm_return_current;
    out.result.records.push_back(rec);
    if (rec.norm_return_current > best) {
      best = rec.norm_return_current;
      out.final_policy = pi;
    }
  };

  if (cfg.bc.epochs == 0) checkpoint(0);
  for (int epoch = 1; epoch <= cfg.bc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), master.engine());
    for (Eigen::Index start = 0; start < n; start += cfg.bc.batch_size) {
      const Eigen::Index cols = std::min<Eigen::Index>(cfg.bc.batch_size, n - start);
      Mat s(demos.pre_states.rows(), cols), a(demos.actions.rows(), cols);
      for (Eigen::Index j = 0; j < cols; ++j) {
        const Eigen::Index i = order[static_cast<std::size_t>(start + j)];
        s.col(j) = demos.pre_states.col(i);
        a.col(j) = demos.actions.col(i);
      }
      last_loss = -pi.log_prob(s, a).mean();
      if (!std::isfinite(last_loss)) throw TrainingError("bc likelihood is not finite");
      // Negative weights turn the score-function gradient into the NLL gradient.
      const rl::PolicyGrad g = rl::likelihood_ratio_gradient(pi, s, a, Vec::Constant(cols, -1.0), 0.0);
      nn::adam_update(pi.mean_net, g.mean_grad, opt);
      ls_opt.update(pi.log_std, g.log_std_grad);
      pi.log_std = pi.log_std.cwiseMax(bounds.min_log_std).cwiseMin(bounds.max_log_std);
    }
    if (epoch % every == 0 || epoch == cfg.bc.epochs) checkpoint(epoch);
  }

  out.mixture = mixture_policy({out.final_policy});
  out.result.final_norm_return = best;
  out.result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

RunOutput run_method(Method m, const SmilingConfig& cfg, const envs::Demonstrations& demos) {
  switch (m) {
    case Method::smiling:
      return smiling_run(cfg, demos);
    case Method::dac_lite:
      return dac_lite_run(cfg, demos);
    case Method::bc:
      return bc_run(cfg, demos);
  }
  throw ConfigError("unknown method");
}

}  // namespace smiling::imitation
