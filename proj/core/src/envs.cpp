#include "smiling/envs.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "smiling/binary_io.hpp"

namespace smiling::envs {

namespace {

constexpr std::string_view kPolicyMagic = "SMILPOL1";
constexpr std::string_view kDemoMagic = "SMILDEMO";

Vec goal_vec(double x, double y) {
  Vec g(2);
  g << x, y;
  return g;
}

bool is_goal_task(EnvName n) { return n == EnvName::point_goal || n == EnvName::bimodal_goal; }

}  // namespace

EnvName parse_env_name(const std::string& name) {
  if (name == "point_goal") return EnvName::point_goal;
  if (name == "bimodal_goal") return EnvName::bimodal_goal;
  if (name == "expfam_gauss") return EnvName::expfam_gauss;
  throw ConfigError("unknown environment '" + name + "'");
}

std::string to_string(EnvName name) {
  switch (name) {
    case EnvName::point_goal:
      return "point_goal";
    case EnvName::bimodal_goal:
      return "bimodal_goal";
    case EnvName::expfam_gauss:
      return "expfam_gauss";
  }
  return "unknown";
}

EnvSpec EnvSpec::defaults(EnvName name) {
  EnvSpec s;
  s.name = name;
  if (name == EnvName::expfam_gauss) {
    s.state_dim = 1;
    s.action_dim = 1;
    s.horizon = 16;
  } else {
    s.state_dim = 2;
    s.action_dim = 2;
    s.horizon = 32;
  }
  return s;
}

void EnvSpec::validate() const {
  const EnvSpec d = defaults(name);
  if (horizon < 1) throw ConfigError("env.horizon must be >= 1");
  if (state_dim != d.state_dim || action_dim != d.action_dim) {
    throw ConfigError("env dimensions do not match task " + to_string(name));
  }
  if (!(dynamics_noise >= 0.0)) throw ConfigError("env.dynamics_noise must be non-negative");
}

Env::Env(EnvSpec spec) : spec_(spec) {
  spec_.validate();
  const double bound = spec_.name == EnvName::expfam_gauss ? kExpfamActionBound : 1.0;
  low_ = Vec::Constant(spec_.action_dim, -bound);
  high_ = Vec::Constant(spec_.action_dim, bound);
}

Env make_env(const EnvSpec& spec) { return Env(spec); }

Vec Env::reset(EpisodeContext& ctx, Rng& rng) const {
  switch (spec_.name) {
    case EnvName::point_goal:
      ctx.goal_ = goal_vec(1.0, 1.0);
      break;
    case EnvName::bimodal_goal:
      ctx.goal_ = rng.uniform() < 0.5 ? goal_vec(1.0, 1.0) : goal_vec(1.0, -1.0);
      break;
    case EnvName::expfam_gauss:
      ctx.goal_ = Vec::Constant(1, kExpfamTarget);
      return rng.normal_vec(1);
  }
  return goal_vec(-1.0, -1.0) + 0.1 * rng.normal_vec(2);
}

Vec Env::clip_action(const Vec& a) const { return a.cwiseMax(low_).cwiseMin(high_); }

Vec Env::step(const Vec& s, const Vec& a, Rng& rng) const {
  if (s.size() != spec_.state_dim || a.size() != spec_.action_dim) {
    throw ShapeError("Env::step: dimension mismatch");
  }
  if (!a.allFinite()) throw NumericError("Env::step: non-finite action");
  const Vec ac = clip_action(a);
  const Vec xi = rng.normal_vec(spec_.state_dim);
  if (is_goal_task(spec_.name)) return s + 0.1 * ac + spec_.dynamics_noise * xi;
  return ac + spec_.dynamics_noise * xi;
}

double TrueCost::operator()(const EpisodeContext& ctx, const Vec& s) const {
  if (is_goal_task(name_)) return (s - ctx.goal_).norm();
  const double d = s(0) - kExpfamTarget;
  return 0.5 * d * d;
}

double TrueCost::of_state(const Vec& s) const {
  if (name_ == EnvName::bimodal_goal) {
    throw ArgumentError("bimodal_goal cost depends on the hidden goal");
  }
  if (name_ == EnvName::point_goal) return (s - goal_vec(1.0, 1.0)).norm();
  const double d = s(0) - kExpfamTarget;
  return 0.5 * d * d;
}

GaussianPolicy::GaussianPolicy(nn::MlpParams net, Vec ls, Vec lo, Vec hi)
    : mean_net(std::move(net)), log_std(std::move(ls)), action_low(std::move(lo)),
      action_high(std::move(hi)) {
  if (mean_net.output_dim() != log_std.size() || log_std.size() != action_low.size() ||
      action_low.size() != action_high.size()) {
    throw ShapeError("GaussianPolicy: inconsistent action dimensions");
  }
  if (!log_std.allFinite()) throw ArgumentError("GaussianPolicy: log_std must be finite");
}

Vec GaussianPolicy::mean(const Vec& s) const { return nn::forward(mean_net, s); }

Mat GaussianPolicy::mean_batch(const Mat& states) const {
  return nn::forward_batch(mean_net, states, {});
}

ActionSample GaussianPolicy::act(const Vec& s, Rng& rng) {
  ActionSample out;
  out.raw = mean(s) + (log_std.array().exp() * rng.normal_vec(log_std.size()).array()).matrix();
  if (!out.raw.allFinite()) throw NumericError("policy produced a non-finite action");
  out.action = out.raw.cwiseMax(action_low).cwiseMin(action_high);
  return out;
}

Vec GaussianPolicy::log_prob(const Mat& states, const Mat& raw) const {
  const Mat mu = mean_batch(states);
  const Eigen::ArrayXd inv_var = (-2.0 * log_std.array()).exp();
  const double log_norm =
      -log_std.sum() - 0.5 * static_cast<double>(log_std.size()) * std::log(2.0 * std::numbers::pi);
  Vec out(states.cols());
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    const Eigen::ArrayXd z = (raw.col(j) - mu.col(j)).array();
    out(j) = log_norm - 0.5 * (z.square() * inv_var).sum();
  }
  return out;
}

GaussianPolicy make_policy(const Env& env, const PolicyInit& init, std::uint64_t seed) {
  std::vector<int> sizes{env.state_dim()};
  sizes.insert(sizes.end(), init.hidden.begin(), init.hidden.end());
  sizes.push_back(env.action_dim());
  nn::MlpParams net = nn::init_params(sizes, 0, nn::Activation::relu, seed);
  net.weights.back() *= init.output_scale;
  return GaussianPolicy(std::move(net), Vec::Constant(env.action_dim(), std::log(init.init_std)),
                        env.action_low(), env.action_high());
}

void save_policy(const std::filesystem::path& path, const GaussianPolicy& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArgumentError("cannot open for writing: " + path.string());
  io::write_magic(os, kPolicyMagic);
  nn::write_params(os, p.mean_net);
  io::write_pod(os, static_cast<std::uint32_t>(p.log_std.size()));
  io::write_doubles(os, p.log_std.data(), static_cast<std::size_t>(p.log_std.size()));
  io::write_doubles(os, p.action_low.data(), static_cast<std::size_t>(p.action_low.size()));
  io::write_doubles(os, p.action_high.data(), static_cast<std::size_t>(p.action_high.size()));
}

GaussianPolicy load_policy(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("cannot open policy checkpoint: " + path.string());
  io::expect_magic(is, kPolicyMagic);
  nn::MlpParams net = nn::read_params(is);
  const auto m = static_cast<Eigen::Index>(io::read_pod<std::uint32_t>(is));
  if (m != net.output_dim()) throw ArgumentError("policy checkpoint: action dimension mismatch");
  Vec ls(m), lo(m), hi(m);
  io::read_doubles(is, ls.data(), static_cast<std::size_t>(m));
  io::read_doubles(is, lo.data(), static_cast<std::size_t>(m));
  io::read_doubles(is, hi.data(), static_cast<std::size_t>(m));
  return GaussianPolicy(std::move(net), std::move(ls), std::move(lo), std::move(hi));
}

ExpertPolicy::ExpertPolicy(const Env& env, double log_std)
    : spec_(env.spec()), low_(env.action_low()), high_(env.action_high()),
      std_(std::exp(log_std)) {}

void ExpertPolicy::begin_episode(const EpisodeContext& ctx, Rng&) { goal_ = ctx.goal_; }

ActionSample ExpertPolicy::act(const Vec& s, Rng& rng) {
  Vec target;
  if (is_goal_task(spec_.name)) {
    if (goal_.size() != s.size()) throw ArgumentError("ExpertPolicy: begin_episode was not called");
    target = (2.0 * (goal_ - s)).cwiseMax(low_).cwiseMin(high_);
  } else {
    target = Vec::Constant(spec_.action_dim, kExpfamTarget);
  }
  ActionSample out;
  out.raw = target + std_ * rng.normal_vec(target.size());
  out.action = out.raw.cwiseMax(low_).cwiseMin(high_);
  return out;
}

GaussianPolicy expert_gaussian_policy(const Env& env, double log_std) {
  const int d = env.state_dim();
  const int m = env.action_dim();
  nn::MlpParams net;
  net.activation = nn::Activation::identity;
  switch (env.spec().name) {
    case EnvName::point_goal:
      // Unclipped form of a = 2 (goal - s); the box clip is applied on action.
      net.weights.push_back(-2.0 * Mat::Identity(m, d));
      net.biases.push_back(2.0 * goal_vec(1.0, 1.0));
      break;
    case EnvName::expfam_gauss:
      net.weights.push_back(Mat::Zero(m, d));
      net.biases.push_back(Vec::Constant(m, kExpfamTarget));
      break;
    case EnvName::bimodal_goal:
      throw ArgumentError("bimodal_goal expert depends on the hidden goal");
  }
  return GaussianPolicy(std::move(net), Vec::Constant(m, log_std), env.action_low(),
                        env.action_high());
}

UniformRandomActor::UniformRandomActor(const Env& env)
    : low_(env.action_low()), high_(env.action_high()) {}

ActionSample UniformRandomActor::act(const Vec&, Rng& rng) {
  ActionSample out;
  out.raw.resize(low_.size());
  for (Eigen::Index i = 0; i < low_.size(); ++i) {
    out.raw(i) = low_(i) + (high_(i) - low_(i)) * rng.uniform();
  }
  out.action = out.raw;
  return out;
}

Trajectory rollout(const Env& env, Actor& actor, Rng& rng) {
  const int H = env.horizon();
  Trajectory tr;
  tr.states.resize(env.state_dim(), H + 1);
  tr.actions.resize(env.action_dim(), H);
  tr.raw_actions.resize(env.action_dim(), H);
  tr.true_costs.resize(H);
  EpisodeContext ctx;
  const TrueCost truth(env.spec());
  tr.states.col(0) = env.reset(ctx, rng);
  actor.begin_episode(ctx, rng);
  for (int h = 0; h < H; ++h) {
    const Vec s = tr.states.col(h);
    const ActionSample a = actor.act(s, rng);
    if (!a.raw.allFinite() || !a.action.allFinite()) {
      throw NumericError("rollout: non-finite action at step " + std::to_string(h));
    }
    tr.actions.col(h) = a.action;
    tr.raw_actions.col(h) = a.raw;
    tr.states.col(h + 1) = env.step(s, a.action, rng);
    tr.true_costs(h) = truth(ctx, tr.states.col(h + 1));
  }
  return tr;
}

ObservedTrajectory learner_rollout(const Env& env, Actor& actor, Rng& rng) {
  return static_cast<ObservedTrajectory>(rollout(env, actor, rng));
}

double normalized_return(double v_pi, double v_expert, double v_random) {
  const double den = v_expert - v_random;
  if (!(std::abs(den) > 1e-12)) {
    throw ArgumentError("normalized_return: expert and random values coincide");
  }
  return (v_pi - v_random) / den;
}

Demonstrations Demonstrations::strip_actions() const {
  Demonstrations d;
  d.env = env;
  d.n_episodes = n_episodes;
  d.states = states;
  return d;
}

Demonstrations collect_demos(const Env& env, int n_episodes, bool with_actions, std::uint64_t seed,
                             double* mean_return) {
  if (n_episodes < 1) throw ArgumentError("collect_demos: need at least one episode");
  const int H = env.horizon();
  Demonstrations d;
  d.env = env.spec().name;
  d.n_episodes = n_episodes;
  d.states.resize(env.state_dim(), static_cast<Eigen::Index>(n_episodes) * H);
  if (with_actions) {
    d.pre_states.resize(env.state_dim(), d.states.cols());
    d.actions.resize(env.action_dim(), d.states.cols());
  }
  Rng rng(seed);
  ExpertPolicy expert(env);
  double total = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    const Trajectory tr = rollout(env, expert, rng);
    total -= tr.total_cost();
    d.states.middleCols(static_cast<Eigen::Index>(e) * H, H) = tr.states.rightCols(H);
    if (with_actions) {
      d.pre_states.middleCols(static_cast<Eigen::Index>(e) * H, H) = tr.states.leftCols(H);
      d.actions.middleCols(static_cast<Eigen::Index>(e) * H, H) = tr.actions;
    }
  }
  if (mean_return) *mean_return = total / n_episodes;
  return d;
}

void save_demos(const std::filesystem::path& path, const Demonstrations& d) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArgumentError("cannot open for writing: " + path.string());
  io::write_magic(os, kDemoMagic);
  io::write_string(os, to_string(d.env));
  io::write_pod(os, static_cast<std::uint32_t>(d.n_episodes));
  io::write_pod(os, static_cast<std::uint64_t>(d.states.cols()));
  io::write_pod(os, static_cast<std::uint32_t>(d.states.rows()));
  io::write_pod(os, static_cast<std::uint32_t>(d.has_actions() ? d.actions.rows() : 0));
  for (Eigen::Index j = 0; j < d.states.cols(); ++j) {
    io::write_doubles(os, d.states.col(j).data(), static_cast<std::size_t>(d.states.rows()));
    if (d.has_actions()) {
      io::write_doubles(os, d.actions.col(j).data(), static_cast<std::size_t>(d.actions.rows()));
      io::write_doubles(os, d.pre_states.col(j).data(), static_cast<std::size_t>(d.states.rows()));
    }
  }
}

Demonstrations load_demos(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("cannot open demonstrations file: " + path.string());
  io::expect_magic(is, kDemoMagic);
  Demonstrations d;
  d.env = parse_env_name(io::read_string(is));
  d.n_episodes = static_cast<int>(io::read_pod<std::uint32_t>(is));
  const auto count = static_cast<Eigen::Index>(io::read_pod<std::uint64_t>(is));
  const auto sd = static_cast<Eigen::Index>(io::read_pod<std::uint32_t>(is));
  const auto ad = static_cast<Eigen::Index>(io::read_pod<std::uint32_t>(is));
  d.states.resize(sd, count);
  if (ad > 0) {
    d.actions.resize(ad, count);
    d.pre_states.resize(sd, count);
  }
  for (Eigen::Index j = 0; j < count; ++j) {
    io::read_doubles(is, d.states.col(j).data(), static_cast<std::size_t>(sd));
    if (ad > 0) {
      io::read_doubles(is, d.actions.col(j).data(), static_cast<std::size_t>(ad));
      io::read_doubles(is, d.pre_states.col(j).data(), static_cast<std::size_t>(sd));
    }
  }
  return d;
}

}  // namespace smiling::envs
