#include <array>

#include "helpers.hpp"
#include "smiling/envs.hpp"
#include "smiling/rl.hpp"

using namespace smiling;
using namespace smiling::envs;
using smiling::testing::TempDir;
using smiling::testing::v2;

namespace {

Env make(EnvName name, double noise = 0.01, int horizon = 0) {
  EnvSpec s = EnvSpec::defaults(name);
  s.dynamics_noise = noise;
  if (horizon > 0) s.horizon = horizon;
  return Env(s);
}

class ConstantActor : public Actor {
 public:
  explicit ConstantActor(Vec a) : a_(std::move(a)) {}
  ActionSample act(const Vec&, Rng&) override { return {a_, a_}; }

 private:
  Vec a_;
};

// Two-component diagonal Gaussian mixture fitted by EM; returns the weights.
std::array<double, 2> mixture_weights(const Mat& x) {
  const Eigen::Index n = x.cols();
  std::array<Vec, 2> mu{x.col(0), x.col(n - 1)};
  std::array<Vec, 2> var{Vec::Ones(x.rows()), Vec::Ones(x.rows())};
  std::array<double, 2> w{0.5, 0.5};
  Mat r(2, n);
  for (int it = 0; it < 100; ++it) {
    for (Eigen::Index j = 0; j < n; ++j) {
      std::array<double, 2> lp{};
      for (int k = 0; k < 2; ++k) {
        lp[k] = std::log(w[k]) - 0.5 * ((x.col(j) - mu[k]).array().square() / var[k].array() +
                                        var[k].array().log())
                                           .sum();
      }
      const double m = std::max(lp[0], lp[1]);
      const double z = std::exp(lp[0] - m) + std::exp(lp[1] - m);
      r(0, j) = std::exp(lp[0] - m) / z;
      r(1, j) = std::exp(lp[1] - m) / z;
    }
    for (int k = 0; k < 2; ++k) {
      const double nk = r.row(k).sum();
      w[k] = nk / static_cast<double>(n);
      mu[k] = x * r.row(k).transpose() / nk;
      var[k] = ((x.colwise() - mu[k]).array().square().matrix() * r.row(k).transpose() / nk).array() + 1e-6;
    }
  }
  return w;
}

}  // namespace

TEST_CASE("environment names") {
  CHECK(parse_env_name("point_goal") == EnvName::point_goal);
  CHECK(to_string(EnvName::expfam_gauss) == "expfam_gauss");
  CHECK_THROWS_AS(parse_env_name("cartpole"), ConfigError);
  EnvSpec bad = EnvSpec::defaults(EnvName::point_goal);
  bad.horizon = 0;
  CHECK_THROWS_AS(Env{bad}, ConfigError);
}

TEST_CASE("point_goal step without noise") {
  const Env env = make(EnvName::point_goal, 0.0);
  Rng rng(0);
  const Vec s = env.step(v2(0, 0), v2(1, 1), rng);
  CHECK(s(0) == doctest::Approx(0.1));
  CHECK(s(1) == doctest::Approx(0.1));
  const Vec clipped = env.step(v2(0, 0), v2(5, -5), rng);
  CHECK(clipped(0) == doctest::Approx(0.1));
  CHECK(clipped(1) == doctest::Approx(-0.1));
  CHECK_THROWS_AS(env.step(v2(0, 0), v2(std::nan(""), 0), rng), NumericError);
}

TEST_CASE("bimodal goals split evenly and the expert visits both modes") {
  const Env env = make(EnvName::bimodal_goal);
  ExpertPolicy expert(env);
  Rng rng(1);
  constexpr int n = 10000;
  int upper = 0;
  Mat states(2, n * 8);
  for (int e = 0; e < n; ++e) {
    const Trajectory tr = rollout(env, expert, rng);
    upper += tr.states(1, env.horizon()) > 0.0;
    states.middleCols(e * 8, 8) = tr.states.rightCols(8);
  }
  CHECK(upper / static_cast<double>(n) > 0.47);
  CHECK(upper / static_cast<double>(n) < 0.53);
  const auto w = mixture_weights(states);
  CHECK(w[0] >= 0.3);
  CHECK(w[1] >= 0.3);
}

TEST_CASE("expfam expert states concentrate at the target") {
  const Env env = make(EnvName::expfam_gauss);
  const auto d = collect_demos(env, 50, false, 3);
  CHECK(std::abs(d.states.mean() - kExpfamTarget) < 0.05);
}

TEST_CASE("noise-free point_goal expert reaches the goal") {
  const Env env = make(EnvName::point_goal, 0.0);
  ExpertPolicy expert(env, -50.0);
  Rng rng(2);
  EpisodeContext ctx;
  env.reset(ctx, rng);
  expert.begin_episode(ctx, rng);
  Vec s = v2(-1, -1);
  for (int h = 0; h < env.horizon(); ++h) s = env.step(s, expert.act(s, rng).action, rng);
  CHECK((s - v2(1, 1)).norm() < 0.05);
}

TEST_CASE("expert beats the zero-action policy by a factor of three") {
  const Env env = make(EnvName::point_goal);
  ExpertPolicy expert(env);
  ConstantActor zero(v2(0, 0));
  Rng rng(3);
  const double ve = rl::policy_value(env, expert, 1000, rng).mean;
  const double vz = rl::policy_value(env, zero, 1000, rng).mean;
  CHECK(vz / ve >= 3.0);
}

TEST_CASE("near-deterministic expert is reproducible") {
  const Env env = make(EnvName::point_goal);
  ExpertPolicy a(env, -50.0), b(env, -50.0);
  Rng ra(4), rb(4);
  CHECK(rollout(env, a, ra).states == rollout(env, b, rb).states);
}

TEST_CASE("expert written as a Gaussian policy matches the scripted mean") {
  const Env env = make(EnvName::point_goal);
  const GaussianPolicy p = expert_gaussian_policy(env);
  CHECK((p.mean(v2(0.5, 0.8)) - v2(1.0, 0.4)).norm() < 1e-12);
  CHECK(p.log_std(0) == doctest::Approx(std::log(0.05)));
  CHECK_THROWS(expert_gaussian_policy(make(EnvName::bimodal_goal)));
}

TEST_CASE("rollout shapes and reproducibility") {
  const Env env = make(EnvName::point_goal, 0.01, 1);
  GaussianPolicy p = make_policy(env, PolicyInit{}, 0);
  Rng rng(5);
  const Trajectory tr = rollout(env, p, rng);
  CHECK(tr.states.cols() == 2);
  CHECK(tr.actions.cols() == 1);
  CHECK(tr.true_costs.size() == 1);

  const Env full = make(EnvName::point_goal);
  Rng a(6), b(6);
  const Trajectory ta = rollout(full, p, a);
  CHECK(ta.states.cols() == full.horizon() + 1);
  CHECK(ta.states == rollout(full, p, b).states);
  Rng c(6);
  CHECK(learner_rollout(full, p, c).states == ta.states);
}

TEST_CASE("policy actions stay inside the box") {
  const Env env = make(EnvName::point_goal);
  GaussianPolicy p = make_policy(env, PolicyInit{{8}, 5.0, 0.01}, 1);
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto a = p.act(rng.normal_vec(2), rng);
    CHECK(a.action.maxCoeff() <= 1.0);
    CHECK(a.action.minCoeff() >= -1.0);
  }
}

TEST_CASE("expert state distribution stays near the start-goal segment") {
  const Env env = make(EnvName::point_goal);
  ExpertPolicy expert(env);
  Rng rng(8);
  long inside = 0, total = 0;
  for (int e = 0; e < 10000; ++e) {
    const Trajectory tr = rollout(env, expert, rng);
    for (Eigen::Index h = 1; h < tr.states.cols(); ++h) {
      inside += tr.states.col(h).cwiseAbs().maxCoeff() <= 1.2;
      ++total;
    }
  }
  CHECK(inside >= 0.95 * total);
}

TEST_CASE("normalized return") {
  CHECK(normalized_return(-10, -10, -50) == 1.0);
  CHECK(normalized_return(-50, -10, -50) == 0.0);
  CHECK(normalized_return(-30, -10, -50) == 0.5);
  CHECK_THROWS_AS(normalized_return(1, 2, 2), ArgumentError);
}

TEST_CASE("demonstrations count, determinism and files") {
  const Env env = make(EnvName::point_goal);
  const auto d = collect_demos(env, 5, false, 11);
  CHECK(d.states.cols() == 160);
  CHECK_FALSE(d.has_actions());
  const auto da = collect_demos(env, 5, true, 11);
  CHECK(da.actions.cols() == 160);
  CHECK(da.states == d.states);
  CHECK(da.strip_actions().pre_states.size() == 0);

  TempDir dir("demos");
  save_demos(dir.file("d.bin"), da);
  const auto back = load_demos(dir.file("d.bin"));
  CHECK(back.env == EnvName::point_goal);
  CHECK(back.n_episodes == 5);
  CHECK(back.states == da.states);
  CHECK(back.actions == da.actions);
  CHECK(back.pre_states == da.pre_states);
  CHECK_THROWS(load_demos(dir.file("missing.bin")));
}

TEST_CASE("policy checkpoints round-trip") {
  const Env env = make(EnvName::expfam_gauss);
  const GaussianPolicy p = make_policy(env, PolicyInit{}, 3);
  TempDir dir("policy");
  save_policy(dir.file("p.bin"), p);
  const GaussianPolicy q = load_policy(dir.file("p.bin"));
  CHECK(q.mean_net == p.mean_net);
  CHECK(q.log_std == p.log_std);
  CHECK(q.action_high == p.action_high);
}

TEST_CASE("true cost of the reached state") {
  const TrueCost point(EnvSpec::defaults(EnvName::point_goal));
  CHECK(point.of_state(v2(1, 1)) == 0.0);
  CHECK(point.of_state(v2(-2, 5)) == doctest::Approx(5.0));
  const TrueCost ef(EnvSpec::defaults(EnvName::expfam_gauss));
  CHECK(ef.of_state(Vec::Constant(1, 2.5)) == doctest::Approx(0.5));
  CHECK_THROWS(TrueCost(EnvSpec::defaults(EnvName::bimodal_goal)).of_state(v2(0, 0)));
}
