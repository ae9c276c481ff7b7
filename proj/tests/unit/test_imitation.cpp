#include "helpers.hpp"
#include "smiling/imitation.hpp"

using namespace smiling;
using namespace smiling::imitation;
using envs::EnvName;
using envs::EnvSpec;

namespace {

SmilingConfig tiny(EnvName name) {
  SmilingConfig c;
  c.env = EnvSpec::defaults(name);
  c.K = 2;
  c.expert_score.epochs = 5;
  c.expert_score.hidden = {16};
  c.expert_score.samples_per_update = 512;
  c.expert_score.eval_draws = 128;
  c.learner_score = c.expert_score;
  c.learner_score.epochs = 1;
  c.cost.n_mc = 4;
  c.rl.episodes_per_update = 4;
  c.rl.updates_per_iteration = 2;
  c.rl.guard_episodes = 4;
  c.rl.value_hidden = {8};
  c.policy.hidden = {8};
  c.disc.steps = 5;
  c.bc.epochs = 4;
  c.bc.checkpoints = 2;
  c.learner_episodes = 2;
  c.eval_episodes = 5;
  c.reference_episodes = 10;
  c.ds_eval_states = 16;
  return c;
}

envs::GaussianPolicy constant_policy(const envs::Env& env, double value) {
  auto p = envs::expert_gaussian_policy(env, -60.0);
  p.mean_net.biases.back().setConstant(value);
  return p;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_method("dac_lite") == Method::dac_lite);
  CHECK(to_string(Method::bc) == "bc");
  CHECK_THROWS_AS(parse_method("gail"), ConfigError);
}

TEST_CASE("single-member mixture is that member") {
  const envs::Env env(EnvSpec::defaults(EnvName::expfam_gauss));
  auto p = constant_policy(env, 0.7);
  auto m = mixture_policy({p});
  Rng a(0), b(0);
  CHECK(envs::rollout(env, m, a).states == envs::rollout(env, p, b).states);
  CHECK_THROWS_AS(mixture_policy({}), ArgumentError);
}

TEST_CASE("two-member mixture picks each member half the time and holds it") {
  EnvSpec spec = EnvSpec::defaults(EnvName::expfam_gauss);
  spec.dynamics_noise = 0.0;
  const envs::Env env(spec);
  auto m = mixture_policy({constant_policy(env, 1.0), constant_policy(env, -1.0)});
  Rng rng(1);
  constexpr int n = 10000;
  int first = 0;
  for (int e = 0; e < n; ++e) {
    const auto tr = envs::rollout(env, m, rng);
    const double a0 = tr.actions(0, 0);
    CHECK((tr.actions.array() == a0).all());
    CHECK(a0 == doctest::Approx(m.last_choice() == 0 ? 1.0 : -1.0));
    first += m.last_choice() == 0;
  }
  CHECK(first / static_cast<double>(n) > 0.47);
  CHECK(first / static_cast<double>(n) < 0.53);
}

TEST_CASE("untrained discriminator charges nothing") {
  const auto d = make_discriminator(2, scorematch::ScoreTrainConfig{}, 3);
  Rng rng(2);
  Mat x(2, 50);
  rng.fill_normal(x);
  CHECK(d.cost(x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("discriminator learns to separate shifted samples") {
  auto d = make_discriminator(1, scorematch::ScoreTrainConfig{.hidden = {16}}, 4);
  Rng rng(3);
  Mat expert(1, 500), learner(1, 500);
  rng.fill_normal(expert);
  rng.fill_normal(learner);
  learner.array() += 3.0;
  scorematch::StateBuffer buf(1);
  buf.append(learner);
  nn::AdamState opt = nn::make_adam(d.net, 1e-2);
  DiscriminatorConfig cfg;
  cfg.steps = 300;
  const double loss = train_discriminator(d, expert, buf, cfg, opt, rng);
  CHECK(loss < 0.45);
  CHECK(d.cost(Mat::Constant(1, 1, 3.0))(0) > d.cost(Mat::Constant(1, 1, 0.0))(0));
  CHECK_THROWS_AS(train_discriminator(d, Mat(1, 0), buf, cfg, opt, rng), ArgumentError);
}

TEST_CASE("trajectory features") {
  envs::ObservedTrajectory tr;
  tr.states = Mat{{0.0, 1.0, 2.0}};
  tr.actions = Mat{{10.0, 20.0}};
  tr.raw_actions = tr.actions;
  CHECK(trajectory_features(tr, false) == Mat{{1.0, 2.0}});
  CHECK(trajectory_features(tr, true) == Mat{{0.0, 1.0}, {10.0, 20.0}});
}

TEST_CASE("demonstration features") {
  const envs::Env env(EnvSpec::defaults(EnvName::point_goal));
  const auto with = envs::collect_demos(env, 2, true, 5);
  CHECK(demo_features(with, false) == with.states);
  const Mat f = demo_features(with, true);
  CHECK(f.rows() == 4);
  CHECK(f.topRows(2) == with.pre_states);
  CHECK_THROWS_AS(demo_features(with.strip_actions(), true), ConfigError);
}

TEST_CASE("behavior cloning needs actions") {
  const auto cfg = tiny(EnvName::point_goal);
  const envs::Env env(cfg.env);
  const auto demos = envs::collect_demos(env, 2, false, 6);
  try {
    bc_run(cfg, demos);
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("with_actions") != std::string::npos);
  }
}

TEST_CASE("behavior cloning without training is no better than random") {
  auto cfg = tiny(EnvName::point_goal);
  cfg.bc.epochs = 0;
  cfg.eval_episodes = 50;
  cfg.reference_episodes = 100;
  const envs::Env env(cfg.env);
  const auto out = bc_run(cfg, envs::collect_demos(env, 5, true, 7));
  CHECK(out.result.final_norm_return <= 0.2);
  CHECK(out.result.records.size() == 1);
}

TEST_CASE("runs are reproducible for a fixed seed") {
  for (Method m : {Method::smiling, Method::dac_lite, Method::bc}) {
    CAPTURE(to_string(m));
    auto cfg = tiny(EnvName::point_goal);
    const envs::Env env(cfg.env);
    const auto demos = envs::collect_demos(env, 2, m == Method::bc, 8);
    const auto a = run_method(m, cfg, demos).result;
    const auto b = run_method(m, cfg, demos).result;
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      CHECK(a.records[i].norm_return_current == b.records[i].norm_return_current);
      CHECK(a.records[i].ds.value == b.records[i].ds.value);
      CHECK(a.records[i].env_steps == b.records[i].env_steps);
    }
    CHECK(a.expert_value == b.expert_value);
  }
}

TEST_CASE("outer loop records one row per iteration and counts interaction") {
  auto cfg = tiny(EnvName::expfam_gauss);
  const envs::Env env(cfg.env);
  const auto out = smiling_run(cfg, envs::collect_demos(env, 2, false, 9));
  REQUIRE(out.result.records.size() == 2);
  const long per_iter = (cfg.learner_episodes + cfg.rl.episodes_per_update * cfg.rl.updates_per_iteration +
                         cfg.rl.guard_episodes) *
                        static_cast<long>(env.horizon());
  CHECK(out.result.records[0].env_steps == per_iter);
  CHECK(out.result.records[1].env_steps == 2 * per_iter);
  CHECK(out.mixture.members().size() == 2);
  CHECK(out.result.expert_value < out.result.random_value);
}

TEST_CASE("mismatched demonstrations are configuration errors") {
  auto cfg = tiny(EnvName::point_goal);
  const envs::Env other(EnvSpec::defaults(EnvName::expfam_gauss));
  CHECK_THROWS_AS(smiling_run(cfg, envs::collect_demos(other, 1, false, 1)), ConfigError);
  cfg.state_action_mode = true;
  const envs::Env env(cfg.env);
  CHECK_THROWS_AS(smiling_run(cfg, envs::collect_demos(env, 1, false, 1)), ConfigError);
  cfg.K = 0;
  CHECK_THROWS_AS(smiling_run(cfg, envs::collect_demos(env, 1, true, 1)), ConfigError);
}
