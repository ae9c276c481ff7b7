#include "helpers.hpp"
#include "smiling/theory_probe.hpp"

using namespace smiling;
using namespace smiling::theory_probe;

TEST_CASE("spearman correlation") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> up{2, 4, 6, 8, 100};
  const std::vector<double> down{5, 4, 3, 2, 1};
  CHECK(spearman(x, up) == doctest::Approx(1.0));
  CHECK(spearman(x, down) == doctest::Approx(-1.0));
  const std::vector<double> ties{1, 1, 2, 2, 3};
  CHECK(spearman(ties, ties) == doctest::Approx(1.0));
  const std::vector<double> flat{3, 3, 3, 3, 3};
  CHECK(std::isnan(spearman(x, flat)));
  const std::vector<double> one{1};
  CHECK(std::isnan(spearman(one, one)));
  CHECK_THROWS_AS(spearman(x, one), ArgumentError);
}

TEST_CASE("a single case gives a single row") {
  ProbeCase c;
  c.cfg.env = envs::EnvSpec::defaults(envs::EnvName::expfam_gauss);
  c.cfg.env.horizon = 4;
  c.cfg.K = 1;
  c.cfg.expert_score.epochs = 2;
  c.cfg.expert_score.hidden = {8};
  c.cfg.learner_score.hidden = {8};
  c.cfg.learner_score.samples_per_update = 64;
  c.cfg.cost.n_mc = 2;
  c.cfg.rl.episodes_per_update = 2;
  c.cfg.rl.updates_per_iteration = 1;
  c.cfg.rl.guard_episodes = 2;
  c.cfg.policy.hidden = {4};
  c.cfg.learner_episodes = 2;
  c.cfg.eval_episodes = 2;
  c.cfg.reference_episodes = 4;
  c.cfg.ds_eval_states = 4;
  c.demo_episodes = 2;
  const std::vector<ProbeCase> cases{c};
  const auto report = probe_second_order(cases, 20);
  REQUIRE(report.rows.size() == 1);
  const auto& r = report.rows.front();
  CHECK(r.min_var == std::min(r.var_expert, r.var_pi));
  CHECK(r.demo_episodes == 2);
  CHECK(std::isnan(report.spearman_minvar_gap));
}
