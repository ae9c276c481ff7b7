#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "diagnostics.hpp"
#include "smiling/config.hpp"
#include "smiling/envs.hpp"
#include "smiling/rl.hpp"
#include "smiling/theory_probe.hpp"

namespace smiling::tools {

namespace fs = std::filesystem;
using config::ExperimentConfig;

namespace {

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

ExperimentConfig load_experiment(const std::string& path, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : config::load_config(path);
  for (const auto& o : overrides) config::apply_override(cfg, o);
  if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) cfg.output_dir = dir;
  cfg.finalize();
  return cfg;
}

envs::Demonstrations load_demos_checked(const ExperimentConfig& cfg) {
  if (!fs::exists(cfg.demos_path)) {
    throw ConfigError("demonstrations file not found: " + cfg.demos_path);
  }
  return envs::load_demos(cfg.demos_path);
}

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return m;
}

}  // namespace

std::string csv_header() {
  return "iter,env_steps,norm_return_current,norm_return_mixture,ds_value,ds_stderr,score_loss,"
         "rl_cost_mean,seed,config_digest\n";
}

std::string result_csv(const imitation::RunResult& r) {
  std::string s = csv_header();
  for (const auto& rec : r.records) {
    s += std::to_string(rec.iter) + "," + std::to_string(rec.env_steps) + "," +
         num(rec.norm_return_current) + "," + num(rec.norm_return_mixture) + "," +
         num(rec.ds.value) + "," + num(rec.ds.std_error) + "," + num(rec.score_loss) + "," +
         num(rec.rl_cost_mean) + "," + std::to_string(r.seed) + "," + r.config_digest + "\n";
  }
  return s;
}

std::string aggregate_csv(const std::vector<imitation::RunResult>& runs) {
  std::string s =
      "iter,n_seeds,env_steps_mean,norm_return_current_mean,norm_return_current_stderr,"
      "norm_return_mixture_mean,norm_return_mixture_stderr,ds_value_mean,ds_value_stderr,"
      "score_loss_mean,rl_cost_mean_mean,config_digest\n";
  if (runs.empty()) return s;
  std::size_t n_rows = runs.front().records.size();
  for (const auto& r : runs) n_rows = std::min(n_rows, r.records.size());
  for (std::size_t i = 0; i < n_rows; ++i) {
    std::vector<double> steps, cur, mix, ds, loss, rl;
    for (const auto& r : runs) {
      const auto& rec = r.records[i];
      steps.push_back(static_cast<double>(rec.env_steps));
      cur.push_back(rec.norm_return_current);
      mix.push_back(rec.norm_return_mixture);
      ds.push_back(rec.ds.value);
      loss.push_back(rec.score_loss);
      rl.push_back(rec.rl_cost_mean);
    }
    const auto c = mean_se(cur), m = mean_se(mix), d = mean_se(ds);
    s += std::to_string(runs.front().records[i].iter) + "," + std::to_string(runs.size()) + "," +
         num(mean_se(steps).mean) + "," + num(c.mean) + "," + num(c.se) + "," + num(m.mean) + "," +
         num(m.se) + "," + num(d.mean) + "," + num(d.se) + "," + num(mean_se(loss).mean) + "," +
         num(mean_se(rl).mean) + "," + runs.front().config_digest + "\n";
  }
  return s;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load_experiment(config_path, overrides);
    const envs::Demonstrations demos = load_demos_checked(cfg);
    fs::create_directories(cfg.output_dir);
    const std::string method = imitation::to_string(cfg.method);
    std::vector<imitation::RunResult> results;
    for (std::uint64_t seed : cfg.seeds) {
      cfg.smiling.seed = seed;
      const auto run = imitation::run_method(cfg.method, cfg.smiling, demos);
      const fs::path stem = fs::path(cfg.output_dir) / (method + "_seed" + std::to_string(seed));
      write_file(stem.string() + ".csv", result_csv(run.result));
      envs::save_policy(stem.string() + ".policy", run.final_policy);
      out << method << " seed " << seed << ": final normalized return "
          << num(run.result.final_norm_return) << " (" << std::fixed << std::setprecision(1)
          << run.result.wall_seconds << " s)\n"
          << std::defaultfloat;
      results.push_back(run.result);
    }
    write_file(fs::path(cfg.output_dir) / (method + "_aggregate.csv"), aggregate_csv(results));
    out << "config digest " << cfg.smiling.config_digest << ", wrote " << results.size()
        << " per-seed CSVs and 1 aggregate to " << cfg.output_dir << "\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_collect_demos(const std::string& config_path, const std::vector<std::string>& overrides,
                      std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_experiment(config_path, overrides);
    const envs::Env env(cfg.smiling.env);
    double mean_return = 0.0;
    const auto demos = envs::collect_demos(env, cfg.demo_episodes, cfg.demos_with_actions,
                                           cfg.demos_seed, &mean_return);
    const fs::path path(cfg.demos_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    envs::save_demos(path, demos);
    out << "wrote " << demos.states.cols() << " states";
    if (demos.has_actions()) out << " and " << demos.actions.cols() << " actions";
    out << " from " << cfg.demo_episodes << " " << envs::to_string(demos.env)
        << " expert episodes to " << cfg.demos_path << "\nexpert mean return " << num(mean_return)
        << "\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_diag(const std::string& suite, const std::string& config_path,
             const std::vector<std::string>& overrides, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<Check> checks;
    if (suite == "identities") {
      checks = identities_suite();
    } else if (suite == "oracles") {
      checks = oracles_suite();
    } else if (suite == "appendixB") {
      checks = shift_gap_suite();
    } else if (suite == "probe") {
      ExperimentConfig cfg = load_experiment(config_path, overrides);
      std::vector<theory_probe::ProbeCase> cases;
      for (double noise : {0.0, 0.01, 0.05}) {
        for (std::uint64_t seed : cfg.seeds) {
          theory_probe::ProbeCase c;
          c.cfg = cfg.smiling;
          c.cfg.env.dynamics_noise = noise;
          c.cfg.seed = seed;
          c.demo_episodes = cfg.demo_episodes;
          c.demo_seed = cfg.demos_seed;
          cases.push_back(c);
        }
      }
      const auto report = theory_probe::probe_second_order(cases);
      std::string csv = "dynamics_noise,demo_episodes,seed,gap,var_expert,var_pi,min_var,ds_value\n";
      for (const auto& r : report.rows) {
        csv += num(r.dynamics_noise) + "," + std::to_string(r.demo_episodes) + "," +
               std::to_string(r.seed) + "," + num(r.gap) + "," + num(r.var_expert) + "," +
               num(r.var_pi) + "," + num(r.min_var) + "," + num(r.ds_value) + "\n";
      }
      fs::create_directories(cfg.output_dir);
      write_file(fs::path(cfg.output_dir) / "probe.csv", csv);
      out << csv << "spearman(min_var, gap) = " << num(report.spearman_minvar_gap) << "\n";
      return static_cast<int>(kExitOk);
    } else {
      throw ConfigError("unknown diagnostic suite '" + suite + "'");
    }
    print_checks(out, suite, checks);
    return static_cast<int>(all_passed(checks) ? kExitOk : kExitDiagnostic);
  });
}

int cmd_eval(const std::string& config_path, const std::vector<std::string>& overrides,
             const std::string& policy_path, int episodes, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = load_experiment(config_path, overrides);
    if (episodes < 1) throw ConfigError("--episodes must be >= 1");
    if (!fs::exists(policy_path)) throw ConfigError("policy checkpoint not found: " + policy_path);
    envs::GaussianPolicy policy = envs::load_policy(policy_path);
    const envs::Env env(cfg.smiling.env);
    if (policy.mean_net.input_dim() != env.state_dim() ||
        policy.mean_net.output_dim() != env.action_dim()) {
      throw ConfigError("policy checkpoint does not match env.name");
    }
    Rng rng(cfg.seeds.front());
    const auto v = rl::policy_value(env, policy, episodes, rng);
    const auto ref = imitation::reference_values(env, cfg.smiling);
    out << "episodes " << episodes << "\nmean cost " << num(v.mean) << "\ncost variance "
        << num(v.variance) << (v.single_episode ? " (single episode)" : "")
        << "\nnormalized return " << num(envs::normalized_return(-v.mean, -ref.expert, -ref.random))
        << "\n";
    return static_cast<int>(kExitOk);
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Score-matching imitation learning experiments and diagnostics"};
  app.require_subcommand(1);
  app.footer(config::describe_keys() +
             "\nThe environment variable " + std::string(kOutputDirEnv) +
             " overrides output.dir.\nExit codes: 0 ok, 1 runtime failure, 2 config error, "
             "3 diagnostic failure.");

  std::string config_path, suite, policy_path;
  std::vector<std::string> overrides;
  int episodes = 100;

  auto* run = app.add_subcommand("run", "run the configured method once per seed");
  auto* collect = app.add_subcommand("collect-demos", "roll out the scripted expert and save demonstrations");
  auto* diag = app.add_subcommand("diag", "numerical diagnostics");
  auto* eval = app.add_subcommand("eval", "re-evaluate a saved policy under the true cost");
  diag->add_option("suite", suite, "identities | oracles | appendixB | probe")
      ->required()
      ->check(CLI::IsMember({"identities", "oracles", "appendixB", "probe"}));
  for (auto* sub : {run, collect, diag, eval}) {
    sub->add_option("-c,--config", config_path, "key = value config file");
    sub->add_option("overrides", overrides, "key=value overrides, applied after the file");
  }
  eval->add_option("-p,--policy", policy_path, "policy checkpoint")->required();
  eval->add_option("-n,--episodes", episodes, "evaluation episodes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? static_cast<int>(kExitOk) : static_cast<int>(kExitConfig);
  }

  if (run->parsed()) return cmd_run(config_path, overrides, out, err);
  if (collect->parsed()) return cmd_collect_demos(config_path, overrides, out, err);
  if (diag->parsed()) return cmd_diag(suite, config_path, overrides, out, err);
  return cmd_eval(config_path, overrides, policy_path, episodes, out, err);
}

}  // namespace smiling::tools
