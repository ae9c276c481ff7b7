#include "smiling/config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace smiling::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + what);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<long long> to_int_list(const std::string& key, std::string v) {
  if (!v.empty() && v.front() == '[') v.erase(0, 1);
  if (!v.empty() && v.back() == ']') v.pop_back();
  std::vector<long long> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_int(key, item));
  }
  return out;
}

std::string fmt_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename T>
std::string fmt_list(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(xs[i]);
  }
  return s;
}

std::vector<int> positive_sizes(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (long long x : to_int_list(key, v)) {
    if (x < 1) throw ConfigError("config key '" + key + "': sizes must be positive");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

using EC = ExperimentConfig;

#define SMILING_DOUBLE(KEY, FIELD, HELP)                                                   \
  KeyInfo {                                                                                \
    KEY, HELP, [](const EC& c) { return fmt_double(c.FIELD); },                            \
        [](EC& c, const std::string& v) { c.FIELD = to_double(KEY, v); }                   \
  }
#define SMILING_INT(KEY, FIELD, HELP)                                                      \
  KeyInfo {                                                                                \
    KEY, HELP, [](const EC& c) { return std::to_string(c.FIELD); },                        \
        [](EC& c, const std::string& v) { c.FIELD = static_cast<decltype(c.FIELD)>(to_int(KEY, v)); } \
  }
#define SMILING_BOOL(KEY, FIELD, HELP)                                                     \
  KeyInfo {                                                                                \
    KEY, HELP, [](const EC& c) { return fmt_bool(c.FIELD); },                              \
        [](EC& c, const std::string& v) { c.FIELD = to_bool(KEY, v); }                     \
  }
#define SMILING_SIZES(KEY, FIELD, HELP)                                                    \
  KeyInfo {                                                                                \
    KEY, HELP, [](const EC& c) { return fmt_list(c.FIELD); },                              \
        [](EC& c, const std::string& v) { c.FIELD = positive_sizes(KEY, v); }              \
  }

std::vector<KeyInfo> build_registry() {
  std::vector<KeyInfo> r = {
      KeyInfo{"run.method", "smiling | bc | dac_lite",
              [](const EC& c) { return imitation::to_string(c.method); },
              [](EC& c, const std::string& v) { c.method = imitation::parse_method(v); }},
      KeyInfo{"run.seeds", "comma-separated seeds, one run each",
              [](const EC& c) { return fmt_list(c.seeds); },
              [](EC& c, const std::string& v) {
                c.seeds.clear();
                for (long long s : to_int_list("run.seeds", v)) {
                  if (s < 0) throw ConfigError("config key 'run.seeds': seeds must be non-negative");
                  c.seeds.push_back(static_cast<std::uint64_t>(s));
                }
                if (c.seeds.empty()) throw ConfigError("config key 'run.seeds': no seeds given");
              }},
      SMILING_INT("run.K", smiling.K, "outer iterations"),
      SMILING_INT("run.learner_episodes", smiling.learner_episodes,
                  "rollouts appended to the state buffer per iteration"),
      SMILING_INT("run.eval_episodes", smiling.eval_episodes, "evaluation rollouts per metric"),
      SMILING_INT("run.reference_episodes", smiling.reference_episodes,
                  "rollouts for the expert and random reference values"),
      SMILING_INT("run.ds_eval_states", smiling.ds_eval_states,
                  "states behind the divergence column"),
      SMILING_BOOL("run.state_action_mode", smiling.state_action_mode,
                   "append actions to states for the score models"),
      SMILING_BOOL("run.linear_mode", smiling.linear_mode,
                   "identity activations in score and discriminator nets"),
      KeyInfo{"env.name", "point_goal | bimodal_goal | expfam_gauss",
              [](const EC& c) { return envs::to_string(c.smiling.env.name); },
              [](EC& c, const std::string& v) { c.smiling.env.name = envs::parse_env_name(v); }},
      SMILING_INT("env.horizon", horizon_override, "episode length; 0 keeps the task default"),
      SMILING_DOUBLE("env.dynamics_noise", smiling.env.dynamics_noise, "state noise scale"),
      SMILING_DOUBLE("diffusion.T", smiling.schedule.horizon, "diffusion horizon"),
      SMILING_INT("diffusion.n_steps", smiling.schedule.n_steps, "time grid size"),
      SMILING_DOUBLE("diffusion.t_min", smiling.schedule.t_min, "smallest diffusion time"),
      SMILING_INT("diffusion.euler_steps", euler_steps, "reverse sampler steps (diagnostics)"),
      SMILING_INT("score.expert_epochs", smiling.expert_score.epochs,
                  "expert score pretraining epochs"),
      SMILING_INT("score.learner_epochs", smiling.learner_score.epochs,
                  "learner score epochs per iteration"),
      KeyInfo{"score.batch_size", "score minibatch size",
              [](const EC& c) { return std::to_string(c.smiling.learner_score.batch_size); },
              [](EC& c, const std::string& v) {
                c.smiling.expert_score.batch_size = c.smiling.learner_score.batch_size =
                    static_cast<int>(to_int("score.batch_size", v));
              }},
      KeyInfo{"score.mc_pairs", "(t, eps) draws per state per step",
              [](const EC& c) { return std::to_string(c.smiling.learner_score.mc_pairs_per_state); },
              [](EC& c, const std::string& v) {
                c.smiling.expert_score.mc_pairs_per_state =
                    c.smiling.learner_score.mc_pairs_per_state =
                        static_cast<int>(to_int("score.mc_pairs", v));
              }},
      KeyInfo{"score.lr", "score learning rate",
              [](const EC& c) { return fmt_double(c.smiling.learner_score.learning_rate); },
              [](EC& c, const std::string& v) {
                c.smiling.expert_score.learning_rate = c.smiling.learner_score.learning_rate =
                    to_double("score.lr", v);
              }},
      KeyInfo{"score.final_lr_fraction", "cosine decay floor as a fraction of score.lr",
              [](const EC& c) { return fmt_double(c.smiling.learner_score.final_lr_fraction); },
              [](EC& c, const std::string& v) {
                c.smiling.expert_score.final_lr_fraction =
                    c.smiling.learner_score.final_lr_fraction = to_double("score.final_lr_fraction", v);
              }},
      SMILING_INT("score.samples_per_update", smiling.learner_score.samples_per_update,
                  "buffer subsample per learner update"),
      KeyInfo{"score.hidden", "hidden layer sizes of score and discriminator nets",
              [](const EC& c) { return fmt_list(c.smiling.learner_score.hidden); },
              [](EC& c, const std::string& v) {
                c.smiling.expert_score.hidden = c.smiling.learner_score.hidden =
                    positive_sizes("score.hidden", v);
              }},
      KeyInfo{"score.embedding_dim", "time embedding width",
              [](const EC& c) { return std::to_string(c.smiling.learner_score.embedding_dim); },
              [](EC& c, const std::string& v) {
                c.smiling.expert_score.embedding_dim = c.smiling.learner_score.embedding_dim =
                    static_cast<int>(to_int("score.embedding_dim", v));
              }},
      SMILING_INT("cost.n_mc", smiling.cost.n_mc, "(t, eps) draws per cost evaluation"),
      SMILING_BOOL("cost.normalize", smiling.cost.normalize, "batch-normalize costs before RL"),
      SMILING_DOUBLE("cost.norm_std", smiling.cost.norm_std, "normalized cost standard deviation"),
      SMILING_INT("rl.episodes_per_update", smiling.rl.episodes_per_update,
                  "episodes per policy-gradient step"),
      SMILING_INT("rl.updates_per_iteration", smiling.rl.updates_per_iteration,
                  "policy-gradient steps per outer iteration"),
      SMILING_DOUBLE("rl.policy_lr", smiling.rl.policy_lr, "policy learning rate"),
      SMILING_DOUBLE("rl.value_lr", smiling.rl.value_lr, "baseline learning rate"),
      SMILING_DOUBLE("rl.entropy_bonus", smiling.rl.entropy_bonus, "entropy bonus weight"),
      SMILING_BOOL("rl.warm_start", smiling.rl.warm_start, "start each iteration from the last policy"),
      SMILING_SIZES("rl.value_hidden", smiling.rl.value_hidden, "baseline hidden sizes"),
      SMILING_INT("rl.value_steps", smiling.rl.value_steps, "baseline regression steps per update"),
      SMILING_INT("rl.guard_episodes", smiling.rl.guard_episodes,
                  "episodes for the regression guard; 0 disables it"),
      SMILING_SIZES("policy.hidden", smiling.policy.hidden, "policy mean network hidden sizes"),
      SMILING_DOUBLE("policy.init_std", smiling.policy.init_std, "initial action standard deviation"),
      SMILING_INT("disc.steps", smiling.disc.steps, "discriminator steps per iteration"),
      SMILING_INT("disc.batch_size", smiling.disc.batch_size, "discriminator half-batch size"),
      SMILING_DOUBLE("disc.lr", smiling.disc.learning_rate, "discriminator learning rate"),
      SMILING_INT("bc.epochs", smiling.bc.epochs, "behavior cloning epochs"),
      SMILING_INT("bc.batch_size", smiling.bc.batch_size, "behavior cloning minibatch size"),
      SMILING_DOUBLE("bc.lr", smiling.bc.learning_rate, "behavior cloning learning rate"),
      SMILING_INT("bc.checkpoints", smiling.bc.checkpoints, "evaluated behavior cloning checkpoints"),
      KeyInfo{"demos.path", "demonstration file",
              [](const EC& c) { return c.demos_path; },
              [](EC& c, const std::string& v) { c.demos_path = v; }},
      SMILING_INT("demos.episodes", demo_episodes, "expert episodes collected by collect-demos"),
      SMILING_BOOL("demos.with_actions", demos_with_actions, "record actions in demonstrations"),
      SMILING_INT("demos.seed", demos_seed, "seed for collect-demos"),
      KeyInfo{"output.dir", "directory for CSV output",
              [](const EC& c) { return c.output_dir; },
              [](EC& c, const std::string& v) { c.output_dir = v; }},
  };
  return r;
}

#undef SMILING_DOUBLE
#undef SMILING_INT
#undef SMILING_BOOL
#undef SMILING_SIZES

}  // namespace

void ExperimentConfig::finalize() {
  const envs::EnvSpec d = envs::EnvSpec::defaults(smiling.env.name);
  smiling.env.state_dim = d.state_dim;
  smiling.env.action_dim = d.action_dim;
  smiling.env.horizon = horizon_override > 0 ? horizon_override : d.horizon;
  if (horizon_override < 0) throw ConfigError("config key 'env.horizon': must be >= 0");
  if (demo_episodes < 1) throw ConfigError("config key 'demos.episodes': must be >= 1");
  if (euler_steps < 10) throw ConfigError("config key 'diffusion.euler_steps': must be >= 10");
  smiling.rl.normalize_costs = smiling.cost.normalize;
  smiling.rl.norm_std = smiling.cost.norm_std;
  smiling.config_digest = digest(*this);
  smiling.validate();
}

const std::vector<KeyInfo>& registry() {
  static const std::vector<KeyInfo> r = build_registry();
  return r;
}

void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : registry()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.find('=') == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_override(cfg, line);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string canonical(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& k : registry()) {
    if (k.name == "output.dir") continue;
    out += k.name + "=" + k.get(cfg) + "\n";
  }
  return out;
}

std::string digest(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string describe_keys() {
  const ExperimentConfig defaults;
  std::ostringstream os;
  os << "Config keys (key = default  description):\n";
  for (const auto& k : registry()) {
    os << "  " << std::left << std::setw(26) << k.name << " = " << std::setw(14) << k.get(defaults)
       << " " << k.help << "\n";
  }
  return os.str();
}

}  // namespace smiling::config
