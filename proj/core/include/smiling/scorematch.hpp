#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "smiling/diffusion.hpp"
#include "smiling/nn.hpp"
#include "smiling/types.hpp"

namespace smiling::scorematch {

/// Learned score g(x, t): an MLP whose time embedding has one row per
/// schedule bin.
struct ScoreModel {
  nn::MlpParams net;

  int dim() const { return net.output_dim(); }
  Mat eval(const Mat& xs, std::span<const diffusion::TimePoint> ts) const;
  /// Snapshot as a ScoreFn; the closure owns a copy of the parameters.
  diffusion::ScoreFn fn() const;
};

struct ScoreTrainConfig {
  int epochs = 200;
  int batch_size = 1024;
  int mc_pairs_per_state = 1;
  double learning_rate = 5e-3;
  int samples_per_update = 100000;
  std::vector<int> hidden = {256};
  int embedding_dim = nn::kDefaultEmbeddingDim;
  nn::Activation activation = nn::Activation::relu;
  /// Held-out (t, eps) draws used to compare losses before and after training.
  int eval_draws = 4096;
  /// Cosine decay of the step size down to learning_rate * final_lr_fraction.
  double final_lr_fraction = 1.0;

  void validate() const;
};

ScoreModel make_score_model(int dim, const diffusion::DiffusionSchedule& schedule,
                            const ScoreTrainConfig& cfg, std::uint64_t seed);

/// Append-only aggregated state store. Each append is one algorithm iteration.
class StateBuffer {
 public:
  explicit StateBuffer(int dim);

  void append(const Mat& block);  // columns are states
  int dim() const { return dim_; }
  std::size_t size() const { return data_.size() / static_cast<std::size_t>(dim_); }
  bool empty() const { return data_.empty(); }
  const std::vector<std::size_t>& per_iteration_counts() const { return counts_; }
  Eigen::Map<const Mat> states() const;
  /// Uniform with replacement over every stored state.
  Mat sample(int n, Rng& rng) const;

  // "SMILBUF1" | u64 count | u32 dim | u32 n_iter | u64 counts[n_iter]
  // | f64 states, one state after another
  void save(const std::filesystem::path& path) const;
  static StateBuffer load(const std::filesystem::path& path);

 private:
  int dim_;
  std::vector<double> data_;
  std::vector<std::size_t> counts_;
};

struct McValue {
  double value = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo estimate of E_s E_t E_{s_t|s} ||g(s_t, t) - grad log q_t(s_t | s)||^2
/// with n_mc (t, eps) draws per state.
McValue dsm_loss_estimate(const diffusion::ScoreFn& g, const Mat& states,
                          const diffusion::DiffusionSchedule& schedule, int n_mc, Rng& rng);
double dsm_loss(const diffusion::ScoreFn& g, const Mat& states,
                const diffusion::DiffusionSchedule& schedule, int n_mc, Rng& rng);
double dsm_loss(const ScoreModel& g, const Mat& states,
                const diffusion::DiffusionSchedule& schedule, int n_mc, Rng& rng);

struct TrainedScore {
  ScoreModel model;
  double initial_loss = 0.0;  // on the held-out draws
  double final_loss = 0.0;
  std::int64_t steps = 0;
};

/// Denoising score matching on the expert states, from a fresh network.
TrainedScore pretrain_expert(const Mat& expert_states, const diffusion::DiffusionSchedule& schedule,
                             const ScoreTrainConfig& cfg, std::uint64_t seed);

/// Follow-the-leader step: regress on a uniform subsample of the whole
/// aggregated buffer, warm-starting from g_prev.
TrainedScore ftl_update(const ScoreModel& g_prev, const StateBuffer& buffer,
                        const diffusion::DiffusionSchedule& schedule, const ScoreTrainConfig& cfg,
                        std::uint64_t seed);

/// Shared trainer behind both entry points.
TrainedScore train_score(ScoreModel init, const Mat& data,
                         const diffusion::DiffusionSchedule& schedule, const ScoreTrainConfig& cfg,
                         std::uint64_t seed);

}  // namespace smiling::scorematch
