#include "smiling/scorematch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

#include "smiling/binary_io.hpp"

namespace smiling::scorematch {

using diffusion::DiffusionSchedule;
using diffusion::ScoreFn;
using diffusion::TimePoint;

namespace {

constexpr std::string_view kBufferMagic = "SMILBUF1";

std::vector<int> bins_of(std::span<const TimePoint> ts) {
  std::vector<int> b(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) b[i] = ts[i].bin;
  return b;
}

double held_out_loss(const nn::MlpParams& net, const diffusion::DiffusedBatch& eval) {
  const Mat out = nn::forward_batch(net, eval.noisy, eval.bins());
  return (out - eval.targets).squaredNorm() / static_cast<double>(eval.noisy.cols());
}

}  // namespace

Mat ScoreModel::eval(const Mat& xs, std::span<const TimePoint> ts) const {
  return nn::forward_batch(net, xs, bins_of(ts));
}

ScoreFn ScoreModel::fn() const {
  auto params = std::make_shared<const nn::MlpParams>(net);
  return [params](const Mat& xs, std::span<const TimePoint> ts) {
    return nn::forward_batch(*params, xs, bins_of(ts));
  };
}

void ScoreTrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("score epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("score batch_size must be positive");
  if (mc_pairs_per_state < 1) throw ConfigError("score mc_pairs_per_state must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("score learning_rate must be positive");
  if (samples_per_update < 1) throw ConfigError("score samples_per_update must be positive");
  if (eval_draws < 1) throw ConfigError("score eval_draws must be positive");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) {
    throw ConfigError("score final_lr_fraction must be in (0, 1]");
  }
  for (int h : hidden) {
    if (h < 1) throw ConfigError("score hidden sizes must be positive");
  }
}

ScoreModel make_score_model(int dim, const DiffusionSchedule& schedule, const ScoreTrainConfig& cfg,
                            std::uint64_t seed) {
  schedule.validate();
  std::vector<int> sizes{dim};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(dim);
  return ScoreModel{
      nn::init_params(sizes, schedule.n_steps, cfg.activation, seed, cfg.embedding_dim)};
}

StateBuffer::StateBuffer(int dim) : dim_(dim) {
  if (dim < 1) throw ArgumentError("StateBuffer: dim must be positive");
}

void StateBuffer::append(const Mat& block) {
  if (block.rows() != dim_) throw ShapeError("StateBuffer::append: dimension mismatch");
  data_.insert(data_.end(), block.data(), block.data() + block.size());
  counts_.push_back(static_cast<std::size_t>(block.cols()));
}

Eigen::Map<const Mat> StateBuffer::states() const {
  return {data_.data(), dim_, static_cast<Eigen::Index>(size())};
}

Mat StateBuffer::sample(int n, Rng& rng) const {
  if (empty()) throw ArgumentError("StateBuffer::sample: buffer is empty");
  const auto all = states();
  const int total = static_cast<int>(size());
  Mat out(dim_, n);
  for (int j = 0; j < n; ++j) out.col(j) = all.col(rng.uniform_int(total));
  return out;
}

void StateBuffer::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArgumentError("cannot open for writing: " + path.string());
  io::write_magic(os, kBufferMagic);
  io::write_pod(os, static_cast<std::uint64_t>(size()));
  io::write_pod(os, static_cast<std::uint32_t>(dim_));
  io::write_pod(os, static_cast<std::uint32_t>(counts_.size()));
  for (auto c : counts_) io::write_pod(os, static_cast<std::uint64_t>(c));
  io::write_doubles(os, data_.data(), data_.size());
}

StateBuffer StateBuffer::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("cannot open buffer file: " + path.string());
  io::expect_magic(is, kBufferMagic);
  const auto count = io::read_pod<std::uint64_t>(is);
  const auto dim = io::read_pod<std::uint32_t>(is);
  const auto n_iter = io::read_pod<std::uint32_t>(is);
  StateBuffer buf(static_cast<int>(dim));
  std::size_t total = 0;
  for (std::uint32_t i = 0; i < n_iter; ++i) {
    buf.counts_.push_back(static_cast<std::size_t>(io::read_pod<std::uint64_t>(is)));
    total += buf.counts_.back();
  }
  if (total != count) throw ArgumentError("buffer file: counts do not sum to total");
  buf.data_.resize(count * dim);
  io::read_doubles(is, buf.data_.data(), buf.data_.size());
  return buf;
}

McValue dsm_loss_estimate(const ScoreFn& g, const Mat& states, const DiffusionSchedule& schedule,
                          int n_mc, Rng& rng) {
  if (states.cols() == 0) throw ArgumentError("dsm_loss: empty state set");
  if (n_mc < 1) throw ArgumentError("dsm_loss: n_mc must be >= 1");
  schedule.validate();

  // Chunked so that large state sets do not materialize every draw at once.
  constexpr Eigen::Index kChunkDraws = 1 << 16;
  const Eigen::Index per_chunk = std::max<Eigen::Index>(1, kChunkDraws / n_mc);
  double sum = 0.0, sum_sq = 0.0;
  Eigen::Index n = 0;
  for (Eigen::Index start = 0; start < states.cols(); start += per_chunk) {
    const Eigen::Index cols = std::min(per_chunk, states.cols() - start);
    const auto batch = diffusion::diffuse(states.middleCols(start, cols), n_mc, schedule, rng);
    const Mat out = g(batch.noisy, batch.times);
    const Eigen::ArrayXd terms = (out - batch.targets).colwise().squaredNorm().transpose().array();
    sum += terms.sum();
    sum_sq += terms.square().sum();
    n += terms.size();
  }
  const double mean = sum / static_cast<double>(n);
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

double dsm_loss(const ScoreFn& g, const Mat& states, const DiffusionSchedule& schedule, int n_mc,
                Rng& rng) {
  return dsm_loss_estimate(g, states, schedule, n_mc, rng).value;
}

double dsm_loss(const ScoreModel& g, const Mat& states, const DiffusionSchedule& schedule,
                int n_mc, Rng& rng) {
  return dsm_loss(g.fn(), states, schedule, n_mc, rng);
}

TrainedScore train_score(ScoreModel init, const Mat& data, const DiffusionSchedule& schedule,
                         const ScoreTrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  schedule.validate();
  if (data.rows() != init.dim()) throw ShapeError("score training: data dimension mismatch");
  if (data.cols() == 0) throw ArgumentError("score training: no states");

  Rng rng(seed);
  Rng eval_rng = rng.fork();
  Mat eval_states(data.rows(), cfg.eval_draws);
  for (int j = 0; j < cfg.eval_draws; ++j) {
    eval_states.col(j) = data.col(eval_rng.uniform_int(static_cast<int>(data.cols())));
  }
  const auto eval_batch = diffusion::diffuse(eval_states, 1, schedule, eval_rng);

  TrainedScore out;
  out.model = std::move(init);
  out.initial_loss = held_out_loss(out.model.net, eval_batch);
  const nn::MlpParams initial_net = out.model.net;

  nn::AdamState opt = nn::make_adam(out.model.net, cfg.learning_rate);
  const Eigen::Index n = data.cols();
  const std::int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index cols = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Mat states(data.rows(), cols);
      for (Eigen::Index j = 0; j < cols; ++j) {
        states.col(j) = data.col(order[static_cast<std::size_t>(start + j)]);
      }
      auto batch = diffusion::diffuse(states, cfg.mc_pairs_per_state, schedule, rng);
      nn::SqBatch sq{std::move(batch.noisy), batch.bins(), std::move(batch.targets)};
      const auto lg = nn::sq_loss_grad(out.model.net, sq);
      if (!std::isfinite(lg.loss)) {
        throw TrainingError("score training diverged at step " + std::to_string(out.steps));
      }
      if (cfg.final_lr_fraction < 1.0 && total_steps > 1) {
        const double progress = static_cast<double>(out.steps) / static_cast<double>(total_steps - 1);
        const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
        opt.learning_rate =
            cfg.learning_rate * (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * cosine);
      }
      nn::adam_update(out.model.net, lg.grads, opt);
      ++out.steps;
    }
  }

  out.final_loss = held_out_loss(out.model.net, eval_batch);
  if (!std::isfinite(out.final_loss)) throw TrainingError("score training produced non-finite loss");
  if (out.final_loss > out.initial_loss) {
    out.model.net = initial_net;
    out.final_loss = out.initial_loss;
  }
  return out;
}

TrainedScore pretrain_expert(const Mat& expert_states, const DiffusionSchedule& schedule,
                             const ScoreTrainConfig& cfg, std::uint64_t seed) {
  if (expert_states.cols() < 2) throw ArgumentError("pretrain_expert: need at least 2 states");
  Rng rng(seed);
  ScoreModel init = make_score_model(static_cast<int>(expert_states.rows()), schedule, cfg,
                                     rng.engine()());
  return train_score(std::move(init), expert_states, schedule, cfg, rng.engine()());
}

TrainedScore ftl_update(const ScoreModel& g_prev, const StateBuffer& buffer,
                        const DiffusionSchedule& schedule, const ScoreTrainConfig& cfg,
                        std::uint64_t seed) {
  if (buffer.empty()) throw ArgumentError("ftl_update: buffer is empty");
  Rng rng(seed);
  const Mat subsample = buffer.sample(cfg.samples_per_update, rng);
  return train_score(g_prev, subsample, schedule, cfg, rng.engine()());
}

}  // namespace smiling::scorematch
