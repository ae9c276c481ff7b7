#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "smiling/types.hpp"

namespace smiling::nn {

enum class Activation : std::uint32_t { relu = 0, identity = 1 };

inline constexpr int kDefaultEmbeddingDim = 16;

/// Multi-layer perceptron with an optional learnable per-bin time embedding.
///
/// The embedding row for the requested time bin is concatenated to the input
/// vector before the first layer, so `weights[0]` has
/// `input_dim() + embedding_dim()` columns. A network built with zero time
/// bins ignores the bin argument entirely.
///
/// Hidden layers use `activation`; the output layer is always affine. With
/// `Activation::identity` the whole network is an affine map of its input at
/// each fixed time bin.
///
/// The same struct doubles as the gradient container for itself.
struct MlpParams {
  std::vector<Mat> weights;  // weights[l] is (out_l x in_l)
  std::vector<Vec> biases;
  Mat time_embedding;  // (n_time_bins x embedding_dim); empty when time-free
  Activation activation = Activation::relu;

  int input_dim() const;
  int output_dim() const;
  int n_time_bins() const { return static_cast<int>(time_embedding.rows()); }
  int embedding_dim() const { return static_cast<int>(time_embedding.cols()); }
  int n_layers() const { return static_cast<int>(weights.size()); }
  /// Sizes excluding the embedding: {input_dim, hidden..., output_dim}.
  std::vector<int> layer_sizes() const;
  std::size_t parameter_count() const;

  friend bool operator==(const MlpParams& a, const MlpParams& b);
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero. The time
/// embedding starts from deterministic sinusoidal features of the normalized
/// bin position (see README) and is trained like any other parameter.
MlpParams init_params(std::span<const int> layer_sizes, int n_time_bins,
                      Activation activation, std::uint64_t seed,
                      int embedding_dim = kDefaultEmbeddingDim);

MlpParams zeros_like(const MlpParams& p);

Vec forward(const MlpParams& p, const Vec& x, int t_bin = 0);

/// Columns of `xs` are inputs. `t_bins` is ignored for time-free networks and
/// must otherwise hold one bin per column.
Mat forward_batch(const MlpParams& p, const Mat& xs, std::span<const int> t_bins);

/// Gradient of an arbitrary scalar objective given dL/d(output) per column.
/// This is the hook used for squared-error, Gaussian log-likelihood and
/// logistic objectives alike.
MlpParams backward_batch(const MlpParams& p, const Mat& xs, std::span<const int> t_bins,
                         const Mat& grad_out);

struct SqBatch {
  Mat inputs;  // (input_dim x B)
  std::vector<int> t_bins;
  Mat targets;  // (output_dim x B)
};

struct LossGrad {
  double loss = 0.0;
  MlpParams grads;
};

/// loss = mean_b ||forward(x_b, t_b) - target_b||^2, with exact gradients.
LossGrad sq_loss_grad(const MlpParams& p, const SqBatch& batch);

struct AdamState {
  MlpParams first_moment;
  MlpParams second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam(const MlpParams& p, double learning_rate = 5e-3);

std::pair<MlpParams, AdamState> adam_step(const MlpParams& p, const MlpParams& grads,
                                          const AdamState& opt);
/// In-place variant of adam_step used by the trainers.
void adam_update(MlpParams& p, const MlpParams& grads, AdamState& opt);

/// Adam over a plain vector, with the same constants as AdamState.
struct VecAdam {
  Vec first_moment, second_moment;
  std::int64_t step_count = 0;
  double learning_rate;

  VecAdam(Eigen::Index n, double lr)
      : first_moment(Vec::Zero(n)), second_moment(Vec::Zero(n)), learning_rate(lr) {}
  void update(Vec& x, const Vec& grad);
};

// Flat views, in checkpoint order: per layer (weights row-major, bias), then
// the embedding row-major.
std::vector<double> flatten(const MlpParams& p);
void unflatten(std::span<const double> flat, MlpParams& p);

// Binary checkpoint, little-endian:
//   "SMILNN01" | u32 activation | u32 n_sizes | u32 sizes[n_sizes]
//   | u32 n_time_bins | u32 embedding_dim | f64 flatten(p)[...]
void write_params(std::ostream& os, const MlpParams& p);
MlpParams read_params(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const MlpParams& p);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace smiling::nn
