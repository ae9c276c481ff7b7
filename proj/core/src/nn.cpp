#include "smiling/nn.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "smiling/binary_io.hpp"

namespace smiling::nn {

namespace {

constexpr std::string_view kMagic = "SMILNN01";

void check_bins(const MlpParams& p, std::span<const int> t_bins, Eigen::Index batch) {
  if (p.n_time_bins() == 0) return;
  if (static_cast<Eigen::Index>(t_bins.size()) != batch) {
    throw ShapeError("time bins: expected " + std::to_string(batch) + ", got " +
                     std::to_string(t_bins.size()));
  }
  for (int b : t_bins) {
    if (b < 0 || b >= p.n_time_bins()) {
      throw ShapeError("time bin " + std::to_string(b) + " out of range [0, " +
                       std::to_string(p.n_time_bins()) + ")");
    }
  }
}

// Input to the first layer: x stacked over the embedding rows for each column.
Mat network_input(const MlpParams& p, const Mat& xs, std::span<const int> t_bins) {
  if (xs.rows() != p.input_dim()) {
    throw ShapeError("input dimension " + std::to_string(xs.rows()) + " does not match " +
                     std::to_string(p.input_dim()));
  }
  check_bins(p, t_bins, xs.cols());
  if (p.n_time_bins() == 0) return xs;
  const Eigen::Index d = xs.rows();
  Mat z(d + p.embedding_dim(), xs.cols());
  z.topRows(d) = xs;
  for (Eigen::Index j = 0; j < xs.cols(); ++j) {
    z.col(j).tail(p.embedding_dim()) = p.time_embedding.row(t_bins[j]).transpose();
  }
  return z;
}

// Post-activation outputs of every layer; acts[0] is the network input.
std::vector<Mat> forward_all(const MlpParams& p, Mat input) {
  std::vector<Mat> acts;
  acts.reserve(p.weights.size() + 1);
  acts.push_back(std::move(input));
  for (int l = 0; l < p.n_layers(); ++l) {
    Mat z = p.weights[l] * acts.back();
    z.colwise() += p.biases[l];
    if (l + 1 < p.n_layers() && p.activation == Activation::relu) {
      z = z.cwiseMax(0.0);
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

void check_same_shape(const MlpParams& a, const MlpParams& b) {
  bool ok = a.weights.size() == b.weights.size() && a.biases.size() == b.biases.size() &&
            a.time_embedding.rows() == b.time_embedding.rows() &&
            a.time_embedding.cols() == b.time_embedding.cols();
  for (std::size_t l = 0; ok && l < a.weights.size(); ++l) {
    ok = a.weights[l].rows() == b.weights[l].rows() &&
         a.weights[l].cols() == b.weights[l].cols() && a.biases[l].size() == b.biases[l].size();
  }
  if (!ok) throw ShapeError("parameter shapes do not match");
}

}  // namespace

int MlpParams::input_dim() const {
  if (weights.empty()) return 0;
  return static_cast<int>(weights.front().cols()) - embedding_dim();
}

int MlpParams::output_dim() const {
  return weights.empty() ? 0 : static_cast<int>(weights.back().rows());
}

std::vector<int> MlpParams::layer_sizes() const {
  std::vector<int> sizes;
  if (weights.empty()) return sizes;
  sizes.push_back(input_dim());
  for (const auto& w : weights) sizes.push_back(static_cast<int>(w.rows()));
  return sizes;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(time_embedding.size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

bool operator==(const MlpParams& a, const MlpParams& b) {
  if (a.activation != b.activation || a.weights.size() != b.weights.size()) return false;
  if (a.time_embedding.rows() != b.time_embedding.rows() ||
      a.time_embedding.cols() != b.time_embedding.cols() ||
      a.time_embedding != b.time_embedding) {
    return false;
  }
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (a.weights[l].rows() != b.weights[l].rows() || a.weights[l].cols() != b.weights[l].cols())
      return false;
    if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
  }
  return true;
}

MlpParams init_params(std::span<const int> layer_sizes, int n_time_bins, Activation activation,
                      std::uint64_t seed, int embedding_dim) {
  if (layer_sizes.size() < 2) {
    throw ConfigError("layer_sizes needs at least an input and an output size");
  }
  for (int s : layer_sizes) {
    if (s <= 0) throw ConfigError("layer sizes must be positive");
  }
  if (n_time_bins < 0) throw ConfigError("n_time_bins must be non-negative");
  if (n_time_bins > 0 && embedding_dim <= 0) {
    throw ConfigError("embedding_dim must be positive when time bins are used");
  }

  MlpParams p;
  p.activation = activation;
  const int emb = n_time_bins > 0 ? embedding_dim : 0;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l] + (l == 0 ? emb : 0);
    const int fan_out = layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Mat w(fan_out, fan_in);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vec::Zero(fan_out));
  }

  p.time_embedding = Mat::Zero(n_time_bins, emb);
  // Sinusoidal start: column pairs (sin, cos) at octave-spaced frequencies of
  // the normalized bin position u in [0, 1].
  for (int b = 0; b < n_time_bins; ++b) {
    const double u = n_time_bins > 1 ? static_cast<double>(b) / (n_time_bins - 1) : 0.0;
    for (int k = 0; k < emb; ++k) {
      const double freq = 0.5 * std::numbers::pi * std::ldexp(1.0, k / 2);
      p.time_embedding(b, k) = (k % 2 == 0) ? std::sin(freq * u) : std::cos(freq * u);
    }
  }
  return p;
}

MlpParams zeros_like(const MlpParams& p) {
  MlpParams z;
  z.activation = p.activation;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    z.weights.push_back(Mat::Zero(p.weights[l].rows(), p.weights[l].cols()));
    z.biases.push_back(Vec::Zero(p.biases[l].size()));
  }
  z.time_embedding = Mat::Zero(p.time_embedding.rows(), p.time_embedding.cols());
  return z;
}

Vec forward(const MlpParams& p, const Vec& x, int t_bin) {
  const int bins[1] = {t_bin};
  return forward_batch(p, x, std::span<const int>(bins, p.n_time_bins() > 0 ? 1 : 0)).col(0);
}

Mat forward_batch(const MlpParams& p, const Mat& xs, std::span<const int> t_bins) {
  if (p.weights.empty()) throw ShapeError("forward on an empty network");
  Mat h = network_input(p, xs, t_bins);
  for (int l = 0; l < p.n_layers(); ++l) {
    Mat z = p.weights[l] * h;
    z.colwise() += p.biases[l];
    if (l + 1 < p.n_layers() && p.activation == Activation::relu) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

namespace {

MlpParams backprop(const MlpParams& p, const std::vector<Mat>& acts,
                   std::span<const int> t_bins, Mat delta) {
  MlpParams g = zeros_like(p);
  for (int l = p.n_layers() - 1; l >= 0; --l) {
    g.weights[l].noalias() = delta * acts[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Mat upstream = p.weights[l].transpose() * delta;
    if (p.activation == Activation::relu) {
      upstream = (acts[l].array() > 0.0).select(upstream, 0.0);
    }
    delta = std::move(upstream);
  }

  if (p.n_time_bins() > 0) {
    const int emb = p.embedding_dim();
    const Mat d_emb = p.weights[0].rightCols(emb).transpose() * delta;
    for (Eigen::Index j = 0; j < d_emb.cols(); ++j) {
      g.time_embedding.row(t_bins[j]) += d_emb.col(j).transpose();
    }
  }
  return g;
}

}  // namespace

MlpParams backward_batch(const MlpParams& p, const Mat& xs, std::span<const int> t_bins,
                         const Mat& grad_out) {
  if (grad_out.rows() != p.output_dim() || grad_out.cols() != xs.cols()) {
    throw ShapeError("grad_out shape does not match network output");
  }
  return backprop(p, forward_all(p, network_input(p, xs, t_bins)), t_bins, grad_out);
}

LossGrad sq_loss_grad(const MlpParams& p, const SqBatch& batch) {
  const Eigen::Index n = batch.inputs.cols();
  if (n == 0) throw ArgumentError("sq_loss_grad: empty batch");
  if (batch.targets.cols() != n || batch.targets.rows() != p.output_dim()) {
    throw ShapeError("sq_loss_grad: targets do not match outputs");
  }
  const std::vector<Mat> acts = forward_all(p, network_input(p, batch.inputs, batch.t_bins));
  const Mat resid = acts.back() - batch.targets;
  LossGrad r;
  r.loss = resid.squaredNorm() / static_cast<double>(n);
  r.grads = backprop(p, acts, batch.t_bins, (2.0 / static_cast<double>(n)) * resid);
  return r;
}

AdamState make_adam(const MlpParams& p, double learning_rate) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  AdamState s;
  s.first_moment = zeros_like(p);
  s.second_moment = zeros_like(p);
  s.learning_rate = learning_rate;
  return s;
}

void adam_update(MlpParams& p, const MlpParams& grads, AdamState& opt) {
  check_same_shape(p, grads);
  check_same_shape(p, opt.first_moment);
  ++opt.step_count;
  const double b1 = opt.beta1, b2 = opt.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.step_count));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.step_count));
  const double lr = opt.learning_rate, eps = opt.epsilon;

  auto update = [&](auto&& param, auto&& grad, auto&& m, auto&& v) {
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.square();
    param -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    update(p.weights[l].array(), grads.weights[l].array(), opt.first_moment.weights[l].array(),
           opt.second_moment.weights[l].array());
    update(p.biases[l].array(), grads.biases[l].array(), opt.first_moment.biases[l].array(),
           opt.second_moment.biases[l].array());
  }
  update(p.time_embedding.array(), grads.time_embedding.array(),
         opt.first_moment.time_embedding.array(), opt.second_moment.time_embedding.array());
}

void VecAdam::update(Vec& x, const Vec& grad) {
  if (x.size() != grad.size() || x.size() != first_moment.size()) {
    throw ShapeError("VecAdam: size mismatch");
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++step_count;
  first_moment = b1 * first_moment + (1.0 - b1) * grad;
  second_moment = b2 * second_moment + (1.0 - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
  x.array() -=
      learning_rate * (first_moment.array() / c1) / ((second_moment.array() / c2).sqrt() + eps);
}

std::pair<MlpParams, AdamState> adam_step(const MlpParams& p, const MlpParams& grads,
                                          const AdamState& opt) {
  std::pair<MlpParams, AdamState> out{p, opt};
  adam_update(out.first, grads, out.second);
  return out;
}

std::vector<double> flatten(const MlpParams& p) {
  std::vector<double> flat;
  flat.reserve(p.parameter_count());
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const auto& w = p.weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) flat.push_back(w(i, j));
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) flat.push_back(p.biases[l](i));
  }
  const auto& e = p.time_embedding;
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) flat.push_back(e(i, j));
  return flat;
}

void unflatten(std::span<const double> flat, MlpParams& p) {
  if (flat.size() != p.parameter_count()) throw ShapeError("unflatten: size mismatch");
  std::size_t k = 0;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    auto& w = p.weights[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = flat[k++];
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) p.biases[l](i) = flat[k++];
  }
  auto& e = p.time_embedding;
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) e(i, j) = flat[k++];
}

void write_params(std::ostream& os, const MlpParams& p) {
  io::write_magic(os, kMagic);
  io::write_pod(os, static_cast<std::uint32_t>(p.activation));
  const auto sizes = p.layer_sizes();
  io::write_pod(os, static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) io::write_pod(os, static_cast<std::uint32_t>(s));
  io::write_pod(os, static_cast<std::uint32_t>(p.n_time_bins()));
  io::write_pod(os, static_cast<std::uint32_t>(p.embedding_dim()));
  const auto flat = flatten(p);
  io::write_doubles(os, flat.data(), flat.size());
}

MlpParams read_params(std::istream& is) {
  io::expect_magic(is, kMagic);
  const auto act = io::read_pod<std::uint32_t>(is);
  if (act > 1) throw ArgumentError("checkpoint: unknown activation");
  const auto n_sizes = io::read_pod<std::uint32_t>(is);
  if (n_sizes < 2 || n_sizes > 64) throw ArgumentError("checkpoint: bad layer count");
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) s = static_cast<int>(io::read_pod<std::uint32_t>(is));
  const auto bins = static_cast<int>(io::read_pod<std::uint32_t>(is));
  const auto emb = static_cast<int>(io::read_pod<std::uint32_t>(is));
  MlpParams p = init_params(sizes, bins, static_cast<Activation>(act), 0, emb > 0 ? emb : 1);
  std::vector<double> flat(p.parameter_count());
  io::read_doubles(is, flat.data(), flat.size());
  unflatten(flat, p);
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ArgumentError("cannot open for writing: " + path.string());
  write_params(os, p);
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("cannot open checkpoint: " + path.string());
  return read_params(is);
}

}  // namespace smiling::nn
