#include "smiling/cost.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace smiling::cost {

using diffusion::DiffusionSchedule;
using diffusion::ScoreFn;

namespace {

constexpr Eigen::Index kChunkDraws = 1 << 16;

Mat checked(const ScoreFn& f, const diffusion::DiffusedBatch& b, const char* which) {
  Mat out = f(b.noisy, b.times);
  if (out.rows() != b.noisy.rows() || out.cols() != b.noisy.cols()) {
    throw ShapeError(std::string(which) + " returned the wrong shape");
  }
  if (!out.allFinite()) throw NumericError(std::string(which) + " returned non-finite values");
  return out;
}

// Per-draw terms for every column of `states`, n_mc consecutive draws each.
template <typename TermFn>
void for_each_chunk(const Mat& states, int n_mc, const DiffusionSchedule& schedule, Rng& rng,
                    TermFn&& on_chunk) {
  const Eigen::Index per_chunk = std::max<Eigen::Index>(1, kChunkDraws / n_mc);
  for (Eigen::Index start = 0; start < states.cols(); start += per_chunk) {
    const Eigen::Index cols = std::min(per_chunk, states.cols() - start);
    const auto batch = diffusion::diffuse(states.middleCols(start, cols), n_mc, schedule, rng);
    on_chunk(start, cols, batch);
  }
}

Eigen::ArrayXd corrected_terms(const CostFn& cf, const diffusion::DiffusedBatch& b) {
  const Mat ge = checked(cf.g_expert, b, "expert score model");
  const Mat gk = checked(cf.g_learner, b, "learner score model");
  return ((ge - b.targets).colwise().squaredNorm() - (gk - b.targets).colwise().squaredNorm())
      .transpose()
      .array();
}

void check(const CostFn& cf) {
  if (cf.n_mc < 1) throw ArgumentError("cost: n_mc must be >= 1");
  if (!cf.g_expert || !cf.g_learner) throw ArgumentError("cost: score models are not set");
}

}  // namespace

void CostConfig::validate() const {
  if (n_mc < 1) throw ConfigError("cost.n_mc must be >= 1");
  if (!(norm_std > 0.0)) throw ConfigError("cost.norm_std must be positive");
}

CostValue cost_eval_with_error(const CostFn& cf, const Vec& s, Rng& rng) {
  check(cf);
  if (!s.allFinite()) throw ArgumentError("cost_eval: state is not finite");
  const auto b = diffusion::diffuse(s, cf.n_mc, cf.schedule, rng);
  const Eigen::ArrayXd terms = corrected_terms(cf, b);
  const double mean = terms.mean();
  const double var =
      terms.size() > 1 ? (terms - mean).square().sum() / static_cast<double>(terms.size() - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(terms.size()))};
}

double cost_eval(const CostFn& cf, const Vec& s, Rng& rng) {
  return cost_eval_with_error(cf, s, rng).value;
}

Vec cost_eval_batch(const CostFn& cf, const Mat& states, Rng& rng) {
  check(cf);
  if (!states.allFinite()) throw ArgumentError("cost_eval_batch: states are not finite");
  Vec out(states.cols());
  for_each_chunk(states, cf.n_mc, cf.schedule, rng,
                 [&](Eigen::Index start, Eigen::Index cols, const diffusion::DiffusedBatch& b) {
                   const Eigen::ArrayXd terms = corrected_terms(cf, b);
                   for (Eigen::Index i = 0; i < cols; ++i) {
                     out(start + i) = terms.segment(i * cf.n_mc, cf.n_mc).mean();
                   }
                 });
  return out;
}

std::vector<double> cost_batch_normalize(std::span<const double> costs, double target_std) {
  if (costs.empty()) throw ArgumentError("cost_batch_normalize: empty batch");
  const double n = static_cast<double>(costs.size());
  const double mean = std::accumulate(costs.begin(), costs.end(), 0.0) / n;
  double ss = 0.0;
  for (double c : costs) ss += (c - mean) * (c - mean);
  const double sd = std::sqrt(ss / n);
  std::vector<double> out(costs.size(), 0.0);
  if (sd <= 1e-8) return out;
  for (std::size_t i = 0; i < costs.size(); ++i) out[i] = (costs[i] - mean) / sd * target_std;
  return out;
}

Vec cost_batch_normalize(const Vec& costs, double target_std) {
  const auto v = cost_batch_normalize(std::span<const double>(costs.data(), costs.size()), target_std);
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double naive_cost_eval(const ScoreFn& g_e, const ScoreFn& g_pi_hat, const DiffusionSchedule& schedule,
                       const Vec& s, int n_mc, Rng& rng) {
  if (n_mc < 1) throw ArgumentError("naive_cost_eval: n_mc must be >= 1");
  const auto b = diffusion::diffuse(s, n_mc, schedule, rng);
  const Mat ge = checked(g_e, b, "expert score model");
  const Mat gp = checked(g_pi_hat, b, "learner score estimate");
  return (ge - gp).colwise().squaredNorm().mean();
}

}  // namespace smiling::cost
