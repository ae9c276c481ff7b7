#pragma once

#include <span>
#include <vector>

#include "smiling/diffusion.hpp"
#include "smiling/types.hpp"

namespace smiling::cost {

inline constexpr int kDefaultCostDraws = 500;
inline constexpr double kDefaultNormStd = 0.1;

struct CostConfig {
  int n_mc = kDefaultCostDraws;
  bool normalize = true;
  double norm_std = kDefaultNormStd;

  void validate() const;
};

/// c(s) = E_t E_{s_t|s} [ ||g_e(s_t, t) - c||^2 - ||g_k(s_t, t) - c||^2 ],
/// c = grad log q_t(s_t | s). Both models are frozen snapshots.
struct CostFn {
  diffusion::ScoreFn g_expert;
  diffusion::ScoreFn g_learner;
  diffusion::DiffusionSchedule schedule;
  int n_mc = kDefaultCostDraws;
};

struct CostValue {
  double value = 0.0;
  double std_error = 0.0;
};

/// n_mc paired (t, eps) draws; the same draw feeds both squared terms.
double cost_eval(const CostFn& cf, const Vec& s, Rng& rng);
CostValue cost_eval_with_error(const CostFn& cf, const Vec& s, Rng& rng);
/// One cost per column of `states`.
Vec cost_eval_batch(const CostFn& cf, const Mat& states, Rng& rng);

/// Zero mean and population standard deviation `target_std`; all zeros when
/// the input's standard deviation is at most 1e-8.
std::vector<double> cost_batch_normalize(std::span<const double> costs,
                                         double target_std = kDefaultNormStd);
Vec cost_batch_normalize(const Vec& costs, double target_std = kDefaultNormStd);

/// Plug-in objective E ||g_e(s_t, t) - g_pi_hat(s_t, t)||^2.
double naive_cost_eval(const diffusion::ScoreFn& g_e, const diffusion::ScoreFn& g_pi_hat,
                       const diffusion::DiffusionSchedule& schedule, const Vec& s, int n_mc,
                       Rng& rng);

}  // namespace smiling::cost
