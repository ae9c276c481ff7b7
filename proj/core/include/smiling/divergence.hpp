#pragma once

#include <functional>
#include <span>

#include "smiling/diffusion.hpp"
#include "smiling/types.hpp"

namespace smiling::divergence {

struct DsEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n_mc = 0;
};

/// Unbiased Monte-Carlo estimate of the diffusion score divergence
///   E_{s~P} E_t E_{s_t|s} ||score_p(s_t, t) - score_q(s_t, t)||^2.
/// n_mc is the total number of (s, t, eps) draws; s cycles through samples_p
/// so only the first argument's samples are ever used.
DsEstimate ds_divergence_mc(const diffusion::ScoreFn& score_p, const diffusion::ScoreFn& score_q,
                            const Mat& samples_p, const diffusion::DiffusionSchedule& schedule,
                            long n_mc, Rng& rng);

/// Exact DS divergence between isotropic Gaussians N(mu1, s1 I) and
/// N(mu2, s2 I): the inner expectation is closed form (the score difference
/// is affine in x), the t-average is a 10^4-point trapezoid on [t_min, T].
double ds_divergence_gaussian(const Vec& mu1, double s1, const Vec& mu2, double s2,
                              const diffusion::DiffusionSchedule& schedule);

/// Trapezoid rule for 0.5 * integral (sqrt p - sqrt q)^2 on a sorted 1-D grid.
double hellinger_grid(const std::function<double(double)>& pdf_p,
                      const std::function<double(double)>& pdf_q, std::span<const double> grid);

struct GapReport {
  double true_value = 0.0;  // l(pi) with the analytic learner score
  double naive_estimate = 0.0;
  double corrected_estimate = 0.0;
  double naive_err = 0.0;
  double corrected_err = 0.0;
  double naive_std_error = 0.0;
  double corrected_std_error = 0.0;
};

/// Compares the plug-in objective E||g_e - g_pi||^2 and the variance-corrected
/// objective E[||g_e - c||^2 - ||g_pi - c||^2] (c the conditional score) with
/// the ground truth E||g_e - score_true||^2, all on the same draws.
GapReport naive_vs_corrected_gap(const diffusion::ScoreFn& g_e, const diffusion::ScoreFn& g_pi,
                                 const diffusion::ScoreFn& score_true, const Mat& states,
                                 const diffusion::DiffusionSchedule& schedule, int n_mc, Rng& rng);

}  // namespace smiling::divergence
