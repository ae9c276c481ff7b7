#include "diagnostics.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "smiling/diffusion.hpp"
#include "smiling/divergence.hpp"
#include "smiling/nn.hpp"
#include "smiling/scorematch.hpp"

namespace smiling::tools {

using diffusion::DiffusionSchedule;
using diffusion::ScoreFn;
using diffusion::TimePoint;

namespace {

Vec scalar(double x) { return Vec::Constant(1, x); }

Check within(std::string name, double measured, double expected, double tol) {
  return {std::move(name), measured, expected, tol, std::abs(measured - expected) <= tol};
}

ScoreFn shifted(ScoreFn base, std::function<double(double)> delta) {
  return [base = std::move(base), delta = std::move(delta)](const Mat& xs,
                                                            std::span<const TimePoint> ts) {
    Mat out = base(xs, ts);
    for (Eigen::Index j = 0; j < xs.cols(); ++j) out(0, j) += delta(xs(0, j));
    return out;
  };
}

}  // namespace

std::vector<Check> identities_suite(std::uint64_t seed) {
  std::vector<Check> out;
  Rng rng(seed);

  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec s = 3.0 * rng.normal_vec(3);
    const Vec eps = rng.normal_vec(3);
    const double t = 0.01 + 2.99 * rng.uniform();
    const Vec c = diffusion::conditional_score(s, diffusion::forward_sample(s, t, eps), t);
    const Vec expect = -eps / std::sqrt(1.0 - std::exp(-2.0 * t));
    worst = std::max(worst, (c - expect).cwiseAbs().maxCoeff());
  }
  out.push_back(within("conditional score equals -eps/sqrt(1-e^-2t)", worst, 0.0, 1e-10));

  // E[conditional score | s_t = x] under the exact Gaussian posterior of s.
  const double mu = 0.5, s2 = 2.0, t = 0.3;
  const double a = std::exp(-t), b = 1.0 - std::exp(-2.0 * t);
  for (double x : {-1.0, 0.5, 2.0}) {
    const double prec = 1.0 / s2 + a * a / b;
    const double pm = (mu / s2 + a * x / b) / prec;
    const double psd = std::sqrt(1.0 / prec);
    constexpr int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s = pm + psd * rng.normal();
      const double c = diffusion::conditional_score(scalar(s), scalar(x), t)(0);
      sum += c;
      sum_sq += c * c;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    const double truth = diffusion::gaussian_marginal_score(scalar(mu), s2, scalar(x), t)(0);
    std::ostringstream name;
    name << "posterior mean of conditional score at x=" << x;
    out.push_back(within(name.str(), mean, truth, 3.0 * se));
  }

  // Offset between conditional-target and marginal-target losses at t = ln 2.
  const auto sched = DiffusionSchedule::fixed(std::numbers::ln2);
  const double offset = std::exp(-2.0 * std::numbers::ln2) / (1.0 - std::exp(-2.0 * std::numbers::ln2));
  constexpr int n = 100000;
  Mat states(1, n);
  for (int j = 0; j < n; ++j) states(0, j) = rng.normal();
  for (int m = 0; m < 5; ++m) {
    const std::vector<int> sizes{1, 16, 1};
    scorematch::ScoreModel g{nn::init_params(sizes, 1, nn::Activation::relu, rng.engine()())};
    const auto batch = diffusion::diffuse(states, 1, sched, rng);
    const Mat out_g = g.eval(batch.noisy, batch.times);
    const Eigen::ArrayXd d = ((out_g - batch.targets).colwise().squaredNorm() -
                              (out_g + batch.noisy).colwise().squaredNorm())
                                 .transpose()
                                 .array();
    const double mean = d.mean();
    const double se = std::sqrt((d - mean).square().sum() / (n - 1) / n);
    std::ostringstream name;
    name << "loss offset independent of g (model " << m << ")";
    out.push_back(within(name.str(), mean, offset, 3.0 * se));
  }
  return out;
}

std::vector<Check> oracles_suite(std::uint64_t seed, long draws) {
  std::vector<Check> out;
  Rng rng(seed);
  DiffusionSchedule sched;
  sched.horizon = 1.0;
  sched.t_min = 1e-3;
  sched.n_steps = 5000;

  struct Pair {
    double mu1, s1, mu2, s2;
  };
  const Pair pairs[] = {{0, 1, 1, 1}, {0, 1, 1, 0.25}, {2, 0.25, 0, 1}, {0, 1, 0, 2}, {1, 0.5, -1, 1.5}};
  for (const auto& p : pairs) {
    // One fresh state per draw keeps the draws independent.
    Mat samples(1, draws);
    for (long j = 0; j < draws; ++j) samples(0, j) = p.mu1 + std::sqrt(p.s1) * rng.normal();
    const auto mc = divergence::ds_divergence_mc(diffusion::gaussian_score_fn(scalar(p.mu1), p.s1),
                                                 diffusion::gaussian_score_fn(scalar(p.mu2), p.s2),
                                                 samples, sched, draws, rng);
    const double exact = divergence::ds_divergence_gaussian(scalar(p.mu1), p.s1, scalar(p.mu2), p.s2, sched);
    std::ostringstream name;
    name << "DS(N(" << p.mu1 << "," << p.s1 << ") || N(" << p.mu2 << "," << p.s2 << ")) MC vs exact";
    out.push_back(within(name.str(), mc.value, exact, 3.0 * mc.std_error));
  }

  DiffusionSchedule limit;
  limit.horizon = 1.0;
  limit.t_min = 1e-7;
  limit.n_steps = 2;
  out.push_back(within("DS(N(0,1) || N(1,1)), T=1, t_min->0",
                       divergence::ds_divergence_gaussian(scalar(0), 1, scalar(1), 1, limit),
                       (1.0 - std::exp(-2.0)) / 2.0, 1e-4));

  std::vector<double> grid;
  for (int i = 0; i <= 17000; ++i) grid.push_back(-8.0 + 1e-3 * i);
  auto pdf = [](double m) {
    return [m](double x) { return std::exp(-0.5 * (x - m) * (x - m)) / std::sqrt(2.0 * std::numbers::pi); };
  };
  out.push_back(within("Hellinger^2(N(0,1), N(1,1)) on a grid",
                       divergence::hellinger_grid(pdf(0.0), pdf(1.0), grid),
                       1.0 - std::exp(-1.0 / 8.0), 1e-4));
  return out;
}

std::vector<GapPoint> shift_gap_sweep(const std::vector<double>& shifts, long draws,
                                       std::uint64_t seed) {
  Rng rng(seed);
  const DiffusionSchedule sched;
  const ScoreFn truth = diffusion::gaussian_score_fn(scalar(0.0), 1.0);
  const auto delta = [](double x) { return 0.1 * std::tanh(x) + 0.05; };
  const ScoreFn g_pi = shifted(truth, delta);

  // N(0, 1) is stationary, so the fit error is E delta(x)^2 for x ~ N(0, 1).
  double fit = 0.0;
  constexpr int n_fit = 1000000;
  for (int i = 0; i < n_fit; ++i) {
    const double d = delta(rng.normal());
    fit += d * d / n_fit;
  }

  constexpr int n_mc = 10;
  const long n_states = std::max(1L, draws / n_mc);
  Mat states(1, n_states);
  for (long j = 0; j < n_states; ++j) states(0, j) = rng.normal();

  std::vector<GapPoint> out;
  for (double c : shifts) {
    const ScoreFn g_e = shifted(truth, [c](double) { return c; });
    const auto r = divergence::naive_vs_corrected_gap(g_e, g_pi, truth, states, sched, n_mc, rng);
    out.push_back({c, r.naive_err, r.corrected_err, r.corrected_std_error, fit});
  }
  return out;
}

std::vector<Check> shift_gap_suite(std::uint64_t seed, long draws) {
  const std::vector<double> shifts{0.1, 1.0, 3.0, 10.0};
  const auto pts = shift_gap_sweep(shifts, draws, seed);
  std::vector<Check> out;
  bool monotone = true;
  for (std::size_t i = 1; i < pts.size(); ++i) monotone = monotone && pts[i].naive_err > pts[i - 1].naive_err;
  out.push_back({"plug-in error increases with the shift", monotone ? 1.0 : 0.0, 1.0, 0.0, monotone});
  for (const auto& p : pts) {
    std::ostringstream name;
    name << "corrected error within fit error at shift " << p.shift;
    const double bound = p.fit_error + 3.0 * p.corrected_std_error;
    out.push_back({name.str(), p.corrected_err, p.fit_error, 3.0 * p.corrected_std_error,
                   p.corrected_err <= bound});
  }
  const auto& last = pts.back();
  const double ratio = last.naive_err / std::max(last.corrected_err, 1e-12);
  out.push_back({"plug-in / corrected error ratio at shift 10", ratio, 5.0, 0.0, ratio >= 5.0});
  return out;
}

void print_checks(std::ostream& os, const std::string& suite, const std::vector<Check>& checks) {
  os << "suite " << suite << "\n";
  os << std::left << std::setw(58) << "check" << std::right << std::setw(14) << "measured"
     << std::setw(14) << "expected" << std::setw(12) << "tolerance" << "  result\n";
  for (const auto& c : checks) {
    os << std::left << std::setw(58) << c.name << std::right << std::setprecision(6)
       << std::setw(14) << c.measured << std::setw(14) << c.expected << std::setw(12)
       << c.tolerance << "  " << (c.passed ? "PASS" : "FAIL") << "\n";
  }
}

bool all_passed(const std::vector<Check>& checks) {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

}  // namespace smiling::tools
