#include <numbers>

#include "helpers.hpp"
#include "smiling/divergence.hpp"

using namespace smiling;
using namespace smiling::divergence;
using diffusion::DiffusionSchedule;
using diffusion::gaussian_score_fn;
using diffusion::ScoreFn;
using diffusion::TimePoint;
using smiling::testing::v1;

namespace {

DiffusionSchedule unit_horizon(double t_min, int n_steps) {
  DiffusionSchedule s;
  s.horizon = 1.0;
  s.t_min = t_min;
  s.n_steps = n_steps;
  return s;
}

Mat gaussian_samples(double mu, double var, long n, Rng& rng) {
  Mat m(1, n);
  for (long j = 0; j < n; ++j) m(0, j) = mu + std::sqrt(var) * rng.normal();
  return m;
}

ScoreFn scaled_difference(const ScoreFn& base, const ScoreFn& other, double k) {
  return [=](const Mat& xs, std::span<const TimePoint> ts) {
    const Mat b = base(xs, ts);
    return (b + k * (other(xs, ts) - b)).eval();
  };
}

}  // namespace

TEST_CASE("identical scores have zero divergence") {
  Rng rng(0);
  const auto f = gaussian_score_fn(v1(0.3), 1.5);
  CHECK(ds_divergence_mc(f, f, gaussian_samples(0.3, 1.5, 100, rng), DiffusionSchedule{}, 1000, rng).value == 0.0);
  CHECK(ds_divergence_gaussian(v1(0.3), 1.5, v1(0.3), 1.5, DiffusionSchedule{}) == 0.0);
}

TEST_CASE("equal-variance closed form at T = 1, t_min -> 0") {
  const double expect = (1.0 - std::exp(-2.0)) / 2.0;
  CHECK(ds_divergence_gaussian(v1(1), 1, v1(0), 1, unit_horizon(1e-7, 2)) == doctest::Approx(expect).epsilon(1e-5));
  CHECK(expect == doctest::Approx(0.43233).epsilon(1e-5));
}

TEST_CASE("Monte-Carlo estimate agrees with the closed form") {
  Rng rng(1);
  const auto sched = unit_horizon(1e-3, 5000);
  constexpr long n = 1000000;
  struct P {
    double mu1, s1, mu2, s2;
  };
  for (const P p : {P{1, 1, 0, 1}, P{0, 1, 1, 0.25}}) {
    const auto est = ds_divergence_mc(gaussian_score_fn(v1(p.mu1), p.s1), gaussian_score_fn(v1(p.mu2), p.s2),
                                      gaussian_samples(p.mu1, p.s1, n, rng), sched, n, rng);
    CHECK(std::abs(est.value - ds_divergence_gaussian(v1(p.mu1), p.s1, v1(p.mu2), p.s2, sched)) <
          3.0 * est.std_error);
    CHECK(est.n_mc == n);
  }
}

TEST_CASE("doubling the score difference quadruples the divergence") {
  const auto p = gaussian_score_fn(v1(0.0), 1.0);
  const auto q = gaussian_score_fn(v1(1.0), 0.5);
  Rng a(2), b(2);
  const Mat xs = gaussian_samples(0.0, 1.0, 20000, a);
  b = a;
  const auto one = ds_divergence_mc(p, q, xs, DiffusionSchedule{}, 20000, a);
  const auto two = ds_divergence_mc(p, scaled_difference(p, q, 2.0), xs, DiffusionSchedule{}, 20000, b);
  CHECK(two.value == doctest::Approx(4.0 * one.value).epsilon(1e-9));
}

TEST_CASE("divergence errors") {
  Rng rng(3);
  const auto f = gaussian_score_fn(v1(0.0), 1.0);
  const ScoreFn bad = [](const Mat& xs, std::span<const TimePoint>) {
    return Mat::Constant(xs.rows(), xs.cols(), std::nan("")).eval();
  };
  CHECK_THROWS_AS(ds_divergence_mc(f, bad, Mat::Zero(1, 3), DiffusionSchedule{}, 10, rng), NumericError);
  CHECK_THROWS_AS(ds_divergence_mc(f, f, Mat(1, 0), DiffusionSchedule{}, 10, rng), ArgumentError);
  CHECK_THROWS_AS(ds_divergence_gaussian(v1(0), 0.0, v1(0), 1.0, DiffusionSchedule{}), DomainError);
}

TEST_CASE("Hellinger distance on a grid") {
  auto pdf = [](double m) {
    return [m](double x) { return std::exp(-0.5 * (x - m) * (x - m)) / std::sqrt(2.0 * std::numbers::pi); };
  };
  std::vector<double> grid;
  for (int i = 0; i <= 17000; ++i) grid.push_back(-8.0 + 1e-3 * i);
  CHECK(hellinger_grid(pdf(0), pdf(0), grid) == 0.0);
  const double h = hellinger_grid(pdf(0), pdf(1), grid);
  CHECK(std::abs(h - (1.0 - std::exp(-0.125))) < 1e-4);
  CHECK(h >= 0.0);
  CHECK(h <= 1.0);
  CHECK(hellinger_grid(pdf(0), pdf(30), grid) <= 1.0);
  std::vector<double> unsorted{0.0, 1.0, 0.5};
  CHECK_THROWS_AS(hellinger_grid(pdf(0), pdf(1), unsorted), ArgumentError);
}

TEST_CASE("plug-in and corrected objectives with an exact learner score") {
  Rng rng(4);
  const auto truth = gaussian_score_fn(v1(0.0), 1.0);
  const auto g_e = gaussian_score_fn(v1(0.5), 1.0);
  const auto r = naive_vs_corrected_gap(g_e, truth, truth, gaussian_samples(0, 1, 20000, rng),
                                        DiffusionSchedule{}, 5, rng);
  CHECK(r.naive_err == 0.0);
  CHECK(r.corrected_err < 3.0 * r.corrected_std_error);
}

TEST_CASE("quadrupling the draws halves both standard errors") {
  Rng rng(5);
  const auto truth = gaussian_score_fn(v1(0.0), 1.0);
  const auto g_e = gaussian_score_fn(v1(1.0), 1.0);
  const auto g_pi = gaussian_score_fn(v1(0.2), 1.2);
  const Mat xs = gaussian_samples(0, 1, 5000, rng);
  const auto a = naive_vs_corrected_gap(g_e, g_pi, truth, xs, DiffusionSchedule{}, 4, rng);
  const auto b = naive_vs_corrected_gap(g_e, g_pi, truth, xs, DiffusionSchedule{}, 16, rng);
  CHECK(a.naive_std_error / b.naive_std_error == doctest::Approx(2.0).epsilon(0.15));
  CHECK(a.corrected_std_error / b.corrected_std_error == doctest::Approx(2.0).epsilon(0.15));
}
