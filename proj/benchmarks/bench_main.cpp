#include <benchmark/benchmark.h>

#include "smiling/cost.hpp"
#include "smiling/diffusion.hpp"
#include "smiling/nn.hpp"
#include "smiling/scorematch.hpp"

using namespace smiling;

namespace {

nn::MlpParams score_net(int dim, int hidden) {
  return nn::init_params(std::vector<int>{dim, hidden, dim}, 5000, nn::Activation::relu, 7);
}

Mat inputs(int dim, long n, Rng& rng) {
  Mat x(dim, n);
  rng.fill_normal(x);
  return x;
}

std::vector<int> bins(long n, Rng& rng) {
  std::vector<int> b(static_cast<std::size_t>(n));
  for (auto& v : b) v = rng.uniform_int(5000);
  return b;
}

void BM_forward_batch(benchmark::State& state) {
  Rng rng(1);
  const auto net = score_net(2, 256);
  const Mat x = inputs(2, state.range(0), rng);
  const auto t = bins(state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward_batch(net, x, t));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_forward_batch)->Arg(256)->Arg(1024);

void BM_sq_loss_grad(benchmark::State& state) {
  Rng rng(2);
  const auto net = score_net(2, 256);
  const nn::SqBatch batch{inputs(2, state.range(0), rng), bins(state.range(0), rng), inputs(2, state.range(0), rng)};
  for (auto _ : state) benchmark::DoNotOptimize(nn::sq_loss_grad(net, batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_sq_loss_grad)->Arg(256)->Arg(1024);

void BM_cost_eval_batch(benchmark::State& state) {
  Rng rng(3);
  const diffusion::DiffusionSchedule sched;
  const scorematch::ScoreModel ge{score_net(2, 256)}, gk{score_net(2, 256)};
  const cost::CostFn cf{ge.fn(), gk.fn(), sched, static_cast<int>(state.range(1))};
  const Mat s = inputs(2, state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(cost::cost_eval_batch(cf, s, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_cost_eval_batch)->Args({512, 4})->Args({512, 32});

void BM_reverse_sample(benchmark::State& state) {
  Rng rng(4);
  const auto score = diffusion::gaussian_score_fn(Vec::Constant(1, 2.0), 0.25);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diffusion::reverse_sample(score, diffusion::DiffusionSchedule{}, 1,
                                                       static_cast<int>(state.range(0)), 200, rng));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_reverse_sample)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
