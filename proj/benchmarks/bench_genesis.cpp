#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include <random>

#include "genesis/dataset.hpp"
#include "genesis/metrics.hpp"
#include "genesis/model.hpp"
#include "genesis/objective.hpp"

using namespace genesis;

static void BM_StickBreaking(benchmark::State& state) {
  const auto k = state.range(0);
  const auto logits = torch::randn({32, k - 1, 64, 64});
  for (auto _ : state) benchmark::DoNotOptimize(model::stick_breaking(logits).log_pi);
  state.SetItemsProcessed(state.iterations() * 32 * 64 * 64);
}
BENCHMARK(BM_StickBreaking)->Arg(5)->Arg(9);

static void BM_MixtureLikelihood(benchmark::State& state) {
  const auto x = torch::rand({32, 3, 64, 64});
  const auto log_pi = model::stick_breaking(torch::randn({32, 4, 64, 64})).log_pi;
  const auto mu = torch::rand({32, 5, 3, 64, 64});
  for (auto _ : state) benchmark::DoNotOptimize(model::mixture_log_likelihood(x, log_pi, mu, 0.7));
}
BENCHMARK(BM_MixtureLikelihood);

static void BM_SegmentationMetrics(benchmark::State& state) {
  std::mt19937_64 rng(1);
  LabelMap gt(64, 64), pred(64, 64);
  for (auto& v : gt.labels) v = static_cast<int>(rng() % 5);
  for (auto& v : pred.labels) v = static_cast<int>(rng() % 5);
  std::vector<Mask> gt_masks, pred_masks;
  for (int v = 0; v < 5; ++v) {
    gt_masks.push_back(gt.mask_of(v));
    pred_masks.push_back(pred.mask_of(v));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::segmentation_covering(gt_masks, pred_masks));
    benchmark::DoNotOptimize(metrics::adjusted_rand_index(gt.labels, pred.labels));
  }
}
BENCHMARK(BM_SegmentationMetrics);

static void BM_GenerateRecord(benchmark::State& state) {
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(data::generate_record(0, i++, 64, 64));
}
BENCHMARK(BM_GenerateRecord);

static void BM_TrainStep(benchmark::State& state) {
  torch::manual_seed(0);
  ModelConfig c;
  c.height = c.width = 32;
  c.width_scale = 0.25;
  auto m = model::make_model(c);
  m->train();
  torch::optim::Adam opt(m->parameters(), torch::optim::AdamOptions(1e-4));
  const auto x = torch::rand({8, 3, 32, 32});
  auto gen = at::make_generator<at::CPUGeneratorImpl>(1);
  const auto geco = objective::GecoState::for_image(32, 32, 3);
  for (auto _ : state) {
    const auto terms = objective::elbo(*m, x, m->draw_noise(8, gen));
    opt.zero_grad();
    objective::geco_loss(terms, geco).backward();
    opt.step();
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
