#include <benchmark/benchmark.h>

#include "srnam/degrader.hpp"
#include "srnam/hrgen.hpp"
#include "srnam/metrics.hpp"
#include "srnam/naminvert.hpp"
#include "srnam/rng.hpp"

using namespace srnam;

namespace {

void single_thread() { torch::set_num_threads(1); }

// Degradation generator forward pass, batch of range(0) HR images.
void BM_DegraderForward(benchmark::State& state) {
  single_thread();
  degrader::GeneratorArch g;
  g.width = state.range(1);
  auto model = degrader::make_model(g, degrader::DiscriminatorArch{}, 1, torch::kFloat);
  auto gen = make_generator(2);
  const auto hr = torch::rand({state.range(0), 3, 64, 64}, gen) * 2 - 1;
  const auto z = torch::randn({state.range(0), degrader::kNoiseDim}, gen);
  torch::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.generator->forward(hr, z));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DegraderForward)->Args({1, 16})->Args({8, 16})->Args({1, 64})->Unit(benchmark::kMillisecond);

// Progressive generator at stage range(0), mid-fade.
void BM_ProgressiveGeneratorForward(benchmark::State& state) {
  single_thread();
  hrgen::ProgressiveArch arch;
  arch.latent_dim = 64;
  arch.widths = {64, 32, 16, 16, 8};
  hrgen::ProgressiveGenerator g(arch, state.range(0));
  auto gen = make_generator(3);
  const auto z = torch::randn({16, 64}, gen);
  torch::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(g->forward(z, state.range(0), 0.5));
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_ProgressiveGeneratorForward)->DenseRange(0, 4)->Unit(benchmark::kMicrosecond);

// Latent inversion through G (16px, nearest-upsampled) and a small degrader.
void BM_InversionIterations(benchmark::State& state) {
  single_thread();
  hrgen::ProgressiveArch arch;
  arch.latent_dim = 64;
  arch.widths = {64, 32, 16};
  hrgen::ProgressiveGenerator g(arch, 2);
  degrader::GeneratorArch ga;
  ga.width = 16;
  auto deg = degrader::make_model(ga, degrader::DiscriminatorArch{}, 1, torch::kFloat);
  for (auto& p : g->parameters()) p.set_requires_grad(false);
  for (auto& p : deg.generator->parameters()) p.set_requires_grad(false);
  auto gen = make_generator(4);
  const auto noise = torch::randn({1, degrader::kNoiseDim}, gen);
  const naminvert::Mapping gmap = [&](const torch::Tensor& z) {
    return torch::nn::functional::interpolate(
        g->forward(z, 2, 1.0),
        torch::nn::functional::InterpolateFuncOptions().size(std::vector<int64_t>{64, 64}).mode(torch::kNearest));
  };
  const naminvert::Mapping dmap = [&](const torch::Tensor& hr) { return deg.generator->forward(hr, noise); };
  const auto target = torch::rand({1, 3, 16, 16}, gen) * 2 - 1;
  naminvert::InversionOptions opts;
  opts.latent_shape = {64};
  opts.iterations = state.range(0);
  for (auto _ : state) benchmark::DoNotOptimize(naminvert::invert(target, gmap, dmap, opts).best_objective);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_InversionIterations)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_HeatmapMetric(benchmark::State& state) {
  auto gen = make_generator(5);
  const metrics::HeatmapSet a(torch::rand({state.range(0), 64, 64}, gen, torch::kDouble));
  const metrics::HeatmapSet b(torch::rand({state.range(0), 64, 64}, gen, torch::kDouble));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::heatmap_metric(a, b));
}
BENCHMARK(BM_HeatmapMetric)->Arg(4)->Arg(68);

void BM_SyntheticLandmarks(benchmark::State& state) {
  const metrics::SyntheticLandmarkBackend backend;
  const auto face = imagedata::synth_dataset(1, 64, 6).image(0);
  for (auto _ : state) benchmark::DoNotOptimize(backend.heatmaps(face));
}
BENCHMARK(BM_SyntheticLandmarks);

}  // namespace

BENCHMARK_MAIN();
