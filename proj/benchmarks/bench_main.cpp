#include <benchmark/benchmark.h>

#include "agdc/drc.hpp"
#include "agdc/generator.hpp"
#include "agdc/model.hpp"
#include "agdc/synthgen.hpp"

namespace {

std::vector<agdc::LayoutSample> bench_layouts() {
  agdc::SynthConfig c;
  c.count = 8;
  c.seed = 1;
  return agdc::generate_layouts(c);
}

void BM_DrcCheck(benchmark::State& state) {
  const auto layouts = bench_layouts();
  std::size_t rects = 0;
  for (const auto& l : layouts) rects += l.rects.size();
  for (auto _ : state) {
    for (const auto& l : layouts) benchmark::DoNotOptimize(agdc::check(l));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rects));
}
BENCHMARK(BM_DrcCheck);

void BM_UnionArea(benchmark::State& state) {
  std::vector<agdc::Rect> rects;
  agdc::Rng rng(3);
  std::uniform_int_distribution<std::int64_t> pos(0, 39000), size(1, 1000);
  for (int i = 0; i < state.range(0); ++i) rects.push_back({agdc::kPowerLayer, pos(rng), pos(rng), size(rng), size(rng)});
  for (auto _ : state) benchmark::DoNotOptimize(agdc::multi_cover_area(rects));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_UnionArea)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

void BM_BackboneForward(benchmark::State& state) {
  const agdc::ModelConfig mc{.d_model = 64, .layers = 4, .heads = 4, .max_len = 128, .seed = 0, .init_std = 0.02,
                             .dropout = 0.0};
  agdc::Model model(agdc::layout_schema(), mc, agdc::DiffusionConfig{});
  const auto seq = agdc::layout_to_sequence(bench_layouts().front(), model.schema());
  std::vector<agdc::AtomicUnit> units(seq.units.begin(),
                                      seq.units.begin() + std::min<std::ptrdiff_t>(state.range(0), std::ssize(seq.units)));
  for (auto _ : state) benchmark::DoNotOptimize(agdc::forward(units, model.backbone(), model.params()));
}
BENCHMARK(BM_BackboneForward)->Arg(16)->Arg(64)->Arg(128);

void BM_DiffusionSample(benchmark::State& state) {
  agdc::Model model(agdc::layout_schema(), agdc::ModelConfig{}, agdc::DiffusionConfig{});
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(model.model_config().d_model);
  const auto steps = agdc::stride_steps(model.schedule().steps(), static_cast<int>(state.range(0)));
  agdc::Rng rng(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(agdc::sample_reverse(model.denoiser(), model.params(), z, model.schedule(), steps,
                                                  agdc::SamplerMode::ancestral, rng));
  }
}
BENCHMARK(BM_DiffusionSample)->Arg(1)->Arg(5)->Arg(20);

}  // namespace

BENCHMARK_MAIN();
