#include <benchmark/benchmark.h>

#include "memseg/memory.hpp"
#include "memseg/network.hpp"
#include "memseg/simulation.hpp"
#include "memseg/texture.hpp"

using namespace memseg;

namespace {

torch::Tensor rand_features(std::int64_t n, std::int64_t c, std::int64_t hw, std::uint64_t seed) {
  auto gen = at::detail::createCPUGenerator(seed);
  return torch::rand({n, c, hw, hw}, gen);
}

// Memory difference and selection on resnet18-sized pyramids at 256x256 input.
void BM_BestDifference(benchmark::State& state) {
  torch::set_num_threads(1);
  const auto n = state.range(0);
  MemoryPool pool{rand_features(n, 64, 64, 1), rand_features(n, 128, 32, 2), rand_features(n, 256, 16, 3),
                  {}, 0};
  FeaturePyramid in{rand_features(1, 64, 64, 4), rand_features(1, 128, 32, 5), rand_features(1, 256, 16, 6),
                    {}};
  for (auto _ : state) {
    auto di = best_difference(pool, in);
    benchmark::DoNotOptimize(di.d1.data_ptr());
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_BestDifference)->Arg(1)->Arg(30)->Arg(70)->Unit(benchmark::kMillisecond)->Complexity();

void BM_Simulate(benchmark::State& state) {
  torch::set_num_threads(1);
  const auto size = state.range(0);
  auto img = procedural_category_sample(size, 1, 0);
  auto textures = TextureSource::procedural(2);
  Rng rng(3);
  SimConfig cfg;
  for (auto _ : state) {
    auto s = simulate(img, cfg, textures, rng);
    benchmark::DoNotOptimize(s.image.tensor().data_ptr());
  }
}
BENCHMARK(BM_Simulate)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_ToyForward(benchmark::State& state) {
  torch::set_num_threads(1);
  const auto size = state.range(0);
  NetworkConfig cfg;
  cfg.encoder.kind = EncoderConfig::Kind::kToy;
  cfg.encoder.base_width = state.range(1);
  cfg.image_size = size;
  SegModel model(cfg);
  std::vector<Image> normals;
  for (std::uint64_t i = 0; i < 4; ++i) normals.push_back(procedural_category_sample(size, 1, i));
  model->set_memory_pool(pool_from_images(model->encoder(), normals));
  model->eval();
  auto img = procedural_category_sample(size, 1, 9);
  for (auto _ : state) {
    auto map = forward(model, img);
    benchmark::DoNotOptimize(map.probs.data_ptr());
  }
}
BENCHMARK(BM_ToyForward)->Args({64, 8})->Args({256, 16})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
