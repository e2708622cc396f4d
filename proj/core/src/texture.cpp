#include "memseg/texture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <ATen/CPUGeneratorImpl.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "memseg/dataset.hpp"
#include "memseg/image_io.hpp"

namespace memseg {
namespace {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

torch::Tensor normalize01(const torch::Tensor& x) {
  auto lo = x.amin({1, 2}, true);
  auto hi = x.amax({1, 2}, true);
  return (x - lo) / (hi - lo).clamp_min(1e-6);
}

torch::Tensor random_color(Rng& rng) {
  return torch::tensor({static_cast<float>(uniform(rng, 0, 1)), static_cast<float>(uniform(rng, 0, 1)),
                        static_cast<float>(uniform(rng, 0, 1))})
      .view({3, 1, 1});
}

// Bilinearly upsampled uniform noise, one lattice cell per `cell` pixels.
torch::Tensor smooth_noise(std::int64_t size, std::int64_t cells, at::Generator& gen) {
  auto coarse = torch::rand({1, 3, cells, cells}, gen);
  return torch::nn::functional::interpolate(
             coarse, torch::nn::functional::InterpolateFuncOptions()
                         .size(std::vector<std::int64_t>{size, size})
                         .mode(torch::kBilinear)
                         .align_corners(false))
      .squeeze(0);
}

}  // namespace

Image procedural_texture(std::int64_t size, std::uint64_t seed) {
  Rng rng(seed);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(derive_seed(seed, 1));
  auto coords = torch::arange(size, torch::kFloat32) / static_cast<float>(size);
  auto grid = torch::meshgrid({coords, coords}, "ij");
  const auto& ys = grid[0];
  const auto& xs = grid[1];

  auto image = torch::zeros({3, size, size});
  double total_weight = 0.0;

  const int gratings = std::uniform_int_distribution<int>(1, 3)(rng);
  for (int g = 0; g < gratings; ++g) {
    const double freq = uniform(rng, 2.0, 24.0);
    const double angle = uniform(rng, 0.0, std::numbers::pi);
    const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    auto wave = 0.5 + 0.5 * torch::sin(2.0 * std::numbers::pi * freq *
                                           (xs * std::cos(angle) + ys * std::sin(angle)) +
                                       phase);
    const double weight = uniform(rng, 0.3, 1.0);
    image += weight * wave.unsqueeze(0) * random_color(rng);
    total_weight += weight;
  }

  if (std::bernoulli_distribution(0.5)(rng)) {
    const double cells = uniform(rng, 3.0, 16.0);
    const double angle = uniform(rng, 0.0, std::numbers::pi / 2);
    auto u = xs * std::cos(angle) - ys * std::sin(angle);
    auto v = xs * std::sin(angle) + ys * std::cos(angle);
    auto checker = torch::remainder(torch::floor(u * cells) + torch::floor(v * cells), 2.0);
    const double weight = uniform(rng, 0.3, 1.0);
    auto a = random_color(rng);
    auto b = random_color(rng);
    image += weight * (a * checker.unsqueeze(0) + b * (1 - checker.unsqueeze(0)));
    total_weight += weight;
  }

  const std::int64_t noise_cells = std::uniform_int_distribution<std::int64_t>(4, 32)(rng);
  const double noise_weight = uniform(rng, 0.2, 1.0);
  image += noise_weight * smooth_noise(size, noise_cells, gen);
  total_weight += noise_weight;

  return Image(normalize01(image / total_weight).clamp_(0, 1).contiguous());
}

Image sample_texture(const TextureSource& src, std::int64_t size, Rng& rng) {
  if (src.mode == TextureSource::Mode::kProcedural) {
    const std::uint64_t seed = derive_seed(src.seed, rng());
    return procedural_texture(size, seed);
  }

  DatasetIndex files = scan_directory(src.directory);
  if (files.items.empty()) {
    throw Error("texture directory has no images: " + src.directory.string());
  }
  const auto pick = std::uniform_int_distribution<std::size_t>(0, files.items.size() - 1)(rng);
  const auto& path = files.items[pick].image;
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (mat.empty()) {
    throw Error("cannot decode image: " + path.string());
  }
  const int short_side = std::min(mat.rows, mat.cols);
  const int side = std::max(
      1, static_cast<int>(std::lround(short_side * uniform(rng, 0.5, 1.0))));
  const int x0 = std::uniform_int_distribution<int>(0, mat.cols - side)(rng);
  const int y0 = std::uniform_int_distribution<int>(0, mat.rows - side)(rng);
  cv::Mat crop = mat(cv::Rect(x0, y0, side, side));
  cv::Mat resized;
  cv::resize(crop, resized, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0,
             cv::INTER_LINEAR);
  return image_from_mat(resized);
}

Image procedural_category_sample(std::int64_t size, std::uint64_t category_seed,
                                 std::uint64_t sample_seed) {
  const std::int64_t big = size * 2;
  Image base = procedural_texture(big, category_seed);
  Rng rng(derive_seed(category_seed, sample_seed));
  const auto y0 = std::uniform_int_distribution<std::int64_t>(0, big - size)(rng);
  const auto x0 = std::uniform_int_distribution<std::int64_t>(0, big - size)(rng);
  auto crop = base.tensor().slice(1, y0, y0 + size).slice(2, x0, x0 + size);
  const float gain = static_cast<float>(uniform(rng, 0.95, 1.05));
  const float offset = static_cast<float>(uniform(rng, -0.02, 0.02));
  auto gen = at::make_generator<at::CPUGeneratorImpl>(derive_seed(sample_seed, 7));
  auto grain = 0.01f * torch::randn({1, size, size}, gen);
  return Image((crop * gain + offset + grain).clamp(0, 1).contiguous());
}

}  // namespace memseg
