#include "memseg/simulation.hpp"

#include <algorithm>
#include <cstring>
#include <iostream>
#include <numeric>

#include <opencv2/imgproc.hpp>

#include "memseg/image_io.hpp"

namespace memseg {
namespace {

void require_same_size(const Image& a, const Image& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw Error(std::string(what) + ": image size mismatch");
  }
}

void require_same_size(const Image& a, const BinaryMask& m, const char* what) {
  if (a.height() != m.height() || a.width() != m.width()) {
    throw Error(std::string(what) + ": mask size mismatch");
  }
}

std::int64_t border_count(const cv::Mat& mask) {
  std::int64_t n = 0;
  const int last_row = mask.rows - 1;
  const int last_col = mask.cols - 1;
  for (int c = 0; c < mask.cols; ++c) {
    n += mask.at<std::uint8_t>(0, c) != 0;
    if (last_row > 0) n += mask.at<std::uint8_t>(last_row, c) != 0;
  }
  for (int r = 1; r < last_row; ++r) {
    n += mask.at<std::uint8_t>(r, 0) != 0;
    if (last_col > 0) n += mask.at<std::uint8_t>(r, last_col) != 0;
  }
  return n;
}

}  // namespace

void SimConfig::validate(std::int64_t height, std::int64_t width) const {
  if (!(0.0 <= delta_min && delta_min <= delta_max && delta_max <= 1.0)) {
    throw Error("SimConfig: delta range must lie within [0,1]");
  }
  if (fixed_delta && !(*fixed_delta >= 0.0 && *fixed_delta <= 1.0)) {
    throw Error("SimConfig: fixed delta must lie within [0,1]");
  }
  if (!(structural_prob >= 0.0 && structural_prob <= 1.0)) {
    throw Error("SimConfig: structural probability must lie within [0,1]");
  }
  if (grid_rows < 1 || grid_cols < 1 || height % grid_rows != 0 || width % grid_cols != 0) {
    throw Error("SimConfig: grid " + std::to_string(grid_rows) + "x" + std::to_string(grid_cols) +
                " does not divide " + std::to_string(height) + "x" + std::to_string(width));
  }
  if (morph_kernel < 1) {
    throw Error("SimConfig: morphology kernel must be >= 1");
  }
  if (min_freq_exp < 0 || min_freq_exp > max_freq_exp) {
    throw Error("SimConfig: invalid Perlin frequency range");
  }
  if (max_retries < 1) {
    throw Error("SimConfig: max_retries must be >= 1");
  }
}

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::kTextural ? "textural" : "structural";
}

BinaryMask foreground_mask(const Image& image, const SimConfig& cfg) {
  cv::Mat gray;
  cv::cvtColor(image_to_mat(image), gray, cv::COLOR_BGR2GRAY);
  double lo = 0.0;
  double hi = 0.0;
  cv::minMaxLoc(gray, &lo, &hi);
  if (lo == hi) {
    std::cerr << "warning: foreground_mask on a constant image; using an all-one mask\n";
    return BinaryMask::ones(image.height(), image.width(), MaskRole::kForeground);
  }

  cv::Mat bin;
  cv::threshold(gray, bin, 0, 255, cv::THRESH_BINARY | cv::THRESH_OTSU);
  cv::Mat inv = 255 - bin;
  cv::Mat fg = border_count(bin) <= border_count(inv) ? bin : inv;

  const int k = static_cast<int>(cfg.morph_kernel);
  cv::Mat kernel = cv::getStructuringElement(cv::MORPH_RECT, cv::Size(k, k));
  cv::morphologyEx(fg, fg, cv::MORPH_OPEN, kernel);
  cv::morphologyEx(fg, fg, cv::MORPH_CLOSE, kernel);

  auto t = torch::from_blob(fg.data, {fg.rows, fg.cols}, torch::kUInt8);
  return BinaryMask((t > 0).to(torch::kFloat32), MaskRole::kForeground);
}

BinaryMask combine_masks(const BinaryMask& perlin, const BinaryMask* foreground) {
  if (foreground == nullptr) {
    return BinaryMask(perlin.tensor().clone(), MaskRole::kCombined);
  }
  if (perlin.height() != foreground->height() || perlin.width() != foreground->width()) {
    throw Error("combine_masks: mask size mismatch");
  }
  return BinaryMask(perlin.tensor() * foreground->tensor(), MaskRole::kCombined);
}

Image shuffle_tiles(const Image& image, std::int64_t rows, std::int64_t cols,
                    const std::vector<std::int64_t>& perm) {
  if (rows < 1 || cols < 1 || image.height() % rows != 0 || image.width() % cols != 0) {
    throw Error("shuffle_tiles: grid does not divide the image");
  }
  if (static_cast<std::int64_t>(perm.size()) != rows * cols) {
    throw Error("shuffle_tiles: permutation size mismatch");
  }
  const std::int64_t th = image.height() / rows;
  const std::int64_t tw = image.width() / cols;
  const auto& src = image.tensor();
  auto out = torch::empty_like(src);
  for (std::int64_t k = 0; k < rows * cols; ++k) {
    const std::int64_t from = perm[k];
    const std::int64_t fr = from / cols;
    const std::int64_t fc = from % cols;
    const std::int64_t tr = k / cols;
    const std::int64_t tc = k % cols;
    out.slice(1, tr * th, (tr + 1) * th)
        .slice(2, tc * tw, (tc + 1) * tw)
        .copy_(src.slice(1, fr * th, (fr + 1) * th).slice(2, fc * tw, (fc + 1) * tw));
  }
  return Image(out);
}

Image jitter_image(const Image& image, const JitterConfig& jitter, Rng& rng) {
  if (!jitter.enabled) {
    return image.clone();
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto t = image.tensor();
  if (unit(rng) < jitter.mirror_prob) {
    t = t.flip({2});
  }
  if (jitter.rotate) {
    const bool square = image.height() == image.width();
    const int quarter_turns = square ? std::uniform_int_distribution<int>(0, 3)(rng)
                                     : 2 * std::uniform_int_distribution<int>(0, 1)(rng);
    if (quarter_turns != 0) {
      t = torch::rot90(t, quarter_turns, {1, 2});
    }
  }
  const double brightness = 1.0 + jitter.brightness * (2.0 * unit(rng) - 1.0);
  const double saturation = 1.0 + jitter.saturation * (2.0 * unit(rng) - 1.0);
  const double hue_shift = jitter.hue * (2.0 * unit(rng) - 1.0);

  cv::Mat hwc(static_cast<int>(t.size(1)), static_cast<int>(t.size(2)), CV_32FC3);
  auto packed = t.permute({1, 2, 0}).contiguous();
  std::memcpy(hwc.data, packed.data_ptr<float>(), sizeof(float) * packed.numel());
  cv::Mat hsv;
  cv::cvtColor(hwc, hsv, cv::COLOR_RGB2HSV);  // H in [0,360), S,V in [0,1]
  for (int r = 0; r < hsv.rows; ++r) {
    auto* px = hsv.ptr<cv::Vec3f>(r);
    for (int c = 0; c < hsv.cols; ++c) {
      float h = px[c][0] + static_cast<float>(hue_shift * 360.0);
      h = std::fmod(h, 360.0f);
      if (h < 0) h += 360.0f;
      px[c][0] = h;
      px[c][1] = std::clamp(px[c][1] * static_cast<float>(saturation), 0.0f, 1.0f);
      px[c][2] = std::clamp(px[c][2] * static_cast<float>(brightness), 0.0f, 1.0f);
    }
  }
  cv::Mat rgb;
  cv::cvtColor(hsv, rgb, cv::COLOR_HSV2RGB);
  auto out = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kFloat32)
                 .permute({2, 0, 1})
                 .clone()
                 .clamp_(0, 1);
  return Image(out);
}

Image make_structural_noise(const Image& image, std::int64_t rows, std::int64_t cols,
                            const JitterConfig& jitter, Rng& rng) {
  if (rows < 1 || cols < 1 || image.height() % rows != 0 || image.width() % cols != 0) {
    throw Error("make_structural_noise: grid " + std::to_string(rows) + "x" +
                std::to_string(cols) + " does not divide the image");
  }
  Image jittered = jitter_image(image, jitter, rng);
  std::vector<std::int64_t> perm(static_cast<std::size_t>(rows * cols));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return shuffle_tiles(jittered, rows, cols, perm);
}

Image blend_noise_foreground(const Image& image, const Image& noise, const BinaryMask& mask,
                             double delta) {
  require_same_size(image, noise, "blend_noise_foreground");
  require_same_size(image, mask, "blend_noise_foreground");
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw Error("blend_noise_foreground: delta must lie within [0,1]");
  }
  const auto m = mask.tensor().unsqueeze(0);
  const float d = static_cast<float>(delta);
  return Image(d * (m * noise.tensor()) + (1.0f - d) * (m * image.tensor()));
}

Image compose_anomaly(const Image& image, const Image& noise_foreground, const BinaryMask& mask) {
  require_same_size(image, noise_foreground, "compose_anomaly");
  require_same_size(image, mask, "compose_anomaly");
  const auto inv = mask.inverted().tensor().unsqueeze(0);
  return Image(inv * image.tensor() + noise_foreground.tensor());
}

SimulatedSample simulate(const Image& image, const SimConfig& cfg, const TextureSource& textures,
                         Rng& rng) {
  const std::int64_t h = image.height();
  const std::int64_t w = image.width();
  cfg.validate(h, w);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const NoiseKind kind =
      unit(rng) < cfg.structural_prob ? NoiseKind::kStructural : NoiseKind::kTextural;

  BinaryMask fg;
  if (cfg.foreground_enhancement) {
    fg = foreground_mask(image, cfg);
  }

  std::uniform_int_distribution<int> exp_dist(cfg.min_freq_exp, cfg.max_freq_exp);
  BinaryMask mask;
  std::int64_t attempts = 0;
  for (; attempts < cfg.max_retries; ++attempts) {
    const std::int64_t fy = std::min<std::int64_t>(h, std::int64_t{1} << exp_dist(rng));
    const std::int64_t fx = std::min<std::int64_t>(w, std::int64_t{1} << exp_dist(rng));
    PerlinField field = gen_perlin(h, w, fy, fx, rng());
    BinaryMask mp = binarize_perlin(field, cfg.perlin_threshold);
    mask = combine_masks(mp, cfg.foreground_enhancement ? &fg : nullptr);
    if (mask.area() > 0) {
      break;
    }
  }
  if (attempts == cfg.max_retries) {
    throw Error("degenerate mask: empty after " + std::to_string(cfg.max_retries) + " attempts");
  }

  const double delta =
      cfg.fixed_delta ? *cfg.fixed_delta
                      : std::uniform_real_distribution<double>(cfg.delta_min, cfg.delta_max)(rng);

  Image noise = kind == NoiseKind::kStructural
                    ? make_structural_noise(image, cfg.grid_rows, cfg.grid_cols, cfg.jitter, rng)
                    : sample_texture(textures, std::max(h, w), rng);
  if (noise.height() != h || noise.width() != w) {
    noise = Image(noise.tensor().slice(1, 0, h).slice(2, 0, w).contiguous());
  }

  Image fg_noise = blend_noise_foreground(image, noise, mask, delta);
  Image augmented = compose_anomaly(image, fg_noise, mask);
  return {augmented, mask, delta, kind, noise, attempts + 1};
}

}  // namespace memseg
