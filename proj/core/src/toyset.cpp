#include "memseg/toyset.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "memseg/image_io.hpp"

namespace fs = std::filesystem;

namespace memseg {
namespace {

using Outline = std::vector<cv::Point2d>;

Outline unit_outline(ToyShape shape) {
  Outline pts;
  switch (shape) {
    case ToyShape::kRectangle:
      pts = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
      break;
    case ToyShape::kTriangle:
      pts = {{0, -1}, {0.8660254, 0.5}, {-0.8660254, 0.5}};
      break;
    case ToyShape::kLightning:
      pts = {{-0.15, -1}, {0.55, -1}, {0.15, -0.2}, {0.55, -0.2},
             {-0.35, 1},  {-0.05, 0.1}, {-0.45, 0.1}};
      break;
    case ToyShape::kStar:
      for (int i = 0; i < 10; ++i) {
        const double r = i % 2 == 0 ? 1.0 : 0.4;
        const double a = -std::numbers::pi / 2 + i * std::numbers::pi / 5;
        pts.emplace_back(r * std::cos(a), r * std::sin(a));
      }
      break;
    case ToyShape::kHeart:
      for (int i = 0; i < 64; ++i) {
        const double t = 2 * std::numbers::pi * i / 64;
        const double x = 16 * std::pow(std::sin(t), 3);
        const double y = 13 * std::cos(t) - 5 * std::cos(2 * t) - 2 * std::cos(3 * t) - std::cos(4 * t);
        pts.emplace_back(x / 17.0, -y / 17.0);
      }
      break;
    case ToyShape::kCircle:
      for (int i = 0; i < 64; ++i) {
        const double t = 2 * std::numbers::pi * i / 64;
        pts.emplace_back(std::cos(t), std::sin(t));
      }
      break;
  }
  return pts;
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

std::string to_string(ToyShape shape) {
  switch (shape) {
    case ToyShape::kRectangle: return "rectangle";
    case ToyShape::kTriangle: return "triangle";
    case ToyShape::kLightning: return "lightning";
    case ToyShape::kStar: return "star";
    case ToyShape::kHeart: return "heart";
    case ToyShape::kCircle: return "circle";
  }
  return "unknown";
}

PaintedImage paint_toy_shape(const Image& source, ToyShape shape, const ToySpec& spec, Rng& rng) {
  const cv::Mat src = image_to_mat(source);  // BGR u8
  const double side = static_cast<double>(std::min(src.rows, src.cols));

  for (int attempt = 0; attempt < 100; ++attempt) {
    ToyShapeInfo info;
    info.shape = shape;
    info.size_px = std::max(2.0, uniform(rng, spec.min_size, spec.max_size) * side);
    info.aspect = uniform(rng, spec.min_aspect, spec.max_aspect);
    info.angle_deg = uniform(rng, 0.0, 360.0);
    info.center_x = uniform(rng, info.size_px, src.cols - info.size_px);
    info.center_y = uniform(rng, info.size_px, src.rows - info.size_px);
    for (auto& c : info.color_rgb) c = std::uniform_int_distribution<int>(0, 255)(rng);

    const double a = info.angle_deg * std::numbers::pi / 180.0;
    const double sx = info.size_px * std::sqrt(info.aspect);
    const double sy = info.size_px / std::sqrt(info.aspect);
    std::vector<cv::Point> polygon;
    for (const auto& p : unit_outline(shape)) {
      const double x = p.x * sx;
      const double y = p.y * sy;
      polygon.emplace_back(
          static_cast<int>(std::lround(info.center_x + x * std::cos(a) - y * std::sin(a))),
          static_cast<int>(std::lround(info.center_y + x * std::sin(a) + y * std::cos(a))));
    }

    cv::Mat mask = cv::Mat::zeros(src.size(), CV_8UC1);
    cv::fillPoly(mask, std::vector<std::vector<cv::Point>>{polygon}, cv::Scalar(255), cv::LINE_8);
    info.mask_area = cv::countNonZero(mask);
    if (info.mask_area == 0) continue;

    const cv::Vec3b bgr(static_cast<std::uint8_t>(info.color_rgb[2]),
                        static_cast<std::uint8_t>(info.color_rgb[1]),
                        static_cast<std::uint8_t>(info.color_rgb[0]));
    bool collides = false;
    for (int r = 0; r < src.rows && !collides; ++r) {
      for (int c = 0; c < src.cols; ++c) {
        if (mask.at<std::uint8_t>(r, c) && src.at<cv::Vec3b>(r, c) == bgr) {
          collides = true;
          break;
        }
      }
    }
    if (collides) continue;

    cv::Mat painted = src.clone();
    painted.setTo(cv::Scalar(bgr[0], bgr[1], bgr[2]), mask);
    auto mask_t = torch::from_blob(mask.data, {mask.rows, mask.cols}, torch::kUInt8);
    return {image_from_mat(painted), BinaryMask((mask_t > 0).to(torch::kFloat32), MaskRole::kGroundTruth),
            info};
  }
  throw Error("paint_toy_shape: could not place a visible shape");
}

ToysetLog gen_toyset(const DatasetIndex& normals, const ToySpec& spec, const fs::path& out) {
  if (normals.items.empty()) {
    throw Error("gen_toyset: need at least one normal image");
  }
  ToysetLog log;
  log.root = out / spec.category;
  const fs::path test_dir = log.root / "test" / spec.defect;
  const fs::path gt_dir = log.root / "ground_truth" / spec.defect;
  const fs::path good_dir = log.root / "test" / "good";
  fs::create_directories(test_dir);
  fs::create_directories(gt_dir);

  auto name = [](std::size_t i) {
    std::ostringstream s;
    s << std::setw(3) << std::setfill('0') << i;
    return s.str();
  };

  if (spec.copy_normals) {
    fs::create_directories(good_dir);
    for (std::size_t i = 0; i < normals.items.size(); ++i) {
      const fs::path dst = good_dir / (name(i) + ".png");
      save_image(load_image(normals.items[i].image, spec.image_size), dst);
      log.normals.push_back(dst);
    }
  }

  Rng rng(spec.seed);
  std::uniform_int_distribution<std::size_t> kind(0, kAllToyShapes.size() - 1);
  for (std::int64_t i = 0; i < spec.count; ++i) {
    const auto& src = normals.items[static_cast<std::size_t>(i) % normals.items.size()];
    const ToyShape shape = kAllToyShapes[kind(rng)];
    Rng item_rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));
    PaintedImage painted =
        paint_toy_shape(load_image(src.image, spec.image_size), shape, spec, item_rng);
    ToySample sample{test_dir / (name(static_cast<std::size_t>(i)) + ".png"),
                     gt_dir / (name(static_cast<std::size_t>(i)) + "_mask.png"), src.image,
                     painted.info};
    save_image(painted.image, sample.image);
    save_mask(painted.mask, sample.mask);
    log.samples.push_back(std::move(sample));
  }

  std::ofstream csv(log.root / "generation_log.csv");
  csv << "image,mask,source,shape,r,g,b,size_px,angle_deg,aspect,center_x,center_y,mask_area\n";
  for (const auto& s : log.samples) {
    csv << s.image.string() << "," << s.mask.string() << "," << s.source.string() << ","
        << to_string(s.info.shape) << "," << s.info.color_rgb[0] << "," << s.info.color_rgb[1]
        << "," << s.info.color_rgb[2] << "," << s.info.size_px << "," << s.info.angle_deg << ","
        << s.info.aspect << "," << s.info.center_x << "," << s.info.center_y << ","
        << s.info.mask_area << "\n";
  }
  return log;
}

}  // namespace memseg
