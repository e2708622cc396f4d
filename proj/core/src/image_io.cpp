#include "memseg/image_io.hpp"

#include <algorithm>
#include <cctype>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace memseg {
namespace {

cv::Mat read_or_throw(const std::filesystem::path& path) {
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) {
    throw Error("cannot decode image: " + path.string());
  }
  return mat;
}

void write_or_throw(const cv::Mat& mat, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  if (!cv::imwrite(path.string(), mat)) {
    throw Error("cannot write image: " + path.string());
  }
}

cv::Mat map_to_u8(const torch::Tensor& map) {
  if (map.dim() != 2) {
    throw Error("expected an HxW map");
  }
  auto u8 = (map.detach().to(torch::kFloat32).clamp(0, 1) * 255.0f)
                .round()
                .to(torch::kUInt8)
                .contiguous();
  cv::Mat mat(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC1, u8.data_ptr());
  return mat.clone();
}

}  // namespace

Image image_from_mat(const cv::Mat& input) {
  cv::Mat mat = input;
  double scale = 1.0;
  switch (mat.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    case CV_32F: scale = 1.0; break;
    default: throw Error("unsupported image depth");
  }
  cv::Mat bgr;
  switch (mat.channels()) {
    case 1: cv::cvtColor(mat, bgr, cv::COLOR_GRAY2BGR); break;
    case 3: bgr = mat; break;
    case 4: cv::cvtColor(mat, bgr, cv::COLOR_BGRA2BGR); break;
    default: throw Error("unsupported channel count");
  }
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  cv::Mat f32;
  rgb.convertTo(f32, CV_32FC3, scale);
  auto hwc = torch::from_blob(f32.data, {f32.rows, f32.cols, 3}, torch::kFloat32);
  return Image(hwc.permute({2, 0, 1}).clone().clamp_(0, 1));
}

cv::Mat image_to_mat(const Image& image) {
  auto hwc = (image.tensor().detach().to(torch::kFloat32).clamp(0, 1) * 255.0f)
                 .round()
                 .to(torch::kUInt8)
                 .permute({1, 2, 0})
                 .contiguous();
  cv::Mat rgb(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3, hwc.data_ptr());
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

Image load_image(const std::filesystem::path& path, std::int64_t size) {
  if (size <= 0) {
    throw Error("load_image: size must be positive");
  }
  cv::Mat mat = read_or_throw(path);
  if (mat.rows != size || mat.cols != size) {
    cv::Mat resized;
    cv::resize(mat, resized, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0,
               cv::INTER_LINEAR);
    mat = resized;
  }
  return image_from_mat(mat);
}

BinaryMask load_mask(const std::filesystem::path& path, std::int64_t size) {
  Image image = load_image(path, size);
  auto gray = image.tensor().mean(0);
  return BinaryMask((gray >= 0.5f).to(torch::kFloat32), MaskRole::kGroundTruth);
}

void save_image(const Image& image, const std::filesystem::path& path) {
  write_or_throw(image_to_mat(image), path);
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
  write_or_throw(map_to_u8(mask.tensor()), path);
}

void save_heatmap(const torch::Tensor& map, const std::filesystem::path& path) {
  cv::Mat colored;
  cv::applyColorMap(map_to_u8(map), colored, cv::COLORMAP_JET);
  write_or_throw(colored, path);
}

void save_gray(const torch::Tensor& map, const std::filesystem::path& path) {
  write_or_throw(map_to_u8(map), path);
}

bool is_image_file(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" ||
         ext == ".tiff";
}

}  // namespace memseg
