#pragma once

#include <filesystem>

#include <opencv2/core.hpp>

#include "memseg/common.hpp"

namespace memseg {

/// Converts an 8-bit or 16-bit, 1/3/4-channel BGR(A) matrix to an Image.
/// Grayscale input is replicated to three channels.
Image image_from_mat(const cv::Mat& mat);

/// Converts to an 8-bit BGR matrix (values clamped to [0,1] and rounded).
cv::Mat image_to_mat(const Image& image);

/// Decodes `path`, resizes to size x size with bilinear sampling and scales to [0,1].
Image load_image(const std::filesystem::path& path, std::int64_t size);

/// Loads a ground-truth mask, resizes it bilinearly and binarizes at 0.5.
BinaryMask load_mask(const std::filesystem::path& path, std::int64_t size);

void save_image(const Image& image, const std::filesystem::path& path);
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

/// Writes an HxW map in [0,1] rendered with OpenCV's JET colormap
/// (0 -> dark blue, 1 -> dark red).
void save_heatmap(const torch::Tensor& map, const std::filesystem::path& path);

/// Writes an HxW map in [0,1] as an 8-bit grayscale PNG.
void save_gray(const torch::Tensor& map, const std::filesystem::path& path);

/// True for file extensions the loader accepts (png, jpg, jpeg, bmp, tif, tiff).
bool is_image_file(const std::filesystem::path& path);

}  // namespace memseg
