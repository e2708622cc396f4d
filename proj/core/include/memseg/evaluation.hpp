#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "memseg/dataset.hpp"
#include "memseg/network.hpp"

namespace memseg {

struct LatencyStats {
  std::vector<double> samples_ms;
  double mean_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  std::string hardware;
};

/// Order statistics of the samples (nearest-rank percentiles).
LatencyStats summarize_latency(std::vector<double> samples_ms);

/// CPU model and libtorch thread count, e.g. "Intel(R) Xeon(R) ... | torch threads=1".
std::string hardware_description();

struct EvalItem {
  std::filesystem::path image;
  Label label = Label::kNormal;
  std::string defect;
  double score = 0.0;
  bool pixel_eval = false;
};

struct EvalReport {
  double image_auroc = 0.0;
  /// NaN when no image carries pixel labels of both classes.
  double pixel_auroc = 0.0;
  std::vector<EvalItem> items;
  std::size_t normal_count = 0;
  std::size_t anomalous_count = 0;
  std::size_t pixel_images = 0;
  LatencyStats latency;
};

struct EvalOptions {
  std::int64_t image_size = 256;
  std::int64_t top_k = 100;
  /// When set, one JET heatmap PNG per test image is written here.
  std::optional<std::filesystem::path> heatmap_dir;
};

/// Anomaly map (HxW) for one image.
using Predictor = std::function<torch::Tensor(const Image&)>;

/// Scores every test image with `predict` and computes image- and
/// pixel-level AUROC. Pixel AUROC pools all pixels of normal images (label
/// 0) and of anomalous images that have a mask; anomalous images without a
/// mask only enter the image-level metric.
EvalReport evaluate(const Predictor& predict, const DatasetIndex& test, const EvalOptions& options);

/// evaluate() with the model's forward pass in eval mode.
EvalReport evaluate_model(SegModel& model, const DatasetIndex& test, const EvalOptions& options);

/// Per-image forward latency after `warmup` untimed passes; `reps` timed
/// passes cycle through `images`.
LatencyStats benchmark(SegModel& model, const std::vector<Image>& images, std::int64_t warmup,
                       std::int64_t reps);

/// Per-image CSV (image,label,defect,score,pixel_eval) preceded by "# " comment lines.
void write_eval_csv(const EvalReport& report, const std::filesystem::path& path,
                    const std::vector<std::string>& comment = {});

/// Human-readable summary.
std::string format_summary(const EvalReport& report, const std::vector<std::string>& header = {});

std::string format_latency(const LatencyStats& stats);

}  // namespace memseg
