#include "memseg/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "memseg/image_io.hpp"
#include "memseg/metrics.hpp"

namespace memseg {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double nearest_rank(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

}  // namespace

LatencyStats summarize_latency(std::vector<double> samples_ms) {
  LatencyStats stats;
  stats.hardware = hardware_description();
  stats.samples_ms = samples_ms;
  if (samples_ms.empty()) return stats;
  std::sort(samples_ms.begin(), samples_ms.end());
  stats.min_ms = samples_ms.front();
  stats.max_ms = samples_ms.back();
  stats.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) /
                  static_cast<double>(samples_ms.size());
  stats.p50_ms = nearest_rank(samples_ms, 0.50);
  stats.p95_ms = nearest_rank(samples_ms, 0.95);
  return stats;
}

std::string hardware_description() {
  std::string cpu = "unknown cpu";
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  return cpu + " | torch threads=" + std::to_string(torch::get_num_threads());
}

EvalReport evaluate(const Predictor& predict, const DatasetIndex& test, const EvalOptions& options) {
  EvalReport report;
  std::vector<double> image_scores;
  std::vector<std::uint8_t> image_labels;
  std::vector<double> pixel_scores;
  std::vector<std::uint8_t> pixel_labels;
  std::vector<double> latency;

  for (const auto& item : test.items) {
    Image image = load_image(item.image, options.image_size);
    const auto start = Clock::now();
    torch::Tensor map = predict(image).detach().to(torch::kFloat64).contiguous();
    latency.push_back(elapsed_ms(start));
    if (map.dim() != 2 || map.size(0) != image.height() || map.size(1) != image.width()) {
      throw Error("evaluate: predictor returned a map of the wrong shape for " +
                  item.image.string());
    }

    EvalItem out{item.image, item.label, item.defect, image_score(map, options.top_k), false};
    image_scores.push_back(out.score);
    image_labels.push_back(item.label == Label::kAnomalous ? 1 : 0);
    (item.label == Label::kAnomalous ? report.anomalous_count : report.normal_count)++;

    torch::Tensor truth;
    if (item.label == Label::kNormal) {
      truth = torch::zeros_like(map);
    } else if (item.mask) {
      truth = load_mask(*item.mask, options.image_size).tensor().to(torch::kFloat64);
    }
    if (truth.defined()) {
      out.pixel_eval = true;
      ++report.pixel_images;
      const double* s = map.data_ptr<double>();
      auto t = truth.contiguous();
      const double* l = t.data_ptr<double>();
      for (std::int64_t k = 0; k < map.numel(); ++k) {
        pixel_scores.push_back(s[k]);
        pixel_labels.push_back(l[k] > 0.5 ? 1 : 0);
      }
    }
    if (options.heatmap_dir) {
      save_heatmap(map, *options.heatmap_dir / (item.defect + "_" + item.image.stem().string() + ".png"));
    }
    report.items.push_back(std::move(out));
  }

  report.image_auroc = auroc(image_scores, image_labels);
  const bool pixel_both = std::find(pixel_labels.begin(), pixel_labels.end(), 1) != pixel_labels.end() &&
                          std::find(pixel_labels.begin(), pixel_labels.end(), 0) != pixel_labels.end();
  report.pixel_auroc = pixel_both ? auroc(pixel_scores, pixel_labels)
                                  : std::numeric_limits<double>::quiet_NaN();
  report.latency = summarize_latency(std::move(latency));
  return report;
}

EvalReport evaluate_model(SegModel& model, const DatasetIndex& test, const EvalOptions& options) {
  model->eval();
  return evaluate([&model](const Image& image) { return forward(model, image).probs; }, test,
                  options);
}

LatencyStats benchmark(SegModel& model, const std::vector<Image>& images, std::int64_t warmup,
                       std::int64_t reps) {
  if (images.empty()) {
    throw Error("benchmark: need at least one image");
  }
  model->eval();
  for (std::int64_t i = 0; i < warmup; ++i) {
    forward(model, images[static_cast<std::size_t>(i) % images.size()]);
  }
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(std::max<std::int64_t>(reps, 0)));
  for (std::int64_t i = 0; i < reps; ++i) {
    const auto start = Clock::now();
    forward(model, images[static_cast<std::size_t>(i) % images.size()]);
    samples.push_back(elapsed_ms(start));
  }
  return summarize_latency(std::move(samples));
}

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path,
                    const std::vector<std::string>& comment) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  for (const auto& line : comment) out << "# " << line << "\n";
  out << "image,label,defect,score,pixel_eval\n" << std::setprecision(9);
  for (const auto& item : report.items) {
    out << item.image.string() << "," << (item.label == Label::kAnomalous ? 1 : 0) << ","
        << item.defect << "," << item.score << "," << (item.pixel_eval ? 1 : 0) << "\n";
  }
}

std::string format_latency(const LatencyStats& stats) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << "latency ms/image: mean=" << stats.mean_ms
    << " p50=" << stats.p50_ms << " p95=" << stats.p95_ms << " min=" << stats.min_ms
    << " max=" << stats.max_ms << " (n=" << stats.samples_ms.size() << ")\n"
    << "hardware: " << stats.hardware << "\n";
  return s.str();
}

std::string format_summary(const EvalReport& report, const std::vector<std::string>& header) {
  std::ostringstream s;
  for (const auto& line : header) s << line << "\n";
  s << std::fixed << std::setprecision(4);
  s << "images: " << report.items.size() << " (normal " << report.normal_count << ", anomalous "
    << report.anomalous_count << ", pixel-labelled " << report.pixel_images << ")\n";
  s << "image AUROC: " << report.image_auroc << "\n";
  s << "pixel AUROC: " << report.pixel_auroc << "\n";
  s << format_latency(report.latency);
  return s.str();
}

}  // namespace memseg
