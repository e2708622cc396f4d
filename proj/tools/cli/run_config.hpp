#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "memseg/losses.hpp"
#include "memseg/network.hpp"
#include "memseg/simulation.hpp"
#include "memseg/texture.hpp"
#include "memseg/toyset.hpp"
#include "memseg/training.hpp"

namespace memseg::cli {

/// Bad flags, config schema violations and invalid paths (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSection {
  std::filesystem::path root;
  std::string category;
  std::int64_t image_size = 256;
};

struct TextureSection {
  std::string mode = "procedural";  // "procedural" or "directory"
  std::filesystem::path dir;
};

struct EncoderSection {
  std::string kind = "resnet18";  // "resnet18" or "toy"
  std::filesystem::path weights;
  std::int64_t base_width = 64;
};

struct TrainSection {
  std::int64_t iterations = 2700;
  std::int64_t normal = 4;
  std::int64_t abnormal = 4;
  std::int64_t checkpoint_every = 0;
  std::int64_t log_every = 50;
  bool exclude_memory_images = false;
};

struct MemorySection {
  std::int64_t size = 30;
  bool per_scale_argmin = false;
};

struct EvalSection {
  std::int64_t top_k = 100;
  bool heatmaps = true;
};

struct BenchSection {
  std::int64_t warmup = 5;
  std::int64_t reps = 50;
  bool deterministic = false;
};

struct ToySection {
  std::int64_t count = 60;
  double min_size = 0.06;
  double max_size = 0.18;
  double min_aspect = 0.5;
  double max_aspect = 2.0;
  std::string defect = "toy";
  bool copy_normals = true;
};

/// Every knob of a run. Defaults follow the reference training recipe:
/// 256x256 inputs, batch 4 normal + 4 simulated, 2700 SGD iterations at
/// lr 0.04, focal gamma 4, loss weights 0.6/0.4, 30 memory samples and
/// top-100 image scoring.
struct RunConfig {
  DatasetSection dataset;
  TextureSection textures;
  EncoderSection encoder;
  SimConfig sim;
  LossConfig loss;
  OptimizerConfig optimizer;
  TrainSection train;
  MemorySection memory;
  AblationFlags ablation;
  std::int64_t ca_reduction = 16;
  EvalSection eval;
  BenchSection bench;
  ToySection toyset;
  std::uint64_t seed = 0;
  bool deterministic = true;
  std::int64_t threads = 0;  // 0: 1 thread when deterministic, else all cores
  std::filesystem::path out = "out";

  /// Throws UsageError on out-of-range values.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Strict conversion: unknown keys and mistyped values raise UsageError.
/// Missing keys keep their defaults.
RunConfig from_json(const nlohmann::json& j);

/// Dotted paths of every leaf field, in document order (e.g. "sim.delta_min").
std::vector<std::string> leaf_paths();

/// Flag spelling for a leaf path: "sim.delta_min" -> "--sim-delta-min".
std::string flag_for_path(const std::string& path);

/// Reads a JSON config file (comments allowed) and checks it against the schema.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Sets the leaf at `path` from command-line text, converting to the type of
/// the default value. Throws UsageError for unknown paths or bad values.
void apply_override(nlohmann::json& doc, const std::string& path, const std::string& text);

/// defaults <- file <- overrides, validated.
RunConfig resolve_config(const std::filesystem::path& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

/// Library views of the run configuration.
NetworkConfig network_config(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
TextureSource texture_source(const RunConfig& cfg);
ToySpec toy_spec(const RunConfig& cfg);

/// Per-purpose seeds derived from the single run seed.
namespace seeds {
inline constexpr std::uint64_t kEncoder = 1;
inline constexpr std::uint64_t kNetwork = 2;
inline constexpr std::uint64_t kPool = 3;
inline constexpr std::uint64_t kTrain = 4;
inline constexpr std::uint64_t kTextures = 5;
inline constexpr std::uint64_t kSimulate = 6;
inline constexpr std::uint64_t kToyset = 7;
inline constexpr std::uint64_t kSynth = 8;
inline constexpr std::uint64_t kBench = 9;
}  // namespace seeds

}  // namespace memseg::cli
