#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "memseg/losses.hpp"
#include "memseg/network.hpp"
#include "memseg/simulation.hpp"

namespace memseg {

struct BatchComposition {
  std::int64_t normal = 4;
  std::int64_t abnormal = 4;

  std::int64_t size() const { return normal + abnormal; }
};

struct BatchItemInfo {
  std::size_t source = 0;  // index into the training images
  bool simulated = false;
  double delta = 0.0;
  NoiseKind kind = NoiseKind::kTextural;
};

/// Normal items first, then simulated ones. Masks are all-zero for normals.
struct TrainBatch {
  torch::Tensor images;  // B x 3 x H x W
  torch::Tensor masks;   // B x H x W
  std::vector<BatchItemInfo> items;
};

/// Draws composition.size() images with replacement and simulates anomalies
/// on the last composition.abnormal of them. A simulation that ends in a
/// degenerate mask is retried on another image (up to 10 times).
TrainBatch make_batch(const std::vector<Image>& images, const SimConfig& sim,
                      const TextureSource& textures, const BatchComposition& composition,
                      Rng& rng);

struct OptimizerConfig {
  std::string kind = "sgd";  // "sgd" (momentum) or "adam"
  double lr = 0.04;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

struct TrainConfig {
  std::int64_t iterations = 2700;
  BatchComposition batch;
  OptimizerConfig optimizer;
  LossConfig loss;
  SimConfig sim;
  std::uint64_t seed = 0;
  /// Calls the checkpoint hook every N iterations (0 = never).
  std::int64_t checkpoint_every = 0;
  std::int64_t log_every = 50;
};

struct LossRecord {
  std::int64_t iteration = 0;
  double l1 = 0.0;
  double focal = 0.0;
  double total = 0.0;
};

struct TrainResult {
  std::vector<LossRecord> trace;
};

using CheckpointHook = std::function<void(std::int64_t iteration)>;

/// Runs cfg.iterations optimizer steps on the total loss. Only the model's
/// trainable parameters are handed to the optimizer. A non-finite loss
/// aborts with the iteration and the loss components in the message.
TrainResult train(SegModel& model, const std::vector<Image>& images, const TrainConfig& cfg,
                  const TextureSource& textures, const CheckpointHook& hook = {},
                  std::ostream* log = nullptr);

/// CSV with columns iteration,l1,focal,total. `comment` lines are written
/// first, each prefixed with "# ".
void write_loss_csv(const std::vector<LossRecord>& trace, const std::filesystem::path& path,
                    const std::vector<std::string>& comment = {});

}  // namespace memseg
