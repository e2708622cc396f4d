#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "memseg/network.hpp"

namespace memseg {

/// Everything needed to rebuild a trained model: architecture, all
/// parameters and buffers (frozen encoder stages included), the memory pool
/// and the run configuration that produced it.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  std::string encoder_tag;
  NetworkConfig network;
  std::string run_config_json = "{}";
  NamedTensors model_state;
  MemoryPool pool;
};

std::string network_config_to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const std::string& json);

Checkpoint make_checkpoint(SegModel& model, std::string run_config_json = "{}");

/// Writes a single tensor-archive file of kind "checkpoint".
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Reads a checkpoint. Throws "unsupported checkpoint version" for other
/// versions, on truncation, and when `expected_encoder_tag` is given and
/// differs from the stored tag (both tags are named in the message).
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::optional<std::string>& expected_encoder_tag = std::nullopt);

/// Rebuilds the model (in eval mode) from a checkpoint and verifies that the
/// restored frozen encoder matches the stored tag.
SegModel restore_model(const Checkpoint& ckpt);

}  // namespace memseg
