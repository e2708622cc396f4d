#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "memseg/hashing.hpp"

namespace memseg {

/// Single-file container of named tensors plus a JSON metadata string.
///
/// Layout (little-endian):
///   8 bytes   magic "MEMSEGTA"
///   u32       format version
///   u64       header length L
///   L bytes   JSON header {"kind", "meta", "tensors": [{name, dtype, shape, offset, nbytes}]}
///   ...       raw tensor bytes, offsets relative to the end of the header
struct TensorArchive {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::string kind;
  std::uint32_t version = kFormatVersion;
  std::string meta_json = "{}";
  NamedTensors tensors;

  const torch::Tensor* find(const std::string& name) const;
};

void write_archive(const TensorArchive& archive, const std::filesystem::path& path);

/// Throws memseg::Error on a bad magic, unsupported version, malformed
/// header or truncated payload.
TensorArchive read_archive(const std::filesystem::path& path);

}  // namespace memseg
