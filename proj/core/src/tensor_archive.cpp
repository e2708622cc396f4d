#include "memseg/tensor_archive.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "memseg/common.hpp"

namespace memseg {
namespace {

constexpr std::array<char, 8> kMagic{'M', 'E', 'M', 'S', 'E', 'G', 'T', 'A'};

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "f32";
    case torch::kFloat64: return "f64";
    case torch::kInt64: return "i64";
    case torch::kInt32: return "i32";
    case torch::kUInt8: return "u8";
    default: throw Error("tensor archive: unsupported dtype " + std::string(c10::toString(t)));
  }
}

torch::ScalarType parse_dtype(const std::string& s) {
  if (s == "f32") return torch::kFloat32;
  if (s == "f64") return torch::kFloat64;
  if (s == "i64") return torch::kInt64;
  if (s == "i32") return torch::kInt32;
  if (s == "u8") return torch::kUInt8;
  throw Error("tensor archive: unknown dtype " + s);
}

}  // namespace

const torch::Tensor* TensorArchive::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

void write_archive(const TensorArchive& archive, const std::filesystem::path& path) {
  nlohmann::json header;
  header["kind"] = archive.kind;
  header["meta"] = nlohmann::json::parse(archive.meta_json);
  header["tensors"] = nlohmann::json::array();

  std::vector<torch::Tensor> payload;
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : archive.tensors) {
    auto t = tensor.detach().cpu().contiguous();
    header["tensors"].push_back({{"name", name},
                                 {"dtype", dtype_name(t.scalar_type())},
                                 {"shape", t.sizes().vec()},
                                 {"offset", offset},
                                 {"nbytes", t.nbytes()}});
    offset += t.nbytes();
    payload.push_back(std::move(t));
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot open for writing: " + path.string());
  }
  const std::uint32_t version = archive.version;
  const std::uint64_t header_len = text.size();
  out.write(kMagic.data(), kMagic.size());
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : payload) {
    out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
  }
  if (!out) {
    throw Error("write failed: " + path.string());
  }
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open: " + path.string());
  }
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) {
    throw Error("not a memseg archive: " + path.string());
  }
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in) {
    throw Error("truncated archive: " + path.string());
  }
  if (version != TensorArchive::kFormatVersion) {
    throw Error("unsupported archive format version " + std::to_string(version) + ": " +
                path.string());
  }
  const auto file_size = std::filesystem::file_size(path);
  const std::uint64_t data_start = kMagic.size() + sizeof(version) + sizeof(header_len) + header_len;
  if (data_start > file_size) {
    throw Error("truncated archive header: " + path.string());
  }
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed archive header in " + path.string() + ": " + e.what());
  }

  TensorArchive archive;
  try {
  archive.version = version;
  archive.kind = header.value("kind", "");
  archive.meta_json = header.value("meta", nlohmann::json::object()).dump();
  for (const auto& entry : header.at("tensors")) {
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
    if (data_start + offset + nbytes > file_size) {
      throw Error("truncated archive payload: " + path.string());
    }
    auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    auto t = torch::empty(shape, torch::TensorOptions().dtype(parse_dtype(entry.at("dtype"))));
    if (t.nbytes() != nbytes) {
      throw Error("archive tensor size mismatch for " + entry.at("name").get<std::string>());
    }
    in.seekg(static_cast<std::streamoff>(data_start + offset));
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(nbytes));
    if (!in) {
      throw Error("truncated archive payload: " + path.string());
    }
    archive.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed archive header in " + path.string() + ": " + e.what());
  }
  return archive;
}

}  // namespace memseg
