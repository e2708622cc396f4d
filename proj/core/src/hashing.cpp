#include "memseg/hashing.hpp"

#include <array>
#include <cstdio>
#include <memory>

#include <openssl/evp.h>

#include "memseg/common.hpp"

namespace memseg {

std::string sha256_tensors(const NamedTensors& tensors) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest init failed");
  }
  auto update = [&](const void* data, std::size_t n) {
    if (n > 0 && EVP_DigestUpdate(ctx.get(), data, n) != 1) {
      throw Error("sha256: digest update failed");
    }
  };
  for (const auto& [name, tensor] : tensors) {
    update(name.data(), name.size() + 1);
    const auto t = tensor.detach().contiguous().cpu();
    const std::string dtype(c10::toString(t.scalar_type()));
    update(dtype.data(), dtype.size() + 1);
    for (auto d : t.sizes()) {
      const std::int64_t dim = d;
      update(&dim, sizeof(dim));
    }
    update(t.data_ptr(), t.nbytes());
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error("sha256: digest final failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    char buf[3];
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace memseg
