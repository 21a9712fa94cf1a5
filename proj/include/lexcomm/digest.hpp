// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>

#include "lexcomm/error.hpp"
#include "lexcomm/text.hpp"

namespace lexcomm {

using Sha256 = std::array<std::uint8_t, 32>;

/// Incremental SHA-256. Fields added with field() are length-prefixed so that
/// ("ab","c") and ("a","bc") digest differently.
class Hasher {
 public:
  Hasher() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 initialisation failed");
    }
  }

  Hasher& update(std::string_view bytes) {
    EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size());
    return *this;
  }

  Hasher& field(std::string_view bytes) {
    const auto n = static_cast<std::uint64_t>(bytes.size());
    std::array<std::uint8_t, 8> len{};
    for (int i = 0; i < 8; ++i) len[i] = static_cast<std::uint8_t>(n >> (8 * i));
    EVP_DigestUpdate(ctx_.get(), len.data(), len.size());
    return update(bytes);
  }

  Sha256 finish() {
    Sha256 out{};
    unsigned int n = 0;
    EVP_DigestFinal_ex(ctx_.get(), out.data(), &n);
    return out;
  }

  std::string hex() {
    const auto d = finish();
    return text::hex_encode(d.data(), d.size());
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline std::string sha256_hex(std::string_view bytes) { return Hasher{}.update(bytes).hex(); }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string file_digest(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

}  // namespace lexcomm
