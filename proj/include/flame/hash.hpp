#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include <openssl/evp.h>

namespace flame {

using Digest = std::array<uint8_t, 32>;

// Streaming SHA-256. One heap context per instance; reset() rearms it.
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_) throw std::runtime_error("sha256: ctx alloc failed");
    reset();
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void reset() {
    if (EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("sha256: init failed");
  }
  void update(const void* data, size_t len) {
    if (EVP_DigestUpdate(ctx_, data, len) != 1)
      throw std::runtime_error("sha256: update failed");
  }
  Digest final() {
    Digest out{};
    unsigned int n = 0;
    if (EVP_DigestFinal_ex(ctx_, out.data(), &n) != 1 || n != out.size())
      throw std::runtime_error("sha256: final failed");
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

// One-shot SHA-256 with a reused thread-local context (hot path of the FSS PRG).
inline Digest sha256(const void* data, size_t len) {
  thread_local Sha256 ctx;
  ctx.reset();
  ctx.update(data, len);
  return ctx.final();
}

inline Digest sha256(const std::vector<uint8_t>& v) { return sha256(v.data(), v.size()); }

// Hash commitment: H(payload ‖ 32-byte nonce). Binding and hiding under SHA-256.
inline Digest hash_commit(const std::vector<uint8_t>& payload, const std::array<uint8_t, 32>& nonce) {
  thread_local Sha256 ctx;
  ctx.reset();
  ctx.update(payload.data(), payload.size());
  ctx.update(nonce.data(), nonce.size());
  return ctx.final();
}

}  // namespace flame
