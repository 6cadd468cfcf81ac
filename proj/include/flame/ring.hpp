#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include "flame/hash.hpp"

namespace flame {

using u128 = unsigned __int128;
using i128 = __int128;

// Error taxonomy. ConfigError covers static misuse (mismatched params, bad
// labels, bad bindings); ProtocolError covers inconsistent honest-path state
// (delta mismatch, desync) and is distinct from a MAC failure, which raises
// AbortError and turns a session into ABORT.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CorrelationExhausted : TapeError {
  using TapeError::TapeError;
};
struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AbortError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parameters of the ambient ring Z_2^(l+s): l correctness bits, s MAC slack bits.
struct RingParams {
  uint8_t l = 64;
  uint8_t s = 64;

  constexpr unsigned total() const { return unsigned(l) + unsigned(s); }
  constexpr u128 mask() const {
    return total() >= 128 ? ~u128{0} : ((u128{1} << total()) - 1);
  }
  constexpr bool operator==(const RingParams& o) const { return l == o.l && s == o.s; }
  constexpr bool operator!=(const RingParams& o) const { return !(*this == o); }

  static RingParams checked(unsigned l, unsigned s) {
    if (l < 2 || s < 1 || l + s > 128)
      throw ConfigError("ring params out of range: need 2 <= l, 1 <= s, l+s <= 128");
    return RingParams{uint8_t(l), uint8_t(s)};
  }
};

// A residue in [0, 2^(l+s)). All arithmetic wraps; nothing traps on overflow.
struct RingElement {
  u128 value = 0;
  RingParams params;

  RingElement() = default;
  RingElement(u128 v, RingParams p) : value(v & p.mask()), params(p) {}

  bool operator==(const RingElement& o) const {
    return value == o.value && params == o.params;
  }
  bool operator!=(const RingElement& o) const { return !(*this == o); }
};

inline void require_same_params(const RingElement& a, const RingElement& b) {
  if (a.params != b.params) throw ConfigError("ring element parameter mismatch");
}

inline RingElement add(const RingElement& a, const RingElement& b) {
  require_same_params(a, b);
  return RingElement(a.value + b.value, a.params);
}

inline RingElement sub(const RingElement& a, const RingElement& b) {
  require_same_params(a, b);
  return RingElement(a.value - b.value, a.params);
}

inline RingElement neg(const RingElement& a) {
  return RingElement(u128{0} - a.value, a.params);
}

// Product mod 2^(l+s). u128 multiplication wraps mod 2^128 and 2^(l+s) divides
// 2^128, so masking the wrapped product is exact.
inline RingElement mul(const RingElement& a, const RingElement& b) {
  require_same_params(a, b);
  return RingElement(a.value * b.value, a.params);
}

inline RingElement operator+(const RingElement& a, const RingElement& b) { return add(a, b); }
inline RingElement operator-(const RingElement& a, const RingElement& b) { return sub(a, b); }
inline RingElement operator*(const RingElement& a, const RingElement& b) { return mul(a, b); }
inline RingElement operator-(const RingElement& a) { return neg(a); }

// Reduce mod 2^l, then two's-complement interpret in [-2^(l-1), 2^(l-1)).
// The s high bits are MAC slack only; every plaintext decision reads through this.
inline i128 to_signed_l(const RingElement& a) {
  const unsigned l = a.params.l;
  const u128 ml = (l >= 128) ? ~u128{0} : ((u128{1} << l) - 1);
  u128 v = a.value & ml;
  if (l < 128 && (v >> (l - 1)) & 1) return i128(v) - (i128(1) << l);
  return i128(v);
}

// Signed integer embedded as a full-ring residue (two's complement mod 2^(l+s)).
inline RingElement encode_signed(i128 v, RingParams p) {
  return RingElement(u128(v), p);
}

// Canonical wire encoding: 16 little-endian bytes, always the full 128-bit
// residue regardless of (l, s).
inline void store_le(const RingElement& a, uint8_t out[16]) {
  u128 v = a.value;
  for (int i = 0; i < 16; i++) {
    out[i] = uint8_t(v & 0xff);
    v >>= 8;
  }
}

inline RingElement load_le(const uint8_t in[16], RingParams p) {
  u128 v = 0;
  for (int i = 15; i >= 0; i--) v = (v << 8) | in[i];
  return RingElement(v, p);
}

inline void append_le(std::vector<uint8_t>& buf, const RingElement& a) {
  uint8_t tmp[16];
  store_le(a, tmp);
  buf.insert(buf.end(), tmp, tmp + 16);
}

// Fixed-point carrier: encode(q) = round(q * 2^f) as a signed ring residue.
// Symmetric fixed scale; decode error is at most 2^(-f-1).
struct FixedCodec {
  uint8_t scale_bits = 7;

  RingElement encode(double q, RingParams p) const {
    double scaled = q * std::ldexp(1.0, scale_bits);
    return encode_signed(i128(std::llround(scaled)), p);
  }
  double decode(const RingElement& a) const {
    return double(to_signed_l(a)) * std::ldexp(1.0, -int(scale_bits));
  }
};

// Deterministic RNG: SHA-256 in counter mode over a 32-byte seed. Identical
// seeds yield identical streams on every platform; fork() derives an
// independent child stream by domain separation.
class SeededRng {
 public:
  using Seed = std::array<uint8_t, 32>;

  explicit SeededRng(const Seed& seed) : seed_(seed) {}

  static SeededRng from_string(const std::string& s) {
    Seed sd = sha256(s.data(), s.size());
    return SeededRng(sd);
  }

  SeededRng fork(const std::string& label) const {
    thread_local Sha256 h;
    h.reset();
    h.update(seed_.data(), seed_.size());
    const uint8_t sep = 0xff;
    h.update(&sep, 1);
    h.update(label.data(), label.size());
    return SeededRng(h.final());
  }

  void fill(uint8_t* out, size_t len) {
    while (len > 0) {
      if (avail_ == 0) refill();
      size_t take = len < avail_ ? len : avail_;
      std::memcpy(out, block_.data() + (block_.size() - avail_), take);
      avail_ -= take;
      out += take;
      len -= take;
    }
  }

  u128 next_u128() {
    uint8_t b[16];
    fill(b, 16);
    u128 v = 0;
    for (int i = 15; i >= 0; i--) v = (v << 8) | b[i];
    return v;
  }

  // Uniform over [0, 2^(l+s)): masking 128 uniform bits is exact because
  // 2^(l+s) divides 2^128.
  RingElement sample_uniform(RingParams p) { return RingElement(next_u128(), p); }

  // Uniform over [0, 2^bits).
  u128 sample_bits(unsigned bits) {
    u128 v = next_u128();
    return bits >= 128 ? v : (v & ((u128{1} << bits) - 1));
  }

  std::array<uint8_t, 32> next_nonce() {
    std::array<uint8_t, 32> n{};
    fill(n.data(), n.size());
    return n;
  }

  const Seed& seed() const { return seed_; }

 private:
  void refill() {
    thread_local Sha256 h;
    h.reset();
    h.update(seed_.data(), seed_.size());
    uint8_t ctr[8];
    uint64_t c = counter_++;
    for (int i = 0; i < 8; i++) ctr[i] = uint8_t((c >> (8 * i)) & 0xff);
    h.update(ctr, 8);
    block_ = h.final();
    avail_ = block_.size();
  }

  Seed seed_{};
  uint64_t counter_ = 0;
  Digest block_{};
  size_t avail_ = 0;
};

}  // namespace flame
