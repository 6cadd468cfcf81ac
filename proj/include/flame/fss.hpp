#pragma once

#include <array>
#include <cstring>
#include <vector>

#include "flame/ring.hpp"

namespace flame {

// Distributed comparison function (DCF) for f^<_{a,b}: Eval keys held by two
// parties produce additive shares of b if x < a (unsigned over the domain) and
// of 0 otherwise. Single-pass tree construction: one correction word per
// domain bit carrying a seed correction, two control-bit corrections, and a
// two-component value correction so one traversal shares the whole payload
// pair (b0, b1). The PRG is SHA-256 with domain-separation tags:
//   G(seed)        = H(seed||0x00) -> (left seed 16B, left bit)
//                    H(seed||0x01) -> (right seed 16B, right bit)
//   Convert(seed)  = (H(seed||0x02) mod 2^(l+s), H(seed||0x03) mod 2^(l+s))
// On the path of a the two parties' states stay distinct (control bits XOR to
// 1); off the path the corrections collapse both states to equality, so all
// later contributions cancel in the share sum. The per-level value correction
// telescopes the accumulated difference V_a so that exactly the x < a
// evaluation paths pick up the payload.

using Seed16 = std::array<uint8_t, 16>;

// Two-component ring payload (b0, b1); componentwise group operations.
struct Payload2 {
  RingElement c0;
  RingElement c1;

  static Payload2 zero(RingParams p) {
    return Payload2{RingElement(0, p), RingElement(0, p)};
  }
};

inline Payload2 add(const Payload2& a, const Payload2& b) {
  return Payload2{add(a.c0, b.c0), add(a.c1, b.c1)};
}
inline Payload2 sub(const Payload2& a, const Payload2& b) {
  return Payload2{sub(a.c0, b.c0), sub(a.c1, b.c1)};
}
inline Payload2 neg(const Payload2& a) { return Payload2{neg(a.c0), neg(a.c1)}; }
inline Payload2 cond_neg(bool negate, const Payload2& a) { return negate ? neg(a) : a; }
inline bool operator==(const Payload2& a, const Payload2& b) {
  return a.c0 == b.c0 && a.c1 == b.c1;
}

struct DcfCorrectionWord {
  Seed16 seed_corr{};
  uint8_t bit_corr_l = 0;
  uint8_t bit_corr_r = 0;
  Payload2 value_corr;
};

struct DcfKey {
  uint8_t party = 0;
  uint8_t domain_bits = 0;
  RingParams params;
  Seed16 root_seed{};
  uint8_t root_bit = 0;
  std::vector<DcfCorrectionWord> correction_words;
  Payload2 final_correction;
};

namespace detail {

struct PrgOut {
  Seed16 seed_l, seed_r;
  uint8_t bit_l, bit_r;
};

inline PrgOut prg_expand(const Seed16& seed) {
  uint8_t buf[17];
  std::memcpy(buf, seed.data(), 16);
  PrgOut out;
  buf[16] = 0x00;
  Digest d0 = sha256(buf, 17);
  std::memcpy(out.seed_l.data(), d0.data(), 16);
  out.bit_l = d0[16] & 1;
  buf[16] = 0x01;
  Digest d1 = sha256(buf, 17);
  std::memcpy(out.seed_r.data(), d1.data(), 16);
  out.bit_r = d1[16] & 1;
  return out;
}

inline RingElement digest_to_ring(const Digest& d, RingParams p) {
  u128 v = 0;
  for (int i = 15; i >= 0; i--) v = (v << 8) | d[i];
  return RingElement(v, p);
}

inline Payload2 prg_convert(const Seed16& seed, RingParams p) {
  uint8_t buf[17];
  std::memcpy(buf, seed.data(), 16);
  buf[16] = 0x02;
  RingElement c0 = digest_to_ring(sha256(buf, 17), p);
  buf[16] = 0x03;
  RingElement c1 = digest_to_ring(sha256(buf, 17), p);
  return Payload2{c0, c1};
}

inline Seed16 seed_xor(const Seed16& a, const Seed16& b) {
  Seed16 out;
  for (int i = 0; i < 16; i++) out[i] = a[i] ^ b[i];
  return out;
}

}  // namespace detail

// Key generation for f^<_{a,payload} over an unsigned domain of domain_bits bits.
inline std::pair<DcfKey, DcfKey> gen_lt(const RingElement& a, const Payload2& payload,
                                        unsigned domain_bits, SeededRng& rng) {
  const RingParams p = a.params;
  if (domain_bits < 1 || domain_bits > p.total())
    throw ConfigError("gen_lt: domain_bits outside [1, l+s]");
  if (domain_bits < 128 && (a.value >> domain_bits) != 0)
    throw ConfigError("gen_lt: point outside domain");

  DcfKey k0, k1;
  k0.party = 0;
  k1.party = 1;
  k0.domain_bits = k1.domain_bits = uint8_t(domain_bits);
  k0.params = k1.params = p;
  rng.fill(k0.root_seed.data(), 16);
  rng.fill(k1.root_seed.data(), 16);
  k0.root_bit = 0;
  k1.root_bit = 1;

  Seed16 s0 = k0.root_seed, s1 = k1.root_seed;
  uint8_t t0 = 0, t1 = 1;
  Payload2 v_alpha = Payload2::zero(p);

  for (unsigned i = 0; i < domain_bits; i++) {
    detail::PrgOut e0 = detail::prg_expand(s0);
    detail::PrgOut e1 = detail::prg_expand(s1);
    const int abit = int((a.value >> (domain_bits - 1 - i)) & 1);

    const Seed16& s0_keep = abit ? e0.seed_r : e0.seed_l;
    const Seed16& s1_keep = abit ? e1.seed_r : e1.seed_l;
    const Seed16& s0_lose = abit ? e0.seed_l : e0.seed_r;
    const Seed16& s1_lose = abit ? e1.seed_l : e1.seed_r;
    const uint8_t t0_keep = abit ? e0.bit_r : e0.bit_l;
    const uint8_t t1_keep = abit ? e1.bit_r : e1.bit_l;

    DcfCorrectionWord cw;
    cw.seed_corr = detail::seed_xor(s0_lose, s1_lose);

    Payload2 conv0_lose = detail::prg_convert(s0_lose, p);
    Payload2 conv1_lose = detail::prg_convert(s1_lose, p);
    Payload2 v_cw = cond_neg(t1, sub(sub(conv1_lose, conv0_lose), v_alpha));
    // The lose side is the x < a side exactly when a's bit is 1 (lose = L);
    // only then does this level inject the payload.
    if (abit == 1) v_cw = add(v_cw, cond_neg(t1, payload));

    Payload2 conv0_keep = detail::prg_convert(s0_keep, p);
    Payload2 conv1_keep = detail::prg_convert(s1_keep, p);
    v_alpha = add(sub(add(v_alpha, conv0_keep), conv1_keep), cond_neg(t1, v_cw));

    cw.bit_corr_l = uint8_t(e0.bit_l ^ e1.bit_l ^ abit ^ 1);
    cw.bit_corr_r = uint8_t(e0.bit_r ^ e1.bit_r ^ abit);
    cw.value_corr = v_cw;
    k0.correction_words.push_back(cw);
    k1.correction_words.push_back(cw);

    const uint8_t cw_keep = abit ? cw.bit_corr_r : cw.bit_corr_l;
    Seed16 next_s0 = t0 ? detail::seed_xor(s0_keep, cw.seed_corr) : s0_keep;
    Seed16 next_s1 = t1 ? detail::seed_xor(s1_keep, cw.seed_corr) : s1_keep;
    uint8_t next_t0 = uint8_t(t0_keep ^ (t0 & cw_keep));
    uint8_t next_t1 = uint8_t(t1_keep ^ (t1 & cw_keep));
    s0 = next_s0;
    s1 = next_s1;
    t0 = next_t0;
    t1 = next_t1;
  }

  Payload2 final_corr =
      cond_neg(t1, sub(sub(detail::prg_convert(s1, p), detail::prg_convert(s0, p)), v_alpha));
  k0.final_correction = final_corr;
  k1.final_correction = final_corr;
  return {k0, k1};
}

// Evaluation: the party's additive share of f^<_{a,payload}(x). Deterministic.
inline Payload2 eval_lt(int party, const DcfKey& key, const RingElement& x) {
  const RingParams p = key.params;
  if (key.correction_words.size() != key.domain_bits)
    throw DecodeError("eval_lt: malformed key (correction word count)");
  if (key.domain_bits < 128 && (x.value >> key.domain_bits) != 0)
    throw ConfigError("eval_lt: input outside domain");
  if (party != key.party) throw ConfigError("eval_lt: party/key mismatch");

  Seed16 s = key.root_seed;
  uint8_t t = key.root_bit;
  const bool negate = party == 1;
  Payload2 v = Payload2::zero(p);

  for (unsigned i = 0; i < key.domain_bits; i++) {
    const DcfCorrectionWord& cw = key.correction_words[i];
    detail::PrgOut e = detail::prg_expand(s);
    const int xbit = int((x.value >> (key.domain_bits - 1 - i)) & 1);

    const Seed16& s_next = xbit ? e.seed_r : e.seed_l;
    const uint8_t t_next = xbit ? e.bit_r : e.bit_l;
    const uint8_t cw_bit = xbit ? cw.bit_corr_r : cw.bit_corr_l;

    Payload2 step = detail::prg_convert(s_next, p);
    if (t) step = add(step, cw.value_corr);
    v = add(v, cond_neg(negate, step));

    s = t ? detail::seed_xor(s_next, cw.seed_corr) : s_next;
    t = uint8_t(t_next ^ (t & cw_bit));
  }

  Payload2 last = detail::prg_convert(s, p);
  if (t) last = add(last, key.final_correction);
  v = add(v, cond_neg(negate, last));
  return v;
}

// Key file layout: "DCF1" magic, domain_bits u8, party u8, l u8, s u8, then
// fixed-width little-endian fields: root seed 16B, root bit u8, per level
// (seed correction 16B, bit corrections u8 u8, value correction 2x16B), and a
// final 2x16B correction.
inline std::vector<uint8_t> serialize_dcf(const DcfKey& key) {
  std::vector<uint8_t> out;
  out.reserve(8 + 17 + size_t(key.domain_bits) * 50 + 32);
  const char magic[4] = {'D', 'C', 'F', '1'};
  out.insert(out.end(), magic, magic + 4);
  out.push_back(key.domain_bits);
  out.push_back(key.party);
  out.push_back(key.params.l);
  out.push_back(key.params.s);
  out.insert(out.end(), key.root_seed.begin(), key.root_seed.end());
  out.push_back(key.root_bit);
  for (const auto& cw : key.correction_words) {
    out.insert(out.end(), cw.seed_corr.begin(), cw.seed_corr.end());
    out.push_back(cw.bit_corr_l);
    out.push_back(cw.bit_corr_r);
    append_le(out, cw.value_corr.c0);
    append_le(out, cw.value_corr.c1);
  }
  append_le(out, key.final_correction.c0);
  append_le(out, key.final_correction.c1);
  return out;
}

inline DcfKey deserialize_dcf(const uint8_t* data, size_t len) {
  auto need = [&](size_t pos, size_t n) {
    if (pos + n > len) throw DecodeError("dcf key: truncated");
  };
  need(0, 8);
  if (std::memcmp(data, "DCF1", 4) != 0) throw DecodeError("dcf key: bad magic");
  DcfKey key;
  key.domain_bits = data[4];
  key.party = data[5];
  key.params = RingParams::checked(data[6], data[7]);
  if (key.domain_bits < 1 || key.domain_bits > key.params.total())
    throw DecodeError("dcf key: bad domain bits");
  size_t pos = 8;
  need(pos, 17);
  std::memcpy(key.root_seed.data(), data + pos, 16);
  key.root_bit = data[pos + 16];
  pos += 17;
  for (unsigned i = 0; i < key.domain_bits; i++) {
    need(pos, 16 + 2 + 32);
    DcfCorrectionWord cw;
    std::memcpy(cw.seed_corr.data(), data + pos, 16);
    cw.bit_corr_l = data[pos + 16];
    cw.bit_corr_r = data[pos + 17];
    cw.value_corr.c0 = load_le(data + pos + 18, key.params);
    cw.value_corr.c1 = load_le(data + pos + 34, key.params);
    key.correction_words.push_back(cw);
    pos += 50;
  }
  need(pos, 32);
  key.final_correction.c0 = load_le(data + pos, key.params);
  key.final_correction.c1 = load_le(data + pos + 16, key.params);
  pos += 32;
  if (pos != len) throw DecodeError("dcf key: trailing bytes");
  return key;
}

inline DcfKey deserialize_dcf(const std::vector<uint8_t>& v) {
  return deserialize_dcf(v.data(), v.size());
}

}  // namespace flame
