#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "flame/ring.hpp"
#include "flame/shares.hpp"

namespace flame {

enum class Metric : uint8_t { COSINE = 0, EUCLIDEAN = 1 };
enum class Phase : uint8_t { REGISTRATION = 0, AUTHENTICATION = 1 };

struct RawTemplate {
  std::vector<double> values;
};

// Metric-unified template: after preparation both metrics reduce to a plain
// inner product of (n+1)-wide vectors, so the server pipeline is identical.
struct PreparedTemplate {
  std::vector<double> values;  // length n+1; integral for euclidean
  Metric metric = Metric::COSINE;
  Phase phase = Phase::REGISTRATION;
};

struct OutsourcedTemplate {
  std::vector<RingElement> share0, share1;
  RingElement identity0, identity1;
};

// Cosine: unit-normalize and append a 0 slot. Euclidean: the inner product
// T^ (x) D^ with D^ = [2D, -sum D^2], T^ = [T, 1] equals -(EucD(T,D) - sum T^2),
// an order-reversing surrogate for the distance, so argmax works unchanged.
inline PreparedTemplate preprocess(const RawTemplate& t, Metric metric, Phase phase) {
  if (t.values.empty()) throw ConfigError("preprocess: empty template");
  for (double v : t.values)
    if (!std::isfinite(v)) throw ConfigError("preprocess: non-finite entry");
  PreparedTemplate out;
  out.metric = metric;
  out.phase = phase;
  if (metric == Metric::COSINE) {
    double norm2 = 0;
    for (double v : t.values) norm2 += v * v;
    if (norm2 <= 0) throw ConfigError("preprocess: zero-norm cosine template");
    double inv = 1.0 / std::sqrt(norm2);
    for (double v : t.values) out.values.push_back(v * inv);
    out.values.push_back(0.0);
  } else if (phase == Phase::REGISTRATION) {
    double sq = 0;
    for (double v : t.values) {
      out.values.push_back(2 * v);
      sq += v * v;
    }
    out.values.push_back(-sq);
  } else {
    out.values = t.values;
    out.values.push_back(1.0);
  }
  return out;
}

// Cosine entries land on a signed-(f+1)-bit grid; euclidean templates are
// already integral and pass through.
inline std::vector<i128> quantize(const PreparedTemplate& t, const FixedCodec& codec) {
  std::vector<i128> out;
  out.reserve(t.values.size());
  if (t.metric == Metric::COSINE) {
    const i128 hi = (i128{1} << codec.scale_bits) - 1;
    const i128 lo = -(i128{1} << codec.scale_bits);
    for (double v : t.values) {
      if (v < -1.0 - 1e-9 || v > 1.0 + 1e-9)
        throw ConfigError("quantize: cosine entry outside [-1, 1]");
      i128 q = i128(std::llround(v * double(i128{1} << codec.scale_bits)));
      out.push_back(q > hi ? hi : (q < lo ? lo : q));
    }
  } else {
    for (double v : t.values) out.push_back(i128(std::llround(v)));
  }
  return out;
}

inline OutsourcedTemplate outsource(const std::vector<i128>& q, i128 claimed_identity,
                                    SeededRng& rng, RingParams p) {
  OutsourcedTemplate out;
  out.share0.reserve(q.size());
  out.share1.reserve(q.size());
  for (i128 v : q) {
    RingElement plain = encode_signed(v, p);
    RingElement r = rng.sample_uniform(p);
    out.share0.push_back(r);
    out.share1.push_back(sub(plain, r));
  }
  RingElement id_plain = encode_signed(claimed_identity, p);
  out.identity0 = rng.sample_uniform(p);
  out.identity1 = sub(id_plain, out.identity0);
  return out;
}

// ---------------------------------------------------------------------------
// Request file: one party's slice of an outsourced template.
// [metric u8][phase u8][n u32 LE][identity share 16B][n x 16B shares]
// ---------------------------------------------------------------------------

struct RequestFile {
  Metric metric = Metric::COSINE;
  Phase phase = Phase::REGISTRATION;
  RingElement identity_share;
  std::vector<RingElement> shares;
};

inline std::vector<uint8_t> encode_request(Metric metric, Phase phase,
                                           const RingElement& identity_share,
                                           const std::vector<RingElement>& shares) {
  std::vector<uint8_t> buf;
  buf.push_back(uint8_t(metric));
  buf.push_back(uint8_t(phase));
  uint32_t n = uint32_t(shares.size());
  for (int i = 0; i < 4; i++) buf.push_back(uint8_t((n >> (8 * i)) & 0xff));
  append_le(buf, identity_share);
  for (const auto& s : shares) append_le(buf, s);
  return buf;
}

inline RequestFile decode_request(const std::vector<uint8_t>& buf, RingParams p) {
  if (buf.size() < 22) throw DecodeError("request: truncated header");
  RequestFile rf;
  if (buf[0] > 1 || buf[1] > 1) throw DecodeError("request: bad metric or phase flag");
  rf.metric = Metric(buf[0]);
  rf.phase = Phase(buf[1]);
  uint32_t n = 0;
  for (int i = 3; i >= 0; i--) n = (n << 8) | buf[2 + i];
  if (buf.size() != 6 + 16 + size_t(n) * 16) throw DecodeError("request: length mismatch");
  rf.identity_share = load_le(buf.data() + 6, p);
  rf.shares.reserve(n);
  for (uint32_t i = 0; i < n; i++) rf.shares.push_back(load_le(buf.data() + 22 + 16 * i, p));
  return rf;
}

inline void write_request(const std::string& path, Metric metric, Phase phase,
                          const RingElement& identity_share,
                          const std::vector<RingElement>& shares) {
  std::vector<uint8_t> buf = encode_request(metric, phase, identity_share, shares);
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ConfigError("cannot open request file for writing: " + path);
  bool ok = std::fwrite(buf.data(), 1, buf.size(), f) == buf.size();
  if (std::fclose(f) != 0 || !ok) throw ConfigError("request file write failed: " + path);
}

inline RequestFile read_request(const std::string& path, RingParams p) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw ConfigError("cannot open request file: " + path);
  std::fseek(f, 0, SEEK_END);
  long sz = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<uint8_t> buf;
  buf.resize(size_t(sz));
  bool ok = sz == 0 || std::fread(buf.data(), 1, buf.size(), f) == buf.size();
  std::fclose(f);
  if (!ok) throw ConfigError("request file read failed: " + path);
  return decode_request(buf, p);
}

}  // namespace flame
