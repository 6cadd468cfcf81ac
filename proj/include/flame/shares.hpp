#pragma once

#include <utility>
#include <vector>

#include "flame/ring.hpp"

namespace flame {

// Additive share: value_0 + value_1 = x mod 2^(l+s).
struct AddShare {
  int party = 0;
  RingElement value;
};

inline std::pair<AddShare, AddShare> split(const RingElement& x, SeededRng& rng) {
  RingElement r = rng.sample_uniform(x.params);
  return {AddShare{0, r}, AddShare{1, sub(x, r)}};
}

inline RingElement reconstruct(const AddShare& a, const AddShare& b) {
  if (a.party == b.party) throw ConfigError("reconstruct: shares from the same party");
  return add(a.value, b.value);
}

// Optimized share [[x]] = (Delta, <lambda>): Delta = x + lambda is public and
// byte-identical at both parties; the lambda share is private.
struct OptShare {
  RingElement delta;
  RingElement lambda_share;
  int party = 0;
};

// Dealer/test-side opening from both parties' shares.
inline RingElement open(const OptShare& s0, const OptShare& s1) {
  if (s0.delta != s1.delta)
    throw ProtocolError("open: delta mismatch between parties");
  return sub(sub(s0.delta, s0.lambda_share), s1.lambda_share);
}

// A party's additive share of x derived from (Delta, lambda-share):
// party 0 contributes Delta - <lambda>_0, party 1 contributes -<lambda>_1.
inline RingElement value_share(const OptShare& s) {
  RingElement base = s.party == 0 ? s.delta : RingElement(0, s.delta.params);
  return sub(base, s.lambda_share);
}

inline OptShare add_opt(const OptShare& a, const OptShare& b) {
  if (a.party != b.party) throw ConfigError("add_opt: party mismatch");
  return OptShare{add(a.delta, b.delta), add(a.lambda_share, b.lambda_share), a.party};
}

inline OptShare sub_opt(const OptShare& a, const OptShare& b) {
  if (a.party != b.party) throw ConfigError("sub_opt: party mismatch");
  return OptShare{sub(a.delta, b.delta), sub(a.lambda_share, b.lambda_share), a.party};
}

// Public addition touches only the delta; both parties apply it identically.
inline OptShare add_public(const OptShare& a, const RingElement& p) {
  return OptShare{add(a.delta, p), a.lambda_share, a.party};
}

// Public multiplication scales both components, keeping Delta = x*p + lambda*p.
inline OptShare mul_public(const OptShare& a, const RingElement& p) {
  return OptShare{mul(a.delta, p), mul(a.lambda_share, p), a.party};
}

// Authenticated pair: [[v]] plus [[phi*v]] under the global MAC key phi.
struct AuthPair {
  OptShare value;
  OptShare mac;
};

inline AuthPair add_auth(const AuthPair& a, const AuthPair& b) {
  return AuthPair{add_opt(a.value, b.value), add_opt(a.mac, b.mac)};
}

inline AuthPair sub_auth(const AuthPair& a, const AuthPair& b) {
  return AuthPair{sub_opt(a.value, b.value), sub_opt(a.mac, b.mac)};
}

inline AuthPair mul_public_auth(const AuthPair& a, const RingElement& p) {
  return AuthPair{mul_public(a.value, p), mul_public(a.mac, p)};
}

// Additive share of the MAC key phi; phi itself is uniform in [0, 2^s) and is
// never reconstructed online.
struct MacKeyShare {
  int party = 0;
  RingElement share;
};

// Tape/wire encoding: delta (16B) || lambda_share (16B); AuthPair = value || mac.
inline void append_opt(std::vector<uint8_t>& buf, const OptShare& s) {
  append_le(buf, s.delta);
  append_le(buf, s.lambda_share);
}

inline void append_auth(std::vector<uint8_t>& buf, const AuthPair& p) {
  append_opt(buf, p.value);
  append_opt(buf, p.mac);
}

}  // namespace flame
