#pragma once

#include <cstdio>
#include <cstring>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <zlib.h>

#include "flame/fss.hpp"
#include "flame/shares.hpp"

namespace flame {

// FNV-1a 64-bit, used to bind correlations to wire labels on tapes.
inline uint64_t fnv64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Beaver triples: A[i]*B[i] = C[i] after reconstruction.
struct TripleBatch {
  int party = 0;
  std::vector<RingElement> a, b, c;
};

// Offline material for one secure inner product: two triple vectors sharing
// the same B, the public masked differences, and the fresh output masks.
struct SecIpCorrelation {
  int party = 0;
  uint32_t n = 0;
  uint64_t label_hash = 0;
  std::vector<RingElement> a1, a2, b, c1, c2;                // shares
  std::vector<RingElement> delta_x, delta_phix, delta_y;     // public constants
  RingElement lambda_z_share, lambda_phiz_share;
};

// Offline material for one secure comparison: DCF keys at point lambda_x with
// payload (-1, -phi), shares of (1, phi), fresh output masks, and the expected
// lambda share of the bound input wire (binding check and dealer audit).
struct SecCmpCorrelation {
  int party = 0;
  uint64_t label_hash = 0;
  DcfKey key;
  RingElement b0_share, b1_share;
  RingElement lambda_z_share, lambda_phiz_share;
  RingElement lambda_x_share;
};

// Offline material for one authenticated multiplication.
struct MultCorrelation {
  int party = 0;
  uint64_t label_hash = 0;
  RingElement a_share, b_share, c_share;
  RingElement delta_x, delta_y;  // public constants
  RingElement lambda_z_share;
  RingElement lambda_x_share, lambda_y_share;  // expected operand bindings
};

// MAC check auxiliary: shares of r in [0, 2^s) and of phi * 2^l * r.
struct MacCheckAux {
  RingElement r_share, phir_share;
};

// Per-entry material for the database initialization: a triple per component
// plus the public deltas and the entry's value/MAC masks.
struct InitEntry {
  std::vector<RingElement> a, b, c;                  // triple shares
  std::vector<RingElement> delta_phi, delta_d;       // public constants
  std::vector<RingElement> lambda_d, lambda_phid;    // mask shares
};

struct InitCorrelation {
  int party = 0;
  uint32_t width = 0;  // n + 2: identity plus prepared template
  RingElement lambda_phi_share;
  std::deque<InitEntry> entries;
};

// Everything one authentication session consumes, in consumption order.
struct SessionCorrelation {
  uint32_t session_id = 0;
  std::vector<RingElement> lambda_t;  // n+1 template masks
  RingElement lambda_ic;
  std::deque<SecIpCorrelation> secip;
  std::deque<SecCmpCorrelation> seccmp;
  std::deque<MultCorrelation> mult;
};

// One party's offline tape. Queues are consumed front-to-back exactly once.
struct CorrelationTape {
  int party = 0;
  RingParams params;
  MacKeyShare mac;
  std::array<uint8_t, 32> online_seed{};
  uint32_t n = 0, m = 0, enrolls = 0, session_count = 0;
  uint8_t threshold_mode = 0;
  std::map<std::string, RingElement> lambda_by_label;
  InitCorrelation init;
  std::deque<MacCheckAux> aux_pool;
  std::deque<SessionCorrelation> sessions;

  MacCheckAux take_aux() {
    if (aux_pool.empty()) throw CorrelationExhausted("mac check aux pool exhausted");
    MacCheckAux a = aux_pool.front();
    aux_pool.pop_front();
    return a;
  }
  SessionCorrelation take_session() {
    if (sessions.empty()) throw CorrelationExhausted("session correlations exhausted");
    SessionCorrelation s = std::move(sessions.front());
    sessions.pop_front();
    return s;
  }
};

namespace detail {

inline std::pair<RingElement, RingElement> split2(const RingElement& x, SeededRng& rng) {
  RingElement r = rng.sample_uniform(x.params);
  return {r, sub(x, r)};
}

}  // namespace detail

// phi uniform in [0, 2^s), additively shared over the full ring.
inline std::pair<MacKeyShare, MacKeyShare> gen_mac_key(SeededRng& rng, RingParams p) {
  RingElement phi(rng.sample_bits(p.s), p);
  auto [s0, s1] = detail::split2(phi, rng);
  return {MacKeyShare{0, s0}, MacKeyShare{1, s1}};
}

inline std::pair<TripleBatch, TripleBatch> gen_triples(uint32_t count, SeededRng& rng,
                                                       RingParams p) {
  if (count < 1) throw ConfigError("gen_triples: count must be >= 1");
  TripleBatch t0, t1;
  t0.party = 0;
  t1.party = 1;
  for (uint32_t i = 0; i < count; i++) {
    RingElement a = rng.sample_uniform(p), b = rng.sample_uniform(p);
    RingElement c = mul(a, b);
    auto [a0, a1] = detail::split2(a, rng);
    auto [b0, b1] = detail::split2(b, rng);
    auto [c0, c1] = detail::split2(c, rng);
    t0.a.push_back(a0);
    t0.b.push_back(b0);
    t0.c.push_back(c0);
    t1.a.push_back(a1);
    t1.b.push_back(b1);
    t1.c.push_back(c1);
  }
  return {t0, t1};
}

// lambda_z / lambda_phiz are drawn inside unless the caller pins them (the
// session planner pins some to keep comparison wires in the safe margin).
inline std::pair<SecIpCorrelation, SecIpCorrelation> gen_secip_corr(
    const std::vector<RingElement>& lambda_x, const std::vector<RingElement>& lambda_phix,
    const std::vector<RingElement>& lambda_y, uint32_t n, SeededRng& rng,
    const std::string& label, const RingElement* pinned_lambda_z = nullptr,
    RingElement* out_lambda_z = nullptr, RingElement* out_lambda_phiz = nullptr) {
  if (n == 0) throw ConfigError("gen_secip_corr: n must be >= 1");
  if (lambda_x.size() != n || lambda_phix.size() != n || lambda_y.size() != n)
    throw ConfigError("gen_secip_corr: offset vectors must have length n");
  const RingParams p = lambda_y[0].params;

  SecIpCorrelation c0, c1;
  c0.party = 0;
  c1.party = 1;
  c0.n = c1.n = n;
  c0.label_hash = c1.label_hash = fnv64(label);
  for (uint32_t i = 0; i < n; i++) {
    RingElement a1 = rng.sample_uniform(p), a2 = rng.sample_uniform(p),
                b = rng.sample_uniform(p);
    RingElement t1 = mul(a1, b), t2 = mul(a2, b);
    auto [a1s0, a1s1] = detail::split2(a1, rng);
    auto [a2s0, a2s1] = detail::split2(a2, rng);
    auto [bs0, bs1] = detail::split2(b, rng);
    auto [c1s0, c1s1] = detail::split2(t1, rng);
    auto [c2s0, c2s1] = detail::split2(t2, rng);
    c0.a1.push_back(a1s0);
    c1.a1.push_back(a1s1);
    c0.a2.push_back(a2s0);
    c1.a2.push_back(a2s1);
    c0.b.push_back(bs0);
    c1.b.push_back(bs1);
    c0.c1.push_back(c1s0);
    c1.c1.push_back(c1s1);
    c0.c2.push_back(c2s0);
    c1.c2.push_back(c2s1);
    RingElement dx = sub(a1, lambda_x[i]);
    RingElement dpx = sub(a2, lambda_phix[i]);
    RingElement dy = sub(b, lambda_y[i]);
    c0.delta_x.push_back(dx);
    c1.delta_x.push_back(dx);
    c0.delta_phix.push_back(dpx);
    c1.delta_phix.push_back(dpx);
    c0.delta_y.push_back(dy);
    c1.delta_y.push_back(dy);
  }
  RingElement lz = pinned_lambda_z ? *pinned_lambda_z : rng.sample_uniform(p);
  RingElement lpz = rng.sample_uniform(p);
  auto [lz0, lz1] = detail::split2(lz, rng);
  auto [lpz0, lpz1] = detail::split2(lpz, rng);
  c0.lambda_z_share = lz0;
  c1.lambda_z_share = lz1;
  c0.lambda_phiz_share = lpz0;
  c1.lambda_phiz_share = lpz1;
  if (out_lambda_z) *out_lambda_z = lz;
  if (out_lambda_phiz) *out_lambda_phiz = lpz;
  return {c0, c1};
}

inline std::pair<SecCmpCorrelation, SecCmpCorrelation> gen_seccmp_corr(
    const RingElement& lambda_x, const RingElement& lambda_x_share0,
    const RingElement& lambda_x_share1, const RingElement& phi, SeededRng& rng,
    const std::string& label, RingElement* out_lambda_z = nullptr,
    RingElement* out_lambda_phiz = nullptr) {
  RingParams p = lambda_x.params;
  if (add(lambda_x_share0, lambda_x_share1) != lambda_x)
    throw ConfigError("gen_seccmp_corr: lambda shares do not reconstruct the bound point");
  Payload2 payload{neg(RingElement(1, p)), neg(phi)};
  auto [k0, k1] = gen_lt(lambda_x, payload, p.total(), rng);

  SecCmpCorrelation c0, c1;
  c0.party = 0;
  c1.party = 1;
  c0.label_hash = c1.label_hash = fnv64(label);
  c0.key = std::move(k0);
  c1.key = std::move(k1);
  auto [b0s0, b0s1] = detail::split2(RingElement(1, p), rng);
  auto [b1s0, b1s1] = detail::split2(phi, rng);
  RingElement lz = rng.sample_uniform(p), lpz = rng.sample_uniform(p);
  auto [lz0, lz1] = detail::split2(lz, rng);
  auto [lpz0, lpz1] = detail::split2(lpz, rng);
  c0.b0_share = b0s0;
  c1.b0_share = b0s1;
  c0.b1_share = b1s0;
  c1.b1_share = b1s1;
  c0.lambda_z_share = lz0;
  c1.lambda_z_share = lz1;
  c0.lambda_phiz_share = lpz0;
  c1.lambda_phiz_share = lpz1;
  c0.lambda_x_share = lambda_x_share0;
  c1.lambda_x_share = lambda_x_share1;
  if (out_lambda_z) *out_lambda_z = lz;
  if (out_lambda_phiz) *out_lambda_phiz = lpz;
  return {c0, c1};
}

inline std::pair<MultCorrelation, MultCorrelation> gen_mult_corr(
    const RingElement& lambda_x, const RingElement& lambda_x_share0,
    const RingElement& lambda_x_share1, const RingElement& lambda_y,
    const RingElement& lambda_y_share0, const RingElement& lambda_y_share1, SeededRng& rng,
    const std::string& label, const RingElement* pinned_lambda_z = nullptr,
    RingElement* out_lambda_z = nullptr) {
  RingParams p = lambda_x.params;
  if (add(lambda_x_share0, lambda_x_share1) != lambda_x ||
      add(lambda_y_share0, lambda_y_share1) != lambda_y)
    throw ConfigError("gen_mult_corr: lambda shares do not reconstruct the bound offsets");
  RingElement a = rng.sample_uniform(p), b = rng.sample_uniform(p);
  RingElement c = mul(a, b);
  auto [a0, a1] = detail::split2(a, rng);
  auto [b0, b1] = detail::split2(b, rng);
  auto [cs0, cs1] = detail::split2(c, rng);
  RingElement lz = pinned_lambda_z ? *pinned_lambda_z : rng.sample_uniform(p);
  auto [lz0, lz1] = detail::split2(lz, rng);

  MultCorrelation m0, m1;
  m0.party = 0;
  m1.party = 1;
  m0.label_hash = m1.label_hash = fnv64(label);
  m0.a_share = a0;
  m1.a_share = a1;
  m0.b_share = b0;
  m1.b_share = b1;
  m0.c_share = cs0;
  m1.c_share = cs1;
  m0.delta_x = m1.delta_x = sub(a, lambda_x);
  m0.delta_y = m1.delta_y = sub(b, lambda_y);
  m0.lambda_z_share = lz0;
  m1.lambda_z_share = lz1;
  m0.lambda_x_share = lambda_x_share0;
  m1.lambda_x_share = lambda_x_share1;
  m0.lambda_y_share = lambda_y_share0;
  m1.lambda_y_share = lambda_y_share1;
  if (out_lambda_z) *out_lambda_z = lz;
  return {m0, m1};
}

// Labeled uniform offset; duplicate labels are configuration errors.
inline std::pair<AddShare, AddShare> gen_rand_offset(const std::string& label, SeededRng& rng,
                                                     RingParams p,
                                                     std::map<std::string, RingElement>* reg0,
                                                     std::map<std::string, RingElement>* reg1,
                                                     RingElement* out_plain = nullptr) {
  RingElement lam = rng.sample_uniform(p);
  auto [s0, s1] = detail::split2(lam, rng);
  if (reg0) {
    if (!reg0->emplace(label, s0).second)
      throw ConfigError("gen_rand_offset: duplicate label " + label);
    (*reg1)[label] = s1;
  }
  if (out_plain) *out_plain = lam;
  return {AddShare{0, s0}, AddShare{1, s1}};
}

inline std::pair<std::deque<MacCheckAux>, std::deque<MacCheckAux>> gen_maccheck_aux(
    uint32_t count, const RingElement& phi, SeededRng& rng) {
  RingParams p = phi.params;
  std::deque<MacCheckAux> q0, q1;
  for (uint32_t i = 0; i < count; i++) {
    RingElement r(rng.sample_bits(p.s), p);
    RingElement two_l(u128{1} << p.l, p);
    RingElement phir = mul(phi, mul(two_l, r));
    auto [r0, r1] = detail::split2(r, rng);
    auto [m0, m1] = detail::split2(phir, rng);
    q0.push_back(MacCheckAux{r0, m0});
    q1.push_back(MacCheckAux{r1, m1});
  }
  return {q0, q1};
}

// ---------------------------------------------------------------------------
// Session-planned tape generation.
// ---------------------------------------------------------------------------

struct DealerPlan {
  RingParams params;
  uint32_t n = 512;       // feature dimensions; prepared templates are n+1 wide
  uint32_t m = 1;         // entries ingested by the batch initialization
  uint32_t enrolls = 0;   // single-entry enrolls after the batch
  uint32_t sessions = 1;
  bool threshold_mode = false;
  // Comparison-wire masks are drawn from [2^l, 2^(l+s) - 2^l) when possible,
  // which makes seccmp exact for every |x| <= 2^l at a statistical distance
  // of 2^(1-s) from uniform. Disabled only by tests probing the wraparound edge.
  bool safe_cmp_margin = true;
};

namespace detail {

// Uniform draw from the comparison-safe zone [2^l, 2^(l+s) - 2^l): keeps the
// masked wire at least 2^l away from both ring ends, so the comparison is
// exact for every |x| <= 2^l. Rejection accepts with probability 1 - 2^(1-s).
inline RingElement safe_cmp_lambda(SeededRng& rng, RingParams p, bool margin_enabled) {
  if (!margin_enabled || p.s < 2) return rng.sample_uniform(p);
  const u128 lo = u128{1} << p.l;
  for (;;) {
    u128 v = rng.sample_bits(p.total());
    if (v >= lo && v <= p.mask() - lo) return RingElement(v, p);
  }
}

// Dealer-side mirror of one wire: plaintext mask and both parties' shares.
struct WireLambda {
  RingElement plain, s0, s1;

  static WireLambda draw(SeededRng& rng, RingParams p) {
    WireLambda w;
    w.plain = rng.sample_uniform(p);
    auto [a, b] = split2(w.plain, rng);
    w.s0 = a;
    w.s1 = b;
    return w;
  }
  static WireLambda pinned(const RingElement& plain, SeededRng& rng) {
    WireLambda w;
    w.plain = plain;
    auto [a, b] = split2(plain, rng);
    w.s0 = a;
    w.s1 = b;
    return w;
  }
  WireLambda operator-(const WireLambda& o) const {
    return WireLambda{sub(plain, o.plain), sub(s0, o.s0), sub(s1, o.s1)};
  }
  WireLambda operator+(const WireLambda& o) const {
    return WireLambda{add(plain, o.plain), add(s0, o.s0), add(s1, o.s1)};
  }
};

}  // namespace detail

// One dealer pass produces both parties' mutually consistent tapes. The
// session wire graph (score chain, selects, identity match or threshold) is
// mirrored here so every derived comparison and multiplication wire gets a
// correlation bound to the exact mask it will carry online.
inline std::pair<CorrelationTape, CorrelationTape> build_tapes(const DealerPlan& plan,
                                                               SeededRng& rng) {
  const RingParams p = plan.params;
  if (plan.m + plan.enrolls < 1) throw ConfigError("build_tapes: need at least one entry");
  if (plan.n < 1) throw ConfigError("build_tapes: need n >= 1");
  const uint32_t total_entries = plan.m + plan.enrolls;
  const uint32_t width = plan.n + 2;

  CorrelationTape t0, t1;
  t0.party = 0;
  t1.party = 1;
  t0.params = t1.params = p;
  t0.n = t1.n = plan.n;
  t0.m = t1.m = plan.m;
  t0.enrolls = t1.enrolls = plan.enrolls;
  t0.session_count = t1.session_count = plan.sessions;
  t0.threshold_mode = t1.threshold_mode = plan.threshold_mode ? 1 : 0;

  auto [mk0, mk1] = gen_mac_key(rng, p);
  t0.mac = mk0;
  t1.mac = mk1;
  const RingElement phi = add(mk0.share, mk1.share);
  rng.fill(t0.online_seed.data(), 32);
  rng.fill(t1.online_seed.data(), 32);

  // phi's lift mask, shared by every session's MAC usage.
  detail::WireLambda lam_phi = detail::WireLambda::draw(rng, p);
  t0.lambda_by_label["phi"] = lam_phi.s0;
  t1.lambda_by_label["phi"] = lam_phi.s1;
  t0.init.party = 0;
  t1.init.party = 1;
  t0.init.width = t1.init.width = width;
  t0.init.lambda_phi_share = lam_phi.s0;
  t1.init.lambda_phi_share = lam_phi.s1;

  // Database masks, kept dealer-side for session binding. Component 0 is the
  // identity index, components 1..n+1 the prepared template.
  std::vector<std::vector<detail::WireLambda>> lam_d(total_entries),
      lam_phid(total_entries);
  for (uint32_t i = 0; i < total_entries; i++) {
    InitEntry e0, e1;
    for (uint32_t j = 0; j < width; j++) {
      detail::WireLambda ld = detail::WireLambda::draw(rng, p);
      detail::WireLambda lpd = detail::WireLambda::draw(rng, p);
      lam_d[i].push_back(ld);
      lam_phid[i].push_back(lpd);
      RingElement a = rng.sample_uniform(p), b = rng.sample_uniform(p);
      RingElement c = mul(a, b);
      auto [a0, a1] = detail::split2(a, rng);
      auto [b0, b1] = detail::split2(b, rng);
      auto [c0, c1] = detail::split2(c, rng);
      e0.a.push_back(a0);
      e1.a.push_back(a1);
      e0.b.push_back(b0);
      e1.b.push_back(b1);
      e0.c.push_back(c0);
      e1.c.push_back(c1);
      RingElement dphi = sub(a, lam_phi.plain);
      RingElement dd = sub(b, ld.plain);
      e0.delta_phi.push_back(dphi);
      e1.delta_phi.push_back(dphi);
      e0.delta_d.push_back(dd);
      e1.delta_d.push_back(dd);
      e0.lambda_d.push_back(ld.s0);
      e1.lambda_d.push_back(ld.s1);
      e0.lambda_phid.push_back(lpd.s0);
      e1.lambda_phid.push_back(lpd.s1);
    }
    t0.init.entries.push_back(std::move(e0));
    t1.init.entries.push_back(std::move(e1));
  }

  // One MAC check per batch init, per enroll, and per session.
  {
    auto [q0, q1] = gen_maccheck_aux(1 + plan.enrolls + plan.sessions, phi, rng);
    t0.aux_pool = std::move(q0);
    t1.aux_pool = std::move(q1);
  }

  const uint32_t M = total_entries;
  for (uint32_t k = 0; k < plan.sessions; k++) {
    SessionCorrelation s0, s1;
    s0.session_id = s1.session_id = k;
    const std::string sk = "s" + std::to_string(k);

    std::vector<detail::WireLambda> lam_t;
    for (uint32_t j = 0; j < plan.n + 1; j++) {
      detail::WireLambda w = detail::WireLambda::draw(rng, p);
      lam_t.push_back(w);
      s0.lambda_t.push_back(w.s0);
      s1.lambda_t.push_back(w.s1);
    }
    detail::WireLambda lam_ic = detail::WireLambda::draw(rng, p);
    s0.lambda_ic = lam_ic.s0;
    s1.lambda_ic = lam_ic.s1;

    // Scores. lam_s[0] seeds the chain; lam_s[1] is pinned so the first
    // comparison wire lands in the safe zone; a single-entry threshold run
    // pins lam_s[0] itself (the threshold comparison is on that wire).
    std::vector<detail::WireLambda> lam_s(M), lam_phis(M);
    for (uint32_t i = 0; i < M; i++) {
      std::vector<RingElement> lx, lpx, ly;
      for (uint32_t j = 0; j < plan.n + 1; j++) {
        lx.push_back(lam_d[i][j + 1].plain);
        lpx.push_back(lam_phid[i][j + 1].plain);
        ly.push_back(lam_t[j].plain);
      }
      const RingElement* pin = nullptr;
      RingElement pin_v;
      if (i == 1 && M >= 2) {
        // lambda of (S~_1 - S[1]) = lam_s[0] - lam_s[1]; aim it at the safe zone.
        RingElement target = detail::safe_cmp_lambda(rng, p, plan.safe_cmp_margin);
        pin_v = sub(lam_s[0].plain, target);
        pin = &pin_v;
      } else if (i == 0 && plan.threshold_mode && M == 1) {
        pin_v = detail::safe_cmp_lambda(rng, p, plan.safe_cmp_margin);
        pin = &pin_v;
      }
      RingElement lz, lpz;
      auto [ip0, ip1] = gen_secip_corr(lx, lpx, ly, plan.n + 1, rng,
                                       sk + ".score[" + std::to_string(i) + "]", pin, &lz, &lpz);
      // Recover both parties' lambda shares for the wire mirror.
      lam_s[i] = detail::WireLambda{lz, ip0.lambda_z_share, ip1.lambda_z_share};
      lam_phis[i] = detail::WireLambda{lpz, ip0.lambda_phiz_share, ip1.lambda_phiz_share};
      s0.secip.push_back(std::move(ip0));
      s1.secip.push_back(std::move(ip1));
    }

    // Top-1 chain mirror.
    detail::WireLambda cur_s = lam_s[0], cur_phis = lam_phis[0];
    detail::WireLambda cur_i = lam_d[0][0], cur_phii = lam_phid[0][0];
    for (uint32_t i = 1; i < M; i++) {
      const std::string si = std::to_string(i);
      detail::WireLambda cmp = cur_s - lam_s[i];
      auto [cc0, cc1] = gen_seccmp_corr(cmp.plain, cmp.s0, cmp.s1, phi, rng, sk + ".b[" + si + "]");
      detail::WireLambda lam_b{add(cc0.lambda_z_share, cc1.lambda_z_share), cc0.lambda_z_share,
                               cc1.lambda_z_share};
      s0.seccmp.push_back(std::move(cc0));
      s1.seccmp.push_back(std::move(cc1));

      // Select multiplications: scores, score MACs, ids, id MACs, in order.
      detail::WireLambda phicmp = cur_phis - lam_phis[i];
      detail::WireLambda idcmp = cur_i - lam_d[i][0];
      detail::WireLambda phiidcmp = cur_phii - lam_phid[i][0];

      const RingElement* pin = nullptr;
      RingElement pin_v;
      if (i + 1 < M) {
        // lambda of next comparison wire = (lam_s[i] + lam_u1) - lam_s[i+1].
        RingElement target = detail::safe_cmp_lambda(rng, p, plan.safe_cmp_margin);
        pin_v = sub(add(target, lam_s[i + 1].plain), lam_s[i].plain);
        pin = &pin_v;
      } else if (plan.threshold_mode) {
        // Final score mask = lam_s[i] + lam_u1 must itself be safe.
        RingElement target = detail::safe_cmp_lambda(rng, p, plan.safe_cmp_margin);
        pin_v = sub(target, lam_s[i].plain);
        pin = &pin_v;
      }
      RingElement lu1;
      auto [m10, m11] = gen_mult_corr(lam_b.plain, lam_b.s0, lam_b.s1, cmp.plain, cmp.s0, cmp.s1,
                                      rng, sk + ".sel_s[" + si + "]", pin, &lu1);
      detail::WireLambda w_u1{lu1, m10.lambda_z_share, m11.lambda_z_share};
      s0.mult.push_back(std::move(m10));
      s1.mult.push_back(std::move(m11));

      RingElement lu2;
      auto [m20, m21] = gen_mult_corr(lam_b.plain, lam_b.s0, lam_b.s1, phicmp.plain, phicmp.s0,
                                      phicmp.s1, rng, sk + ".sel_phis[" + si + "]", nullptr, &lu2);
      detail::WireLambda w_u2{lu2, m20.lambda_z_share, m21.lambda_z_share};
      s0.mult.push_back(std::move(m20));
      s1.mult.push_back(std::move(m21));

      RingElement lu3;
      auto [m30, m31] = gen_mult_corr(lam_b.plain, lam_b.s0, lam_b.s1, idcmp.plain, idcmp.s0,
                                      idcmp.s1, rng, sk + ".sel_id[" + si + "]", nullptr, &lu3);
      detail::WireLambda w_u3{lu3, m30.lambda_z_share, m31.lambda_z_share};
      s0.mult.push_back(std::move(m30));
      s1.mult.push_back(std::move(m31));

      RingElement lu4;
      auto [m40, m41] = gen_mult_corr(lam_b.plain, lam_b.s0, lam_b.s1, phiidcmp.plain,
                                      phiidcmp.s0, phiidcmp.s1, rng, sk + ".sel_phiid[" + si + "]",
                                      nullptr, &lu4);
      detail::WireLambda w_u4{lu4, m40.lambda_z_share, m41.lambda_z_share};
      s0.mult.push_back(std::move(m40));
      s1.mult.push_back(std::move(m41));

      cur_s = lam_s[i] + w_u1;
      cur_phis = lam_phis[i] + w_u2;
      cur_i = lam_d[i][0] + w_u3;
      cur_phii = lam_phid[i][0] + w_u4;
    }

    if (plan.threshold_mode) {
      // add_public(-tau) leaves the mask untouched: the threshold comparison
      // is bound to the final score mask.
      auto [tc0, tc1] =
          gen_seccmp_corr(cur_s.plain, cur_s.s0, cur_s.s1, phi, rng, sk + ".thr");
      s0.seccmp.push_back(std::move(tc0));
      s1.seccmp.push_back(std::move(tc1));
    } else {
      auto [im0, im1] = gen_mult_corr(lam_phi.plain, lam_phi.s0, lam_phi.s1, lam_ic.plain,
                                      lam_ic.s0, lam_ic.s1, rng, sk + ".phi_ic");
      s0.mult.push_back(std::move(im0));
      s1.mult.push_back(std::move(im1));
    }

    t0.sessions.push_back(std::move(s0));
    t1.sessions.push_back(std::move(s1));
  }

  return {t0, t1};
}

// ---------------------------------------------------------------------------
// Tape container: magic "FLM1", version, party, (l, s), section table, then
// section bodies each followed by a CRC32. All integers little-endian.
// ---------------------------------------------------------------------------

namespace detail {

class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) {
    for (int i = 0; i < 2; i++) buf_.push_back(uint8_t((v >> (8 * i)) & 0xff));
  }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; i++) buf_.push_back(uint8_t((v >> (8 * i)) & 0xff));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; i++) buf_.push_back(uint8_t((v >> (8 * i)) & 0xff));
  }
  void ring(const RingElement& r) { append_le(buf_, r); }
  void bytes(const uint8_t* d, size_t n) { buf_.insert(buf_.end(), d, d + n); }
  void str(const std::string& s) {
    if (s.size() > 0xffff) throw TapeError("label too long");
    u16(uint16_t(s.size()));
    bytes(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  }
  std::vector<uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const uint8_t* d, size_t n) : d_(d), n_(n) {}
  uint8_t u8() {
    need(1);
    return d_[pos_++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = uint16_t(d_[pos_]) | uint16_t(d_[pos_ + 1]) << 8;
    pos_ += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; i--) v = (v << 8) | d_[pos_ + i];
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; i--) v = (v << 8) | d_[pos_ + i];
    pos_ += 8;
    return v;
  }
  RingElement ring(RingParams p) {
    need(16);
    RingElement r = load_le(d_ + pos_, p);
    pos_ += 16;
    return r;
  }
  std::vector<uint8_t> bytes(size_t n) {
    need(n);
    std::vector<uint8_t> out(d_ + pos_, d_ + pos_ + n);
    pos_ += n;
    return out;
  }
  std::string str() {
    uint16_t len = u16();
    need(len);
    std::string s(reinterpret_cast<const char*>(d_ + pos_), len);
    pos_ += len;
    return s;
  }
  bool done() const { return pos_ == n_; }
  size_t remaining() const { return n_ - pos_; }

 private:
  void need(size_t k) const {
    if (pos_ + k > n_) throw TapeError("tape truncated");
  }
  const uint8_t* d_;
  size_t n_, pos_ = 0;
};

}  // namespace detail

struct TapeSection {
  uint8_t tag = 0;
  uint32_t count = 0;
  std::vector<uint8_t> body;
};

enum TapeSectionTag : uint8_t {
  SEC_HEADER = 1,
  SEC_LAMBDA = 2,
  SEC_INIT = 3,
  SEC_AUX = 4,
  SEC_SESSIONS = 5,
  SEC_DB = 8,
};

inline void write_container(const std::string& path, int party, RingParams p,
                            const std::vector<TapeSection>& sections) {
  detail::ByteWriter head;
  head.bytes(reinterpret_cast<const uint8_t*>("FLM1"), 4);
  head.u8(1);  // version
  head.u8(uint8_t(party));
  head.u8(p.l);
  head.u8(p.s);
  head.u32(uint32_t(sections.size()));
  for (const auto& s : sections) {
    head.u8(s.tag);
    head.u32(s.count);
    head.u64(s.body.size());
  }
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw TapeError("cannot open tape for writing: " + path);
  std::vector<uint8_t> hb = head.take();
  bool ok = std::fwrite(hb.data(), 1, hb.size(), f) == hb.size();
  for (const auto& s : sections) {
    ok = ok && (s.body.empty() ||
                std::fwrite(s.body.data(), 1, s.body.size(), f) == s.body.size());
    uint32_t crc = uint32_t(::crc32(0L, s.body.data(), uInt(s.body.size())));
    uint8_t cb[4];
    for (int i = 0; i < 4; i++) cb[i] = uint8_t((crc >> (8 * i)) & 0xff);
    ok = ok && std::fwrite(cb, 1, 4, f) == 4;
  }
  if (std::fclose(f) != 0) ok = false;
  if (!ok) throw TapeError("tape write failed: " + path);
}

struct TapeFile {
  int party = 0;
  RingParams params;
  std::vector<TapeSection> sections;
};

inline TapeFile read_container(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw TapeError("cannot open tape: " + path);
  std::fseek(f, 0, SEEK_END);
  long sz = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<uint8_t> data;
  data.resize(size_t(sz));
  if (sz > 0 && std::fread(data.data(), 1, data.size(), f) != data.size()) {
    std::fclose(f);
    throw TapeError("tape read failed: " + path);
  }
  std::fclose(f);

  detail::ByteReader r(data.data(), data.size());
  auto magic = r.bytes(4);
  if (std::memcmp(magic.data(), "FLM1", 4) != 0) throw TapeError("bad tape magic");
  uint8_t version = r.u8();
  if (version != 1) throw TapeError("unsupported tape version");
  TapeFile tf;
  tf.party = r.u8();
  uint8_t ring_l = r.u8();
  uint8_t ring_s = r.u8();
  tf.params = RingParams::checked(ring_l, ring_s);
  uint32_t nsec = r.u32();
  std::vector<std::pair<uint8_t, std::pair<uint32_t, uint64_t>>> table;
  for (uint32_t i = 0; i < nsec; i++) {
    uint8_t tag = r.u8();
    uint32_t count = r.u32();
    uint64_t len = r.u64();
    table.push_back({tag, {count, len}});
  }
  for (auto& [tag, cl] : table) {
    TapeSection s;
    s.tag = tag;
    s.count = cl.first;
    s.body = r.bytes(cl.second);
    auto crcb = r.bytes(4);
    uint32_t want = 0;
    for (int i = 3; i >= 0; i--) want = (want << 8) | crcb[i];
    uint32_t got = uint32_t(::crc32(0L, s.body.data(), uInt(s.body.size())));
    if (got != want) throw TapeError("tape section checksum mismatch (tag " +
                                     std::to_string(int(tag)) + ")");
    tf.sections.push_back(std::move(s));
  }
  if (!r.done()) throw TapeError("tape has trailing bytes");
  return tf;
}

namespace detail {

inline void put_secip(ByteWriter& w, const SecIpCorrelation& c) {
  w.u32(c.n);
  w.u64(c.label_hash);
  auto vec = [&](const std::vector<RingElement>& v) {
    for (const auto& e : v) w.ring(e);
  };
  vec(c.a1);
  vec(c.a2);
  vec(c.b);
  vec(c.c1);
  vec(c.c2);
  vec(c.delta_x);
  vec(c.delta_phix);
  vec(c.delta_y);
  w.ring(c.lambda_z_share);
  w.ring(c.lambda_phiz_share);
}

inline SecIpCorrelation get_secip(ByteReader& r, int party, RingParams p) {
  SecIpCorrelation c;
  c.party = party;
  c.n = r.u32();
  c.label_hash = r.u64();
  auto vec = [&](std::vector<RingElement>& v) {
    v.reserve(c.n);
    for (uint32_t i = 0; i < c.n; i++) v.push_back(r.ring(p));
  };
  vec(c.a1);
  vec(c.a2);
  vec(c.b);
  vec(c.c1);
  vec(c.c2);
  vec(c.delta_x);
  vec(c.delta_phix);
  vec(c.delta_y);
  c.lambda_z_share = r.ring(p);
  c.lambda_phiz_share = r.ring(p);
  return c;
}

inline void put_seccmp(ByteWriter& w, const SecCmpCorrelation& c) {
  w.u64(c.label_hash);
  w.ring(c.lambda_x_share);
  w.ring(c.b0_share);
  w.ring(c.b1_share);
  w.ring(c.lambda_z_share);
  w.ring(c.lambda_phiz_share);
  std::vector<uint8_t> key = serialize_dcf(c.key);
  w.u32(uint32_t(key.size()));
  w.bytes(key.data(), key.size());
}

inline SecCmpCorrelation get_seccmp(ByteReader& r, int party, RingParams p) {
  SecCmpCorrelation c;
  c.party = party;
  c.label_hash = r.u64();
  c.lambda_x_share = r.ring(p);
  c.b0_share = r.ring(p);
  c.b1_share = r.ring(p);
  c.lambda_z_share = r.ring(p);
  c.lambda_phiz_share = r.ring(p);
  uint32_t klen = r.u32();
  auto kb = r.bytes(klen);
  try {
    c.key = deserialize_dcf(kb);
  } catch (const DecodeError& e) {
    throw TapeError(std::string("embedded dcf key: ") + e.what());
  }
  return c;
}

inline void put_mult(ByteWriter& w, const MultCorrelation& c) {
  w.u64(c.label_hash);
  w.ring(c.a_share);
  w.ring(c.b_share);
  w.ring(c.c_share);
  w.ring(c.delta_x);
  w.ring(c.delta_y);
  w.ring(c.lambda_z_share);
  w.ring(c.lambda_x_share);
  w.ring(c.lambda_y_share);
}

inline MultCorrelation get_mult(ByteReader& r, int party, RingParams p) {
  MultCorrelation c;
  c.party = party;
  c.label_hash = r.u64();
  c.a_share = r.ring(p);
  c.b_share = r.ring(p);
  c.c_share = r.ring(p);
  c.delta_x = r.ring(p);
  c.delta_y = r.ring(p);
  c.lambda_z_share = r.ring(p);
  c.lambda_x_share = r.ring(p);
  c.lambda_y_share = r.ring(p);
  return c;
}

}  // namespace detail

inline void write_tape(const CorrelationTape& t, const std::string& path) {
  std::vector<TapeSection> sections;

  {
    detail::ByteWriter w;
    w.ring(t.mac.share);
    w.bytes(t.online_seed.data(), 32);
    w.u32(t.n);
    w.u32(t.m);
    w.u32(t.enrolls);
    w.u32(t.session_count);
    w.u8(t.threshold_mode);
    sections.push_back(TapeSection{SEC_HEADER, 1, w.take()});
  }
  {
    detail::ByteWriter w;
    for (const auto& [label, share] : t.lambda_by_label) {
      w.str(label);
      w.ring(share);
    }
    sections.push_back(
        TapeSection{SEC_LAMBDA, uint32_t(t.lambda_by_label.size()), w.take()});
  }
  {
    detail::ByteWriter w;
    w.u32(t.init.width);
    w.ring(t.init.lambda_phi_share);
    for (const auto& e : t.init.entries) {
      for (uint32_t j = 0; j < t.init.width; j++) {
        w.ring(e.a[j]);
        w.ring(e.b[j]);
        w.ring(e.c[j]);
        w.ring(e.delta_phi[j]);
        w.ring(e.delta_d[j]);
        w.ring(e.lambda_d[j]);
        w.ring(e.lambda_phid[j]);
      }
    }
    sections.push_back(TapeSection{SEC_INIT, uint32_t(t.init.entries.size()), w.take()});
  }
  {
    detail::ByteWriter w;
    for (const auto& a : t.aux_pool) {
      w.ring(a.r_share);
      w.ring(a.phir_share);
    }
    sections.push_back(TapeSection{SEC_AUX, uint32_t(t.aux_pool.size()), w.take()});
  }
  {
    detail::ByteWriter w;
    for (const auto& s : t.sessions) {
      w.u32(s.session_id);
      w.u32(uint32_t(s.lambda_t.size()));
      for (const auto& e : s.lambda_t) w.ring(e);
      w.ring(s.lambda_ic);
      w.u32(uint32_t(s.secip.size()));
      for (const auto& c : s.secip) detail::put_secip(w, c);
      w.u32(uint32_t(s.seccmp.size()));
      for (const auto& c : s.seccmp) detail::put_seccmp(w, c);
      w.u32(uint32_t(s.mult.size()));
      for (const auto& c : s.mult) detail::put_mult(w, c);
    }
    sections.push_back(TapeSection{SEC_SESSIONS, uint32_t(t.sessions.size()), w.take()});
  }

  write_container(path, t.party, t.params, sections);
}

inline CorrelationTape read_tape(const std::string& path) {
  TapeFile tf = read_container(path);
  CorrelationTape t;
  t.party = tf.party;
  t.params = tf.params;
  const RingParams p = tf.params;

  for (const auto& s : tf.sections) {
    detail::ByteReader r(s.body.data(), s.body.size());
    switch (s.tag) {
      case SEC_HEADER: {
        t.mac = MacKeyShare{t.party, r.ring(p)};
        auto seed = r.bytes(32);
        std::copy(seed.begin(), seed.end(), t.online_seed.begin());
        t.n = r.u32();
        t.m = r.u32();
        t.enrolls = r.u32();
        t.session_count = r.u32();
        t.threshold_mode = r.u8();
        break;
      }
      case SEC_LAMBDA: {
        for (uint32_t i = 0; i < s.count; i++) {
          std::string label = r.str();
          t.lambda_by_label[label] = r.ring(p);
        }
        break;
      }
      case SEC_INIT: {
        t.init.party = t.party;
        t.init.width = r.u32();
        t.init.lambda_phi_share = r.ring(p);
        for (uint32_t i = 0; i < s.count; i++) {
          InitEntry e;
          for (uint32_t j = 0; j < t.init.width; j++) {
            e.a.push_back(r.ring(p));
            e.b.push_back(r.ring(p));
            e.c.push_back(r.ring(p));
            e.delta_phi.push_back(r.ring(p));
            e.delta_d.push_back(r.ring(p));
            e.lambda_d.push_back(r.ring(p));
            e.lambda_phid.push_back(r.ring(p));
          }
          t.init.entries.push_back(std::move(e));
        }
        break;
      }
      case SEC_AUX: {
        for (uint32_t i = 0; i < s.count; i++) {
          MacCheckAux a;
          a.r_share = r.ring(p);
          a.phir_share = r.ring(p);
          t.aux_pool.push_back(a);
        }
        break;
      }
      case SEC_SESSIONS: {
        for (uint32_t i = 0; i < s.count; i++) {
          SessionCorrelation sc;
          sc.session_id = r.u32();
          uint32_t nt = r.u32();
          for (uint32_t j = 0; j < nt; j++) sc.lambda_t.push_back(r.ring(p));
          sc.lambda_ic = r.ring(p);
          uint32_t c1 = r.u32();
          for (uint32_t j = 0; j < c1; j++)
            sc.secip.push_back(detail::get_secip(r, t.party, p));
          uint32_t c2 = r.u32();
          for (uint32_t j = 0; j < c2; j++)
            sc.seccmp.push_back(detail::get_seccmp(r, t.party, p));
          uint32_t c3 = r.u32();
          for (uint32_t j = 0; j < c3; j++)
            sc.mult.push_back(detail::get_mult(r, t.party, p));
          t.sessions.push_back(std::move(sc));
        }
        break;
      }
      default:
        throw TapeError("unknown tape section tag " + std::to_string(int(s.tag)));
    }
    if (!r.done()) throw TapeError("tape section has trailing bytes");
  }
  return t;
}

// Dealer self-audit: re-verify every algebraic relation across both tapes.
// Throws TapeError with a description on the first violation.
inline void audit_tapes(const CorrelationTape& t0, const CorrelationTape& t1,
                        uint32_t dcf_spot_checks = 3) {
  auto fail = [](const std::string& what) { throw TapeError("audit: " + what); };
  if (t0.party != 0 || t1.party != 1) fail("party ids");
  if (!(t0.params == t1.params)) fail("ring params differ");
  const RingParams p = t0.params;

  RingElement phi = add(t0.mac.share, t1.mac.share);
  if (p.s < 128 && (phi.value >> p.s) != 0) fail("mac key outside [0, 2^s)");

  RingElement lam_phi = add(t0.init.lambda_phi_share, t1.init.lambda_phi_share);
  if (t0.init.width != t1.init.width || t0.init.entries.size() != t1.init.entries.size())
    fail("init shape mismatch");
  for (size_t i = 0; i < t0.init.entries.size(); i++) {
    const InitEntry& e0 = t0.init.entries[i];
    const InitEntry& e1 = t1.init.entries[i];
    for (uint32_t j = 0; j < t0.init.width; j++) {
      RingElement a = add(e0.a[j], e1.a[j]);
      RingElement b = add(e0.b[j], e1.b[j]);
      RingElement c = add(e0.c[j], e1.c[j]);
      if (c != mul(a, b)) fail("init triple relation");
      if (e0.delta_phi[j] != e1.delta_phi[j] || e0.delta_d[j] != e1.delta_d[j])
        fail("init public deltas differ between tapes");
      if (e0.delta_phi[j] != sub(a, lam_phi)) fail("init delta_phi binding");
      RingElement lam_d = add(e0.lambda_d[j], e1.lambda_d[j]);
      if (e0.delta_d[j] != sub(b, lam_d)) fail("init delta_d binding");
    }
  }

  if (t0.aux_pool.size() != t1.aux_pool.size()) fail("aux pool sizes differ");
  RingElement two_l(u128{1} << p.l, p);
  for (size_t i = 0; i < t0.aux_pool.size(); i++) {
    RingElement r = add(t0.aux_pool[i].r_share, t1.aux_pool[i].r_share);
    RingElement pr = add(t0.aux_pool[i].phir_share, t1.aux_pool[i].phir_share);
    if (p.s < 128 && (r.value >> p.s) != 0) fail("aux r outside [0, 2^s)");
    if (pr != mul(phi, mul(two_l, r))) fail("aux phi*2^l*r relation");
  }

  if (t0.sessions.size() != t1.sessions.size()) fail("session counts differ");
  SeededRng audit_rng = SeededRng::from_string("tape-audit-spot-checks");
  for (size_t k = 0; k < t0.sessions.size(); k++) {
    const SessionCorrelation& s0 = t0.sessions[k];
    const SessionCorrelation& s1 = t1.sessions[k];
    if (s0.secip.size() != s1.secip.size() || s0.seccmp.size() != s1.seccmp.size() ||
        s0.mult.size() != s1.mult.size())
      fail("session queue sizes differ");

    for (size_t i = 0; i < s0.secip.size(); i++) {
      const SecIpCorrelation& c0 = s0.secip[i];
      const SecIpCorrelation& c1 = s1.secip[i];
      if (c0.n != c1.n || c0.label_hash != c1.label_hash) fail("secip shape");
      for (uint32_t j = 0; j < c0.n; j++) {
        RingElement a1 = add(c0.a1[j], c1.a1[j]);
        RingElement a2 = add(c0.a2[j], c1.a2[j]);
        RingElement b = add(c0.b[j], c1.b[j]);
        if (add(c0.c1[j], c1.c1[j]) != mul(a1, b)) fail("secip c1 relation");
        if (add(c0.c2[j], c1.c2[j]) != mul(a2, b)) fail("secip c2 relation");
        if (c0.delta_x[j] != c1.delta_x[j] || c0.delta_phix[j] != c1.delta_phix[j] ||
            c0.delta_y[j] != c1.delta_y[j])
          fail("secip public deltas differ");
        // delta bindings against the database and template masks.
        const InitEntry& e0 = t0.init.entries[i];
        const InitEntry& e1 = t1.init.entries[i];
        RingElement lam_x = add(e0.lambda_d[j + 1], e1.lambda_d[j + 1]);
        RingElement lam_px = add(e0.lambda_phid[j + 1], e1.lambda_phid[j + 1]);
        RingElement lam_y = add(s0.lambda_t[j], s1.lambda_t[j]);
        if (c0.delta_x[j] != sub(a1, lam_x)) fail("secip delta_x binding");
        if (c0.delta_phix[j] != sub(a2, lam_px)) fail("secip delta_phix binding");
        if (c0.delta_y[j] != sub(b, lam_y)) fail("secip delta_y binding");
      }
    }

    for (size_t i = 0; i < s0.seccmp.size(); i++) {
      const SecCmpCorrelation& c0 = s0.seccmp[i];
      const SecCmpCorrelation& c1 = s1.seccmp[i];
      if (c0.label_hash != c1.label_hash) fail("seccmp labels");
      if (add(c0.b0_share, c1.b0_share) != RingElement(1, p)) fail("seccmp b0 != 1");
      if (add(c0.b1_share, c1.b1_share) != phi) fail("seccmp b1 != phi");
      RingElement a = add(c0.lambda_x_share, c1.lambda_x_share);
      Payload2 want{neg(RingElement(1, p)), neg(phi)};
      auto check_point = [&](const RingElement& x, bool below) {
        Payload2 sum = add(eval_lt(0, c0.key, x), eval_lt(1, c1.key, x));
        Payload2 expect = below ? want : Payload2::zero(p);
        if (!(sum == expect)) fail("seccmp dcf payload at spot check");
      };
      check_point(a, false);
      if (a.value > 0) check_point(RingElement(a.value - 1, p), true);
      for (uint32_t sc = 0; sc < dcf_spot_checks; sc++) {
        RingElement x = audit_rng.sample_uniform(p);
        check_point(x, x.value < a.value);
      }
    }

    for (size_t i = 0; i < s0.mult.size(); i++) {
      const MultCorrelation& c0 = s0.mult[i];
      const MultCorrelation& c1 = s1.mult[i];
      if (c0.label_hash != c1.label_hash) fail("mult labels");
      RingElement a = add(c0.a_share, c1.a_share);
      RingElement b = add(c0.b_share, c1.b_share);
      if (add(c0.c_share, c1.c_share) != mul(a, b)) fail("mult triple relation");
      if (c0.delta_x != c1.delta_x || c0.delta_y != c1.delta_y)
        fail("mult public deltas differ");
      RingElement lam_x = add(c0.lambda_x_share, c1.lambda_x_share);
      RingElement lam_y = add(c0.lambda_y_share, c1.lambda_y_share);
      if (c0.delta_x != sub(a, lam_x)) fail("mult delta_x binding");
      if (c0.delta_y != sub(b, lam_y)) fail("mult delta_y binding");
    }
  }
}

}  // namespace flame
