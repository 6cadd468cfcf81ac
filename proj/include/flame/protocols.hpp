#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flame/dealer.hpp"
#include "flame/hash.hpp"
#include "flame/transport.hpp"

namespace flame {

enum class AuthMode : uint8_t { TOP1 = 0, THRESHOLD = 1 };

enum class SessionPhase : uint8_t {
  CREATED = 0,
  LIFTED = 1,
  SCORED = 2,
  SELECTED = 3,
  CHECKED = 4,
  DONE = 5,
  ABORTED = 6,
};

// One opened value since the last MAC check. Paired records (value plus its
// phi*value companion) enter the random linear combination; unpaired records
// are kept for transcript diagnostics and are covered transitively, since any
// tampering of them skews a later paired open.
struct OpenRecord {
  std::string label;
  RingElement delta;
  RingElement lambda_share;
  bool has_mac = false;
  RingElement mac_delta;
  RingElement mac_lambda_share;
};

class OpenLog {
 public:
  void push_value(std::string label, const RingElement& delta, const RingElement& lambda_share) {
    records_.push_back(OpenRecord{std::move(label), delta, lambda_share, false, {}, {}});
  }
  void push_pair(std::string label, const RingElement& delta, const RingElement& lambda_share,
                 const RingElement& mac_delta, const RingElement& mac_lambda_share) {
    records_.push_back(
        OpenRecord{std::move(label), delta, lambda_share, true, mac_delta, mac_lambda_share});
  }
  const std::vector<OpenRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }
  size_t pair_count() const {
    size_t k = 0;
    for (const auto& r : records_)
      if (r.has_mac) k++;
    return k;
  }
  void clear() { records_.clear(); }

 private:
  std::vector<OpenRecord> records_;
};

// Adversary hook: adds e to one internal share right before it leaves the
// party, per the behavioral tamper model the MAC check must defeat.
struct Saboteur {
  enum class Target : uint8_t { NONE, OPEN_DELTA, Y0_SHARE, Z_SHARE, CMP_PAYLOAD, TRIPLE_SHARE };
  Target target = Target::NONE;
  uint64_t index = 0;
  RingElement error;

  uint64_t open_elems = 0, cmp_calls = 0, triple_calls = 0, check_calls = 0;

  bool hit(Target t, uint64_t counter) const { return target == t && counter == index; }
};

// Per-party online engine state for one logical flow (an initialization or a
// session): the channel, the MAC key share, the open log, and a deterministic
// nonce/coin source forked from the tape's online seed.
struct ProtoCtx {
  int party = 0;
  Channel* ch = nullptr;
  uint32_t session_id = 0;
  MacKeyShare mac;
  OpenLog log;
  SeededRng rng = SeededRng::from_string("uninitialized");
  Saboteur* saboteur = nullptr;
};

namespace detail {

// Batched open with adversary hook; one round. A tampered element is only
// lied about on the wire: the cheater keeps its own correct view, which is
// the additive-attack model the MAC check must defeat.
inline std::vector<RingElement> open_tampered(ProtoCtx& ctx, uint8_t msg_type,
                                              const std::vector<RingElement>& shares) {
  if (ctx.saboteur && msg_type == MSG_OPEN) {
    std::vector<RingElement> send = shares;
    for (auto& s : send) {
      if (ctx.saboteur->hit(Saboteur::Target::OPEN_DELTA, ctx.saboteur->open_elems))
        s = add(s, ctx.saboteur->error);
      ctx.saboteur->open_elems++;
    }
    return open_values(*ctx.ch, msg_type, ctx.session_id, send, shares);
  }
  return open_values(*ctx.ch, msg_type, ctx.session_id, shares);
}

}  // namespace detail

// Lift additive shares into the masked representation: both parties learn
// Delta = x + lambda. One batched round for the whole vector.
inline std::vector<OptShare> lift_to_optss(ProtoCtx& ctx,
                                           const std::vector<RingElement>& x_shares,
                                           const std::vector<RingElement>& lambda_shares,
                                           const std::string& label) {
  if (x_shares.size() != lambda_shares.size())
    throw ProtocolError("lift: share and mask vectors differ in length");
  std::vector<RingElement> masked;
  masked.reserve(x_shares.size());
  for (size_t i = 0; i < x_shares.size(); i++) masked.push_back(add(x_shares[i], lambda_shares[i]));
  std::vector<RingElement> deltas = detail::open_tampered(ctx, MSG_OPEN, masked);
  std::vector<OptShare> out;
  out.reserve(deltas.size());
  for (size_t i = 0; i < deltas.size(); i++) {
    ctx.log.push_value(label + "[" + std::to_string(i) + "]", deltas[i], lambda_shares[i]);
    out.push_back(OptShare{deltas[i], lambda_shares[i], ctx.party});
  }
  return out;
}

inline OptShare lift_one(ProtoCtx& ctx, const RingElement& x_share,
                         const RingElement& lambda_share, const std::string& label) {
  return lift_to_optss(ctx, {x_share}, {lambda_share}, label)[0];
}

// ---------------------------------------------------------------------------
// Multiplication. The local phase produces this party's share of the masked
// product; the open can be deferred so several multiplications share a round.
// ---------------------------------------------------------------------------

struct PendingMult {
  RingElement z_share;
  RingElement lambda_z_share;
};

inline PendingMult mult_local(ProtoCtx& ctx, const OptShare& x, const OptShare& y,
                              const MultCorrelation& corr) {
  if (!(corr.lambda_x_share == x.lambda_share) || !(corr.lambda_y_share == y.lambda_share))
    throw ConfigError("mult: correlation bound to different wires");
  RingElement ex = add(x.delta, corr.delta_x);  // x + a once masks cancel
  RingElement ey = add(y.delta, corr.delta_y);  // y + b
  RingElement c_share = corr.c_share;
  if (ctx.saboteur) {
    if (ctx.saboteur->hit(Saboteur::Target::TRIPLE_SHARE, ctx.saboteur->triple_calls))
      c_share = add(c_share, ctx.saboteur->error);
    ctx.saboteur->triple_calls++;
  }
  RingElement z = sub(add(c_share, corr.lambda_z_share),
                      add(mul(corr.a_share, ey), mul(ex, corr.b_share)));
  if (ctx.party == 0) z = add(z, mul(ex, ey));
  return PendingMult{z, corr.lambda_z_share};
}

inline std::vector<OptShare> mult_finish(ProtoCtx& ctx, const std::vector<PendingMult>& pend) {
  std::vector<RingElement> shares;
  shares.reserve(pend.size());
  for (const auto& m : pend) shares.push_back(m.z_share);
  std::vector<RingElement> deltas = detail::open_tampered(ctx, MSG_OPEN, shares);
  std::vector<OptShare> out;
  out.reserve(pend.size());
  for (size_t i = 0; i < pend.size(); i++)
    out.push_back(OptShare{deltas[i], pend[i].lambda_z_share, ctx.party});
  return out;
}

// One multiplication, one round.
inline OptShare mult(ProtoCtx& ctx, const OptShare& x, const OptShare& y,
                     const MultCorrelation& corr) {
  return mult_finish(ctx, {mult_local(ctx, x, y, corr)})[0];
}

// ---------------------------------------------------------------------------
// Secure inner product: local masked-product sums for the value and MAC
// layers, then a single open of two ring elements regardless of n.
// ---------------------------------------------------------------------------

struct PendingSecIp {
  RingElement z_share, phiz_share;
  RingElement lambda_z_share, lambda_phiz_share;
  std::string label;
};

inline PendingSecIp secip_local(ProtoCtx& ctx, const std::vector<AuthPair>& d,
                                const std::vector<OptShare>& t, const SecIpCorrelation& corr,
                                const std::string& label) {
  if (d.size() != t.size() || d.size() != corr.n)
    throw ProtocolError("secip: vector lengths disagree with the correlation");
  if (corr.label_hash != fnv64(label))
    throw ConfigError("secip: correlation bound to a different wire label");
  const bool lead = ctx.party == 0;
  RingElement z = corr.lambda_z_share;
  RingElement mz = corr.lambda_phiz_share;
  for (uint32_t i = 0; i < corr.n; i++) {
    RingElement ex = add(d[i].value.delta, corr.delta_x[i]);
    RingElement epx = add(d[i].mac.delta, corr.delta_phix[i]);
    RingElement ey = add(t[i].delta, corr.delta_y[i]);
    RingElement c1 = corr.c1[i];
    if (i == 0 && ctx.saboteur) {
      if (ctx.saboteur->hit(Saboteur::Target::TRIPLE_SHARE, ctx.saboteur->triple_calls))
        c1 = add(c1, ctx.saboteur->error);
      ctx.saboteur->triple_calls++;
    }
    z = add(z, sub(c1, add(mul(corr.a1[i], ey), mul(ex, corr.b[i]))));
    mz = add(mz, sub(corr.c2[i], add(mul(corr.a2[i], ey), mul(epx, corr.b[i]))));
    if (lead) {
      z = add(z, mul(ex, ey));
      mz = add(mz, mul(epx, ey));
    }
  }
  return PendingSecIp{z, mz, corr.lambda_z_share, corr.lambda_phiz_share, label};
}

inline std::vector<AuthPair> secip_finish(ProtoCtx& ctx, const std::vector<PendingSecIp>& pend) {
  std::vector<RingElement> shares;
  shares.reserve(2 * pend.size());
  for (const auto& s : pend) {
    shares.push_back(s.z_share);
    shares.push_back(s.phiz_share);
  }
  std::vector<RingElement> deltas = detail::open_tampered(ctx, MSG_OPEN, shares);
  std::vector<AuthPair> out;
  out.reserve(pend.size());
  for (size_t i = 0; i < pend.size(); i++) {
    const RingElement& dz = deltas[2 * i];
    const RingElement& dpz = deltas[2 * i + 1];
    ctx.log.push_pair(pend[i].label, dz, pend[i].lambda_z_share, dpz, pend[i].lambda_phiz_share);
    out.push_back(AuthPair{OptShare{dz, pend[i].lambda_z_share, ctx.party},
                           OptShare{dpz, pend[i].lambda_phiz_share, ctx.party}});
  }
  return out;
}

// One inner product, one round, 32-byte payload independent of n.
inline AuthPair secip(ProtoCtx& ctx, const std::vector<AuthPair>& d,
                      const std::vector<OptShare>& t, const SecIpCorrelation& corr,
                      const std::string& label) {
  return secip_finish(ctx, {secip_local(ctx, d, t, corr, label)})[0];
}

// ---------------------------------------------------------------------------
// Secure comparison: evaluate the comparison keys at the public masked value,
// add the blinded constants, open. One round. Opens to 1{to_signed_l(x) >= 0}.
// ---------------------------------------------------------------------------

inline AuthPair seccmp(ProtoCtx& ctx, const OptShare& x, const SecCmpCorrelation& corr,
                       const std::string& label) {
  if (!(corr.lambda_x_share == x.lambda_share))
    throw ConfigError("seccmp: correlation bound to a different wire");
  if (corr.label_hash != fnv64(label))
    throw ConfigError("seccmp: correlation bound to a different wire label");
  Payload2 gamma = eval_lt(ctx.party, corr.key, x.delta);
  if (ctx.saboteur) {
    if (ctx.saboteur->hit(Saboteur::Target::CMP_PAYLOAD, ctx.saboteur->cmp_calls))
      gamma.c0 = add(gamma.c0, ctx.saboteur->error);
    ctx.saboteur->cmp_calls++;
  }
  RingElement z_share = add(add(gamma.c0, corr.b0_share), corr.lambda_z_share);
  RingElement mz_share = add(add(gamma.c1, corr.b1_share), corr.lambda_phiz_share);
  std::vector<RingElement> deltas = detail::open_tampered(ctx, MSG_OPEN, {z_share, mz_share});
  ctx.log.push_pair(label, deltas[0], corr.lambda_z_share, deltas[1], corr.lambda_phiz_share);
  return AuthPair{OptShare{deltas[0], corr.lambda_z_share, ctx.party},
                  OptShare{deltas[1], corr.lambda_phiz_share, ctx.party}};
}

// ---------------------------------------------------------------------------
// Coin flipping: commit to a batch of local random values, exchange commits,
// then reveal; the public coins are the XOR of both contributions. Two rounds
// per batch. A reveal that fails its commitment aborts the session.
// ---------------------------------------------------------------------------

inline std::vector<RingElement> coin_flip(ProtoCtx& ctx, size_t count, RingParams p) {
  std::vector<RingElement> mine;
  std::vector<uint8_t> payload;
  mine.reserve(count);
  for (size_t i = 0; i < count; i++) {
    RingElement r = ctx.rng.sample_uniform(p);
    mine.push_back(r);
    append_le(payload, r);
  }
  std::array<uint8_t, 32> nonce = ctx.rng.next_nonce();
  Digest commit = hash_commit(payload, nonce);

  Frame cf{MSG_COIN_COMMIT, ctx.session_id, std::vector<uint8_t>(commit.begin(), commit.end())};
  Frame peer_commit = ctx.ch->exchange(cf);
  if (peer_commit.payload.size() != 32) throw ProtocolError("coin flip: bad commitment size");

  std::vector<uint8_t> reveal = payload;
  reveal.insert(reveal.end(), nonce.begin(), nonce.end());
  Frame rf{MSG_COIN_REVEAL, ctx.session_id, reveal};
  Frame peer_reveal = ctx.ch->exchange(rf);
  if (peer_reveal.payload.size() != count * 16 + 32)
    throw ProtocolError("coin flip: bad reveal size");

  std::vector<uint8_t> peer_payload(peer_reveal.payload.begin(),
                                    peer_reveal.payload.end() - 32);
  std::array<uint8_t, 32> peer_nonce;
  std::copy(peer_reveal.payload.end() - 32, peer_reveal.payload.end(), peer_nonce.begin());
  Digest expect = hash_commit(peer_payload, peer_nonce);
  std::array<uint8_t, 32> got;
  std::copy(peer_commit.payload.begin(), peer_commit.payload.end(), got.begin());
  if (got != expect) throw AbortError("coin flip: commitment mismatch");

  std::vector<RingElement> coins;
  coins.reserve(count);
  for (size_t i = 0; i < count; i++) {
    RingElement theirs = load_le(peer_payload.data() + 16 * i, p);
    coins.push_back(RingElement(mine[i].value ^ theirs.value, p));
  }
  return coins;
}

// ---------------------------------------------------------------------------
// Batch MAC check over every paired record in the log. Random s-bit public
// coins combine the value shares (blinded by 2^l * r) and the MAC shares
// (blinded by phi * 2^l * r); the difference z = y1 - y0*phi must open to
// zero. The z shares go through a commit/reveal so neither party can adapt.
// Passing clears the log.
// ---------------------------------------------------------------------------

inline bool mac_check(ProtoCtx& ctx, const MacCheckAux& aux) {
  const RingParams p = ctx.mac.share.params;
  std::vector<const OpenRecord*> pairs;
  for (const auto& r : ctx.log.records())
    if (r.has_mac) pairs.push_back(&r);

  std::vector<RingElement> coins = coin_flip(ctx, pairs.size(), p);
  const RingElement two_l(u128{1} << p.l, p);
  const bool lead = ctx.party == 0;

  RingElement y0 = mul(two_l, aux.r_share);
  RingElement y1 = aux.phir_share;
  for (size_t i = 0; i < pairs.size(); i++) {
    RingElement coin(coins[i].value & ((u128{1} << p.s) - 1), p);
    RingElement x_share = sub(lead ? pairs[i]->delta : RingElement(0, p), pairs[i]->lambda_share);
    RingElement m_share =
        sub(lead ? pairs[i]->mac_delta : RingElement(0, p), pairs[i]->mac_lambda_share);
    y0 = add(y0, mul(coin, x_share));
    y1 = add(y1, mul(coin, m_share));
  }
  RingElement y0_send = y0;
  if (ctx.saboteur) {
    if (ctx.saboteur->hit(Saboteur::Target::Y0_SHARE, ctx.saboteur->check_calls))
      y0_send = add(y0, ctx.saboteur->error);
  }
  RingElement y0_open = open_values(*ctx.ch, MSG_MACCHK_Y0, ctx.session_id, {y0_send}, {y0})[0];

  RingElement z = sub(y1, mul(y0_open, ctx.mac.share));
  if (ctx.saboteur) {
    if (ctx.saboteur->hit(Saboteur::Target::Z_SHARE, ctx.saboteur->check_calls))
      z = add(z, ctx.saboteur->error);
    ctx.saboteur->check_calls++;
  }

  std::vector<uint8_t> z_bytes;
  append_le(z_bytes, z);
  std::array<uint8_t, 32> nonce = ctx.rng.next_nonce();
  Digest commit = hash_commit(z_bytes, nonce);
  Frame cf{MSG_COMMIT, ctx.session_id, std::vector<uint8_t>(commit.begin(), commit.end())};
  Frame peer_commit = ctx.ch->exchange(cf);
  if (peer_commit.payload.size() != 32) throw ProtocolError("mac check: bad commitment size");

  std::vector<uint8_t> reveal = z_bytes;
  reveal.insert(reveal.end(), nonce.begin(), nonce.end());
  Frame rf{MSG_DECOMMIT, ctx.session_id, reveal};
  Frame peer_reveal = ctx.ch->exchange(rf);
  if (peer_reveal.payload.size() != 48) throw ProtocolError("mac check: bad reveal size");

  std::vector<uint8_t> peer_z_bytes(peer_reveal.payload.begin(), peer_reveal.payload.begin() + 16);
  std::array<uint8_t, 32> peer_nonce;
  std::copy(peer_reveal.payload.begin() + 16, peer_reveal.payload.end(), peer_nonce.begin());
  Digest expect = hash_commit(peer_z_bytes, peer_nonce);
  std::array<uint8_t, 32> got;
  std::copy(peer_commit.payload.begin(), peer_commit.payload.end(), got.begin());
  if (got != expect) throw AbortError("mac check: commitment mismatch");

  RingElement peer_z = load_le(peer_z_bytes.data(), p);
  if (add(z, peer_z).value != 0) throw AbortError("mac check: tampered open detected");
  ctx.log.clear();
  return true;
}

// ---------------------------------------------------------------------------
// Database initialization: lift every entry component, then authenticate it
// with one multiplication by the lifted MAC key. Two rounds for any m.
// ---------------------------------------------------------------------------

struct AuthEntry {
  AuthPair identity;
  std::vector<AuthPair> features;
};

struct DbEntryShares {
  RingElement identity;
  std::vector<RingElement> features;
};

inline std::vector<AuthEntry> initialize_db(ProtoCtx& ctx,
                                            const std::vector<DbEntryShares>& db_add,
                                            const OptShare& phi_opt, InitCorrelation& corr,
                                            uint32_t first_entry_index = 0) {
  if (db_add.empty()) return {};
  if (db_add.size() > corr.entries.size())
    throw ConfigError("initialize_db: correlation capacity exhausted");
  if (!(phi_opt.lambda_share == corr.lambda_phi_share))
    throw ConfigError("initialize_db: MAC key lift bound to a different mask");
  const uint32_t width = corr.width;
  for (const auto& e : db_add)
    if (e.features.size() + 1 != width)
      throw ConfigError("initialize_db: entry width disagrees with the correlation");

  // Round 1: lift [identity, features...] for every entry.
  std::vector<RingElement> masked;
  masked.reserve(db_add.size() * width);
  for (size_t i = 0; i < db_add.size(); i++) {
    const InitEntry& ce = corr.entries[i];
    masked.push_back(add(db_add[i].identity, ce.lambda_d[0]));
    for (uint32_t j = 1; j < width; j++)
      masked.push_back(add(db_add[i].features[j - 1], ce.lambda_d[j]));
  }
  std::vector<RingElement> delta_d = detail::open_tampered(ctx, MSG_OPEN, masked);

  // Round 2: one triple multiplication per component against the lifted key.
  const bool lead = ctx.party == 0;
  std::vector<RingElement> mac_shares;
  mac_shares.reserve(delta_d.size());
  for (size_t i = 0; i < db_add.size(); i++) {
    const InitEntry& ce = corr.entries[i];
    for (uint32_t j = 0; j < width; j++) {
      RingElement ex = add(phi_opt.delta, ce.delta_phi[j]);
      RingElement ey = add(delta_d[i * width + j], ce.delta_d[j]);
      RingElement z =
          sub(add(ce.c[j], ce.lambda_phid[j]), add(mul(ce.a[j], ey), mul(ex, ce.b[j])));
      if (lead) z = add(z, mul(ex, ey));
      mac_shares.push_back(z);
    }
  }
  std::vector<RingElement> delta_phid = detail::open_tampered(ctx, MSG_OPEN, mac_shares);

  std::vector<AuthEntry> out;
  out.reserve(db_add.size());
  for (size_t i = 0; i < db_add.size(); i++) {
    const InitEntry& ce = corr.entries[i];
    const std::string tag = "d[" + std::to_string(first_entry_index + i) + "]";
    AuthEntry entry;
    for (uint32_t j = 0; j < width; j++) {
      AuthPair ap{OptShare{delta_d[i * width + j], ce.lambda_d[j], ctx.party},
                  OptShare{delta_phid[i * width + j], ce.lambda_phid[j], ctx.party}};
      ctx.log.push_pair(tag + "." + std::to_string(j), ap.value.delta, ap.value.lambda_share,
                        ap.mac.delta, ap.mac.lambda_share);
      if (j == 0)
        entry.identity = ap;
      else
        entry.features.push_back(ap);
    }
    out.push_back(std::move(entry));
  }
  corr.entries.erase(corr.entries.begin(), corr.entries.begin() + long(db_add.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Top-1 selection: a sequential compare-and-multiplex chain. Each iteration
// costs one comparison round plus one batched open for the four select
// products. Ties keep the earlier index because the comparison treats 0 as
// non-negative.
// ---------------------------------------------------------------------------

struct TopResult {
  AuthPair score;
  AuthPair identity;
};

inline TopResult select_top1(ProtoCtx& ctx, const std::vector<AuthPair>& scores,
                             const std::vector<AuthPair>& ids, SessionCorrelation& sess,
                             const std::string& session_tag) {
  if (scores.empty() || scores.size() != ids.size())
    throw ProtocolError("select_top1: need equally many scores and identities");
  AuthPair cur_s = scores[0];
  AuthPair cur_i = ids[0];
  for (size_t i = 1; i < scores.size(); i++) {
    const std::string si = std::to_string(i);
    if (sess.seccmp.empty() || sess.mult.size() < 4)
      throw CorrelationExhausted("select_top1: session correlations exhausted");
    AuthPair sdiff = sub_auth(cur_s, scores[i]);
    AuthPair idiff = sub_auth(cur_i, ids[i]);

    SecCmpCorrelation cc = std::move(sess.seccmp.front());
    sess.seccmp.pop_front();
    AuthPair b = seccmp(ctx, sdiff.value, cc, session_tag + ".b[" + si + "]");

    std::vector<PendingMult> pend;
    for (int k = 0; k < 4; k++) {
      MultCorrelation mc = std::move(sess.mult.front());
      sess.mult.pop_front();
      const OptShare& y = k == 0   ? sdiff.value
                          : k == 1 ? sdiff.mac
                          : k == 2 ? idiff.value
                                   : idiff.mac;
      pend.push_back(mult_local(ctx, b.value, y, mc));
    }
    std::vector<OptShare> u = mult_finish(ctx, pend);
    ctx.log.push_pair(session_tag + ".sel_s[" + si + "]", u[0].delta, u[0].lambda_share,
                      u[1].delta, u[1].lambda_share);
    ctx.log.push_pair(session_tag + ".sel_id[" + si + "]", u[2].delta, u[2].lambda_share,
                      u[3].delta, u[3].lambda_share);

    cur_s = add_auth(scores[i], AuthPair{u[0], u[1]});
    cur_i = add_auth(ids[i], AuthPair{u[2], u[3]});
  }
  return TopResult{cur_s, cur_i};
}

// eta = I~ - I_C on the value layer; phi*eta needs one multiplication for
// phi * I_C on the MAC layer.
inline AuthPair identity_match(ProtoCtx& ctx, const AuthPair& top_id, const OptShare& claimed,
                               const OptShare& phi_opt, const MultCorrelation& corr) {
  OptShare phi_ic = mult(ctx, phi_opt, claimed, corr);
  OptShare eta = sub_opt(top_id.value, claimed);
  OptShare phi_eta = sub_opt(top_id.mac, phi_ic);
  return AuthPair{eta, phi_eta};
}

// 1{score >= tau} for a public threshold. add_public leaves the mask alone,
// so the comparison correlation is bound to the score's own mask.
inline AuthPair threshold_check(ProtoCtx& ctx, const AuthPair& score, const RingElement& tau,
                                const SecCmpCorrelation& corr, const std::string& label) {
  OptShare shifted = add_public(score.value, neg(tau));
  return seccmp(ctx, shifted, corr, label);
}

// ---------------------------------------------------------------------------
// Session orchestration.
// ---------------------------------------------------------------------------

struct AuthDecision {
  AuthPair eta;
  AuthMode mode = AuthMode::TOP1;
  ChannelMetrics metrics;
};

// Both parties must agree on the session shape before consuming correlations.
inline void exchange_session_header(ProtoCtx& ctx, AuthMode mode, uint8_t metric_flag,
                                    uint32_t m, uint32_t n) {
  detail::ByteWriter w;
  w.u8(uint8_t(mode));
  w.u8(metric_flag);
  w.u32(m);
  w.u32(n);
  Frame mine{MSG_CONTROL, ctx.session_id, w.take()};
  Frame peer = ctx.ch->exchange(mine);
  if (peer.payload != mine.payload)
    throw ProtocolError("session header disagreement between parties");
}

inline AuthDecision authenticate(ProtoCtx& ctx, const std::vector<AuthEntry>& db,
                                 const std::vector<RingElement>& t_shares,
                                 const RingElement& ic_share, AuthMode mode, uint8_t metric_flag,
                                 const RingElement& tau, const OptShare& phi_opt,
                                 SessionCorrelation& sess, const MacCheckAux& aux,
                                 const std::function<void(SessionPhase)>& progress = {}) {
  if (db.empty()) throw ProtocolError("authenticate: empty database");
  if (db.size() != sess.secip.size())
    throw ConfigError("authenticate: database size disagrees with session provisioning");
  const uint32_t width = uint32_t(t_shares.size());  // n + 1
  if (sess.lambda_t.size() != width)
    throw ConfigError("authenticate: template width disagrees with session provisioning");
  const std::string tag = "s" + std::to_string(sess.session_id);

  exchange_session_header(ctx, mode, metric_flag, uint32_t(db.size()), width);

  // Lift the query template and the claimed identity in one round.
  std::vector<RingElement> x = t_shares;
  std::vector<RingElement> lam = sess.lambda_t;
  x.push_back(ic_share);
  lam.push_back(sess.lambda_ic);
  std::vector<OptShare> lifted = lift_to_optss(ctx, x, lam, tag + ".t");
  OptShare claimed = lifted.back();
  lifted.pop_back();
  if (progress) progress(SessionPhase::LIFTED);

  // All database scores in one batched open.
  std::vector<PendingSecIp> pend;
  pend.reserve(db.size());
  for (size_t i = 0; i < db.size(); i++) {
    const SecIpCorrelation& corr = sess.secip[i];
    pend.push_back(
        secip_local(ctx, db[i].features, lifted, corr, tag + ".score[" + std::to_string(i) + "]"));
  }
  std::vector<AuthPair> scores = secip_finish(ctx, pend);
  sess.secip.clear();
  if (progress) progress(SessionPhase::SCORED);

  std::vector<AuthPair> ids;
  ids.reserve(db.size());
  for (const auto& e : db) ids.push_back(e.identity);

  TopResult top = select_top1(ctx, scores, ids, sess, tag);
  AuthPair eta;
  if (mode == AuthMode::TOP1) {
    if (sess.mult.empty()) throw CorrelationExhausted("authenticate: identity mult missing");
    MultCorrelation mc = std::move(sess.mult.front());
    sess.mult.pop_front();
    eta = identity_match(ctx, top.identity, claimed, phi_opt, mc);
  } else {
    if (sess.seccmp.empty()) throw CorrelationExhausted("authenticate: threshold cmp missing");
    SecCmpCorrelation cc = std::move(sess.seccmp.front());
    sess.seccmp.pop_front();
    AuthPair b = threshold_check(ctx, top.score, tau, cc, tag + ".thr");
    // eta = 1 - b, phi*eta = phi - phi*b: grant stays "eta opens to zero".
    OptShare eta_v = add_public(mul_public(b.value, neg(RingElement(1, tau.params))),
                                RingElement(1, tau.params));
    OptShare eta_m = sub_opt(phi_opt, b.mac);
    eta = AuthPair{eta_v, eta_m};
  }
  ctx.log.push_pair(tag + ".eta", eta.value.delta, eta.value.lambda_share, eta.mac.delta,
                    eta.mac.lambda_share);
  if (progress) progress(SessionPhase::SELECTED);

  mac_check(ctx, aux);
  if (progress) progress(SessionPhase::CHECKED);

  AuthDecision out;
  out.eta = eta;
  out.mode = mode;
  out.metrics = ctx.ch->metrics();
  return out;
}

}  // namespace flame
