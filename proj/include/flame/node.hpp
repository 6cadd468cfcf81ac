#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flame/client.hpp"
#include "flame/protocols.hpp"

namespace flame {

// Share database held by one server after initialization. Entry order is the
// initialization order and must match the tape's session provisioning.
struct TemplateDb {
  uint32_t n = 0;  // feature dimensions; stored templates are n+1 wide
  std::vector<AuthEntry> entries;
  size_t size() const { return entries.size(); }
};

struct SessionState {
  uint32_t session_id = 0;
  SessionPhase phase = SessionPhase::CREATED;

  void advance(SessionPhase next) {
    if (phase == SessionPhase::ABORTED) throw ProtocolError("session already aborted");
    if (uint8_t(next) < uint8_t(phase)) throw ProtocolError("session phase regression");
    phase = next;
  }
};

// One injected additive error, applied at this party right before the value
// leaves the process. Index meaning depends on the target: opened-element
// ordinal for OPEN_DELTA, call ordinal for CMP_PAYLOAD and TRIPLE_SHARE,
// MAC-check ordinal for Y0_SHARE and Z_SHARE.
struct FaultPlan {
  Saboteur::Target target = Saboteur::Target::NONE;
  uint64_t index = 0;
  RingElement error;
  int party = 0;
};

enum class Outcome : uint8_t { GRANT = 0, DENY = 1, ABORT = 2 };

enum class AbortReason : uint8_t {
  NONE = 0,
  MAC_CHECK = 1,
  DESYNC = 2,
  EXHAUSTED = 3,
  TRANSPORT = 4,
  CONFIG = 5,
};

struct Decision {
  Outcome outcome = Outcome::ABORT;
  i128 eta_plain = 0;  // meaningful unless ABORT
};

struct SessionOutcome {
  bool aborted = false;
  AbortReason reason = AbortReason::NONE;
  std::string reason_text;
  RingElement eta_delta, eta_lambda_share;
  ChannelMetrics metrics;
  SessionState state;
};

inline ProtoCtx make_ctx(int party, Channel& ch, const CorrelationTape& tape,
                         uint32_t session_id, const std::string& flow_label) {
  ProtoCtx ctx;
  ctx.party = party;
  ctx.ch = &ch;
  ctx.session_id = session_id;
  ctx.mac = tape.mac;
  ctx.rng = SeededRng(tape.online_seed).fork(flow_label);
  return ctx;
}

// Database initialization flow: lift the MAC key once, authenticate all m
// entries in two rounds, then verify the opened transcript. The lifted key's
// public Delta is returned for reuse by enrollments and sessions.
inline TemplateDb init_database(int party, Channel& ch, CorrelationTape& tape,
                                const std::vector<DbEntryShares>& entries, OptShare& phi_out) {
  ProtoCtx ctx = make_ctx(party, ch, tape, 0xffffffffu, "init");
  phi_out = lift_one(ctx, tape.mac.share, tape.lambda_by_label.at("phi"), "phi");
  TemplateDb db;
  if (tape.init.width < 2) throw ConfigError("init_database: malformed correlation width");
  db.n = tape.init.width - 2;
  db.entries = initialize_db(ctx, entries, phi_out, tape.init);
  mac_check(ctx, tape.take_aux());
  return db;
}

// Single-entry extension of the database; consumes one init correlation and
// one MAC check aux.
inline void enroll(int party, Channel& ch, CorrelationTape& tape, TemplateDb& db,
                   const DbEntryShares& entry, const OptShare& phi_opt) {
  ProtoCtx ctx = make_ctx(party, ch, tape, 0xfffffffeu,
                          "enroll-" + std::to_string(db.entries.size()));
  std::vector<AuthEntry> added =
      initialize_db(ctx, {entry}, phi_opt, tape.init, uint32_t(db.entries.size()));
  mac_check(ctx, tape.take_aux());
  db.entries.push_back(std::move(added[0]));
}

inline SessionOutcome run_session(int party, Channel& ch, CorrelationTape& tape,
                                  const TemplateDb& db, const std::vector<RingElement>& t_shares,
                                  const RingElement& ic_share, AuthMode mode, uint8_t metric_flag,
                                  const RingElement& tau, const OptShare& phi_opt,
                                  const FaultPlan* fault = nullptr) {
  SessionOutcome out;
  if (db.entries.size() != size_t(tape.m) + size_t(tape.enrolls))
    throw ConfigError("run_session: database size disagrees with tape provisioning");
  SessionCorrelation sess = tape.take_session();
  out.state.session_id = sess.session_id;
  ProtoCtx ctx =
      make_ctx(party, ch, tape, sess.session_id, "session-" + std::to_string(sess.session_id));
  Saboteur sab;
  if (fault && fault->party == party && fault->target != Saboteur::Target::NONE) {
    sab.target = fault->target;
    sab.index = fault->index;
    sab.error = fault->error;
    ctx.saboteur = &sab;
  }
  try {
    AuthDecision dec = authenticate(
        ctx, db.entries, t_shares, ic_share, mode, metric_flag, tau, phi_opt, sess,
        tape.take_aux(), [&](SessionPhase ph) { out.state.advance(ph); });
    out.eta_delta = dec.eta.value.delta;
    out.eta_lambda_share = dec.eta.value.lambda_share;
    out.metrics = dec.metrics;
    out.state.advance(SessionPhase::DONE);
  } catch (const AbortError& e) {
    out.aborted = true;
    out.reason = AbortReason::MAC_CHECK;
    out.reason_text = e.what();
  } catch (const CorrelationExhausted& e) {
    out.aborted = true;
    out.reason = AbortReason::EXHAUSTED;
    out.reason_text = e.what();
  } catch (const ConfigError& e) {
    out.aborted = true;
    out.reason = AbortReason::CONFIG;
    out.reason_text = e.what();
  } catch (const TransportError& e) {
    out.aborted = true;
    out.reason = AbortReason::TRANSPORT;
    out.reason_text = e.what();
  } catch (const ProtocolError& e) {
    out.aborted = true;
    out.reason = AbortReason::DESYNC;
    out.reason_text = e.what();
  }
  if (out.aborted) {
    out.metrics = ch.metrics();
    out.state.phase = SessionPhase::ABORTED;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Result delivery to the verifier. RESULT carries (Delta_eta, lambda share);
// a detected fault becomes a CONTROL frame with a one-byte reason code.
// ---------------------------------------------------------------------------

inline Frame result_frame(uint32_t session_id, const SessionOutcome& o) {
  if (o.aborted) return Frame{MSG_CONTROL, session_id, {uint8_t(o.reason)}};
  std::vector<uint8_t> payload;
  append_le(payload, o.eta_delta);
  append_le(payload, o.eta_lambda_share);
  return Frame{MSG_RESULT, session_id, payload};
}

struct ResultMsg {
  bool aborted = false;
  AbortReason reason = AbortReason::NONE;
  RingElement eta_delta, eta_lambda_share;
};

inline ResultMsg parse_result_frame(const Frame& f, RingParams p) {
  ResultMsg m;
  if (f.msg_type == MSG_CONTROL) {
    if (f.payload.size() != 1) throw ProtocolError("abort frame: bad payload");
    m.aborted = true;
    m.reason = AbortReason(f.payload[0]);
    return m;
  }
  if (f.msg_type != MSG_RESULT || f.payload.size() != 32)
    throw ProtocolError("result frame: bad type or payload");
  m.eta_delta = load_le(f.payload.data(), p);
  m.eta_lambda_share = load_le(f.payload.data() + 16, p);
  return m;
}

// Verifier-side join: conservative ABORT if either party aborted or the
// public Delta views disagree; otherwise reconstruct and compare to zero.
inline Decision decide(const ResultMsg& a, const ResultMsg& b) {
  Decision d;
  if (a.aborted || b.aborted) {
    d.outcome = Outcome::ABORT;
    return d;
  }
  if (!(a.eta_delta == b.eta_delta)) {
    d.outcome = Outcome::ABORT;
    return d;
  }
  RingElement eta = sub(a.eta_delta, add(a.eta_lambda_share, b.eta_lambda_share));
  d.eta_plain = to_signed_l(eta);
  d.outcome = d.eta_plain == 0 ? Outcome::GRANT : Outcome::DENY;
  return d;
}

inline Decision decide(const SessionOutcome& a, const SessionOutcome& b) {
  ResultMsg ma, mb;
  ma.aborted = a.aborted;
  ma.eta_delta = a.eta_delta;
  ma.eta_lambda_share = a.eta_lambda_share;
  mb.aborted = b.aborted;
  mb.eta_delta = b.eta_delta;
  mb.eta_lambda_share = b.eta_lambda_share;
  return decide(ma, mb);
}

// ---------------------------------------------------------------------------
// Database persistence: the container format with one DB section, so a server
// restarts without repeating the initialization protocol. The lifted MAC
// key's public Delta rides along; the mask share stays on the tape.
// ---------------------------------------------------------------------------

inline void save_db(const TemplateDb& db, const RingElement& phi_delta, int party, RingParams p,
                    const std::string& path) {
  detail::ByteWriter w;
  w.u32(db.n);
  w.ring(phi_delta);
  auto put_pair = [&](const AuthPair& ap) {
    w.ring(ap.value.delta);
    w.ring(ap.value.lambda_share);
    w.ring(ap.mac.delta);
    w.ring(ap.mac.lambda_share);
  };
  for (const auto& e : db.entries) {
    put_pair(e.identity);
    for (const auto& f : e.features) put_pair(f);
  }
  write_container(path, party, p, {TapeSection{SEC_DB, uint32_t(db.entries.size()), w.take()}});
}

struct DbFile {
  int party = 0;
  RingParams params;
  RingElement phi_delta;
  TemplateDb db;
};

inline DbFile load_db(const std::string& path) {
  TapeFile tf = read_container(path);
  if (tf.sections.size() != 1 || tf.sections[0].tag != SEC_DB)
    throw TapeError("database file: expected a single DB section");
  const TapeSection& s = tf.sections[0];
  detail::ByteReader r(s.body.data(), s.body.size());
  DbFile out;
  out.party = tf.party;
  out.params = tf.params;
  out.db.n = r.u32();
  out.phi_delta = r.ring(tf.params);
  auto get_pair = [&](AuthPair& ap) {
    ap.value.delta = r.ring(tf.params);
    ap.value.lambda_share = r.ring(tf.params);
    ap.mac.delta = r.ring(tf.params);
    ap.mac.lambda_share = r.ring(tf.params);
    ap.value.party = ap.mac.party = tf.party;
  };
  for (uint32_t i = 0; i < s.count; i++) {
    AuthEntry e;
    get_pair(e.identity);
    for (uint32_t j = 0; j < out.db.n + 1; j++) {
      AuthPair f;
      get_pair(f);
      e.features.push_back(f);
    }
    out.db.entries.push_back(std::move(e));
  }
  if (!r.done()) throw TapeError("database file: trailing bytes");
  return out;
}

}  // namespace flame
