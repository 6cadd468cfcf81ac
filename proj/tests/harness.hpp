#pragma once

// Two-party rig shared by the protocol, node and acceptance tests: in-process
// channels with one thread per party, plus a plaintext reference pipeline.

#include <thread>
#include <utility>
#include <vector>

#include "flame/dealer.hpp"
#include "flame/node.hpp"
#include "flame/protocols.hpp"
#include "flame/transport.hpp"

namespace testrig {

using namespace flame;

// Runs one callable per party over a fresh in-process channel pair. A party
// that throws tears down its endpoint so the peer unblocks; the first
// exception is rethrown here.
template <class F0, class F1>
inline void run_pair(F0 f0, F1 f1) {
  auto [c0, c1] = make_inproc_pair();
  std::exception_ptr e0, e1;
  auto& ch0 = c0;
  auto& ch1 = c1;
  std::thread th([&] {
    try {
      f1(*ch1);
    } catch (...) {
      e1 = std::current_exception();
      ch1.reset();
    }
  });
  try {
    f0(*ch0);
  } catch (...) {
    e0 = std::current_exception();
    ch0.reset();
  }
  th.join();
  if (e0) std::rethrow_exception(e0);
  if (e1) std::rethrow_exception(e1);
}

// Plaintext instance of one authentication scenario. Feature rows and the
// query are (n+1)-wide prepared templates; scores stay in i128 because tests
// keep inputs far below the ring modulus.
struct World {
  RingParams p;
  uint32_t n = 2, m = 3;
  std::vector<i128> ids;
  std::vector<std::vector<i128>> feats;
  std::vector<i128> query;
  i128 claimed = 0;
  i128 tau = 0;
};

// Reference argmax: strict greater-than keeps the earliest maximal row, the
// same tie rule the oblivious chain implements.
inline i128 oracle_top(const World& w, i128* top_id) {
  i128 best = 0, bid = 0;
  for (uint32_t i = 0; i < w.m; i++) {
    i128 s = 0;
    for (uint32_t j = 0; j <= w.n; j++) s += w.feats[i][j] * w.query[j];
    if (i == 0 || s > best) {
      best = s;
      bid = w.ids[i];
    }
  }
  *top_id = bid;
  return best;
}

struct PartyResult {
  AuthDecision decision;
  bool aborted = false;
  std::string reason;
};

// One party's full flow at the protocol layer: lift the MAC key, initialize
// the database, check, then run one session. Both parties derive additive
// input shares from the same rng copy, standing in for the client.
inline PartyResult run_party(int party, Channel& ch, CorrelationTape tape, const World& w,
                             AuthMode mode, SeededRng share_rng_copy, Saboteur* sab) {
  PartyResult pr;
  try {
    ProtoCtx ctx;
    ctx.party = party;
    ctx.ch = &ch;
    ctx.session_id = 0xffffffffu;
    ctx.mac = tape.mac;
    ctx.rng = SeededRng(tape.online_seed).fork("online");

    auto share_of = [&](i128 v) {
      RingElement plain = encode_signed(v, w.p);
      RingElement r = share_rng_copy.sample_uniform(w.p);
      return party == 0 ? r : sub(plain, r);
    };

    OptShare phi_opt = lift_one(ctx, tape.mac.share, tape.lambda_by_label.at("phi"), "phi");
    std::vector<DbEntryShares> db_add;
    for (uint32_t i = 0; i < w.m; i++) {
      DbEntryShares e;
      e.identity = share_of(w.ids[i]);
      for (uint32_t j = 0; j <= w.n; j++) e.features.push_back(share_of(w.feats[i][j]));
      db_add.push_back(e);
    }
    std::vector<AuthEntry> db = initialize_db(ctx, db_add, phi_opt, tape.init);
    mac_check(ctx, tape.take_aux());

    SessionCorrelation sess = tape.take_session();
    ctx.session_id = sess.session_id;
    ctx.saboteur = sab;
    std::vector<RingElement> t_shares;
    for (uint32_t j = 0; j <= w.n; j++) t_shares.push_back(share_of(w.query[j]));
    RingElement ic_share = share_of(w.claimed);
    pr.decision = authenticate(ctx, db, t_shares, ic_share, mode, 0,
                               encode_signed(w.tau, w.p), phi_opt, sess, tape.take_aux());
  } catch (const std::exception& e) {
    pr.aborted = true;
    pr.reason = e.what();
  }
  return pr;
}

inline std::pair<PartyResult, PartyResult> run_both(const World& w, AuthMode mode,
                                                    const std::string& seed,
                                                    Saboteur* sab0 = nullptr,
                                                    Saboteur* sab1 = nullptr) {
  DealerPlan plan;
  plan.params = w.p;
  plan.n = w.n;
  plan.m = w.m;
  plan.sessions = 1;
  plan.threshold_mode = mode == AuthMode::THRESHOLD;
  SeededRng drng = SeededRng::from_string(seed);
  auto [t0, t1] = build_tapes(plan, drng);
  SeededRng srng = drng.fork("shares");
  PartyResult r0, r1;
  run_pair([&](Channel& ch) { r0 = run_party(0, ch, std::move(t0), w, mode, srng, sab0); },
           [&](Channel& ch) { r1 = run_party(1, ch, std::move(t1), w, mode, srng, sab1); });
  return {r0, r1};
}

// Opens the joint eta of an honest run; both parties must agree on Delta.
inline i128 open_eta(const PartyResult& a, const PartyResult& b) {
  if (a.aborted || b.aborted) throw std::runtime_error("open_eta: run aborted");
  if (!(a.decision.eta.value.delta == b.decision.eta.value.delta))
    throw std::runtime_error("open_eta: delta views disagree");
  RingElement eta = sub(a.decision.eta.value.delta,
                        add(a.decision.eta.value.lambda_share, b.decision.eta.value.lambda_share));
  return to_signed_l(eta);
}

}  // namespace testrig
