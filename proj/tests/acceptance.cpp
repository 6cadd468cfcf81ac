// Acceptance gate: ten go/no-go checks over the whole stack, from share
// algebra up to a desk-scale TCP deployment driven through the CLI binary.
// Each check prints one [PASS]/[FAIL] line; the exit code is the fail count.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "flame/cli.hpp"
#include "harness.hpp"

using namespace flame;
using testrig::World;
using testrig::oracle_top;
using testrig::open_eta;
using testrig::run_both;
using testrig::run_pair;

namespace {

const RingParams k84 = RingParams::checked(8, 4);
const RingParams k6464 = RingParams::checked(64, 64);

struct Gate {
  int failures = 0;

  void line(int idx, const char* name, bool ok, const std::string& detail, double sec) {
    std::printf("[%s] %2d %-22s %s (%.1f s)\n", ok ? "PASS" : "FAIL", idx, name, detail.c_str(),
                sec);
    std::fflush(stdout);
    if (!ok) failures++;
  }
};

ProtoCtx mk_ctx(int party, Channel& ch, const MacKeyShare& mk) {
  ProtoCtx ctx;
  ctx.party = party;
  ctx.ch = &ch;
  ctx.session_id = 1;
  ctx.mac = mk;
  ctx.rng = SeededRng::from_string("acceptance-online").fork(std::to_string(party));
  return ctx;
}

// Consistent two-party OptSS sharing of a plain ring value.
std::pair<OptShare, OptShare> share_opt(const RingElement& x, SeededRng& rng) {
  RingParams p = x.params;
  RingElement lam = rng.sample_uniform(p);
  RingElement l0 = rng.sample_uniform(p);
  RingElement delta = add(x, lam);
  return {OptShare{delta, l0, 0}, OptShare{delta, sub(lam, l0), 1}};
}

// ---------------------------------------------------------------------------
// 1. Share algebra: open/share roundtrip and linear-op commutation.
// ---------------------------------------------------------------------------

bool c1_share_algebra(std::string& detail) {
  SeededRng rng = SeededRng::from_string("acc-1");
  uint64_t trials = 0, bad = 0;
  for (RingParams p : {k84, k6464}) {
    for (int t = 0; t < 10000; t++) {
      RingElement x = rng.sample_uniform(p), y = rng.sample_uniform(p);
      RingElement c = rng.sample_uniform(p);
      auto [a, b] = split(x, rng);
      if (!(reconstruct(a, b) == x)) bad++;
      auto [x0, x1] = share_opt(x, rng);
      auto [y0, y1] = share_opt(y, rng);
      if (!(open(x0, x1) == x)) bad++;
      if (!(add(value_share(x0), value_share(x1)) == x)) bad++;
      if (!(open(add_opt(x0, y0), add_opt(x1, y1)) == add(x, y))) bad++;
      if (!(open(sub_opt(x0, y0), sub_opt(x1, y1)) == sub(x, y))) bad++;
      if (!(open(add_public(x0, c), add_public(x1, c)) == add(x, c))) bad++;
      if (!(open(mul_public(x0, c), mul_public(x1, c)) == mul(x, c))) bad++;
      trials++;
    }
  }
  detail = std::to_string(trials) + " trials at (8,4) and (64,64), " + std::to_string(bad) +
           " mismatches";
  return bad == 0;
}

// ---------------------------------------------------------------------------
// 2. Inner product opens to sum(D*T) with MAC phi*sum(D*T), exactly.
// ---------------------------------------------------------------------------

struct IpInstance {
  std::vector<AuthPair> d[2];
  std::vector<OptShare> t[2];
  SecIpCorrelation corr[2];
  RingElement phi, expect, expect_mac;
  std::string label;
};

IpInstance make_ip(uint32_t n, RingParams p, SeededRng& rng, const std::string& label) {
  IpInstance ins;
  ins.label = label;
  ins.phi = RingElement(rng.sample_bits(p.s), p);
  std::vector<RingElement> lx, lpx, ly;
  RingElement acc(0, p);
  for (uint32_t i = 0; i < n; i++) {
    RingElement x = rng.sample_uniform(p), y = rng.sample_uniform(p);
    RingElement mx = mul(ins.phi, x);
    RingElement lam_x = rng.sample_uniform(p), lam_mx = rng.sample_uniform(p),
                lam_y = rng.sample_uniform(p);
    RingElement sx = rng.sample_uniform(p), smx = rng.sample_uniform(p),
                sy = rng.sample_uniform(p);
    RingElement dx = add(x, lam_x), dmx = add(mx, lam_mx), dy = add(y, lam_y);
    ins.d[0].push_back(AuthPair{OptShare{dx, sx, 0}, OptShare{dmx, smx, 0}});
    ins.d[1].push_back(AuthPair{OptShare{dx, sub(lam_x, sx), 1}, OptShare{dmx, sub(lam_mx, smx), 1}});
    ins.t[0].push_back(OptShare{dy, sy, 0});
    ins.t[1].push_back(OptShare{dy, sub(lam_y, sy), 1});
    lx.push_back(lam_x);
    lpx.push_back(lam_mx);
    ly.push_back(lam_y);
    acc = add(acc, mul(x, y));
  }
  auto [c0, c1] = gen_secip_corr(lx, lpx, ly, n, rng, label);
  ins.corr[0] = std::move(c0);
  ins.corr[1] = std::move(c1);
  ins.expect = acc;
  ins.expect_mac = mul(ins.phi, acc);
  return ins;
}

bool c2_secip_exact(std::string& detail) {
  SeededRng rng = SeededRng::from_string("acc-2");
  const RingParams p = k6464;
  std::vector<IpInstance> ins;
  const std::pair<uint32_t, int> groups[] = {{1, 200}, {3, 200}, {512, 100}};
  for (auto [n, count] : groups)
    for (int i = 0; i < count; i++)
      ins.push_back(make_ip(n, p, rng, "ip" + std::to_string(n) + "." + std::to_string(i)));

  std::vector<AuthPair> out[2];
  out[0].resize(ins.size());
  out[1].resize(ins.size());
  run_pair(
      [&](Channel& ch) {
        RingElement mk0 = RingElement(0, p);
        ProtoCtx ctx = mk_ctx(0, ch, MacKeyShare{0, mk0});
        for (size_t i = 0; i < ins.size(); i++)
          out[0][i] = secip(ctx, ins[i].d[0], ins[i].t[0], ins[i].corr[0], ins[i].label);
      },
      [&](Channel& ch) {
        RingElement mk1 = RingElement(0, p);
        ProtoCtx ctx = mk_ctx(1, ch, MacKeyShare{1, mk1});
        for (size_t i = 0; i < ins.size(); i++)
          out[1][i] = secip(ctx, ins[i].d[1], ins[i].t[1], ins[i].corr[1], ins[i].label);
      });

  uint64_t bad = 0;
  for (size_t i = 0; i < ins.size(); i++) {
    if (!(open(out[0][i].value, out[1][i].value) == ins[i].expect)) bad++;
    if (!(open(out[0][i].mac, out[1][i].mac) == ins[i].expect_mac)) bad++;
  }
  detail = std::to_string(ins.size()) + " instances at n in {1,3,512}, " + std::to_string(bad) +
           " mismatches";
  return bad == 0;
}

// ---------------------------------------------------------------------------
// 3. Comparison matches the plaintext sign, exhaustively at l=8 and on
//    random 128-bit inputs.
// ---------------------------------------------------------------------------

struct CmpCase {
  OptShare x[2];
  SecCmpCorrelation corr[2];
  bool expect = false;
};

CmpCase make_cmp(i128 xv, const RingElement& lam, SeededRng& rng, RingParams p,
                 const std::string& label) {
  CmpCase c;
  c.expect = xv >= 0;
  RingElement phi = RingElement(rng.sample_bits(p.s), p);
  RingElement l0 = rng.sample_uniform(p);
  RingElement l1 = sub(lam, l0);
  auto [k0, k1] = gen_seccmp_corr(lam, l0, l1, phi, rng, label);
  c.corr[0] = std::move(k0);
  c.corr[1] = std::move(k1);
  RingElement delta = add(encode_signed(xv, p), lam);
  c.x[0] = OptShare{delta, l0, 0};
  c.x[1] = OptShare{delta, l1, 1};
  return c;
}

bool run_cmp_batch(std::vector<CmpCase>& cases, RingParams p, uint64_t& bad) {
  std::vector<AuthPair> out[2];
  out[0].resize(cases.size());
  out[1].resize(cases.size());
  run_pair(
      [&](Channel& ch) {
        ProtoCtx ctx = mk_ctx(0, ch, MacKeyShare{0, RingElement(0, p)});
        for (size_t i = 0; i < cases.size(); i++)
          out[0][i] = seccmp(ctx, cases[i].x[0], cases[i].corr[0], "c" + std::to_string(i));
      },
      [&](Channel& ch) {
        ProtoCtx ctx = mk_ctx(1, ch, MacKeyShare{1, RingElement(0, p)});
        for (size_t i = 0; i < cases.size(); i++)
          out[1][i] = seccmp(ctx, cases[i].x[1], cases[i].corr[1], "c" + std::to_string(i));
      });
  for (size_t i = 0; i < cases.size(); i++) {
    RingElement bit = open(out[0][i].value, out[1][i].value);
    if (!(bit == RingElement(cases[i].expect ? 1 : 0, p))) bad++;
  }
  return true;
}

bool c3_seccmp_sign(std::string& detail) {
  SeededRng rng = SeededRng::from_string("acc-3");
  uint64_t bad = 0;

  {  // exhaustive signed range at l=8, pinned mask in the safe margin
    RingElement lam = RingElement(1000, k84);
    std::vector<CmpCase> cases;
    for (i128 x = -128; x <= 127; x++)
      cases.push_back(make_cmp(x, lam, rng, k84, "c" + std::to_string(cases.size())));
    run_cmp_batch(cases, k84, bad);
  }

  uint64_t wide = 0;
  {  // random wide inputs, fresh mask per case
    const int batches = 10, per = 1000;
    for (int b = 0; b < batches; b++) {
      std::vector<CmpCase> cases;
      for (int i = 0; i < per; i++) {
        u128 mag = rng.sample_bits(62);
        i128 x = rng.sample_bits(1) ? -i128(mag) : i128(mag);
        RingElement lam = RingElement((rng.next_u128() >> 1) + (u128(1) << 64), k6464);
        cases.push_back(make_cmp(x, lam, rng, k6464, "c" + std::to_string(i)));
      }
      run_cmp_batch(cases, k6464, bad);
      wide += per;
    }
  }
  detail = "256 exhaustive l=8 plus " + std::to_string(wide) + " wide cases, " +
           std::to_string(bad) + " sign mismatches";
  return bad == 0;
}

// ---------------------------------------------------------------------------
// 4. Comparison keys: exhaustive 10-bit domain, shares sum to
//    payload * 1{x < a} with zero exceptions.
// ---------------------------------------------------------------------------

bool c4_dcf_exhaustive(std::string& detail) {
  SeededRng rng = SeededRng::from_string("acc-4");
  RingParams p = RingParams::checked(8, 2);  // 10-bit total domain
  uint64_t bad = 0, points = 0;
  for (int pair = 0; pair < 50; pair++) {
    u128 av = rng.sample_bits(10);
    RingElement a = RingElement(av, p);
    Payload2 payload{rng.sample_uniform(p), rng.sample_uniform(p)};
    auto [k0, k1] = gen_lt(a, payload, p.total(), rng);
    Payload2 zero{RingElement(0, p), RingElement(0, p)};
    for (u128 x = 0; x < 1024; x++) {
      Payload2 got = add(eval_lt(0, k0, RingElement(x, p)), eval_lt(1, k1, RingElement(x, p)));
      if (!(got == (x < av ? payload : zero))) bad++;
      points++;
    }
  }
  detail = std::to_string(points) + " evaluations over 50 keys, " + std::to_string(bad) +
           " exceptions";
  return bad == 0;
}

// ---------------------------------------------------------------------------
// 5 + 6. Online cost: secip payload is 32 bytes + frame header at every n,
//        one round for secip and seccmp, and the open-per-element baseline
//        costs at least n/4 times more at n=1024.
// ---------------------------------------------------------------------------

struct MeterResult {
  uint64_t secip_bytes = 0, secip_rounds = 0;
};

MeterResult meter_secip(uint32_t n, SeededRng& rng) {
  IpInstance ins = make_ip(n, k6464, rng, "meter" + std::to_string(n));
  MeterResult mr;
  run_pair(
      [&](Channel& ch) {
        ProtoCtx ctx = mk_ctx(0, ch, MacKeyShare{0, RingElement(0, k6464)});
        ChannelMetrics before = ch.metrics();
        secip(ctx, ins.d[0], ins.t[0], ins.corr[0], ins.label);
        ChannelMetrics after = ch.metrics();
        mr.secip_bytes = after.bytes_sent - before.bytes_sent;
        mr.secip_rounds = after.rounds - before.rounds;
      },
      [&](Channel& ch) {
        ProtoCtx ctx = mk_ctx(1, ch, MacKeyShare{1, RingElement(0, k6464)});
        secip(ctx, ins.d[1], ins.t[1], ins.corr[1], ins.label);
      });
  return mr;
}

// Baseline: one authenticated multiplication per element, opened in a single
// batched round, summed locally afterwards.
uint64_t meter_open_then_sum(uint32_t n, SeededRng& rng) {
  RingParams p = k6464;
  std::vector<OptShare> xs[2], ys[2];
  std::vector<MultCorrelation> corr[2];
  for (uint32_t i = 0; i < n; i++) {
    RingElement x = rng.sample_uniform(p), y = rng.sample_uniform(p);
    RingElement lam_x = rng.sample_uniform(p), lam_y = rng.sample_uniform(p);
    RingElement sx = rng.sample_uniform(p), sy = rng.sample_uniform(p);
    xs[0].push_back(OptShare{add(x, lam_x), sx, 0});
    xs[1].push_back(OptShare{add(x, lam_x), sub(lam_x, sx), 1});
    ys[0].push_back(OptShare{add(y, lam_y), sy, 0});
    ys[1].push_back(OptShare{add(y, lam_y), sub(lam_y, sy), 1});
    auto [m0, m1] = gen_mult_corr(lam_x, sx, sub(lam_x, sx), lam_y, sy, sub(lam_y, sy), rng,
                                  "base" + std::to_string(i));
    corr[0].push_back(std::move(m0));
    corr[1].push_back(std::move(m1));
  }
  uint64_t bytes = 0;
  run_pair(
      [&](Channel& ch) {
        ProtoCtx ctx = mk_ctx(0, ch, MacKeyShare{0, RingElement(0, p)});
        ChannelMetrics before = ch.metrics();
        std::vector<PendingMult> pend;
        for (uint32_t i = 0; i < n; i++) pend.push_back(mult_local(ctx, xs[0][i], ys[0][i], corr[0][i]));
        mult_finish(ctx, pend);
        bytes = ch.metrics().bytes_sent - before.bytes_sent;
      },
      [&](Channel& ch) {
        ProtoCtx ctx = mk_ctx(1, ch, MacKeyShare{1, RingElement(0, p)});
        std::vector<PendingMult> pend;
        for (uint32_t i = 0; i < n; i++) pend.push_back(mult_local(ctx, xs[1][i], ys[1][i], corr[1][i]));
        mult_finish(ctx, pend);
      });
  return bytes;
}

bool c5_communication(std::string& detail) {
  SeededRng rng = SeededRng::from_string("acc-5");
  const uint64_t want = 32 + kFrameHeader;
  bool flat = true;
  for (uint32_t n = 8; n <= 4096; n *= 2) {
    MeterResult mr = meter_secip(n, rng);
    if (mr.secip_bytes != want) flat = false;
  }
  uint64_t baseline = meter_open_then_sum(1024, rng);
  double ratio = double(baseline) / double(want);
  detail = "secip " + std::to_string(want) + " B at every n in {8..4096}; baseline ratio " +
           std::to_string(uint64_t(ratio)) + "x at n=1024 (need >= 256)";
  return flat && ratio >= 256.0;
}

bool c6_one_round(std::string& detail) {
  SeededRng rng = SeededRng::from_string("acc-6");
  bool ok = true;
  for (uint32_t n = 8; n <= 4096; n *= 2)
    if (meter_secip(n, rng).secip_rounds != 1) ok = false;

  uint64_t cmp_rounds = 0;
  {
    RingElement lam = RingElement((rng.next_u128() >> 1) + (u128(1) << 64), k6464);
    std::vector<CmpCase> one = {make_cmp(5, lam, rng, k6464, "c0")};
    run_pair(
        [&](Channel& ch) {
          ProtoCtx ctx = mk_ctx(0, ch, MacKeyShare{0, RingElement(0, k6464)});
          ChannelMetrics before = ch.metrics();
          seccmp(ctx, one[0].x[0], one[0].corr[0], "c0");
          cmp_rounds = ch.metrics().rounds - before.rounds;
        },
        [&](Channel& ch) {
          ProtoCtx ctx = mk_ctx(1, ch, MacKeyShare{1, RingElement(0, k6464)});
          seccmp(ctx, one[0].x[1], one[0].corr[1], "c0");
        });
  }
  if (cmp_rounds != 1) ok = false;
  detail = "secip rounds = 1 across the sweep, seccmp rounds = " + std::to_string(cmp_rounds);
  return ok;
}

// ---------------------------------------------------------------------------
// 7. Tampering: every fault target on either party aborts; honest runs never
//    do.
// ---------------------------------------------------------------------------

World rand_world(SeededRng& rng, RingParams p) {
  World w;
  w.p = p;
  w.m = 2 + uint32_t(rng.sample_bits(8)) % 3;
  w.n = 1 + uint32_t(rng.sample_bits(8)) % 3;
  auto feat = [&] { return i128(rng.sample_bits(8) % 7) - 3; };
  for (uint32_t i = 0; i < w.m; i++) {
    w.ids.push_back(identity_for(i));
    std::vector<i128> row;
    for (uint32_t j = 0; j <= w.n; j++) row.push_back(feat());
    w.feats.push_back(row);
  }
  for (uint32_t j = 0; j <= w.n; j++) w.query.push_back(feat());
  w.claimed = w.ids[uint32_t(rng.sample_bits(8)) % w.m];
  return w;
}

bool honest_matches_oracle(const World& w, AuthMode mode, const std::string& seed,
                           uint64_t& aborts, uint64_t& mismatches) {
  auto [r0, r1] = run_both(w, mode, seed);
  if (r0.aborted || r1.aborted) {
    aborts++;
    return false;
  }
  i128 top_id = 0;
  i128 best = oracle_top(w, &top_id);
  bool want_grant = mode == AuthMode::TOP1 ? top_id == w.claimed : best >= w.tau;
  if ((open_eta(r0, r1) == 0) != want_grant) {
    mismatches++;
    return false;
  }
  return true;
}

bool c7_mac_soundness(std::string& detail) {
  SeededRng rng = SeededRng::from_string("acc-7");
  uint64_t aborts = 0, mismatches = 0;
  for (int t = 0; t < 1000; t++) {
    World w = rand_world(rng, k6464);
    AuthMode mode = t % 3 == 2 ? AuthMode::THRESHOLD : AuthMode::TOP1;
    if (mode == AuthMode::THRESHOLD) {
      i128 tid = 0;
      w.tau = oracle_top(w, &tid) + i128(rng.sample_bits(8) % 5) - 2;
    }
    honest_matches_oracle(w, mode, "acc7-h" + std::to_string(t), aborts, mismatches);
  }

  const Saboteur::Target targets[] = {Saboteur::Target::OPEN_DELTA, Saboteur::Target::Y0_SHARE,
                                      Saboteur::Target::Z_SHARE, Saboteur::Target::CMP_PAYLOAD,
                                      Saboteur::Target::TRIPLE_SHARE};
  uint64_t caught = 0, total = 0;
  for (Saboteur::Target target : targets) {
    for (int cheater = 0; cheater < 2; cheater++) {
      for (int e = 0; e < 20; e++) {
        World w = rand_world(rng, k6464);
        u128 ev = rng.next_u128();
        if (ev == 0) ev = 1;
        Saboteur sab;
        sab.target = target;
        sab.index = 0;
        sab.error = RingElement(ev, k6464);
        auto [r0, r1] = run_both(w, AuthMode::TOP1, "acc7-f" + std::to_string(total),
                                 cheater == 0 ? &sab : nullptr, cheater == 1 ? &sab : nullptr);
        total++;
        if (r0.aborted && r1.aborted) caught++;
      }
    }
  }
  detail = std::to_string(caught) + "/" + std::to_string(total) + " faults aborted, " +
           std::to_string(aborts) + "/1000 honest aborts, " + std::to_string(mismatches) +
           " oracle mismatches";
  return caught == total && aborts == 0 && mismatches == 0;
}

// ---------------------------------------------------------------------------
// 8. End-to-end pipeline against the plaintext oracle, both metrics, with the
//    client-side preprocessing in the loop.
// ---------------------------------------------------------------------------

bool c8_end_to_end(std::string& detail) {
  const uint32_t m = 64, dims = 16;
  FixedCodec codec{7};
  SeededRng troot = SeededRng::from_string("acc-8");
  uint64_t matched = 0, total = 0, aborts = 0, mismatches = 0;

  for (Metric metric : {Metric::COSINE, Metric::EUCLIDEAN}) {
    const char* mname = metric == Metric::COSINE ? "cos" : "euc";
    std::vector<RawTemplate> raws;
    std::vector<std::vector<i128>> rows;
    for (uint32_t i = 0; i < m; i++) {
      raws.push_back(synth_template(metric, dims, troot.fork(std::string(mname) + std::to_string(i))));
      rows.push_back(quantize(preprocess(raws.back(), metric, Phase::REGISTRATION), codec));
    }
    SeededRng srng = troot.fork(std::string(mname) + "-sessions");
    for (int sess = 0; sess < 200; sess++) {
      uint32_t q = uint32_t(srng.sample_bits(16)) % m;
      uint32_t claim = sess % 2 == 0 ? q : uint32_t(srng.sample_bits(16)) % m;
      World w;
      w.p = k6464;
      w.n = dims;
      w.m = m;
      w.feats = rows;
      for (uint32_t i = 0; i < m; i++) w.ids.push_back(identity_for(i));
      w.query = quantize(preprocess(raws[q], metric, Phase::AUTHENTICATION), codec);
      w.claimed = identity_for(claim);
      AuthMode mode = sess % 4 == 3 ? AuthMode::THRESHOLD : AuthMode::TOP1;
      if (mode == AuthMode::THRESHOLD) {
        i128 tid = 0;
        w.tau = oracle_top(w, &tid) + i128(srng.sample_bits(8) % 5) - 2;
      }
      total++;
      if (honest_matches_oracle(w, mode, std::string("acc8-") + mname + std::to_string(sess),
                                aborts, mismatches))
        matched++;
    }
  }
  detail = std::to_string(matched) + "/" + std::to_string(total) +
           " sessions match the oracle at m=64 n=16";
  return matched == total;
}

// ---------------------------------------------------------------------------
// 9. Euclidean surrogate: score order inverts distance order, always.
// ---------------------------------------------------------------------------

bool c9_euclidean_order(std::string& detail) {
  SeededRng rng = SeededRng::from_string("acc-9");
  FixedCodec codec{7};
  uint64_t bad = 0;
  for (int t = 0; t < 1000; t++) {
    uint32_t dims = 1 + uint32_t(rng.sample_bits(8)) % 16;
    auto draw = [&] {
      RawTemplate r;
      for (uint32_t i = 0; i < dims; i++)
        r.values.push_back(double(i128(rng.sample_bits(7)) - 50));
      return r;
    };
    RawTemplate query = draw(), d1 = draw(), d2 = draw();
    std::vector<i128> qv = quantize(preprocess(query, Metric::EUCLIDEAN, Phase::AUTHENTICATION), codec);
    auto score = [&](const RawTemplate& d) {
      std::vector<i128> dv = quantize(preprocess(d, Metric::EUCLIDEAN, Phase::REGISTRATION), codec);
      i128 s = 0;
      for (size_t i = 0; i < dv.size(); i++) s += dv[i] * qv[i];
      return s;
    };
    auto dist2 = [&](const RawTemplate& d) {
      i128 s = 0;
      for (uint32_t i = 0; i < dims; i++) {
        i128 diff = i128(d.values[i]) - i128(query.values[i]);
        s += diff * diff;
      }
      return s;
    };
    i128 s1 = score(d1), s2 = score(d2), e1 = dist2(d1), e2 = dist2(d2);
    if ((s1 > s2) != (e1 < e2)) bad++;
    if ((s1 == s2) != (e1 == e2)) bad++;
  }
  detail = "1000 random triples, " + std::to_string(bad) + " ordering violations";
  return bad == 0;
}

// ---------------------------------------------------------------------------
// 10. Desk-scale deployment through the CLI: dealer, client, two servers and
//     the verifier over TCP loopback at m=1240, n=512, l=s=64.
// ---------------------------------------------------------------------------

int run_cmd(const std::string& cmd) { return std::system(cmd.c_str()); }

bool c10_desk_scale(const std::string& cli, std::string& detail) {
  namespace fs = std::filesystem;
  const std::string dir = "acceptance-out";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir + "/run.cfg");
    cfg << "l = 64\ns = 64\nn = 512\nm = 1240\nsessions = 1\n"
        << "metric = cosine\nmode = top1\nseed = acc10\nout_dir = " << dir << "\n"
        << "p0_port = 7841\nverifier_port = 7840\n"
        << "query_index = 3\nclaim_index = 3\n";
  }
  const std::string base = "\"" + cli + "\" --config " + dir + "/run.cfg";
  if (run_cmd(base + " dealer > " + dir + "/dealer.log 2>&1") != 0) {
    detail = "dealer failed, see " + dir + "/dealer.log";
    return false;
  }
  if (run_cmd(base + " client --action enroll > " + dir + "/enroll.log 2>&1") != 0 ||
      run_cmd(base + " client --action auth > " + dir + "/auth.log 2>&1") != 0) {
    detail = "client share preparation failed";
    return false;
  }
  std::string joint = "(" + base + " verify > " + dir + "/verify.log 2>&1; echo $? > " + dir +
                      "/verify.rc) & vp=$!; " + base + " server --party 0 > " + dir +
                      "/s0.log 2>&1 & p0=$!; " + base + " server --party 1 > " + dir +
                      "/s1.log 2>&1 & p1=$!; wait $p0; r0=$?; wait $p1; r1=$?; wait $vp; exit $((r0 + r1))";
  if (run_cmd("sh -c '" + joint + "'") != 0) {
    detail = "a server exited nonzero, see " + dir + "/s0.log and s1.log";
    return false;
  }
  std::ifstream rc(dir + "/verify.rc");
  int verify_rc = -1;
  rc >> verify_rc;
  if (verify_rc != 0) {
    detail = "verifier exit " + std::to_string(verify_rc) + ", see " + dir + "/verify.log";
    return false;
  }
  if (!fs::exists(dir + "/report.csv") || !fs::exists(dir + "/report.json")) {
    detail = "bench report missing";
    return false;
  }
  nlohmann::json rep;
  std::ifstream jf(dir + "/report.json");
  jf >> rep;
  if (rep["meta"]["decision"] != "GRANT" || rep["rows"].empty()) {
    detail = "report does not record a GRANT with metric rows";
    return false;
  }
  detail = "GRANT at m=1240 n=512 over TCP loopback, report written";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <path-to-cli-binary>\n");
    return 2;
  }
  Gate gate;
  std::string detail;
  Stopwatch total;

  auto run = [&](int idx, const char* name, auto fn) {
    Stopwatch sw;
    bool ok = false;
    try {
      ok = fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    gate.line(idx, name, ok, detail, sw.ms() / 1000.0);
  };

  run(1, "share algebra", c1_share_algebra);
  run(2, "inner product", c2_secip_exact);
  run(3, "comparison sign", c3_seccmp_sign);
  run(4, "comparison keys", c4_dcf_exhaustive);
  run(5, "communication", c5_communication);
  run(6, "single round", c6_one_round);
  run(7, "tamper detection", c7_mac_soundness);
  run(8, "end-to-end oracle", c8_end_to_end);
  run(9, "euclidean order", c9_euclidean_order);
  run(10, "desk-scale tcp", [&](std::string& d) { return c10_desk_scale(argv[1], d); });

  std::printf("%d/10 passed in %.1f s\n", 10 - gate.failures, total.ms() / 1000.0);
  return gate.failures;
}
