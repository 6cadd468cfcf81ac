#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "flame/client.hpp"
#include "flame/node.hpp"

namespace flame {

constexpr uint32_t kNoIndex = 0xffffffffu;

// Everything the command-line entry points need, fed from a key=value file
// and per-flag overrides. Field names double as config keys.
struct Config {
  unsigned l = 64, s = 64;
  uint32_t n = 512;      // feature dimensions
  uint32_t m = 1;        // batch-initialized database entries
  uint32_t enrolls = 0;  // single-entry extensions after the batch
  uint32_t sessions = 1;
  Metric metric = Metric::COSINE;
  AuthMode mode = AuthMode::TOP1;
  double tau = 0.0;  // cosine: in [-1,1], scaled by 2^(2f); euclidean: score units
  unsigned scale_bits = 7;
  std::string seed = "flame";
  std::string out_dir = "out";
  std::string p0_host = "127.0.0.1";
  uint16_t p0_port = 7601;
  std::string verifier_host = "127.0.0.1";  // "none" runs servers without a verifier
  uint16_t verifier_port = 7600;
  uint32_t query_index = 0;
  uint32_t claim_index = kNoIndex;  // defaults to query_index
  bool fresh_query = false;         // query unrelated to every enrolled template
  uint32_t trials = 10;
  bool audit = false;
  bool resume = false;          // reload the persisted database instead of initializing
  uint32_t resume_sessions = 0;  // sessions already consumed from the tape before resuming
};

namespace cfgdetail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline uint64_t parse_u64(const std::string& key, const std::string& v, uint64_t max) {
  size_t pos = 0;
  uint64_t out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
  if (pos != v.size() || out > max)
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "0" || v == "false") return false;
  if (v == "1" || v == "true") return true;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

}  // namespace cfgdetail

inline Metric parse_metric(const std::string& v) {
  if (v == "cosine") return Metric::COSINE;
  if (v == "euclidean") return Metric::EUCLIDEAN;
  throw ConfigError("config: metric must be cosine or euclidean, got '" + v + "'");
}

inline AuthMode parse_mode(const std::string& v) {
  if (v == "top1") return AuthMode::TOP1;
  if (v == "threshold") return AuthMode::THRESHOLD;
  throw ConfigError("config: mode must be top1 or threshold, got '" + v + "'");
}

inline Config parse_config_text(const std::string& text) {
  using namespace cfgdetail;
  Config c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key == "l") c.l = unsigned(parse_u64(key, val, 64));
    else if (key == "s") c.s = unsigned(parse_u64(key, val, 64));
    else if (key == "n") c.n = uint32_t(parse_u64(key, val, UINT32_MAX));
    else if (key == "m") c.m = uint32_t(parse_u64(key, val, UINT32_MAX));
    else if (key == "enrolls") c.enrolls = uint32_t(parse_u64(key, val, UINT32_MAX));
    else if (key == "sessions") c.sessions = uint32_t(parse_u64(key, val, UINT32_MAX));
    else if (key == "metric") c.metric = parse_metric(val);
    else if (key == "mode") c.mode = parse_mode(val);
    else if (key == "tau") c.tau = parse_double(key, val);
    else if (key == "scale_bits") c.scale_bits = unsigned(parse_u64(key, val, 30));
    else if (key == "seed") c.seed = val;
    else if (key == "out_dir") c.out_dir = val;
    else if (key == "p0_host") c.p0_host = val;
    else if (key == "p0_port") c.p0_port = uint16_t(parse_u64(key, val, UINT16_MAX));
    else if (key == "verifier_host") c.verifier_host = val;
    else if (key == "verifier_port") c.verifier_port = uint16_t(parse_u64(key, val, UINT16_MAX));
    else if (key == "query_index") c.query_index = uint32_t(parse_u64(key, val, UINT32_MAX));
    else if (key == "claim_index") c.claim_index = uint32_t(parse_u64(key, val, UINT32_MAX));
    else if (key == "fresh_query") c.fresh_query = parse_bool(key, val);
    else if (key == "trials") c.trials = uint32_t(parse_u64(key, val, 10000));
    else if (key == "audit") c.audit = parse_bool(key, val);
    else if (key == "resume") c.resume = parse_bool(key, val);
    else if (key == "resume_sessions") c.resume_sessions = uint32_t(parse_u64(key, val, UINT32_MAX));
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

inline RingParams ring_of(const Config& c) { return RingParams::checked(c.l, c.s); }

inline std::string tape_path(const Config& c, int party) {
  return c.out_dir + "/tape.p" + std::to_string(party) + ".bin";
}
inline std::string enroll_path(const Config& c, int party) {
  return c.out_dir + "/enroll.p" + std::to_string(party) + ".bin";
}
inline std::string auth_path(const Config& c, int party) {
  return c.out_dir + "/auth.p" + std::to_string(party) + ".bin";
}
inline std::string db_state_path(const Config& c, int party) {
  return c.out_dir + "/db.p" + std::to_string(party) + ".bin";
}
inline std::string report_csv_path(const Config& c) { return c.out_dir + "/report.csv"; }
inline std::string report_json_path(const Config& c) { return c.out_dir + "/report.json"; }
inline std::string bench_csv_path(const Config& c) { return c.out_dir + "/bench.csv"; }
inline std::string bench_json_path(const Config& c) { return c.out_dir + "/bench.json"; }

// "target:index:error" with target one of open|y0|z|cmp|triple and a nonzero
// signed error. The party is filled in by the server that carries the flag.
inline FaultPlan parse_fault(const std::string& s, RingParams p) {
  size_t c1 = s.find(':');
  size_t c2 = c1 == std::string::npos ? std::string::npos : s.find(':', c1 + 1);
  if (c2 == std::string::npos) throw ConfigError("fault: expected target:index:error, got '" + s + "'");
  std::string target = s.substr(0, c1);
  std::string index = s.substr(c1 + 1, c2 - c1 - 1);
  std::string error = s.substr(c2 + 1);
  FaultPlan fp;
  if (target == "open") fp.target = Saboteur::Target::OPEN_DELTA;
  else if (target == "y0") fp.target = Saboteur::Target::Y0_SHARE;
  else if (target == "z") fp.target = Saboteur::Target::Z_SHARE;
  else if (target == "cmp") fp.target = Saboteur::Target::CMP_PAYLOAD;
  else if (target == "triple") fp.target = Saboteur::Target::TRIPLE_SHARE;
  else throw ConfigError("fault: unknown target '" + target + "'");
  fp.index = cfgdetail::parse_u64("fault index", index, UINT64_MAX);
  long long e = 0;
  size_t pos = 0;
  try {
    e = std::stoll(error, &pos);
  } catch (const std::exception&) {
    throw ConfigError("fault: bad error '" + error + "'");
  }
  if (pos != error.size()) throw ConfigError("fault: bad error '" + error + "'");
  if (e == 0) throw ConfigError("fault: error must be nonzero");
  fp.error = encode_signed(e, p);
  return fp;
}

// Threshold in the score domain: quantized cosine scores live on a 2^(2f)
// grid, euclidean surrogate scores are plain integers.
inline RingElement tau_ring(const Config& c, RingParams p) {
  double scaled = c.metric == Metric::COSINE ? c.tau * std::ldexp(1.0, int(2 * c.scale_bits)) : c.tau;
  return encode_signed(i128(std::llround(scaled)), p);
}

inline i128 identity_for(uint32_t index) { return i128(1000) + i128(index); }

inline std::string i128_str(i128 v) {
  if (v == 0) return "0";
  bool neg = v < 0;
  u128 m = neg ? u128(-(v + 1)) + 1 : u128(v);
  std::string out;
  while (m > 0) {
    out.push_back(char('0' + int(m % 10)));
    m /= 10;
  }
  if (neg) out.push_back('-');
  std::reverse(out.begin(), out.end());
  return out;
}

inline const char* reason_name(AbortReason r) {
  switch (r) {
    case AbortReason::NONE: return "none";
    case AbortReason::MAC_CHECK: return "mac check";
    case AbortReason::DESYNC: return "desync";
    case AbortReason::EXHAUSTED: return "correlations exhausted";
    case AbortReason::TRANSPORT: return "transport";
    case AbortReason::CONFIG: return "config";
  }
  return "unknown";
}

// Deterministic synthetic templates: unit-sphere directions for cosine,
// small integer grids for euclidean. Purely for demos and benchmarks.
inline RawTemplate synth_template(Metric metric, uint32_t dims, SeededRng rng) {
  RawTemplate t;
  t.values.reserve(dims);
  if (metric == Metric::COSINE) {
    const double two_pi = 6.283185307179586;
    while (t.values.size() < dims) {
      double u1 = double(uint64_t(rng.sample_bits(53)) + 1) * 0x1p-53;
      double u2 = double(uint64_t(rng.sample_bits(53))) * 0x1p-53;
      double r = std::sqrt(-2.0 * std::log(u1));
      t.values.push_back(r * std::cos(two_pi * u2));
      if (t.values.size() < dims) t.values.push_back(r * std::sin(two_pi * u2));
    }
  } else {
    for (uint32_t i = 0; i < dims; i++)
      t.values.push_back(double(int64_t(uint64_t(rng.sample_bits(6)))) - 31.0);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Registration batches: [count u32 LE] followed by count request records.
// ---------------------------------------------------------------------------

inline void write_request_batch(const std::string& path,
                                const std::vector<std::vector<uint8_t>>& records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  uint32_t count = uint32_t(records.size());
  for (int i = 0; i < 4; i++) f.put(char((count >> (8 * i)) & 0xff));
  for (const auto& r : records) f.write(reinterpret_cast<const char*>(r.data()), std::streamsize(r.size()));
  if (!f) throw ConfigError("write failed: " + path);
}

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

inline std::vector<RequestFile> read_request_batch(const std::string& path, RingParams p) {
  std::vector<uint8_t> bytes = read_file_bytes(path);
  if (bytes.size() < 4) throw DecodeError("request batch: truncated count");
  uint32_t count = 0;
  for (int i = 3; i >= 0; i--) count = (count << 8) | bytes[i];
  size_t at = 4;
  std::vector<RequestFile> out;
  out.reserve(count);
  for (uint32_t r = 0; r < count; r++) {
    if (bytes.size() < at + 6) throw DecodeError("request batch: truncated record header");
    uint32_t n = 0;
    for (int i = 3; i >= 0; i--) n = (n << 8) | bytes[at + 2 + size_t(i)];
    size_t rec = 6 + 16 + size_t(n) * 16;
    if (bytes.size() < at + rec) throw DecodeError("request batch: truncated record");
    out.push_back(decode_request({bytes.begin() + long(at), bytes.begin() + long(at + rec)}, p));
    at += rec;
  }
  if (at != bytes.size()) throw DecodeError("request batch: trailing bytes");
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark reports: CSV with fixed columns, JSON mirror with dispersion.
// ---------------------------------------------------------------------------

struct BenchRow {
  std::string phase;
  int party = 0;
  uint64_t bytes = 0;
  uint64_t rounds = 0;
  double ms = 0;
  double ms_stddev = 0;
};

struct BenchReport {
  std::map<std::string, std::string> meta;
  std::vector<BenchRow> rows;

  void write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << "phase,party,bytes,rounds,ms\n";
    char ms[32];
    for (const auto& r : rows) {
      std::snprintf(ms, sizeof(ms), "%.3f", r.ms);
      f << r.phase << ',' << r.party << ',' << r.bytes << ',' << r.rounds << ',' << ms << '\n';
    }
    if (!f) throw ConfigError("write failed: " + path);
  }

  void write_json(const std::string& path) const {
    nlohmann::json j;
    j["meta"] = meta;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows)
      j["rows"].push_back({{"phase", r.phase},
                           {"party", r.party},
                           {"bytes", r.bytes},
                           {"rounds", r.rounds},
                           {"ms", r.ms},
                           {"ms_stddev", r.ms_stddev}});
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write " + path);
    f << j.dump(2) << '\n';
    if (!f) throw ConfigError("write failed: " + path);
  }
};

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
};

inline double mean_of(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return xs.empty() ? 0 : s / double(xs.size());
}

inline double stddev_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0;
  double m = mean_of(xs), s = 0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / double(xs.size() - 1));
}

inline uint64_t file_size_of(const std::string& path) {
  std::error_code ec;
  auto sz = std::filesystem::file_size(path, ec);
  return ec ? 0 : uint64_t(sz);
}

// ---------------------------------------------------------------------------
// dealer: build both correlation tapes for the configured workload.
// ---------------------------------------------------------------------------

inline int cmd_dealer(const Config& cfg) {
  RingParams p = ring_of(cfg);
  DealerPlan plan;
  plan.params = p;
  plan.n = cfg.n;
  plan.m = cfg.m;
  plan.enrolls = cfg.enrolls;
  plan.sessions = cfg.sessions;
  plan.threshold_mode = cfg.mode == AuthMode::THRESHOLD;
  SeededRng rng = SeededRng::from_string(cfg.seed).fork("dealer");
  std::filesystem::create_directories(cfg.out_dir);
  Stopwatch build_sw;
  auto [t0, t1] = build_tapes(plan, rng);
  double build_ms = build_sw.ms();
  Stopwatch write_sw;
  write_tape(t0, tape_path(cfg, 0));
  write_tape(t1, tape_path(cfg, 1));
  double write_ms = write_sw.ms();
  if (cfg.audit) {
    CorrelationTape r0 = read_tape(tape_path(cfg, 0));
    CorrelationTape r1 = read_tape(tape_path(cfg, 1));
    audit_tapes(r0, r1);
    std::printf("dealer: audit ok\n");
  }
  std::printf("dealer: l=%u s=%u n=%u m=%u enrolls=%u sessions=%u mode=%s\n", cfg.l, cfg.s, cfg.n,
              cfg.m, cfg.enrolls, cfg.sessions, plan.threshold_mode ? "threshold" : "top1");
  std::printf("dealer: build %.0f ms, write %.0f ms\n", build_ms, write_ms);
  for (int party = 0; party < 2; party++)
    std::printf("dealer: %s (%llu bytes)\n", tape_path(cfg, party).c_str(),
                (unsigned long long)file_size_of(tape_path(cfg, party)));
  return 0;
}

// ---------------------------------------------------------------------------
// client: turn synthetic raw templates into per-server share files.
// ---------------------------------------------------------------------------

inline int cmd_client_enroll(const Config& cfg) {
  RingParams p = ring_of(cfg);
  FixedCodec codec{uint8_t(cfg.scale_bits)};
  std::filesystem::create_directories(cfg.out_dir);
  SeededRng troot = SeededRng::from_string(cfg.seed).fork("templates");
  SeededRng shield = SeededRng::from_string(cfg.seed).fork("client-enroll-shares");
  uint32_t count = cfg.m + cfg.enrolls;
  std::vector<std::vector<uint8_t>> rec0, rec1;
  rec0.reserve(count);
  rec1.reserve(count);
  for (uint32_t i = 0; i < count; i++) {
    RawTemplate raw = synth_template(cfg.metric, cfg.n, troot.fork("t" + std::to_string(i)));
    PreparedTemplate prep = preprocess(raw, cfg.metric, Phase::REGISTRATION);
    std::vector<i128> q = quantize(prep, codec);
    OutsourcedTemplate ot = outsource(q, identity_for(i), shield, p);
    rec0.push_back(encode_request(cfg.metric, Phase::REGISTRATION, ot.identity0, ot.share0));
    rec1.push_back(encode_request(cfg.metric, Phase::REGISTRATION, ot.identity1, ot.share1));
  }
  write_request_batch(enroll_path(cfg, 0), rec0);
  write_request_batch(enroll_path(cfg, 1), rec1);
  std::printf("client: wrote %u registration shares to %s and %s\n", count,
              enroll_path(cfg, 0).c_str(), enroll_path(cfg, 1).c_str());
  return 0;
}

inline int cmd_client_auth(const Config& cfg) {
  RingParams p = ring_of(cfg);
  FixedCodec codec{uint8_t(cfg.scale_bits)};
  std::filesystem::create_directories(cfg.out_dir);
  SeededRng troot = SeededRng::from_string(cfg.seed).fork("templates");
  SeededRng shield = SeededRng::from_string(cfg.seed).fork("client-auth-shares");
  RawTemplate raw = cfg.fresh_query
                        ? synth_template(cfg.metric, cfg.n, troot.fork("query-fresh"))
                        : synth_template(cfg.metric, cfg.n, troot.fork("t" + std::to_string(cfg.query_index)));
  PreparedTemplate prep = preprocess(raw, cfg.metric, Phase::AUTHENTICATION);
  std::vector<i128> q = quantize(prep, codec);
  uint32_t claim = cfg.claim_index == kNoIndex ? cfg.query_index : cfg.claim_index;
  OutsourcedTemplate ot = outsource(q, identity_for(claim), shield, p);
  write_request(auth_path(cfg, 0), cfg.metric, Phase::AUTHENTICATION, ot.identity0, ot.share0);
  write_request(auth_path(cfg, 1), cfg.metric, Phase::AUTHENTICATION, ot.identity1, ot.share1);
  std::printf("client: wrote authentication request (claimed identity %s) to %s and %s\n",
              i128_str(identity_for(claim)).c_str(), auth_path(cfg, 0).c_str(),
              auth_path(cfg, 1).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// server: one party's full online flow, reporting to the verifier.
// ---------------------------------------------------------------------------

namespace cfgdetail {

inline void check_request(const RequestFile& rf, const Config& cfg, uint32_t width, Phase want) {
  if (rf.metric != cfg.metric) throw ConfigError("request: metric disagrees with configuration");
  if (rf.phase != want) throw ConfigError("request: unexpected phase flag");
  if (rf.shares.size() != width)
    throw ConfigError("request: share width disagrees with the tape");
}

}  // namespace cfgdetail

inline int cmd_server(const Config& cfg, int party, const std::string& fault_spec) {
  RingParams p = ring_of(cfg);
  CorrelationTape tape = read_tape(tape_path(cfg, party));
  if (tape.party != party) throw ConfigError("server: tape belongs to the other party");
  if (!(tape.params == p)) throw ConfigError("server: tape ring disagrees with configuration");
  if (tape.n != cfg.n || tape.m != cfg.m || tape.enrolls != cfg.enrolls)
    throw ConfigError("server: tape workload disagrees with configuration");
  if ((tape.threshold_mode != 0) != (cfg.mode == AuthMode::THRESHOLD))
    throw ConfigError("server: tape mode disagrees with configuration");

  std::vector<RequestFile> regs = read_request_batch(enroll_path(cfg, party), p);
  if (regs.size() != size_t(cfg.m) + size_t(cfg.enrolls))
    throw ConfigError("server: registration count disagrees with the tape");
  for (const auto& r : regs) cfgdetail::check_request(r, cfg, cfg.n + 1, Phase::REGISTRATION);
  RequestFile auth = read_request(auth_path(cfg, party), p);
  cfgdetail::check_request(auth, cfg, cfg.n + 1, Phase::AUTHENTICATION);

  FaultPlan fp;
  const FaultPlan* fault = nullptr;
  if (!fault_spec.empty()) {
    fp = parse_fault(fault_spec, p);
    fp.party = party;
    fault = &fp;
    std::printf("server %d: injecting fault %s\n", party, fault_spec.c_str());
  }

  std::unique_ptr<Channel> ch;
  if (party == 0) {
    TcpListener peer(cfg.p0_port);
    ch = peer.accept_one();
  } else {
    ch = TcpChannel::connect_to(cfg.p0_host, cfg.p0_port);
  }
  std::unique_ptr<TcpChannel> vch;
  if (cfg.verifier_host != "none") {
    vch = TcpChannel::connect_to(cfg.verifier_host, cfg.verifier_port);
    vch->send(Frame{MSG_CONTROL, 0, {0xB0, uint8_t(party)}});
  }

  // Database phase: either the two-round initialization plus enrolls, or a
  // reload of persisted state with the tape fast-forwarded past what the
  // original run consumed.
  Stopwatch init_sw;
  ChannelMetrics init_base = ch->metrics();
  TemplateDb db;
  OptShare phi_opt;
  if (cfg.resume) {
    DbFile df = load_db(db_state_path(cfg, party));
    if (df.party != party || !(df.params == p)) throw ConfigError("server: stale database file");
    if (df.db.entries.size() != regs.size()) throw ConfigError("server: database size changed");
    db = std::move(df.db);
    phi_opt = OptShare{df.phi_delta, tape.lambda_by_label.at("phi"), party};
    tape.init.entries.erase(tape.init.entries.begin(),
                            tape.init.entries.begin() + long(regs.size()));
    for (uint32_t i = 0; i < 1 + cfg.enrolls; i++) tape.take_aux();
    for (uint32_t i = 0; i < cfg.resume_sessions; i++) tape.take_session();
    std::printf("server %d: resumed database with %zu entries\n", party, db.size());
  } else {
    std::vector<DbEntryShares> batch;
    for (uint32_t i = 0; i < cfg.m; i++)
      batch.push_back(DbEntryShares{regs[i].identity_share, regs[i].shares});
    db = init_database(party, *ch, tape, batch, phi_opt);
    for (uint32_t i = cfg.m; i < regs.size(); i++)
      enroll(party, *ch, tape, db, DbEntryShares{regs[i].identity_share, regs[i].shares}, phi_opt);
    save_db(db, phi_opt.delta, party, p, db_state_path(cfg, party));
  }
  double init_ms = init_sw.ms();
  ChannelMetrics init_done = ch->metrics();
  std::printf("server %d: database ready (%zu entries) in %.0f ms\n", party, db.size(), init_ms);

  Stopwatch auth_sw;
  SessionOutcome out = run_session(party, *ch, tape, db, auth.shares, auth.identity_share,
                                   cfg.mode, uint8_t(cfg.metric), tau_ring(cfg, p), phi_opt, fault);
  double auth_ms = auth_sw.ms();
  ChannelMetrics auth_done = ch->metrics();

  if (out.aborted)
    std::printf("server %d: session %u aborted (%s): %s\n", party, out.state.session_id,
                reason_name(out.reason), out.reason_text.c_str());
  else
    std::printf("server %d: session %u done in %.0f ms\n", party, out.state.session_id, auth_ms);

  if (vch) {
    vch->send(result_frame(out.state.session_id, out));
    nlohmann::json met;
    met["party"] = party;
    met["session_id"] = out.state.session_id;
    met["outcome"] = out.aborted ? "aborted" : "done";
    met["reason"] = out.aborted ? reason_name(out.reason) : "";
    met["rows"] = nlohmann::json::array();
    met["rows"].push_back({{"phase", "db_init"},
                           {"bytes", init_done.bytes_sent - init_base.bytes_sent},
                           {"rounds", init_done.rounds - init_base.rounds},
                           {"ms", init_ms}});
    met["rows"].push_back({{"phase", "auth"},
                           {"bytes", auth_done.bytes_sent - init_done.bytes_sent},
                           {"rounds", auth_done.rounds - init_done.rounds},
                           {"ms", auth_ms}});
    std::string body = met.dump();
    std::vector<uint8_t> payload;
    payload.push_back(0xB1);
    payload.insert(payload.end(), body.begin(), body.end());
    vch->send(Frame{MSG_CONTROL, out.state.session_id, payload});
  }
  return out.aborted ? 3 : 0;
}

// ---------------------------------------------------------------------------
// verify: join both servers' results, decide, and write the run report.
// ---------------------------------------------------------------------------

inline int cmd_verify(const Config& cfg) {
  RingParams p = ring_of(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  TcpListener lis(cfg.verifier_port);
  std::unique_ptr<TcpChannel> chans[2];
  for (int i = 0; i < 2; i++) {
    auto c = lis.accept_one();
    Frame hello = c->recv();
    if (hello.msg_type != MSG_CONTROL || hello.payload.size() != 2 || hello.payload[0] != 0xB0)
      throw ProtocolError("verifier: bad hello frame");
    int party = hello.payload[1];
    if (party > 1 || chans[party]) throw ProtocolError("verifier: duplicate party hello");
    chans[party] = std::move(c);
  }

  ResultMsg rm[2];
  nlohmann::json met[2];
  for (int party = 0; party < 2; party++) {
    rm[party] = parse_result_frame(chans[party]->recv(), p);
    Frame mf = chans[party]->recv();
    if (mf.msg_type != MSG_CONTROL || mf.payload.empty() || mf.payload[0] != 0xB1)
      throw ProtocolError("verifier: bad metrics frame");
    met[party] = nlohmann::json::parse(mf.payload.begin() + 1, mf.payload.end());
  }

  Decision d = decide(rm[0], rm[1]);
  BenchReport rep;
  rep.meta["l"] = std::to_string(cfg.l);
  rep.meta["s"] = std::to_string(cfg.s);
  rep.meta["n"] = std::to_string(cfg.n);
  rep.meta["m"] = std::to_string(cfg.m);
  rep.meta["metric"] = cfg.metric == Metric::COSINE ? "cosine" : "euclidean";
  rep.meta["mode"] = cfg.mode == AuthMode::TOP1 ? "top1" : "threshold";
  rep.meta["decision"] =
      d.outcome == Outcome::GRANT ? "GRANT" : (d.outcome == Outcome::DENY ? "DENY" : "ABORT");
  if (d.outcome != Outcome::ABORT) rep.meta["eta"] = i128_str(d.eta_plain);
  for (int party = 0; party < 2; party++)
    for (const auto& r : met[party]["rows"])
      rep.rows.push_back(BenchRow{r["phase"].get<std::string>(), party, r["bytes"].get<uint64_t>(),
                                  r["rounds"].get<uint64_t>(), r["ms"].get<double>(), 0});
  rep.write_csv(report_csv_path(cfg));
  rep.write_json(report_json_path(cfg));

  if (d.outcome == Outcome::GRANT) {
    std::printf("verifier: GRANT (eta = 0)\n");
    return 0;
  }
  if (d.outcome == Outcome::DENY) {
    std::printf("verifier: DENY (eta = %s)\n", i128_str(d.eta_plain).c_str());
    return 2;
  }
  for (int party = 0; party < 2; party++)
    if (rm[party].aborted)
      std::printf("verifier: party %d aborted (%s)\n", party, reason_name(rm[party].reason));
  if (!rm[0].aborted && !rm[1].aborted) std::printf("verifier: result views disagree\n");
  std::printf("verifier: ABORT\n");
  return 3;
}

// ---------------------------------------------------------------------------
// bench: in-process two-party microbenchmarks and an end-to-end run.
// ---------------------------------------------------------------------------

namespace benchdetail {

template <class F0, class F1>
inline void run_pair(F0 f0, F1 f1) {
  auto [c0, c1] = make_inproc_pair();
  std::exception_ptr e0, e1;
  std::thread th([&] {
    try {
      f1(*c1);
    } catch (...) {
      e1 = std::current_exception();
      c1.reset();
    }
  });
  try {
    f0(*c0);
  } catch (...) {
    e0 = std::current_exception();
    c0.reset();
  }
  th.join();
  if (e0) std::rethrow_exception(e0);
  if (e1) std::rethrow_exception(e1);
}

inline ProtoCtx bench_ctx(int party, Channel& ch, const MacKeyShare& mac, const std::string& tag) {
  ProtoCtx ctx;
  ctx.party = party;
  ctx.ch = &ch;
  ctx.session_id = 0;
  ctx.mac = mac;
  ctx.rng = SeededRng::from_string("bench-online").fork(tag + std::to_string(party));
  return ctx;
}

}  // namespace benchdetail

struct SecIpBench {
  uint64_t bytes[2] = {0, 0};  // per inner product, per party
  uint64_t rounds[2] = {0, 0};
  double ms[2] = {0, 0}, ms_stddev[2] = {0, 0};
  uint64_t baseline_bytes[2] = {0, 0};
  uint64_t baseline_rounds[2] = {0, 0};
  double baseline_ms[2] = {0, 0}, baseline_ms_stddev[2] = {0, 0};
};

// One inner product per trial, measured against the naive per-feature
// opening: n multiplication opens in one batched round, then a local sum.
inline SecIpBench bench_secip(RingParams p, uint32_t n, uint32_t trials, const std::string& seed) {
  SeededRng rng = SeededRng::from_string(seed).fork("bench-secip-" + std::to_string(n));
  auto [k0, k1] = gen_mac_key(rng, p);
  RingElement phi = add(k0.share, k1.share);

  struct Trial {
    SecIpCorrelation corr[2];
    std::vector<AuthPair> d[2];
    std::vector<OptShare> t[2];
    RingElement expect;
    std::vector<MultCorrelation> base_corr[2];
    std::vector<OptShare> bx[2], by[2];
  };
  std::vector<Trial> setups(trials);
  for (auto& tr : setups) {
    std::vector<RingElement> lx, lpx, ly;
    RingElement acc(0, p);
    for (uint32_t i = 0; i < n; i++) {
      lx.push_back(rng.sample_uniform(p));
      lpx.push_back(rng.sample_uniform(p));
      ly.push_back(rng.sample_uniform(p));
    }
    auto [c0, c1] = gen_secip_corr(lx, lpx, ly, n, rng, "bench");
    tr.corr[0] = std::move(c0);
    tr.corr[1] = std::move(c1);
    for (uint32_t i = 0; i < n; i++) {
      RingElement x = encode_signed(i128(int64_t(uint64_t(rng.sample_bits(16)))) - 32768, p);
      RingElement y = encode_signed(i128(int64_t(uint64_t(rng.sample_bits(16)))) - 32768, p);
      acc = add(acc, mul(x, y));
      auto [xs0, xs1] = detail::split2(lx[i], rng);
      auto [ps0, ps1] = detail::split2(lpx[i], rng);
      auto [ys0, ys1] = detail::split2(ly[i], rng);
      RingElement dx = add(x, lx[i]), dpx = add(mul(phi, x), lpx[i]), dy = add(y, ly[i]);
      tr.d[0].push_back(AuthPair{OptShare{dx, xs0, 0}, OptShare{dpx, ps0, 0}});
      tr.d[1].push_back(AuthPair{OptShare{dx, xs1, 1}, OptShare{dpx, ps1, 1}});
      tr.t[0].push_back(OptShare{dy, ys0, 0});
      tr.t[1].push_back(OptShare{dy, ys1, 1});

      // Baseline wires reuse the same plaintexts on fresh masks.
      RingElement blx = rng.sample_uniform(p), bly = rng.sample_uniform(p);
      auto [bxs0, bxs1] = detail::split2(blx, rng);
      auto [bys0, bys1] = detail::split2(bly, rng);
      auto [m0, m1] = gen_mult_corr(blx, bxs0, bxs1, bly, bys0, bys1, rng,
                                            "base" + std::to_string(i));
      tr.base_corr[0].push_back(std::move(m0));
      tr.base_corr[1].push_back(std::move(m1));
      tr.bx[0].push_back(OptShare{add(x, blx), bxs0, 0});
      tr.bx[1].push_back(OptShare{add(x, blx), bxs1, 1});
      tr.by[0].push_back(OptShare{add(y, bly), bys0, 0});
      tr.by[1].push_back(OptShare{add(y, bly), bys1, 1});
    }
    tr.expect = acc;
  }

  SecIpBench out;
  AuthPair got[2];
  OptShare base_got[2];
  auto run = [&](int party, Channel& ch, const MacKeyShare& mac) {
    ProtoCtx ctx = benchdetail::bench_ctx(party, ch, mac, "secip");
    std::vector<double> times, base_times;
    ChannelMetrics before = ch.metrics();
    for (auto& tr : setups) {
      Stopwatch sw;
      AuthPair r = secip(ctx, tr.d[party], tr.t[party], tr.corr[party], "bench");
      times.push_back(sw.ms());
      if (&tr == &setups.front()) got[party] = r;
    }
    ChannelMetrics mid = ch.metrics();
    for (auto& tr : setups) {
      Stopwatch sw;
      std::vector<PendingMult> pend;
      pend.reserve(n);
      for (uint32_t i = 0; i < n; i++)
        pend.push_back(mult_local(ctx, tr.bx[party][i], tr.by[party][i], tr.base_corr[party][i]));
      std::vector<OptShare> prods = mult_finish(ctx, pend);
      OptShare sum = prods[0];
      for (uint32_t i = 1; i < n; i++) sum = add_opt(sum, prods[i]);
      base_times.push_back(sw.ms());
      if (&tr == &setups.front()) base_got[party] = sum;
    }
    ChannelMetrics after = ch.metrics();
    out.bytes[party] = (mid.bytes_sent - before.bytes_sent) / trials;
    out.rounds[party] = (mid.rounds - before.rounds) / trials;
    out.ms[party] = mean_of(times);
    out.ms_stddev[party] = stddev_of(times);
    out.baseline_bytes[party] = (after.bytes_sent - mid.bytes_sent) / trials;
    out.baseline_rounds[party] = (after.rounds - mid.rounds) / trials;
    out.baseline_ms[party] = mean_of(base_times);
    out.baseline_ms_stddev[party] = stddev_of(base_times);
  };
  benchdetail::run_pair([&](Channel& ch) { run(0, ch, k0); }, [&](Channel& ch) { run(1, ch, k1); });
  if (!(open(got[0].value, got[1].value) == setups[0].expect))
    throw ProtocolError("bench: inner product self-check failed");
  if (!(open(base_got[0], base_got[1]) == setups[0].expect))
    throw ProtocolError("bench: baseline self-check failed");
  return out;
}

struct SecCmpBench {
  uint32_t batch = 0;
  uint64_t bytes[2] = {0, 0};  // whole batch, per party
  uint64_t rounds[2] = {0, 0};
  double ms[2] = {0, 0}, ms_stddev[2] = {0, 0};
};

inline SecCmpBench bench_seccmp(RingParams p, uint32_t batch, uint32_t trials,
                                const std::string& seed) {
  SeededRng rng = SeededRng::from_string(seed).fork("bench-cmp-" + std::to_string(batch));
  auto [k0, k1] = gen_mac_key(rng, p);
  RingElement phi = add(k0.share, k1.share);

  // Key generation dominates setup cost, so one batch of correlations is
  // shared by all timing trials; the online work per trial is identical.
  struct Setup {
    std::vector<SecCmpCorrelation> corr[2];
    std::vector<OptShare> x[2];
  };
  Setup tr;
  for (uint32_t i = 0; i < batch; i++) {
    RingElement lx = detail::safe_cmp_lambda(rng, p, true);
    auto [s0, s1] = detail::split2(lx, rng);
    auto [c0, c1] = gen_seccmp_corr(lx, s0, s1, phi, rng, "bench");
    tr.corr[0].push_back(std::move(c0));
    tr.corr[1].push_back(std::move(c1));
    RingElement x = encode_signed(i128(int64_t(uint64_t(rng.sample_bits(16)))) - 32768, p);
    RingElement dx = add(x, lx);
    tr.x[0].push_back(OptShare{dx, s0, 0});
    tr.x[1].push_back(OptShare{dx, s1, 1});
  }

  SecCmpBench out;
  out.batch = batch;
  auto run = [&](int party, Channel& ch, const MacKeyShare& mac) {
    ProtoCtx ctx = benchdetail::bench_ctx(party, ch, mac, "cmp");
    std::vector<double> times;
    ChannelMetrics before = ch.metrics();
    for (uint32_t t = 0; t < trials; t++) {
      Stopwatch sw;
      for (uint32_t i = 0; i < batch; i++) seccmp(ctx, tr.x[party][i], tr.corr[party][i], "bench");
      times.push_back(sw.ms());
    }
    ChannelMetrics after = ch.metrics();
    out.bytes[party] = (after.bytes_sent - before.bytes_sent) / trials;
    out.rounds[party] = (after.rounds - before.rounds) / trials;
    out.ms[party] = mean_of(times);
    out.ms_stddev[party] = stddev_of(times);
  };
  benchdetail::run_pair([&](Channel& ch) { run(0, ch, k0); }, [&](Channel& ch) { run(1, ch, k1); });
  return out;
}

// Whole pipeline at the configured scale over in-process channels: tape
// build, database initialization, one authentication session.
inline void bench_e2e(const Config& cfg, BenchReport& rep) {
  RingParams p = ring_of(cfg);
  DealerPlan plan;
  plan.params = p;
  plan.n = cfg.n;
  plan.m = cfg.m;
  plan.enrolls = 0;
  plan.sessions = 1;
  plan.threshold_mode = cfg.mode == AuthMode::THRESHOLD;
  SeededRng rng = SeededRng::from_string(cfg.seed).fork("bench-e2e");
  Stopwatch dealer_sw;
  auto [t0, t1] = build_tapes(plan, rng);
  double dealer_ms = dealer_sw.ms();
  std::string tmp0 = cfg.out_dir + "/bench-tape.p0.bin";
  std::string tmp1 = cfg.out_dir + "/bench-tape.p1.bin";
  write_tape(t0, tmp0);
  write_tape(t1, tmp1);
  for (int party = 0; party < 2; party++)
    rep.rows.push_back(BenchRow{"e2e_offline", party,
                                file_size_of(party == 0 ? tmp0 : tmp1), 0, dealer_ms, 0});

  FixedCodec codec{uint8_t(cfg.scale_bits)};
  SeededRng troot = SeededRng::from_string(cfg.seed).fork("templates");
  SeededRng shield = SeededRng::from_string(cfg.seed).fork("bench-shares");
  std::vector<DbEntryShares> ent[2];
  for (uint32_t i = 0; i < cfg.m; i++) {
    RawTemplate raw = synth_template(cfg.metric, cfg.n, troot.fork("t" + std::to_string(i)));
    std::vector<i128> q = quantize(preprocess(raw, cfg.metric, Phase::REGISTRATION), codec);
    OutsourcedTemplate ot = outsource(q, identity_for(i), shield, p);
    ent[0].push_back(DbEntryShares{ot.identity0, ot.share0});
    ent[1].push_back(DbEntryShares{ot.identity1, ot.share1});
  }
  RawTemplate qraw = synth_template(cfg.metric, cfg.n, troot.fork("t" + std::to_string(cfg.query_index)));
  std::vector<i128> qq = quantize(preprocess(qraw, cfg.metric, Phase::AUTHENTICATION), codec);
  OutsourcedTemplate qt = outsource(qq, identity_for(cfg.query_index), shield, p);

  CorrelationTape* tapes[2] = {&t0, &t1};
  double init_ms[2], auth_ms[2];
  uint64_t init_bytes[2], init_rounds[2], auth_bytes[2], auth_rounds[2];
  SessionOutcome res[2];
  auto run = [&](int party, Channel& ch) {
    CorrelationTape& tape = *tapes[party];
    Stopwatch sw;
    ChannelMetrics before = ch.metrics();
    OptShare phi_opt;
    TemplateDb db = init_database(party, ch, tape, ent[party], phi_opt);
    init_ms[party] = sw.ms();
    ChannelMetrics mid = ch.metrics();
    init_bytes[party] = mid.bytes_sent - before.bytes_sent;
    init_rounds[party] = mid.rounds - before.rounds;
    Stopwatch sw2;
    res[party] =
        run_session(party, ch, tape, db, (party == 0 ? qt.share0 : qt.share1),
                    (party == 0 ? qt.identity0 : qt.identity1), cfg.mode, uint8_t(cfg.metric),
                    tau_ring(cfg, p), phi_opt, nullptr);
    auth_ms[party] = sw2.ms();
    ChannelMetrics after = ch.metrics();
    auth_bytes[party] = after.bytes_sent - mid.bytes_sent;
    auth_rounds[party] = after.rounds - mid.rounds;
  };
  benchdetail::run_pair([&](Channel& ch) { run(0, ch); }, [&](Channel& ch) { run(1, ch); });
  Decision d = decide(res[0], res[1]);
  if (d.outcome != Outcome::GRANT) throw ProtocolError("bench: e2e run did not grant");
  for (int party = 0; party < 2; party++) {
    rep.rows.push_back(
        BenchRow{"e2e_db_init", party, init_bytes[party], init_rounds[party], init_ms[party], 0});
    rep.rows.push_back(
        BenchRow{"e2e_auth", party, auth_bytes[party], auth_rounds[party], auth_ms[party], 0});
  }
}

inline int cmd_bench(const Config& cfg, const std::string& suite) {
  std::filesystem::create_directories(cfg.out_dir);
  RingParams p = ring_of(cfg);
  BenchReport rep;
  rep.meta["suite"] = suite;
  rep.meta["l"] = std::to_string(cfg.l);
  rep.meta["s"] = std::to_string(cfg.s);
  rep.meta["trials"] = std::to_string(cfg.trials);
  rep.meta["seed"] = cfg.seed;

  if (suite == "secip" || suite == "all") {
    for (uint32_t n : {256u, 1024u, 4096u, 16384u}) {
      SecIpBench b = bench_secip(p, n, cfg.trials, cfg.seed);
      for (int party = 0; party < 2; party++) {
        rep.rows.push_back(BenchRow{"secip_n" + std::to_string(n), party, b.bytes[party],
                                    b.rounds[party], b.ms[party], b.ms_stddev[party]});
        rep.rows.push_back(BenchRow{"ips_baseline_n" + std::to_string(n), party,
                                    b.baseline_bytes[party], b.baseline_rounds[party],
                                    b.baseline_ms[party], b.baseline_ms_stddev[party]});
      }
    }
  }
  if (suite == "cmp" || suite == "all") {
    for (uint32_t batch : {256u, 1024u, 4096u, 16384u}) {
      SecCmpBench b = bench_seccmp(p, batch, cfg.trials, cfg.seed);
      for (int party = 0; party < 2; party++)
        rep.rows.push_back(BenchRow{"seccmp_b" + std::to_string(batch), party, b.bytes[party],
                                    b.rounds[party], b.ms[party], b.ms_stddev[party]});
    }
  }
  if (suite == "e2e" || suite == "all") bench_e2e(cfg, rep);

  rep.write_csv(bench_csv_path(cfg));
  rep.write_json(bench_json_path(cfg));
  std::printf("%-20s %-5s %12s %8s %12s\n", "phase", "party", "bytes", "rounds", "ms");
  for (const auto& r : rep.rows)
    std::printf("%-20s %-5d %12llu %8llu %12.3f\n", r.phase.c_str(), r.party,
                (unsigned long long)r.bytes, (unsigned long long)r.rounds, r.ms);
  std::printf("bench: wrote %s and %s\n", bench_csv_path(cfg).c_str(), bench_json_path(cfg).c_str());
  return 0;
}

}  // namespace flame
