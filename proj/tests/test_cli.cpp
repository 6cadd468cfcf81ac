#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "flame/cli.hpp"

using namespace flame;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string slurp_text(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::ostringstream out;
  out << f.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("config text parses every key and tolerates comments") {
  Config c = parse_config_text(
      "# demo deployment\n"
      "l = 8\n"
      "s=4\n"
      "  n = 16   # dims\n"
      "m=3\n"
      "enrolls = 2\n"
      "sessions = 5\n"
      "metric = euclidean\n"
      "mode = threshold\n"
      "tau = -0.25\n"
      "scale_bits = 9\n"
      "seed = pepper\n"
      "out_dir = run7\n"
      "p0_host = 10.0.0.1\n"
      "p0_port = 9000\n"
      "verifier_host = none\n"
      "verifier_port = 9001\n"
      "query_index = 2\n"
      "claim_index = 1\n"
      "fresh_query = true\n"
      "trials = 100\n"
      "audit = 1\n"
      "resume = false\n"
      "resume_sessions = 4\n"
      "\n");
  CHECK(c.l == 8);
  CHECK(c.s == 4);
  CHECK(c.n == 16);
  CHECK(c.m == 3);
  CHECK(c.enrolls == 2);
  CHECK(c.sessions == 5);
  CHECK(c.metric == Metric::EUCLIDEAN);
  CHECK(c.mode == AuthMode::THRESHOLD);
  CHECK(c.tau == Approx(-0.25));
  CHECK(c.scale_bits == 9);
  CHECK(c.seed == "pepper");
  CHECK(c.out_dir == "run7");
  CHECK(c.p0_host == "10.0.0.1");
  CHECK(c.p0_port == 9000);
  CHECK(c.verifier_host == "none");
  CHECK(c.verifier_port == 9001);
  CHECK(c.query_index == 2);
  CHECK(c.claim_index == 1);
  CHECK(c.fresh_query);
  CHECK(c.trials == 100);
  CHECK(c.audit);
  CHECK_FALSE(c.resume);
  CHECK(c.resume_sessions == 4);
}

TEST_CASE("config defaults survive an empty file") {
  Config c = parse_config_text("# nothing but comments\n\n   \n");
  CHECK(c.l == 64);
  CHECK(c.s == 64);
  CHECK(c.n == 512);
  CHECK(c.m == 1);
  CHECK(c.sessions == 1);
  CHECK(c.metric == Metric::COSINE);
  CHECK(c.mode == AuthMode::TOP1);
  CHECK(c.scale_bits == 7);
  CHECK(c.seed == "flame");
  CHECK(c.claim_index == kNoIndex);
  CHECK(c.trials == 10);
  CHECK_FALSE(c.resume);
}

TEST_CASE("config rejects malformed input") {
  CHECK_THROWS_AS(parse_config_text("banana\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("volume = 11\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("l = sixty\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("l = 65\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("l = 8x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("tau = 0.5.1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("audit = yes\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("metric = manhattan\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("mode = top2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("trials = 10001\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("scale_bits = 31\n"), ConfigError);
  CHECK_THROWS_WITH(parse_config_text("p0_port = 70000\n"), ContainsSubstring("p0_port"));
}

TEST_CASE("config loads from disk and reports missing files") {
  std::filesystem::create_directories("test-out");
  {
    std::ofstream f("test-out/demo.cfg");
    f << "n = 4\nmetric = euclidean\n";
  }
  Config c = load_config("test-out/demo.cfg");
  CHECK(c.n == 4);
  CHECK(c.metric == Metric::EUCLIDEAN);
  CHECK_THROWS_AS(load_config("test-out/absent.cfg"), ConfigError);
}

TEST_CASE("fault specs map onto saboteur targets") {
  RingParams p = RingParams::checked(8, 4);
  struct Row {
    const char* spec;
    Saboteur::Target target;
    uint64_t index;
    long long error;
  };
  const Row rows[] = {
      {"open:0:1", Saboteur::Target::OPEN_DELTA, 0, 1},
      {"y0:3:-2", Saboteur::Target::Y0_SHARE, 3, -2},
      {"z:1:100", Saboteur::Target::Z_SHARE, 1, 100},
      {"cmp:0:-1", Saboteur::Target::CMP_PAYLOAD, 0, -1},
      {"triple:7:5", Saboteur::Target::TRIPLE_SHARE, 7, 5},
  };
  for (const Row& r : rows) {
    FaultPlan fp = parse_fault(r.spec, p);
    CHECK(fp.target == r.target);
    CHECK(fp.index == r.index);
    CHECK(fp.error == encode_signed(i128(r.error), p));
  }
  CHECK_THROWS_AS(parse_fault("open:0", p), ConfigError);
  CHECK_THROWS_AS(parse_fault("wire:0:1", p), ConfigError);
  CHECK_THROWS_AS(parse_fault("open:x:1", p), ConfigError);
  CHECK_THROWS_AS(parse_fault("open:0:zero", p), ConfigError);
  CHECK_THROWS_AS(parse_fault("open:0:1q", p), ConfigError);
  CHECK_THROWS_WITH(parse_fault("open:0:0", p), ContainsSubstring("nonzero"));
}

TEST_CASE("threshold scaling follows the metric") {
  RingParams p = RingParams::checked(64, 64);
  Config c;
  c.metric = Metric::COSINE;
  c.scale_bits = 7;
  c.tau = 0.5;
  // cosine thresholds live on the squared quantization grid
  CHECK(tau_ring(c, p) == encode_signed(i128(1) << 13, p));
  c.tau = -0.5;
  CHECK(tau_ring(c, p) == encode_signed(-(i128(1) << 13), p));
  c.metric = Metric::EUCLIDEAN;
  c.tau = -40.0;
  CHECK(tau_ring(c, p) == encode_signed(-40, p));
}

TEST_CASE("identity assignment and decimal rendering") {
  CHECK(identity_for(0) == 1000);
  CHECK(identity_for(25) == 1025);
  CHECK(i128_str(0) == "0");
  CHECK(i128_str(42) == "42");
  CHECK(i128_str(-7) == "-7");
  CHECK(i128_str(i128(1) << 100) == "1267650600228229401496703205376");
  CHECK(i128_str(-(i128(1) << 100)) == "-1267650600228229401496703205376");
  i128 min128 = -(i128(1) << 126) - ((i128(1) << 126) - 1) - 1;
  CHECK(i128_str(min128) == "-170141183460469231731687303715884105728");
}

TEST_CASE("abort reasons have stable names") {
  CHECK(std::string(reason_name(AbortReason::NONE)) == "none");
  CHECK(std::string(reason_name(AbortReason::MAC_CHECK)) == "mac check");
  CHECK(std::string(reason_name(AbortReason::DESYNC)) == "desync");
  CHECK(std::string(reason_name(AbortReason::EXHAUSTED)) == "correlations exhausted");
  CHECK(std::string(reason_name(AbortReason::TRANSPORT)) == "transport");
  CHECK(std::string(reason_name(AbortReason::CONFIG)) == "config");
}

TEST_CASE("synthetic templates are deterministic and in range") {
  SeededRng rng = SeededRng::from_string("tmpl");
  RawTemplate a = synth_template(Metric::COSINE, 9, rng.fork("a"));
  RawTemplate b = synth_template(Metric::COSINE, 9, rng.fork("a"));
  RawTemplate c = synth_template(Metric::COSINE, 9, rng.fork("b"));
  REQUIRE(a.values.size() == 9);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  for (double v : a.values) CHECK(std::isfinite(v));

  RawTemplate e = synth_template(Metric::EUCLIDEAN, 64, rng.fork("e"));
  REQUIRE(e.values.size() == 64);
  for (double v : e.values) {
    CHECK(v >= -31.0);
    CHECK(v <= 32.0);
    CHECK(v == double(int64_t(v)));
  }
}

TEST_CASE("request batches roundtrip through disk") {
  std::filesystem::create_directories("test-out");
  RingParams p = RingParams::checked(64, 64);
  SeededRng rng = SeededRng::from_string("batch");

  std::vector<std::vector<uint8_t>> records;
  std::vector<RequestFile> want;
  for (int i = 0; i < 3; i++) {
    RequestFile rf;
    rf.metric = Metric::EUCLIDEAN;
    rf.phase = i == 2 ? Phase::AUTHENTICATION : Phase::REGISTRATION;
    rf.identity_share = rng.sample_uniform(p);
    for (int k = 0; k < 2 + i; k++) rf.shares.push_back(rng.sample_uniform(p));
    records.push_back(encode_request(rf.metric, rf.phase, rf.identity_share, rf.shares));
    want.push_back(rf);
  }
  const std::string path = "test-out/batch.bin";
  write_request_batch(path, records);

  std::vector<RequestFile> got = read_request_batch(path, p);
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); i++) {
    CHECK(got[i].metric == want[i].metric);
    CHECK(got[i].phase == want[i].phase);
    CHECK(got[i].identity_share == want[i].identity_share);
    CHECK(got[i].shares == want[i].shares);
  }

  write_request_batch("test-out/batch.empty.bin", {});
  CHECK(read_request_batch("test-out/batch.empty.bin", p).empty());
}

TEST_CASE("request batches reject corrupt framing") {
  std::filesystem::create_directories("test-out");
  RingParams p = RingParams::checked(64, 64);
  SeededRng rng = SeededRng::from_string("corrupt");
  RequestFile rf;
  rf.identity_share = rng.sample_uniform(p);
  rf.shares = {rng.sample_uniform(p)};
  std::vector<uint8_t> rec = encode_request(rf.metric, rf.phase, rf.identity_share, rf.shares);

  auto dump = [](const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  };

  dump("test-out/b.count.bin", {0x01, 0x00});
  CHECK_THROWS_WITH(read_request_batch("test-out/b.count.bin", p), ContainsSubstring("truncated count"));

  std::vector<uint8_t> header_only = {0x01, 0x00, 0x00, 0x00};
  header_only.insert(header_only.end(), rec.begin(), rec.begin() + 4);
  dump("test-out/b.header.bin", header_only);
  CHECK_THROWS_WITH(read_request_batch("test-out/b.header.bin", p),
                    ContainsSubstring("truncated record header"));

  std::vector<uint8_t> cut = {0x01, 0x00, 0x00, 0x00};
  cut.insert(cut.end(), rec.begin(), rec.end() - 1);
  dump("test-out/b.record.bin", cut);
  CHECK_THROWS_WITH(read_request_batch("test-out/b.record.bin", p), ContainsSubstring("truncated record"));

  std::vector<uint8_t> padded = {0x01, 0x00, 0x00, 0x00};
  padded.insert(padded.end(), rec.begin(), rec.end());
  padded.push_back(0xee);
  dump("test-out/b.trailing.bin", padded);
  CHECK_THROWS_WITH(read_request_batch("test-out/b.trailing.bin", p), ContainsSubstring("trailing bytes"));

  CHECK_THROWS_AS(read_request_batch("test-out/b.missing.bin", p), ConfigError);
}

TEST_CASE("benchmark reports serialize to csv and schema-shaped json") {
  std::filesystem::create_directories("test-out");
  BenchReport rep;
  rep.meta["l"] = "64";
  rep.meta["metric"] = "cosine";
  rep.rows.push_back({"secip/n=512", 0, 48, 1, 0.125, 0.01});
  rep.rows.push_back({"seccmp", 1, 40, 1, 2.5, 0.0});

  rep.write_csv("test-out/bench.csv");
  std::string csv = slurp_text("test-out/bench.csv");
  CHECK(csv == "phase,party,bytes,rounds,ms\n"
               "secip/n=512,0,48,1,0.125\n"
               "seccmp,1,40,1,2.500\n");

  rep.write_json("test-out/bench.json");
  nlohmann::json j = nlohmann::json::parse(slurp_text("test-out/bench.json"));
  REQUIRE(j.contains("meta"));
  REQUIRE(j.contains("rows"));
  CHECK(j["meta"]["l"] == "64");
  CHECK(j["meta"]["metric"] == "cosine");
  REQUIRE(j["rows"].size() == 2);
  CHECK(j["rows"][0]["phase"] == "secip/n=512");
  CHECK(j["rows"][0]["party"] == 0);
  CHECK(j["rows"][0]["bytes"] == 48);
  CHECK(j["rows"][0]["rounds"] == 1);
  CHECK(j["rows"][0]["ms"] == Approx(0.125));
  CHECK(j["rows"][0]["ms_stddev"] == Approx(0.01));
  CHECK(j["rows"][1]["party"] == 1);

  // shape must stay within what the published schema allows; ctest runs from
  // the build tree, hand runs from the repo root
  std::string schema_path = "schemas/bench_report.schema.json";
  if (!std::filesystem::exists(schema_path)) schema_path = "../" + schema_path;
  nlohmann::json schema = nlohmann::json::parse(slurp_text(schema_path));
  auto allowed_row = schema["properties"]["rows"]["items"]["properties"];
  for (const auto& row : j["rows"])
    for (auto it = row.begin(); it != row.end(); ++it) REQUIRE(allowed_row.contains(it.key()));
  for (auto it = j.begin(); it != j.end(); ++it) REQUIRE(schema["properties"].contains(it.key()));
  for (const auto& req : schema["required"]) REQUIRE(j.contains(req.get<std::string>()));
  for (const auto& req : schema["properties"]["rows"]["items"]["required"])
    for (const auto& row : j["rows"]) REQUIRE(row.contains(req.get<std::string>()));
}

TEST_CASE("derived paths and dispersion helpers") {
  Config c;
  c.out_dir = "runX";
  CHECK(tape_path(c, 0) == "runX/tape.p0.bin");
  CHECK(tape_path(c, 1) == "runX/tape.p1.bin");
  CHECK(enroll_path(c, 1) == "runX/enroll.p1.bin");
  CHECK(auth_path(c, 0) == "runX/auth.p0.bin");
  CHECK(db_state_path(c, 1) == "runX/db.p1.bin");
  CHECK(report_csv_path(c) == "runX/report.csv");
  CHECK(report_json_path(c) == "runX/report.json");
  CHECK(bench_csv_path(c) == "runX/bench.csv");
  CHECK(bench_json_path(c) == "runX/bench.json");

  CHECK(mean_of({1.0, 2.0, 3.0}) == Approx(2.0));
  CHECK(stddev_of({2.0, 2.0, 2.0}) == Approx(0.0));
  CHECK(stddev_of({1.0, 3.0}) == Approx(std::sqrt(2.0)));
  CHECK(stddev_of({5.0}) == Approx(0.0));
}
