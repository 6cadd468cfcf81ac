#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "flame/cli.hpp"

// Precedence: built-in defaults, then the config file, then explicit flags.
// The file is loaded before CLI11 sees argv so flag defaults echo its values.
static flame::Config preload_config(int argc, char** argv) {
  for (int i = 1; i < argc; i++) {
    std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return flame::load_config(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) return flame::load_config(a.substr(9));
  }
  return {};
}

int main(int argc, char** argv) {
  flame::Config cfg;
  try {
    cfg = preload_config(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  CLI::App app{"two-server biometric authentication over masked shares"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--l", cfg.l, "value bits")->check(CLI::Range(1, 64));
  app.add_option("--s", cfg.s, "statistical security bits")->check(CLI::Range(1, 64));
  app.add_option("--n", cfg.n, "feature dimensions");
  app.add_option("--m", cfg.m, "batch-initialized database entries");
  app.add_option("--enrolls", cfg.enrolls, "single-entry enrolls after the batch");
  app.add_option("--sessions", cfg.sessions, "sessions provisioned on the tape");
  std::string metric_s = cfg.metric == flame::Metric::EUCLIDEAN ? "euclidean" : "cosine";
  app.add_option("--metric", metric_s, "similarity metric")
      ->check(CLI::IsMember({"cosine", "euclidean"}));
  std::string mode_s = cfg.mode == flame::AuthMode::THRESHOLD ? "threshold" : "top1";
  app.add_option("--mode", mode_s, "authentication mode")
      ->check(CLI::IsMember({"top1", "threshold"}));
  app.add_option("--tau", cfg.tau, "threshold (threshold mode only)");
  app.add_option("--scale-bits", cfg.scale_bits, "fixed-point fraction bits");
  app.add_option("--seed", cfg.seed, "deterministic seed string");
  app.add_option("--out", cfg.out_dir, "artifact directory");
  app.add_option("--p0-host", cfg.p0_host, "server 0 address");
  app.add_option("--p0-port", cfg.p0_port, "server 0 listen port");
  app.add_option("--verifier-host", cfg.verifier_host, "verifier address, or none");
  app.add_option("--verifier-port", cfg.verifier_port, "verifier listen port");
  app.add_option("--query-index", cfg.query_index, "enrolled template behind the query");
  app.add_option("--claim-index", cfg.claim_index, "claimed identity index");
  app.add_flag("--fresh-query", cfg.fresh_query, "query matches no enrolled template");
  app.add_option("--trials", cfg.trials, "benchmark trials per point");
  app.add_option("--resume-sessions", cfg.resume_sessions, "sessions consumed before a resume");

  CLI::App* sc_dealer = app.add_subcommand("dealer", "build and write both correlation tapes");
  sc_dealer->add_flag("--audit", cfg.audit, "re-read and cross-check the written tapes");
  CLI::App* sc_server = app.add_subcommand("server", "run one authentication server");
  int party = 0;
  sc_server->add_option("--party", party, "server index")->required()->check(CLI::Range(0, 1));
  std::string fault;
  sc_server->add_option("--fault", fault,
                        "inject target:index:error with target open|y0|z|cmp|triple");
  sc_server->add_flag("--resume", cfg.resume, "reload the persisted database");
  CLI::App* sc_client = app.add_subcommand("client", "prepare share files for the servers");
  std::string action;
  sc_client->add_option("--action", action, "enroll or auth")
      ->required()
      ->check(CLI::IsMember({"enroll", "auth"}));
  CLI::App* sc_verify = app.add_subcommand("verify", "join both results and decide");
  CLI::App* sc_bench = app.add_subcommand("bench", "micro and end-to-end benchmarks");
  std::string suite = "all";
  sc_bench->add_option("--suite", suite, "secip, cmp, e2e, or all")
      ->check(CLI::IsMember({"secip", "cmp", "e2e", "all"}));

  for (CLI::App* sc : {sc_dealer, sc_server, sc_client, sc_verify, sc_bench}) sc->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    cfg.metric = flame::parse_metric(metric_s);
    cfg.mode = flame::parse_mode(mode_s);
    if (sc_dealer->parsed()) return flame::cmd_dealer(cfg);
    if (sc_server->parsed()) return flame::cmd_server(cfg, party, fault);
    if (sc_client->parsed())
      return action == "enroll" ? flame::cmd_client_enroll(cfg) : flame::cmd_client_auth(cfg);
    if (sc_verify->parsed()) return flame::cmd_verify(cfg);
    if (sc_bench->parsed()) return flame::cmd_bench(cfg, suite);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
