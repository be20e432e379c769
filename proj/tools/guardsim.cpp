#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "guard/authproof.hpp"
#include "guard/errors.hpp"
#include "guard/harness.hpp"

namespace {

using namespace guard;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ConfigError, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) {
    s.remove_suffix(1);
  }
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

/// <config>.csv next to the config file; a trailing .cfg/.conf/.txt is
/// replaced, anything else gets the suffix appended.
std::string derive_csv_path(const std::string& config_path) {
  for (const char* ext : {".cfg", ".conf", ".txt"}) {
    const std::string e{ext};
    if (config_path.size() > e.size() &&
        config_path.compare(config_path.size() - e.size(), e.size(), e) == 0) {
      return config_path.substr(0, config_path.size() - e.size()) + ".csv";
    }
  }
  return config_path + ".csv";
}

int cmd_run(const std::string& config_path, const std::string& out_path) {
  SimConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  try {
    const std::string out = out_path.empty() ? derive_csv_path(config_path) : out_path;
    const std::vector<LogRecord> rows = controller_run(cfg, out);
    const MetricsSummary s = compute_metrics(rows);
    std::cout << out << '\n';
    std::cerr << "nodes=" << cfg.node_count << " rows=" << rows.size()
              << " plain_searches=" << s.plain.searches
              << " auth_searches=" << s.auth.searches
              << " auth_rejected=" << s.auth.rejected << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return e.code() == Errc::ConfigError ? 2 : e.code() == Errc::PhaseError ? 3 : 1;
  }
}

int cmd_verify(const std::string& chain_path, const std::string& params_path) {
  ProofChain chain;
  PublicParams params;
  try {
    const auto raw = hex_decode(trimmed(slurp(chain_path)));
    if (!raw) throw Error(Errc::EncodingError, "chain file is not hex");
    chain = decode_chain(*raw);
    params = PublicParams::from_text(slurp(params_path));
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  if (chain.empty()) {
    std::cout << "Reject: empty chain\n";
    return 1;
  }
  // Offline re-check: the chain must hold up for the (I, Q, N) it claims,
  // against a fresh ledger.
  const RoutingTranscript& head = chain.front().transcript;
  NonceLedger ledger;
  const Verdict v = verify_proof_chain(chain, params, head.I, head.Q, head.N, ledger);
  if (v.accepted) {
    std::cout << "Accept\n";
    return 0;
  }
  std::cout << "Reject: " << reject_reason_name(v.reason) << "@" << v.index << '\n';
  return 1;
}

int cmd_metrics(const std::string& csv_path, const std::string& query) {
  try {
    const MetricsSummary s = compute_metrics(read_log_csv(csv_path));
    std::cout << format_metrics(s, query);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
}

int cmd_collusion(int n, int f, std::uint64_t trials, std::uint64_t seed) {
  try {
    const CollusionEstimate est = collusion_mc(n, f, trials, seed);
    std::cout << "n=" << est.n << " f=" << est.f << " trials=" << est.trials
              << " hits=" << est.hits << '\n'
              << "estimate=" << est.estimate << " exact=" << est.exact
              << " sigma=" << est.sigma << '\n'
              << "distinct_guards 1=" << est.distinct_guard_trials[1]
              << " 2=" << est.distinct_guard_trials[2]
              << " 3=" << est.distinct_guard_trials[3] << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"guard overlay simulator and chain tools"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  CLI::App* run = app.add_subcommand("run", "run a simulated scenario from a config file");
  run->add_option("--config", config_path, "key=value scenario file")->required();
  run->add_option("--out", out_path, "merged log csv path (default: next to the config)");

  std::string chain_path;
  std::string params_path;
  CLI::App* verify = app.add_subcommand("verify", "re-verify a stored proof chain offline");
  verify->add_option("--chain", chain_path, "hex-encoded proof chain file")->required();
  verify->add_option("--params", params_path, "public parameter file")->required();

  std::string csv_path;
  std::string query;
  CLI::App* metrics = app.add_subcommand("metrics", "summarize a merged run log");
  metrics->add_option("--csv", csv_path, "merged log csv")->required();
  metrics->add_option("--query", query, "latency | compute | msgsize | hops | rejects")
      ->required();

  int n = 0;
  int f = 0;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;
  CLI::App* collusion =
      app.add_subcommand("collusion", "estimate full guard capture probability");
  collusion->add_option("--n", n, "overlay size")->required();
  collusion->add_option("--f", f, "adversary count")->required();
  collusion->add_option("--trials", trials, "monte carlo trials")->required();
  collusion->add_option("--seed", seed, "rng seed")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return cmd_run(config_path, out_path);
  if (verify->parsed()) return cmd_verify(chain_path, params_path);
  if (metrics->parsed()) return cmd_metrics(csv_path, query);
  return cmd_collusion(n, f, trials, seed);
}
