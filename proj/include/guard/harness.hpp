#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "guard/logrecord.hpp"
#include "guard/node.hpp"
#include "guard/ttp.hpp"

namespace guard {

struct AdversarySpec {
  int node = 0;  // agent index, not numerical id
  AdversaryBehavior behavior = AdversaryBehavior::Drop;
  double trigger = 1.0;
};

/// Scenario parameters for one simulated run. Parsed from flat key=value
/// text; `seed` and `node_count` are mandatory, everything else has the
/// defaults below.
struct SimConfig {
  int node_count = 0;
  int message_count = 1000;
  int wait_time_max_s = 5;
  int message_length = 300;
  Address controller{"controller", 1};
  std::uint64_t seed = 0;
  int m = 0;  // 0: derived from node_count
  std::uint64_t latency_base_us = 1000;
  std::uint64_t latency_jitter_us = 0;
  /// Configured wait seconds are divided by this before they hit the virtual
  /// clock. The default turns each second into a millisecond, so the stock
  /// thousand-message run finishes in simulated minutes, not days.
  std::uint64_t time_scale = 1000;
  std::vector<AdversarySpec> adversaries;

  int effective_m() const;
};

/// Parses `key=value` lines ('#' comments, blank lines ignored). Unknown or
/// duplicate keys, malformed numbers, missing node_count or seed, and
/// out-of-range values all raise ConfigError naming the key. Adversaries are
/// `adv.<index>=<behavior>:<trigger>` lines; one node may carry several.
SimConfig parse_config(std::string_view text);
SimConfig load_config(const std::string& path);

/// Controller-plane wire kinds, disjoint from TtpMsg and NodeMsg.
enum class CtrlMsg : std::uint8_t {
  REGISTER = 32,            // node -> controller: registration + join finished
  INIT_START = 33,          // controller -> node: run the named setup stage
  INIT_DONE = 34,           // node -> controller: guard setup finished
  EXPERIMENT_REQUEST = 35,  // controller -> node: roster broadcast, start workload
  WORKLOAD_DONE = 36,       // node -> controller: all pairs issued
  LOG_UPLOAD = 37,          // controller <-> node: collect the node's rows
};

/// Wraps one Node with a control endpoint and the timer-driven workload:
/// message_count iterations of (pick uniform target, PLAIN search, AUTH
/// search of the same target, wait uniform(1, wait_time_max_s) scaled).
class NodeAgent {
 public:
  NodeAgent(Network& net, const SimConfig& cfg, int index, const Address& ttp);
  NodeAgent(const NodeAgent&) = delete;
  NodeAgent& operator=(const NodeAgent&) = delete;

  Node& node() { return node_; }
  const Node& node() const { return node_; }
  int index() const { return index_; }
  const Address& control_address() const { return ctrl_.address(); }

 private:
  void handle(const Envelope& env);
  void handle_init(const Envelope& env);
  void start_workload(const Envelope& env);
  void run_pair();
  void schedule_next();

  Network& net_;
  const SimConfig& cfg_;
  int index_;
  Node node_;
  Endpoint& ctrl_;
  RngStream wl_rng_;
  std::vector<NumericalId> roster_;
  int remaining_ = 0;
};

/// Drives the run: serialized registration and joins, guard setup per node,
/// adversary injection, the experiment broadcast, then log collection. All
/// node-facing transitions ride the six CtrlMsg kinds; nothing polls the
/// clock. Any stage failure is latched verbatim for the caller to raise.
class ControllerActor {
 public:
  ControllerActor(Network& net, const SimConfig& cfg,
                  std::vector<std::unique_ptr<NodeAgent>>& agents);
  ControllerActor(const ControllerActor&) = delete;
  ControllerActor& operator=(const ControllerActor&) = delete;

  void start();
  bool finished() const { return finished_; }
  /// Empty while healthy; otherwise "node <i> failed <phase>: <detail>".
  const std::string& failure() const { return failure_; }
  const char* phase_name() const;
  std::vector<LogRecord> take_merged() { return std::move(merged_); }

 private:
  void handle(const Envelope& env);
  void send_init(std::size_t i, std::uint8_t stage);
  void begin_experiment();
  void collect_logs();
  void fail(std::size_t i, const std::string& detail);

  Network& net_;
  const SimConfig& cfg_;
  std::vector<std::unique_ptr<NodeAgent>>& agents_;
  Endpoint& ep_;
  int phase_ = 0;  // 0 registration, 1 guard init, 2 workload, 3 log collection
  std::size_t acked_ = 0;
  std::vector<NumericalId> roster_;
  bool finished_ = false;
  std::string failure_;
  std::vector<LogRecord> merged_;
};

/// One fully wired scenario: TTP, agents and controller on a single
/// deterministic network. Exposed so tests can reach into a run between
/// phases; controller_run is the plain front door.
struct Simulation {
  explicit Simulation(const SimConfig& cfg);

  /// Kicks the controller, pumps to completion and returns the merged rows
  /// sorted by (ts_us, node_id). PhaseError when any node fails its phase or
  /// the run stalls.
  std::vector<LogRecord> run();

  SimConfig cfg;
  Network net;
  Address ttp_addr{"ttp", 1};
  TtpCore core;
  TtpService svc;
  std::vector<std::unique_ptr<NodeAgent>> agents;
  ControllerActor controller;
};

/// Runs the scenario and writes the merged CSV to out_csv. The file contents
/// are a pure function of the config, byte for byte.
std::vector<LogRecord> controller_run(const SimConfig& cfg, const std::string& out_csv);

/// Stable-sorts every node's rows into one stream ordered by (ts_us,
/// node_id); per-node order is preserved for equal keys.
std::vector<LogRecord> merge_logs(std::vector<std::vector<LogRecord>> per_node);

std::string log_csv_text(const std::vector<LogRecord>& rows);
void write_log_csv(const std::string& path, const std::vector<LogRecord>& rows);
/// SchemaError unless the header line and every row match the log schema.
std::vector<LogRecord> read_log_csv(const std::string& path);

struct ModeMetrics {
  std::uint64_t searches = 0;
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
  std::uint64_t failed = 0;
  double avg_latency_us = 0;
  double avg_msg_bytes = 0;
  double avg_hops = 0;
  /// Signing, cosigning and verification micro-costs attributed to the mode,
  /// averaged per search.
  double avg_compute_us = 0;
  std::map<int, std::uint64_t> hop_histogram;
  std::map<std::string, std::uint64_t> reject_reasons;
};

struct MetricsSummary {
  ModeMetrics plain;
  ModeMetrics auth;
};

MetricsSummary compute_metrics(const std::vector<LogRecord>& rows);
/// query is one of latency, compute, msgsize, hops, rejects; anything else
/// raises ConfigError.
std::string format_metrics(const MetricsSummary& s, const std::string& query);

/// Monte Carlo estimate of full guard capture: the fraction of uniform
/// f-subsets of n nodes that contain all three guard owners of a fixed
/// subject, under a fresh permutation key per trial. `exact` is the
/// without-replacement product f(f-1)(f-2) / n(n-1)(n-2), the closed form
/// when the three owners are distinct; distinct_guard_trials records how
/// often resolution actually produced k distinct owners.
struct CollusionEstimate {
  int n = 0;
  int f = 0;
  std::uint64_t trials = 0;
  std::uint64_t hits = 0;
  double estimate = 0;
  double exact = 0;
  double sigma = 0;  // std-dev of the estimator at p = exact
  std::array<std::uint64_t, 4> distinct_guard_trials{};  // index k = 1..3
};

CollusionEstimate collusion_mc(int n, int f, std::uint64_t trials, std::uint64_t seed);

}  // namespace guard
