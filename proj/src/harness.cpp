#include "guard/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "guard/errors.hpp"
#include "guard/overlay.hpp"

namespace guard {
namespace {

constexpr std::uint16_t kNodePortBase = 1000;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::uint64_t parse_u64_field(std::string_view v, const std::string& key) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw Error(Errc::ConfigError, "bad number for " + key + ": " + std::string(v));
  }
  return out;
}

int parse_positive_int(std::string_view v, const std::string& key, std::uint64_t cap) {
  const std::uint64_t n = parse_u64_field(v, key);
  if (n == 0 || n > cap) {
    throw Error(Errc::ConfigError, key + " out of range: " + std::string(v));
  }
  return static_cast<int>(n);
}

double parse_fraction(std::string_view v, const std::string& key) {
  // from_chars for double is spotty across libstdc++ versions; strtod via a
  // bounded copy keeps this dependency-free.
  const std::string tmp(v);
  char* end = nullptr;
  const double d = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || !(d >= 0.0 && d <= 1.0)) {
    throw Error(Errc::ConfigError, key + " must be a fraction in [0,1]: " + tmp);
  }
  return d;
}

MasterSecret harness_master(std::uint64_t seed) {
  RngStream r(seed, "ttp-master");
  return MasterSecret::from_seed(r.bytes(48));
}

PermutationKey harness_perm(std::uint64_t seed, int m) {
  RngStream r(seed, "ttp-perm");
  return PermutationKey{r.bytes(32), m};
}

/// Upper bound on the virtual time a healthy run may take; beyond it the
/// phase machine is declared stalled. Dominated by per-pair search timeouts
/// when adversaries eat queries.
std::uint64_t phase_budget_us(const SimConfig& c) {
  const std::uint64_t setup = 30'000'000ull + 10'000'000ull * c.node_count;
  const std::uint64_t wait_max =
      1'000'000ull * static_cast<std::uint64_t>(c.wait_time_max_s) / c.time_scale;
  const std::uint64_t per_pair = wait_max + 3'000'000ull;
  return setup + per_pair * static_cast<std::uint64_t>(c.message_count) +
         5'000'000ull * c.node_count;
}

std::string fmt1(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << v;
  return os.str();
}

}  // namespace

int SimConfig::effective_m() const {
  if (m > 0) return m;
  int bits = 0;
  while ((1ull << bits) < static_cast<std::uint64_t>(node_count)) ++bits;
  return std::max(4, bits + 2);
}

SimConfig parse_config(std::string_view text) {
  SimConfig cfg;
  bool have_node_count = false;
  bool have_seed = false;
  std::set<std::string> seen;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::ConfigError, "expected key=value: " + std::string(line));
    }
    const std::string key{trim(line.substr(0, eq))};
    const std::string_view val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty()) {
      throw Error(Errc::ConfigError, "expected key=value: " + std::string(line));
    }

    if (key.rfind("adv.", 0) == 0) {
      AdversarySpec spec;
      spec.node = static_cast<int>(parse_u64_field(key.substr(4), key));
      const std::size_t colon = val.find(':');
      if (colon == std::string_view::npos) {
        throw Error(Errc::ConfigError, key + " must be <behavior>:<trigger>");
      }
      spec.behavior = adversary_behavior_from(trim(val.substr(0, colon)));
      spec.trigger = parse_fraction(trim(val.substr(colon + 1)), key);
      cfg.adversaries.push_back(spec);
      continue;
    }

    if (!seen.insert(key).second) {
      throw Error(Errc::ConfigError, "duplicate key: " + key);
    }

    if (key == "node_count") {
      cfg.node_count = parse_positive_int(val, key, 60000);
      have_node_count = true;
    } else if (key == "message_count") {
      cfg.message_count = parse_positive_int(val, key, 1u << 24);
    } else if (key == "wait_time_max_s") {
      cfg.wait_time_max_s = parse_positive_int(val, key, 86400);
    } else if (key == "message_length") {
      cfg.message_length = parse_positive_int(val, key, 1u << 20);
    } else if (key == "controller_host") {
      cfg.controller.host = std::string(val);
    } else if (key == "controller_port") {
      cfg.controller.port = static_cast<std::uint16_t>(parse_positive_int(val, key, 65535));
    } else if (key == "seed") {
      cfg.seed = parse_u64_field(val, key);
      have_seed = true;
    } else if (key == "m") {
      cfg.m = parse_positive_int(val, key, 64);
    } else if (key == "latency_base_us") {
      cfg.latency_base_us = parse_positive_int(val, key, 60'000'000);
    } else if (key == "latency_jitter_us") {
      cfg.latency_jitter_us = parse_u64_field(val, key);
      if (cfg.latency_jitter_us > 60'000'000) {
        throw Error(Errc::ConfigError, key + " out of range: " + std::string(val));
      }
    } else if (key == "time_scale") {
      cfg.time_scale = parse_positive_int(val, key, 1u << 30);
    } else {
      throw Error(Errc::ConfigError, "unknown key: " + key);
    }
  }

  if (!have_node_count) throw Error(Errc::ConfigError, "node_count is required");
  if (!have_seed) throw Error(Errc::ConfigError, "seed is required");

  std::set<int> adv_nodes;
  for (const AdversarySpec& a : cfg.adversaries) {
    if (a.node < 0 || a.node >= cfg.node_count) {
      throw Error(Errc::ConfigError,
                  "adv." + std::to_string(a.node) + " is not a node index");
    }
    adv_nodes.insert(a.node);
  }
  if (!adv_nodes.empty() && static_cast<int>(adv_nodes.size()) >= cfg.node_count) {
    throw Error(Errc::ConfigError, "adversaries must leave at least one honest node");
  }
  return cfg;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ConfigError, "cannot read config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

NodeAgent::NodeAgent(Network& net, const SimConfig& cfg, int index, const Address& ttp)
    : net_(net),
      cfg_(cfg),
      index_(index),
      node_(net, Address{"node", static_cast<std::uint16_t>(kNodePortBase + index)}, ttp,
            to_bytes("phys-" + std::to_string(index)), cfg.seed),
      ctrl_(net.bind(Address{"nodectl", static_cast<std::uint16_t>(kNodePortBase + index)})),
      wl_rng_(cfg.seed, "workload:" + std::to_string(index)) {
  ctrl_.on_message([this](const Envelope& e) { handle(e); });
}

void NodeAgent::handle(const Envelope& env) {
  switch (static_cast<CtrlMsg>(env.kind)) {
    case CtrlMsg::INIT_START:
      handle_init(env);
      return;
    case CtrlMsg::EXPERIMENT_REQUEST:
      start_workload(env);
      return;
    case CtrlMsg::LOG_UPLOAD: {
      std::string text;
      for (const LogRecord& r : node_.log()) {
        text += r.to_csv();
        text += '\n';
      }
      ctrl_.reply(env, static_cast<std::uint8_t>(CtrlMsg::LOG_UPLOAD), to_bytes(text));
      return;
    }
    default:
      return;  // not ours; drop
  }
}

void NodeAgent::handle_init(const Envelope& env) {
  ByteReader r(env.body);
  const std::uint8_t stage = r.u8();
  ByteWriter w;
  if (stage == 0) {
    std::optional<Address> introducer;
    if (r.u8() != 0) {
      Address a;
      a.host = r.str();
      a.port = r.u16();
      introducer = a;
    }
    try {
      node_.register_with_ttp();
      node_.join(introducer);
      w.u8(1);
      w.u64(node_.id());
    } catch (const std::exception& e) {
      w = ByteWriter{};
      w.u8(0);
      w.str(e.what());
    }
    ctrl_.send(cfg_.controller, static_cast<std::uint8_t>(CtrlMsg::REGISTER), w.peek());
    return;
  }
  try {
    node_.init_guards();
    w.u8(1);
  } catch (const std::exception& e) {
    w = ByteWriter{};
    w.u8(0);
    w.str(e.what());
  }
  ctrl_.send(cfg_.controller, static_cast<std::uint8_t>(CtrlMsg::INIT_DONE), w.peek());
}

void NodeAgent::start_workload(const Envelope& env) {
  ByteReader r(env.body);
  const std::uint32_t count = r.u32();
  roster_.clear();
  for (std::uint32_t i = 0; i < count; ++i) roster_.push_back(r.u64());
  remaining_ = cfg_.message_count;
  schedule_next();
}

void NodeAgent::schedule_next() {
  const std::uint64_t wait_s = wl_rng_.uniform(1, cfg_.wait_time_max_s);
  const std::uint64_t delay_us = wait_s * 1'000'000ull / cfg_.time_scale;
  net_.schedule(delay_us, [this] { run_pair(); });
}

void NodeAgent::run_pair() {
  const NumericalId target = roster_[wl_rng_.uniform(0, roster_.size() - 1)];
  node_.plain_search(target, cfg_.message_length);
  node_.auth_search(target, cfg_.message_length);  // rejections land in the log
  if (--remaining_ > 0) {
    schedule_next();
    return;
  }
  ctrl_.send(cfg_.controller, static_cast<std::uint8_t>(CtrlMsg::WORKLOAD_DONE), {});
}

ControllerActor::ControllerActor(Network& net, const SimConfig& cfg,
                                 std::vector<std::unique_ptr<NodeAgent>>& agents)
    : net_(net), cfg_(cfg), agents_(agents), ep_(net.bind(cfg.controller)) {
  ep_.on_message([this](const Envelope& e) { handle(e); });
}

const char* ControllerActor::phase_name() const {
  switch (phase_) {
    case 0:
      return "registration";
    case 1:
      return "guard initialization";
    case 2:
      return "workload";
    default:
      return "log collection";
  }
}

void ControllerActor::start() { send_init(0, 0); }

void ControllerActor::send_init(std::size_t i, std::uint8_t stage) {
  ByteWriter w;
  w.u8(stage);
  if (stage == 0) {
    if (i == 0) {
      w.u8(0);
    } else {
      const Address& intro = agents_[0]->node().address();
      w.u8(1);
      w.str(intro.host);
      w.u16(intro.port);
    }
  }
  ep_.send(agents_[i]->control_address(), static_cast<std::uint8_t>(CtrlMsg::INIT_START),
           w.peek());
}

void ControllerActor::fail(std::size_t i, const std::string& detail) {
  if (!failure_.empty()) return;  // keep the first failure
  failure_ = "node " + std::to_string(i) + " failed " + phase_name() + ": " + detail;
}

void ControllerActor::handle(const Envelope& env) {
  if (!failure_.empty()) return;
  const std::size_t i = env.src.port >= kNodePortBase
                            ? static_cast<std::size_t>(env.src.port - kNodePortBase)
                            : agents_.size();
  if (i >= agents_.size()) return;

  switch (static_cast<CtrlMsg>(env.kind)) {
    case CtrlMsg::REGISTER: {
      ByteReader r(env.body);
      if (r.u8() == 0) {
        fail(i, r.str());
        return;
      }
      roster_.push_back(r.u64());
      ++acked_;
      if (acked_ < agents_.size()) {
        send_init(acked_, 0);
      } else {
        phase_ = 1;
        acked_ = 0;
        send_init(0, 1);
      }
      return;
    }
    case CtrlMsg::INIT_DONE: {
      ByteReader r(env.body);
      if (r.u8() == 0) {
        fail(i, r.str());
        return;
      }
      ++acked_;
      if (acked_ < agents_.size()) {
        send_init(acked_, 1);
      } else {
        begin_experiment();
      }
      return;
    }
    case CtrlMsg::WORKLOAD_DONE: {
      ++acked_;
      if (acked_ == agents_.size()) {
        phase_ = 3;
        collect_logs();
      }
      return;
    }
    default:
      return;
  }
}

void ControllerActor::begin_experiment() {
  phase_ = 2;
  acked_ = 0;
  for (const AdversarySpec& a : cfg_.adversaries) {
    agents_[static_cast<std::size_t>(a.node)]->node().add_adversary(a.behavior, a.trigger);
  }
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(roster_.size()));
  for (NumericalId id : roster_) w.u64(id);
  for (const auto& agent : agents_) {
    ep_.send(agent->control_address(), static_cast<std::uint8_t>(CtrlMsg::EXPERIMENT_REQUEST),
             w.peek());
  }
}

void ControllerActor::collect_logs() {
  std::vector<std::vector<LogRecord>> per_node;
  per_node.reserve(agents_.size());
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    try {
      const Envelope resp = ep_.request(agents_[i]->control_address(),
                                        static_cast<std::uint8_t>(CtrlMsg::LOG_UPLOAD), {});
      std::vector<LogRecord> rows;
      const std::string text = to_string(resp.body);
      std::size_t pos = 0;
      while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        if (nl > pos) rows.push_back(LogRecord::from_csv({text.data() + pos, nl - pos}));
        pos = nl + 1;
      }
      per_node.push_back(std::move(rows));
    } catch (const std::exception& e) {
      fail(i, e.what());
      return;
    }
  }
  merged_ = merge_logs(std::move(per_node));
  finished_ = true;
}

Simulation::Simulation(const SimConfig& c)
    : cfg(c),
      net(c.seed, LinkParams{c.latency_base_us, c.latency_jitter_us, 0.0}),
      core(harness_master(c.seed), harness_perm(c.seed, c.effective_m()), c.effective_m(),
           c.seed),
      svc(core, net.bind(ttp_addr)),
      controller(net, cfg, agents) {
  for (int i = 0; i < cfg.node_count; ++i) {
    agents.push_back(std::make_unique<NodeAgent>(net, cfg, i, ttp_addr));
  }
}

std::vector<LogRecord> Simulation::run() {
  controller.start();
  net.run_until(
      [this] { return controller.finished() || !controller.failure().empty(); },
      phase_budget_us(cfg));
  if (!controller.failure().empty()) {
    throw Error(Errc::PhaseError, controller.failure());
  }
  if (!controller.finished()) {
    throw Error(Errc::PhaseError, std::string("phase ") + controller.phase_name() + " stalled");
  }
  return controller.take_merged();
}

std::vector<LogRecord> controller_run(const SimConfig& cfg, const std::string& out_csv) {
  Simulation sim(cfg);
  std::vector<LogRecord> rows = sim.run();
  write_log_csv(out_csv, rows);
  return rows;
}

std::vector<LogRecord> merge_logs(std::vector<std::vector<LogRecord>> per_node) {
  std::vector<LogRecord> all;
  std::size_t total = 0;
  for (const auto& v : per_node) total += v.size();
  all.reserve(total);
  for (auto& v : per_node) {
    all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  }
  std::stable_sort(all.begin(), all.end(), [](const LogRecord& a, const LogRecord& b) {
    if (a.ts_us != b.ts_us) return a.ts_us < b.ts_us;
    return a.node_id < b.node_id;
  });
  return all;
}

std::string log_csv_text(const std::vector<LogRecord>& rows) {
  std::string out{kLogCsvHeader};
  out += '\n';
  for (const LogRecord& r : rows) {
    out += r.to_csv();
    out += '\n';
  }
  return out;
}

void write_log_csv(const std::string& path, const std::vector<LogRecord>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::ConfigError, "cannot write csv: " + path);
  const std::string text = log_csv_text(rows);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(Errc::ConfigError, "cannot write csv: " + path);
}

std::vector<LogRecord> read_log_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ConfigError, "cannot read csv: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::SchemaError, "empty csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kLogCsvHeader) throw Error(Errc::SchemaError, "unexpected csv header");
  std::vector<LogRecord> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(LogRecord::from_csv(line));
  }
  return rows;
}

MetricsSummary compute_metrics(const std::vector<LogRecord>& rows) {
  MetricsSummary s;
  double plain_lat = 0, plain_bytes = 0, plain_hops = 0, plain_compute = 0;
  double auth_lat = 0, auth_bytes = 0, auth_hops = 0, auth_compute = 0;
  for (const LogRecord& r : rows) {
    ModeMetrics* mm = nullptr;
    double* lat = nullptr;
    double* bytes = nullptr;
    double* hops = nullptr;
    double* compute = nullptr;
    if (r.mode == "PLAIN") {
      mm = &s.plain;
      lat = &plain_lat;
      bytes = &plain_bytes;
      hops = &plain_hops;
      compute = &plain_compute;
    } else if (r.mode == "AUTH") {
      mm = &s.auth;
      lat = &auth_lat;
      bytes = &auth_bytes;
      hops = &auth_hops;
      compute = &auth_compute;
    } else {
      continue;
    }
    *compute += static_cast<double>(r.compute_us);
    if (r.event != LogEvent::SEARCH_DONE) continue;
    ++mm->searches;
    *lat += static_cast<double>(r.latency_us);
    *bytes += static_cast<double>(r.msg_bytes);
    *hops += r.hop_count;
    ++mm->hop_histogram[r.hop_count];
    if (r.detail.rfind("OK", 0) == 0) {
      ++mm->accepted;
    } else if (r.detail.rfind("REJECT:", 0) == 0) {
      ++mm->rejected;
      std::string reason = r.detail.substr(7);
      if (const std::size_t at = reason.find('@'); at != std::string::npos) {
        reason.resize(at);
      }
      ++mm->reject_reasons[reason];
    } else {
      ++mm->failed;
    }
  }
  const auto finish = [](ModeMetrics& mm, double lat, double bytes, double hops,
                         double compute) {
    if (mm.searches == 0) return;
    const double n = static_cast<double>(mm.searches);
    mm.avg_latency_us = lat / n;
    mm.avg_msg_bytes = bytes / n;
    mm.avg_hops = hops / n;
    mm.avg_compute_us = compute / n;
  };
  finish(s.plain, plain_lat, plain_bytes, plain_hops, plain_compute);
  finish(s.auth, auth_lat, auth_bytes, auth_hops, auth_compute);
  return s;
}

std::string format_metrics(const MetricsSummary& s, const std::string& query) {
  const auto mode_line = [&](const char* name, const ModeMetrics& mm) -> std::string {
    if (query == "latency") {
      return std::string(name) + " searches=" + std::to_string(mm.searches) +
             " avg_latency_us=" + fmt1(mm.avg_latency_us);
    }
    if (query == "compute") {
      return std::string(name) + " searches=" + std::to_string(mm.searches) +
             " avg_compute_us=" + fmt1(mm.avg_compute_us);
    }
    if (query == "msgsize") {
      return std::string(name) + " searches=" + std::to_string(mm.searches) +
             " avg_msg_bytes=" + fmt1(mm.avg_msg_bytes);
    }
    return {};
  };

  std::string out;
  if (query == "latency" || query == "compute" || query == "msgsize") {
    out += mode_line("PLAIN", s.plain);
    out += '\n';
    out += mode_line("AUTH", s.auth);
    out += '\n';
    return out;
  }
  if (query == "hops") {
    const auto dump = [&out](const char* name, const ModeMetrics& mm) {
      out += std::string(name) + " avg_hops=" + fmt1(mm.avg_hops) + '\n';
      for (const auto& [count, n] : mm.hop_histogram) {
        out += std::string(name) + " hops=" + std::to_string(count) +
               " searches=" + std::to_string(n) + '\n';
      }
    };
    dump("PLAIN", s.plain);
    dump("AUTH", s.auth);
    return out;
  }
  if (query == "rejects") {
    const auto dump = [&out](const char* name, const ModeMetrics& mm) {
      out += std::string(name) + " accepted=" + std::to_string(mm.accepted) +
             " rejected=" + std::to_string(mm.rejected) +
             " failed=" + std::to_string(mm.failed) + '\n';
      for (const auto& [reason, n] : mm.reject_reasons) {
        out += std::string(name) + " reason=" + reason + " count=" + std::to_string(n) + '\n';
      }
    };
    dump("PLAIN", s.plain);
    dump("AUTH", s.auth);
    return out;
  }
  throw Error(Errc::ConfigError, "unknown query: " + query);
}

CollusionEstimate collusion_mc(int n, int f, std::uint64_t trials, std::uint64_t seed) {
  if (n < 2) throw Error(Errc::ConfigError, "n must be at least 2");
  if (f < 1 || f >= n) throw Error(Errc::ConfigError, "f must satisfy 1 <= f < n");
  if (trials == 0) throw Error(Errc::ConfigError, "trials must be positive");

  int m = 1;
  while ((1ll << m) < n) ++m;
  std::vector<NumericalId> ids = full_space_ids(m);
  ids.resize(static_cast<std::size_t>(n));
  const StaticOverlay ov = StaticOverlay::build(ids, m);
  const std::vector<NumericalId>& sorted = ov.ids_sorted();

  std::vector<std::pair<NumericalId, NameId>> pairs;
  std::map<NumericalId, int> index_of;
  for (int i = 0; i < n; ++i) {
    pairs.emplace_back(sorted[static_cast<std::size_t>(i)],
                       ov.name_of(sorted[static_cast<std::size_t>(i)]));
    index_of[sorted[static_cast<std::size_t>(i)]] = i;
  }

  const NumericalId subject = sorted.front();
  const NameId& sname = ov.name_of(subject);
  const LookupTable& table = ov.table_of(subject);
  const NameId lname = table.get(0, Side::Left)->name_id;
  const NameId rname = table.get(0, Side::Right)->name_id;

  RngStream rng(seed, "collusion-mc");
  CollusionEstimate est;
  est.n = n;
  est.f = f;
  est.trials = trials;

  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<char> adv(static_cast<std::size_t>(n), 0);

  for (std::uint64_t t = 0; t < trials; ++t) {
    const PermutationKey pk{rng.bytes(32), m};
    const GuardNameIds g = compute_guard_name_ids(sname, lname, rname, pk);
    const int g0 = index_of[oracle_name_answer(pairs, g.main)];
    const int g1 = index_of[oracle_name_answer(pairs, g.side_left)];
    const int g2 = index_of[oracle_name_answer(pairs, g.side_right)];
    const int distinct = 1 + (g1 != g0 ? 1 : 0) + (g2 != g0 && g2 != g1 ? 1 : 0);
    ++est.distinct_guard_trials[static_cast<std::size_t>(distinct)];

    std::fill(adv.begin(), adv.end(), 0);
    for (int k = 0; k < f; ++k) {
      const std::uint64_t j = rng.uniform(static_cast<std::uint64_t>(k),
                                          static_cast<std::uint64_t>(n - 1));
      std::swap(idx[static_cast<std::size_t>(k)], idx[j]);
      adv[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = 1;
    }
    if (adv[static_cast<std::size_t>(g0)] && adv[static_cast<std::size_t>(g1)] &&
        adv[static_cast<std::size_t>(g2)]) {
      ++est.hits;
    }
  }

  est.estimate = static_cast<double>(est.hits) / static_cast<double>(trials);
  est.exact = f >= 3 ? static_cast<double>(f) * (f - 1) * (f - 2) /
                           (static_cast<double>(n) * (n - 1) * (n - 2))
                     : 0.0;
  est.sigma = std::sqrt(est.exact * (1.0 - est.exact) / static_cast<double>(trials));
  return est;
}

}  // namespace guard
