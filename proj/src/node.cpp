#include "guard/node.hpp"

#include <algorithm>
#include <set>

#include "guard/errors.hpp"

namespace guard {

namespace {

// Routing stops once a query has collected this many hops; misrouting
// adversaries can bounce a query between honest nodes, and the bound turns
// that loop into an explicit failure instead of a stuck simulation.
constexpr std::size_t kTtl = 96;
constexpr std::uint64_t kSearchTimeoutUs = 1'000'000;
constexpr std::uint64_t kCosignTimeoutUs = 200'000;
// Guard provisioning nests an authentication handshake plus the share
// transfer behind one request, several round trips deep.
constexpr std::uint64_t kProvisionTimeoutUs = 200'000;
// Walk caps for list enumeration; generous multiples of any overlay the
// simulator runs, purely a corruption backstop.
constexpr std::size_t kWalkCap = 1 << 16;

// Virtual CPU costs charged to the compute_us log column. Measured once on
// the reference build (release mode, libsodium backend) and frozen so runs
// are comparable across machines; they never advance the network clock.
constexpr std::uint64_t kCostSignUs = 19;
constexpr std::uint64_t kCostVerifyProofUs = 171;
constexpr std::uint64_t kCostPartialUs = 25;
constexpr std::uint64_t kCostCombineUs = 9;
constexpr std::uint64_t kCostRouteUs = 1;

const char* kBehaviorNames[] = {"drop", "misdirect", "manipulate", "falsify"};

void write_entry(ByteWriter& w, const NeighborEntry& e) { e.write(w); }

void write_opt_entry(ByteWriter& w, const std::optional<NeighborEntry>& e) {
  w.u8(e ? 1 : 0);
  if (e) write_entry(w, *e);
}

std::optional<NeighborEntry> read_opt_entry(ByteReader& r) {
  if (r.u8() == 0) return std::nullopt;
  return NeighborEntry::from_reader(r);
}

std::uint64_t frame_size(std::span<const std::uint8_t> body) {
  return kEnvelopeHeaderBytes + body.size();
}

std::string reject_detail(const Verdict& v) {
  return std::string(reject_reason_name(v.reason)) + "@" + std::to_string(v.index);
}

}  // namespace

const char* adversary_behavior_name(AdversaryBehavior b) {
  return kBehaviorNames[static_cast<int>(b)];
}

AdversaryBehavior adversary_behavior_from(std::string_view s) {
  for (int i = 0; i < 4; ++i) {
    if (s == kBehaviorNames[i]) return static_cast<AdversaryBehavior>(i);
  }
  throw Error(Errc::ConfigError, "unknown adversary behavior: " + std::string(s));
}

Node::Node(Network& net, const Address& addr, const Address& ttp, PhysicalIdentity phys,
           std::uint64_t seed)
    : net_(net),
      ep_(net.bind(addr)),
      ttp_addr_(ttp),
      phys_(std::move(phys)),
      rng_(seed, "node:" + addr.to_string()),
      adv_rng_(seed, "adv:" + addr.to_string()) {
  ep_.on_message([this](const Envelope& env) { handle(env); });
}

NeighborEntry Node::self_entry() const {
  return NeighborEntry{grant_.numerical_id, name_, ep_.address()};
}

bool Node::is_guard_for(NumericalId subject) const {
  auto it = wards_.lower_bound({subject, 0});
  return it != wards_.end() && it->first.first == subject;
}

void Node::add_adversary(AdversaryBehavior behavior, double trigger) {
  adversaries_.emplace_back(behavior, trigger);
}

void Node::add_log(LogEvent event, std::uint64_t seq, const std::string& mode,
                   const std::string& nonce_hex, const std::string& q_hex, int hop_count,
                   std::uint64_t latency_us, std::uint64_t msg_bytes, std::uint64_t compute_us,
                   std::string detail) {
  LogRecord rec;
  rec.ts_us = net_.now_us();
  rec.node_id = grant_.numerical_id;
  rec.event = event;
  rec.search_seq = seq;
  rec.mode = mode;
  rec.nonce_hex = nonce_hex;
  rec.q_hex = q_hex;
  rec.hop_count = hop_count;
  rec.latency_us = latency_us;
  rec.msg_bytes = msg_bytes;
  rec.compute_us = compute_us;
  rec.detail = std::move(detail);
  log_.push_back(std::move(rec));
}

// --- registration and overlay membership ---

void Node::register_with_ttp() {
  grant_ = ttpcall::register_peer(ep_, ttp_addr_, phys_, &params_);
  name_ = hash_name_id(grant_.numerical_id, params_.m);
  add_log(LogEvent::REGISTER, 0, "-", "-", hex16(grant_.numerical_id), 0, 0, 0, 0, "registered");
}

void Node::ensure_authenticated() {
  if (authed_) return;
  ttpcall::authenticate(ep_, ttp_addr_, phys_, grant_.signing_key);
  authed_ = true;
}

std::optional<NeighborEntry> Node::neighbor_of(const NeighborEntry& at, int level, Side side) {
  if (at.address == ep_.address()) return table_.get(level, side);
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(level));
  w.u8(static_cast<std::uint8_t>(side));
  const Envelope resp =
      ep_.request(at.address, static_cast<std::uint8_t>(NodeMsg::GET_ENTRY), w.peek());
  ByteReader r(resp.body);
  return read_opt_entry(r);
}

std::optional<NeighborEntry> Node::splice_remote(const Address& owner, int level, Side side,
                                                 const NeighborEntry& e) {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(level));
  w.u8(static_cast<std::uint8_t>(side));
  write_entry(w, e);
  const Envelope resp =
      ep_.request(owner, static_cast<std::uint8_t>(NodeMsg::SPLICE), w.peek());
  ByteReader r(resp.body);
  return read_opt_entry(r);
}

void Node::join(const std::optional<Address>& introducer) {
  if (name_.empty()) {
    throw Error(Errc::JoinError, "join before registration");
  }
  const NeighborEntry me = self_entry();
  if (!introducer) {
    // First node: a one-element ring pointing at itself.
    table_.set(0, Side::Left, me);
    table_.set(0, Side::Right, me);
    add_log(LogEvent::JOIN_DONE, 0, "-", "-", "-", 0, 0, 0, 0, "levels=1");
    return;
  }

  // Ring insertion: the greatest id <= ours (wrapping) is our predecessor.
  SearchOutcome found = run_search(false, grant_.numerical_id, 0, *introducer, false);
  if (!found.ok || !found.result) {
    throw Error(Errc::JoinError, "position search failed: " + found.status);
  }
  const NeighborEntry pred = *found.result;
  std::optional<NeighborEntry> succ = splice_remote(pred.address, 0, Side::Right, me);
  if (!succ) {
    throw Error(Errc::JoinError, "predecessor had no successor slot");
  }
  splice_remote(succ->address, 0, Side::Left, me);
  table_.set(0, Side::Left, pred);
  table_.set(0, Side::Right, *succ);

  // Upper levels: find any member of our level-i group by scanning the
  // level-(i-1) list, then walk the level-i list to our sorted slot. Groups
  // shrink with i; the first empty level ends the table.
  for (int level = 1; level <= params_.m; ++level) {
    const std::optional<NeighborEntry> member = find_level_member(level);
    if (!member) break;
    std::optional<NeighborEntry> left, right;
    NeighborEntry cur = *member;
    if (cur.numerical_id < grant_.numerical_id) {
      left = cur;
      while (auto nxt = neighbor_of(cur, level, Side::Right)) {
        if (nxt->numerical_id > grant_.numerical_id) {
          right = nxt;
          break;
        }
        left = nxt;
        cur = *nxt;
      }
    } else {
      right = cur;
      while (auto nxt = neighbor_of(cur, level, Side::Left)) {
        if (nxt->numerical_id < grant_.numerical_id) {
          left = nxt;
          break;
        }
        right = nxt;
        cur = *nxt;
      }
    }
    if (left) splice_remote(left->address, level, Side::Right, me);
    if (right) splice_remote(right->address, level, Side::Left, me);
    table_.set(level, Side::Left, left);
    table_.set(level, Side::Right, right);
  }
  add_log(LogEvent::JOIN_DONE, 0, "-", "-", "-", 0, 0, 0, 0,
          "levels=" + std::to_string(table_.level_count()));
}

std::optional<NeighborEntry> Node::find_level_member(int level) {
  const int below = level - 1;
  for (Side side : {Side::Left, Side::Right}) {
    std::optional<NeighborEntry> cur = table_.get(below, side);
    std::set<NumericalId> seen;
    while (cur && cur->numerical_id != grant_.numerical_id && !seen.count(cur->numerical_id)) {
      if (common_prefix_len(name_, cur->name_id) >= level) return cur;
      seen.insert(cur->numerical_id);
      cur = neighbor_of(*cur, below, side);
    }
    // A full circle on the ring has already met every candidate.
    if (below == 0 && cur && cur->numerical_id == grant_.numerical_id) break;
  }
  return std::nullopt;
}

std::vector<NeighborEntry> Node::enumerate_level_list(const NeighborEntry& at, int level) {
  std::vector<NeighborEntry> members{at};
  if (level == 0) {
    std::optional<NeighborEntry> cur = neighbor_of(at, 0, Side::Right);
    while (cur && cur->numerical_id != at.numerical_id && members.size() < kWalkCap) {
      members.push_back(*cur);
      cur = neighbor_of(*cur, 0, Side::Right);
    }
    return members;
  }
  for (Side side : {Side::Left, Side::Right}) {
    std::optional<NeighborEntry> cur = neighbor_of(at, level, side);
    while (cur && members.size() < kWalkCap) {
      members.push_back(*cur);
      cur = neighbor_of(*cur, level, side);
    }
  }
  return members;
}

NeighborEntry Node::resolve_name(const NameId& target) {
  // Greedy prefix climb: list everyone on the current best level, hop to a
  // strictly better match when one exists, otherwise the best seen is the
  // answer (ties to the smaller id).
  NeighborEntry cur = self_entry();
  while (true) {
    const int c = common_prefix_len(cur.name_id, target);
    NeighborEntry best = cur;
    int best_cpl = c;
    for (const NeighborEntry& e : enumerate_level_list(cur, c)) {
      const int cpl = common_prefix_len(e.name_id, target);
      if (cpl > best_cpl || (cpl == best_cpl && e.numerical_id < best.numerical_id)) {
        best_cpl = cpl;
        best = e;
      }
    }
    if (best_cpl > c) {
      cur = best;
      continue;
    }
    return best;
  }
}

// --- guard setup ---

TableProof Node::build_table_proof() {
  TableProof proof;
  std::vector<std::string> missing;
  for (int level = 0; level < table_.level_count(); ++level) {
    for (Side side : {Side::Left, Side::Right}) {
      const std::optional<NeighborEntry>& e = table_.get(level, side);
      if (!e) continue;
      const Bytes msg = make_attestation_message(grant_.numerical_id, level, side);
      if (e->numerical_id == grant_.numerical_id) {
        // Singleton ring slots point at ourselves; attest directly.
        proof.add(level, side, sign(grant_.signing_key, msg));
        continue;
      }
      ByteWriter w;
      w.u64(grant_.numerical_id);
      w.u16(static_cast<std::uint16_t>(level));
      w.u8(static_cast<std::uint8_t>(side));
      try {
        const Envelope resp =
            ep_.request(e->address, static_cast<std::uint8_t>(NodeMsg::ATTEST), w.peek());
        proof.add(level, side, Signature::from_bytes(resp.body));
      } catch (const Error&) {
        missing.push_back(std::to_string(level) + side_char(side));
      }
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const std::string& s : missing) {
      if (!list.empty()) list += ", ";
      list += s;
    }
    throw Error(Errc::ProofError, "missing attestations: " + list);
  }
  return proof;
}

void Node::init_guards() {
  ensure_authenticated();
  const TableProof proof = build_table_proof();
  const TableAccept accept =
      ttpcall::submit_table(ep_, ttp_addr_, grant_.numerical_id, table_, proof);
  name_cert_ = accept.name_cert;

  const std::array<NameId, 3> targets = {accept.guards.main, accept.guards.side_left,
                                         accept.guards.side_right};
  for (int k = 0; k < 3; ++k) {
    guards_[k] = resolve_name(targets[k]);
    ByteWriter w;
    w.u64(grant_.numerical_id);
    w.u8(static_cast<std::uint8_t>(k));
    const Envelope resp = ep_.request(guards_[k].address,
                                      static_cast<std::uint8_t>(NodeMsg::WARD_REQ), w.peek(),
                                      kProvisionTimeoutUs);
    ttp_unwrap(resp.body);
  }
  guards_ready_ = true;
  add_log(LogEvent::GUARDS_DONE, 0, "-", "-", "-", 0, 0, 0, 0,
          hex16(guards_[0].numerical_id) + ";" + hex16(guards_[1].numerical_id) + ";" +
              hex16(guards_[2].numerical_id));
}

// --- wire formats ---

Bytes Node::encode_query(const QueryMsg& m) {
  ByteWriter w;
  w.u8(m.mode);
  w.u64(m.seq);
  w.u64(m.initiator_id);
  w.str(m.initiator_addr.host);
  w.u16(m.initiator_addr.port);
  w.u64(m.q);
  w.raw(std::span<const std::uint8_t>(m.n.v.data(), m.n.v.size()));
  w.u32(static_cast<std::uint32_t>(m.hops.size()));
  for (NumericalId h : m.hops) w.u64(h);
  w.u64(m.route_bytes);
  w.blob(m.payload);
  w.blob(encode_chain(m.chain));
  return w.take();
}

Node::QueryMsg Node::decode_query(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  QueryMsg m;
  m.mode = r.u8();
  m.seq = r.u64();
  m.initiator_id = r.u64();
  m.initiator_addr.host = r.str();
  m.initiator_addr.port = r.u16();
  m.q = r.u64();
  const Bytes n = r.raw(16);
  std::copy(n.begin(), n.end(), m.n.v.begin());
  const std::uint32_t hops = r.u32();
  m.hops.reserve(hops);
  for (std::uint32_t i = 0; i < hops; ++i) m.hops.push_back(r.u64());
  m.route_bytes = r.u64();
  m.payload = r.blob();
  m.chain = decode_chain(r.blob());
  return m;
}

Bytes Node::encode_result(const ResultMsg& m) {
  ByteWriter w;
  w.u8(m.mode);
  w.u8(m.status);
  w.u64(m.q);
  w.raw(std::span<const std::uint8_t>(m.n.v.data(), m.n.v.size()));
  write_opt_entry(w, m.result);
  w.u32(static_cast<std::uint32_t>(m.hops.size()));
  for (NumericalId h : m.hops) w.u64(h);
  w.u64(m.route_bytes);
  w.u64(m.payload_len);
  w.blob(encode_chain(m.chain));
  w.str(m.detail);
  return w.take();
}

Node::ResultMsg Node::decode_result(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  ResultMsg m;
  m.mode = r.u8();
  m.status = r.u8();
  m.q = r.u64();
  const Bytes n = r.raw(16);
  std::copy(n.begin(), n.end(), m.n.v.begin());
  m.result = read_opt_entry(r);
  const std::uint32_t hops = r.u32();
  m.hops.reserve(hops);
  for (std::uint32_t i = 0; i < hops; ++i) m.hops.push_back(r.u64());
  m.route_bytes = r.u64();
  m.payload_len = r.u64();
  m.chain = decode_chain(r.blob());
  m.detail = r.str();
  return m;
}

// --- searching ---

SearchOutcome Node::plain_search(NumericalId q, std::size_t payload_len) {
  return run_search(false, q, payload_len, std::nullopt, true);
}

SearchOutcome Node::auth_search(NumericalId q, std::size_t payload_len) {
  if (!guards_ready_) {
    throw Error(Errc::AuthError, "guards not provisioned");
  }
  return run_search(true, q, payload_len, std::nullopt, true);
}

std::variant<RoutingProof, std::string> Node::make_own_proof(const RoutingTranscript& t,
                                                             std::uint64_t& wire_bytes) {
  const std::string text = encode_transcript(t);
  const Signature sig_num = sign(grant_.signing_key, to_bytes(text));

  // All three cosign requests fly at once; guards answer independently.
  std::array<std::uint64_t, 3> corr{};
  for (int k = 0; k < 3; ++k) {
    ByteWriter req;
    req.u64(grant_.numerical_id);
    req.u8(static_cast<std::uint8_t>(k));
    req.str(text);
    corr[k] = ep_.request_async(guards_[k].address, static_cast<std::uint8_t>(NodeMsg::COSIGN),
                                req.peek());
    wire_bytes += frame_size(req.peek());
  }

  std::vector<PartialSignature> parts;
  for (int k = 0; k < 3; ++k) {
    Envelope resp;
    try {
      resp = ep_.await_response(corr[k], kCosignTimeoutUs);
    } catch (const Error& e) {
      return "guard " + hex16(guards_[k].numerical_id) + " unreachable: " + e.what();
    }
    wire_bytes += resp.size_bytes;
    ByteReader r(resp.body);
    if (r.u8() != 0) {
      return "guard " + hex16(guards_[k].numerical_id) + " refused: " + r.str();
    }
    parts.push_back(PartialSignature::from_bytes(r.rest()));
  }

  Signature sig_name;
  try {
    sig_name = combine_partials(parts);
  } catch (const Error& e) {
    return std::string("combine failed: ") + e.what();
  }
  return RoutingProof{t, sig_num, grant_.certificate, sig_name, name_cert_};
}

SearchOutcome Node::run_search(bool auth, NumericalId q, std::size_t payload_len,
                               const std::optional<Address>& entry_router, bool record) {
  const std::uint64_t seq = ++search_seq_;
  const std::string mode = auth ? "AUTH" : "PLAIN";
  const Nonce n = random_nonce(rng_);
  const std::uint64_t start = net_.now_us();
  if (record) {
    add_log(LogEvent::SEARCH_START, seq, mode, n.hex(), hex16(q), 0, 0, 0, 0, "");
  }

  QueryMsg msg;
  msg.mode = auth ? 1 : 0;
  msg.seq = seq;
  msg.initiator_id = grant_.numerical_id;
  msg.initiator_addr = ep_.address();
  msg.q = q;
  msg.n = n;
  msg.payload = rng_.bytes(payload_len);

  SearchOutcome out;
  std::uint64_t own_wire = 0;

  std::optional<std::uint64_t> arrival_us;  // unset: still local, clock is accurate
  auto finish = [&](SearchOutcome o) {
    o.latency_us = arrival_us.value_or(net_.now_us()) - start;
    if (record) {
      if (!o.ok && o.status.rfind("REJECT", 0) == 0) {
        add_log(LogEvent::REJECT, seq, mode, n.hex(), hex16(q),
                static_cast<int>(o.hops.size()), 0, 0, 0, o.status);
      }
      add_log(LogEvent::SEARCH_DONE, seq, mode, n.hex(), hex16(q),
              static_cast<int>(o.hops.size()), o.latency_us, o.msg_bytes, 0, o.status);
    }
    return o;
  };

  if (!entry_router) {
    // We are the first router: decide, and in auth mode open the chain.
    const RoutingDecision decision = local_next_hop(table_, grant_.numerical_id, q);
    msg.hops.push_back(grant_.numerical_id);
    if (auth) {
      const RoutingTranscript t = make_hop_transcript(grant_.numerical_id, std::nullopt,
                                                      decision, grant_.numerical_id, q, n);
      auto made = make_own_proof(t, own_wire);
      if (record) {
        add_log(LogEvent::COSIGN, seq, mode, n.hex(), hex16(q), 1, 0, own_wire,
                kCostSignUs + kCostCombineUs, "own hop");
      }
      if (std::holds_alternative<std::string>(made)) {
        out.status = "FAILED:" + std::get<std::string>(made);
        out.msg_bytes = own_wire;
        return finish(out);
      }
      msg.chain.push_back(std::get<RoutingProof>(made));
    }
    if (decision.kind == RoutingDecision::Kind::Terminate) {
      out.result = self_entry();
      out.hops = msg.hops;
      out.msg_bytes = own_wire;
      out.chain = msg.chain;
      if (auth) {
        VerifyOptions opts;
        opts.cache = &cache_;
        const Verdict v = verify_proof_chain(msg.chain, params_, grant_.numerical_id, q, n,
                                             ledger_, opts);
        if (record) {
          add_log(LogEvent::VERIFY, seq, mode, n.hex(), hex16(q), 1, 0, 0,
                  kCostVerifyProofUs * msg.chain.size(), v.accepted ? "accept" : "reject");
        }
        if (!v.accepted) {
          out.status = "REJECT:" + reject_detail(v);
          return finish(out);
        }
      }
      out.ok = true;
      out.status = "OK";
      return finish(out);
    }
    send_query(decision.next.address, msg);
  } else {
    // Joining from outside the overlay: the introducer takes the first hop.
    send_query(*entry_router, msg);
  }

  pending_ = Pending{};
  pending_.active = true;
  pending_.mode = msg.mode;
  pending_.q = q;
  pending_.n = n;
  const bool answered =
      net_.run_until([this] { return pending_.done; }, kSearchTimeoutUs);
  pending_.active = false;
  if (!answered) {
    out.status = "FAILED:no result before timeout";
    out.hops = msg.hops;
    out.msg_bytes = own_wire;
    return finish(out);
  }

  const ResultMsg& r = pending_.response;
  arrival_us = pending_.completed_at_us;
  out.msg_bytes = own_wire + r.route_bytes + pending_.result_frame_bytes;
  out.chain = r.chain;
  if (r.status == 1) {
    out.status = "FAILED:" + r.detail;
    out.hops = r.hops;
    return finish(out);
  }
  if (r.status == 2) {
    out.status = "REJECT:" + r.detail;
    out.hops = r.hops;
    return finish(out);
  }

  if (!auth) {
    out.ok = true;
    out.status = "OK";
    out.result = r.result;
    out.hops = r.hops;
    return finish(out);
  }

  VerifyOptions opts;
  opts.cache = &cache_;
  const Verdict v =
      verify_proof_chain(r.chain, params_, grant_.numerical_id, q, n, ledger_, opts);
  if (record) {
    add_log(LogEvent::VERIFY, seq, mode, n.hex(), hex16(q),
            static_cast<int>(r.chain.size()), 0, 0, kCostVerifyProofUs * r.chain.size(),
            v.accepted ? "accept" : "reject");
  }
  if (!v.accepted) {
    out.status = "REJECT:" + reject_detail(v);
    out.hops = r.hops;
    return finish(out);
  }
  if (!r.result || r.chain.empty() ||
      r.chain.back().transcript.R != r.result->numerical_id) {
    out.status = "FAILED:result does not match signed chain";
    out.hops = r.hops;
    return finish(out);
  }
  out.ok = true;
  out.status = "OK";
  out.result = r.result;
  out.hops.clear();
  for (const RoutingProof& p : r.chain) out.hops.push_back(p.transcript.R);
  return finish(out);
}

void Node::send_query(const Address& dst, const QueryMsg& msg) {
  ep_.send(dst, static_cast<std::uint8_t>(NodeMsg::QUERY), encode_query(msg),
           msg.payload.size());
}

void Node::send_result(const QueryMsg& msg, std::uint8_t status,
                       const std::optional<NeighborEntry>& result, std::string detail) {
  ResultMsg r;
  r.mode = msg.mode;
  r.status = status;
  r.q = msg.q;
  r.n = msg.n;
  r.result = result;
  r.hops = msg.hops;
  r.route_bytes = msg.route_bytes;
  r.payload_len = msg.payload.size();
  r.chain = msg.chain;
  r.detail = std::move(detail);
  ep_.send(msg.initiator_addr, static_cast<std::uint8_t>(NodeMsg::RESULT), encode_result(r));
}

// --- message handling ---

void Node::handle(const Envelope& env) {
  switch (static_cast<NodeMsg>(env.kind)) {
    case NodeMsg::QUERY:
      handle_query(env);
      return;
    case NodeMsg::RESULT:
      handle_result(env);
      return;
    case NodeMsg::COSIGN:
      handle_cosign(env);
      return;
    case NodeMsg::GET_ENTRY:
      handle_get_entry(env);
      return;
    case NodeMsg::SPLICE:
      handle_splice(env);
      return;
    case NodeMsg::WARD_REQ:
      handle_ward_req(env);
      return;
    case NodeMsg::ATTEST:
      handle_attest(env);
      return;
    default:
      return;  // unknown kinds are dropped
  }
}

void Node::handle_query(const Envelope& env) {
  QueryMsg msg = decode_query(env.body);
  msg.route_bytes += env.size_bytes - env.payload_bytes;
  const bool auth = msg.mode == 1;
  const std::string mode = auth ? "AUTH" : "PLAIN";

  if (msg.hops.size() >= kTtl) {
    send_result(msg, 1, std::nullopt, "hop budget exhausted");
    return;
  }

  if (const auto behavior = adversary_trigger()) {
    adversarial_route(*behavior, std::move(msg));
    return;
  }

  if (auth) {
    if (msg.chain.empty()) {
      add_log(LogEvent::REJECT, msg.seq, mode, msg.n.hex(), hex16(msg.q),
              static_cast<int>(msg.hops.size()), 0, 0, 0, "empty proof chain");
      send_result(msg, 2, std::nullopt, "empty proof chain");
      return;
    }
    const RoutingTranscript& tail = msg.chain.back().transcript;
    if (!tail.T || *tail.T != grant_.numerical_id) {
      add_log(LogEvent::REJECT, msg.seq, mode, msg.n.hex(), hex16(msg.q),
              static_cast<int>(msg.hops.size()), 0, 0, 0, "misdelivered query");
      send_result(msg, 2, std::nullopt, "misdelivered query");
      return;
    }
    VerifyOptions opts;
    opts.relax_tail = true;  // the chain is still growing
    opts.cache = &cache_;
    const Verdict v = verify_proof_chain(msg.chain, params_, msg.initiator_id, msg.q, msg.n,
                                         ledger_, opts);
    add_log(LogEvent::VERIFY, msg.seq, mode, msg.n.hex(), hex16(msg.q),
            static_cast<int>(msg.chain.size()), 0, 0, kCostVerifyProofUs * msg.chain.size(),
            v.accepted ? "accept" : "reject");
    if (!v.accepted) {
      const std::string detail = reject_detail(v);
      add_log(LogEvent::REJECT, msg.seq, mode, msg.n.hex(), hex16(msg.q),
              static_cast<int>(msg.hops.size()), 0, 0, 0, detail);
      send_result(msg, 2, std::nullopt, detail);
      return;
    }
  }
  route_query(std::move(msg));
}

void Node::route_query(QueryMsg msg) {
  const bool auth = msg.mode == 1;
  const std::string mode = auth ? "AUTH" : "PLAIN";
  const RoutingDecision decision = local_next_hop(table_, grant_.numerical_id, msg.q);
  msg.hops.push_back(grant_.numerical_id);
  add_log(LogEvent::HOP, msg.seq, mode, msg.n.hex(), hex16(msg.q),
          static_cast<int>(msg.hops.size()), 0, 0, kCostRouteUs,
          decision.kind == RoutingDecision::Kind::Forward
              ? "forward " + hex16(decision.next.numerical_id)
              : "terminate");

  if (auth) {
    const std::optional<NumericalId> from =
        msg.chain.empty() ? std::nullopt
                          : std::optional<NumericalId>(msg.chain.back().transcript.R);
    const RoutingTranscript t = make_hop_transcript(grant_.numerical_id, from, decision,
                                                    msg.initiator_id, msg.q, msg.n);
    std::uint64_t cosign_wire = 0;
    auto made = make_own_proof(t, cosign_wire);
    msg.route_bytes += cosign_wire;
    add_log(LogEvent::COSIGN, msg.seq, mode, msg.n.hex(), hex16(msg.q),
            static_cast<int>(msg.hops.size()), 0, cosign_wire, kCostSignUs + kCostCombineUs,
            "own hop");
    if (std::holds_alternative<std::string>(made)) {
      send_result(msg, 1, std::nullopt, std::get<std::string>(made));
      return;
    }
    msg.chain.push_back(std::get<RoutingProof>(made));
  }

  if (decision.kind == RoutingDecision::Kind::Terminate) {
    send_result(msg, 0, self_entry(), "");
  } else {
    send_query(decision.next.address, msg);
  }
}

void Node::handle_result(const Envelope& env) {
  if (!pending_.active || pending_.done) return;
  const ResultMsg r = decode_result(env.body);
  if (r.mode != pending_.mode || r.q != pending_.q || !(r.n == pending_.n)) return;
  pending_.response = r;
  pending_.result_frame_bytes = env.size_bytes - env.payload_bytes;
  pending_.completed_at_us = net_.now_us();
  pending_.done = true;
}

void Node::handle_cosign(const Envelope& env) {
  ByteReader r(env.body);
  ByteWriter w;
  try {
    const NumericalId subject = r.u64();
    const int index = r.u8();
    const std::string text = r.str();
    auto it = wards_.find({subject, index});
    if (it == wards_.end()) {
      w.u8(1);
      w.str("not a guard for this subject");
      ep_.reply(env, static_cast<std::uint8_t>(NodeMsg::COSIGN), w.peek());
      return;
    }
    const RoutingTranscript t = decode_transcript(text);
    const auto res = guard_evaluate(it->second, t);
    add_log(LogEvent::COSIGN, 0, "-", t.N.hex(), hex16(t.Q), 0, 0, 0, kCostPartialUs,
            std::holds_alternative<PartialSignature>(res)
                ? "cosigned " + hex16(subject)
                : "refused " + hex16(subject));
    if (const auto* part = std::get_if<PartialSignature>(&res)) {
      w.u8(0);
      w.raw(part->encoded());
    } else {
      w.u8(1);
      w.str(std::get<GuardRefusal>(res).reason);
    }
  } catch (const Error& e) {
    w = ByteWriter();
    w.u8(1);
    w.str(e.what());
  }
  ep_.reply(env, static_cast<std::uint8_t>(NodeMsg::COSIGN), w.peek());
}

void Node::handle_get_entry(const Envelope& env) {
  ByteReader r(env.body);
  const int level = r.u16();
  const Side side = static_cast<Side>(r.u8());
  ByteWriter w;
  write_opt_entry(w, table_.get(level, side));
  ep_.reply(env, static_cast<std::uint8_t>(NodeMsg::GET_ENTRY), w.peek());
}

void Node::handle_splice(const Envelope& env) {
  ByteReader r(env.body);
  const int level = r.u16();
  const Side side = static_cast<Side>(r.u8());
  const NeighborEntry e = NeighborEntry::from_reader(r);
  ByteWriter w;
  write_opt_entry(w, table_.get(level, side));
  table_.set(level, side, e);
  ep_.reply(env, static_cast<std::uint8_t>(NodeMsg::SPLICE), w.peek());
}

void Node::handle_ward_req(const Envelope& env) {
  ByteReader r(env.body);
  try {
    const NumericalId subject = r.u64();
    const int index = r.u8();
    ensure_authenticated();
    wards_[{subject, index}] =
        ttpcall::guard_connect(ep_, ttp_addr_, grant_.numerical_id, subject, index);
    ep_.reply(env, static_cast<std::uint8_t>(NodeMsg::WARD_REQ), ttp_status_ok({}));
  } catch (const Error& e) {
    ep_.reply(env, static_cast<std::uint8_t>(NodeMsg::WARD_REQ), ttp_status_err(e.code()));
  }
}

void Node::handle_attest(const Envelope& env) {
  ByteReader r(env.body);
  const NumericalId owner = r.u64();
  const int level = r.u16();
  const Side side = static_cast<Side>(r.u8());
  const Bytes msg = make_attestation_message(owner, level, side);
  ep_.reply(env, static_cast<std::uint8_t>(NodeMsg::ATTEST),
            sign(grant_.signing_key, msg).encoded());
}

// --- adversarial routing ---

std::optional<AdversaryBehavior> Node::adversary_trigger() {
  for (const auto& [behavior, trigger] : adversaries_) {
    if (adv_rng_.chance(trigger)) return behavior;
  }
  return std::nullopt;
}

void Node::adversarial_route(AdversaryBehavior behavior, QueryMsg msg) {
  const bool auth = msg.mode == 1;
  const std::string mode = auth ? "AUTH" : "PLAIN";

  // A transcript the guards would refuse still needs a name-signature slot;
  // an arbitrary one fails verification, which is exactly the point.
  auto forged_proof = [&](const RoutingTranscript& t) {
    const Bytes m = to_bytes(encode_transcript(t));
    Signature garbage;
    const Bytes rb = adv_rng_.bytes(64);
    std::copy(rb.begin(), rb.begin() + 32, garbage.R.begin());
    std::copy(rb.begin() + 32, rb.end(), garbage.s.begin());
    return RoutingProof{t, sign(grant_.signing_key, m), grant_.certificate, garbage,
                        name_cert_};
  };

  switch (behavior) {
    case AdversaryBehavior::Drop: {
      add_log(LogEvent::HOP, msg.seq, mode, msg.n.hex(), hex16(msg.q),
              static_cast<int>(msg.hops.size() + 1), 0, 0, 0, "adversary drop");
      return;  // the query dies here
    }

    case AdversaryBehavior::Misdirect: {
      const RoutingDecision prescribed = local_next_hop(table_, grant_.numerical_id, msg.q);
      const bool forward = prescribed.kind == RoutingDecision::Kind::Forward;

      std::vector<NeighborEntry> alts;
      std::set<NumericalId> seen{grant_.numerical_id};
      if (forward) seen.insert(prescribed.next.numerical_id);
      for (int level = 0; level < table_.level_count(); ++level) {
        for (Side side : {Side::Left, Side::Right}) {
          const auto& e = table_.get(level, side);
          if (e && seen.insert(e->numerical_id).second) alts.push_back(*e);
        }
      }
      std::sort(alts.begin(), alts.end(), [](const NeighborEntry& a, const NeighborEntry& b) {
        return a.numerical_id < b.numerical_id;
      });

      const bool wrong_terminate = forward && adv_rng_.chance(0.5);
      if (!wrong_terminate && alts.empty()) {
        route_query(std::move(msg));  // nowhere to misdirect to
        return;
      }

      msg.hops.push_back(grant_.numerical_id);
      if (wrong_terminate) {
        add_log(LogEvent::HOP, msg.seq, mode, msg.n.hex(), hex16(msg.q),
                static_cast<int>(msg.hops.size()), 0, 0, 0, "adversary false terminate");
        if (auth) {
          const std::optional<NumericalId> from =
              msg.chain.empty() ? std::nullopt
                                : std::optional<NumericalId>(msg.chain.back().transcript.R);
          msg.chain.push_back(forged_proof(make_hop_transcript(
              grant_.numerical_id, from, RoutingDecision::terminate(), msg.initiator_id,
              msg.q, msg.n)));
        }
        send_result(msg, 0, self_entry(), "");
        return;
      }

      const NeighborEntry target =
          alts[adv_rng_.uniform(0, alts.size() - 1)];
      add_log(LogEvent::HOP, msg.seq, mode, msg.n.hex(), hex16(msg.q),
              static_cast<int>(msg.hops.size()), 0, 0, 0,
              "adversary misdirect " + hex16(target.numerical_id));
      if (auth) {
        const std::optional<NumericalId> from =
            msg.chain.empty() ? std::nullopt
                              : std::optional<NumericalId>(msg.chain.back().transcript.R);
        msg.chain.push_back(forged_proof(
            make_hop_transcript(grant_.numerical_id, from, RoutingDecision::forward(target),
                                msg.initiator_id, msg.q, msg.n)));
      }
      send_query(target.address, msg);
      return;
    }

    case AdversaryBehavior::Manipulate: {
      if (!auth || msg.chain.empty()) {
        route_query(std::move(msg));  // nothing upstream to corrupt
        return;
      }
      RoutingTranscript& t =
          msg.chain[adv_rng_.uniform(0, msg.chain.size() - 1)].transcript;
      switch (adv_rng_.uniform(0, 2)) {
        case 0:
          t.R ^= 1ULL << adv_rng_.uniform(0, 63);
          break;
        case 1:
          t.Q ^= 1ULL << adv_rng_.uniform(0, 63);
          break;
        default: {
          const std::uint64_t bit = adv_rng_.uniform(0, 127);
          t.N.v[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
          break;
        }
      }
      add_log(LogEvent::HOP, msg.seq, mode, msg.n.hex(), hex16(msg.q),
              static_cast<int>(msg.hops.size() + 1), 0, 0, 0, "adversary manipulate");
      route_query(std::move(msg));  // routes honestly, carrying the damage
      return;
    }

    case AdversaryBehavior::Falsify: {
      if (!auth) {
        route_query(std::move(msg));
        return;
      }
      // Invent a router that was never registered. Its certificates chain to
      // a key that is not the registration authority's, so verifiers balk at
      // the inserted proof.
      const NumericalId z = adv_rng_.next_u64();
      const MasterSecret fake_master = MasterSecret::from_seed(adv_rng_.bytes(32));
      const IdentityKeypair fake_num =
          derive_identity_keypair(fake_master, Identity::numerical(z));
      const IdentityKeypair fake_name =
          derive_identity_keypair(fake_master, Identity::name(hash_name_id(z, params_.m)));
      RoutingTranscript t;
      t.R = z;
      if (!msg.chain.empty()) t.F = msg.chain.back().transcript.R;
      t.T = grant_.numerical_id;
      t.I = msg.initiator_id;
      t.Q = msg.q;
      t.N = msg.n;
      const Bytes m = to_bytes(encode_transcript(t));
      msg.chain.push_back(RoutingProof{t, sign(fake_num.key, m), fake_num.cert,
                                       sign(fake_name.key, m), fake_name.cert});
      msg.hops.push_back(z);
      add_log(LogEvent::HOP, msg.seq, mode, msg.n.hex(), hex16(msg.q),
              static_cast<int>(msg.hops.size() + 1), 0, 0, 0,
              "adversary falsify " + hex16(z));
      route_query(std::move(msg));
      return;
    }
  }
}

}  // namespace guard
