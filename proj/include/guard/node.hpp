#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "guard/authproof.hpp"
#include "guard/logrecord.hpp"
#include "guard/overlay.hpp"
#include "guard/transport.hpp"
#include "guard/ttp.hpp"

namespace guard {

/// Node-to-node wire kinds; disjoint from TtpMsg so mixed traffic stays
/// readable in event logs.
enum class NodeMsg : std::uint8_t {
  QUERY = 16,      // routed search, both modes
  RESULT = 17,     // terminal answer, sent straight to the initiator
  COSIGN = 18,     // guard cosign request/response
  GET_ENTRY = 19,  // read one (level, side) slot of a table
  SPLICE = 20,     // set one (level, side) slot, returning the old entry
  WARD_REQ = 21,   // "become my guard": recipient fetches its provision
  ATTEST = 22,     // sign a neighbor attestation
};

enum class AdversaryBehavior : std::uint8_t { Drop, Misdirect, Manipulate, Falsify };

const char* adversary_behavior_name(AdversaryBehavior b);
/// ConfigError on unknown names.
AdversaryBehavior adversary_behavior_from(std::string_view s);

struct SearchOutcome {
  bool ok = false;
  /// "OK", "REJECT:<reason>@<index>" or "FAILED:<detail>".
  std::string status;
  std::optional<NeighborEntry> result;
  std::vector<NumericalId> hops;  // router ids in path order, initiator first
  std::uint64_t latency_us = 0;
  /// Wire bytes of every protocol frame this search caused, payload excluded.
  std::uint64_t msg_bytes = 0;
  ProofChain chain;  // authenticated searches only
};

/// One overlay peer: registration, join, guard setup, routing (honest or
/// adversarial), guard service for its wards, and search initiation. Single
/// actor; handlers and the blocking search calls share one event loop.
class Node {
 public:
  Node(Network& net, const Address& addr, const Address& ttp, PhysicalIdentity phys,
       std::uint64_t seed);
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  /// Fetches the registration grant and public params.
  void register_with_ttp();
  /// Inserts this node into the overlay. Empty introducer starts a new
  /// overlay; otherwise the introducer routes a search to find the splice
  /// point. Joins are serialized by the caller.
  void join(const std::optional<Address>& introducer);
  /// Builds the table proof, submits it, resolves the three guard names and
  /// provisions their owners.
  void init_guards();

  SearchOutcome plain_search(NumericalId q, std::size_t payload_len);
  SearchOutcome auth_search(NumericalId q, std::size_t payload_len);

  /// Stacks a routing deviation applied to queries this node routes for
  /// others; `trigger` is the per-query activation probability.
  void add_adversary(AdversaryBehavior behavior, double trigger);

  NumericalId id() const { return grant_.numerical_id; }
  const NameId& name() const { return name_; }
  const Address& address() const { return ep_.address(); }
  const LookupTable& table() const { return table_; }
  const PublicParams& params() const { return params_; }
  NeighborEntry self_entry() const;
  const std::array<NeighborEntry, 3>& guards() const { return guards_; }
  bool guards_ready() const { return guards_ready_; }
  bool is_guard_for(NumericalId subject) const;
  const Certificate& name_certificate() const { return name_cert_; }

  std::vector<LogRecord>& log() { return log_; }
  const std::vector<LogRecord>& log() const { return log_; }

 private:
  struct QueryMsg {
    std::uint8_t mode = 0;  // 0 plain, 1 auth
    std::uint64_t seq = 0;
    NumericalId initiator_id = 0;
    Address initiator_addr;
    NumericalId q = 0;
    Nonce n;
    std::vector<NumericalId> hops;
    std::uint64_t route_bytes = 0;
    Bytes payload;
    ProofChain chain;
  };
  struct ResultMsg {
    std::uint8_t mode = 0;
    std::uint8_t status = 0;  // 0 ok, 1 failed, 2 rejected
    NumericalId q = 0;
    Nonce n;
    std::optional<NeighborEntry> result;
    std::vector<NumericalId> hops;
    std::uint64_t route_bytes = 0;
    std::uint64_t payload_len = 0;
    ProofChain chain;
    std::string detail;
  };
  struct Pending {
    bool active = false;
    bool done = false;
    std::uint8_t mode = 0;
    NumericalId q = 0;
    Nonce n;
    ResultMsg response;
    std::uint64_t result_frame_bytes = 0;
    std::uint64_t completed_at_us = 0;
  };

  static Bytes encode_query(const QueryMsg& m);
  static QueryMsg decode_query(std::span<const std::uint8_t> b);
  static Bytes encode_result(const ResultMsg& m);
  static ResultMsg decode_result(std::span<const std::uint8_t> b);

  void handle(const Envelope& env);
  void handle_query(const Envelope& env);
  void handle_result(const Envelope& env);
  void handle_cosign(const Envelope& env);
  void handle_get_entry(const Envelope& env);
  void handle_splice(const Envelope& env);
  void handle_ward_req(const Envelope& env);
  void handle_attest(const Envelope& env);

  SearchOutcome run_search(bool auth, NumericalId q, std::size_t payload_len,
                           const std::optional<Address>& entry_router, bool record);
  void route_query(QueryMsg msg);
  void adversarial_route(AdversaryBehavior behavior, QueryMsg msg);
  void send_query(const Address& dst, const QueryMsg& msg);
  void send_result(const QueryMsg& msg, std::uint8_t status,
                   const std::optional<NeighborEntry>& result, std::string detail);

  /// Failure string on cosign refusal or guard timeout, proof otherwise.
  /// Cosign frame sizes are added to wire_bytes.
  std::variant<RoutingProof, std::string> make_own_proof(const RoutingTranscript& t,
                                                         std::uint64_t& wire_bytes);

  void ensure_authenticated();
  TableProof build_table_proof();
  /// Reads a table slot of another node (or of this one, without a round
  /// trip, when `at` is our own entry).
  std::optional<NeighborEntry> neighbor_of(const NeighborEntry& at, int level, Side side);
  std::optional<NeighborEntry> splice_remote(const Address& owner, int level, Side side,
                                             const NeighborEntry& e);
  std::optional<NeighborEntry> find_level_member(int level);
  /// All members of the level list containing `at`, in walk order starting
  /// with `at` itself. Level 0 walks the ring once; higher levels walk both
  /// linear directions to their ends.
  std::vector<NeighborEntry> enumerate_level_list(const NeighborEntry& at, int level);
  NeighborEntry resolve_name(const NameId& target);
  std::optional<AdversaryBehavior> adversary_trigger();
  void add_log(LogEvent event, std::uint64_t seq, const std::string& mode,
               const std::string& nonce_hex, const std::string& q_hex, int hop_count,
               std::uint64_t latency_us, std::uint64_t msg_bytes, std::uint64_t compute_us,
               std::string detail);

  Network& net_;
  Endpoint& ep_;
  Address ttp_addr_;
  PhysicalIdentity phys_;
  RngStream rng_;
  RngStream adv_rng_;
  RegistrationGrant grant_;
  PublicParams params_;
  NameId name_;
  LookupTable table_;
  Certificate name_cert_;
  bool authed_ = false;
  bool guards_ready_ = false;
  std::array<NeighborEntry, 3> guards_{};
  /// One subject's three shares usually land on three owners, but nothing
  /// forbids one owner holding several; key by (subject, share index).
  std::map<std::pair<NumericalId, int>, GuardProvision> wards_;
  NonceLedger ledger_;
  ProofVerifyCache cache_;
  Pending pending_;
  std::vector<std::pair<AdversaryBehavior, double>> adversaries_;
  std::vector<LogRecord> log_;
  std::uint64_t search_seq_ = 0;
};

}  // namespace guard
