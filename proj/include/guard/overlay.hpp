#pragma once

#include <optional>
#include <vector>

#include "guard/bytes.hpp"
#include "guard/crypto.hpp"
#include "guard/ids.hpp"
#include "guard/transport.hpp"

namespace guard {

enum class Side : std::uint8_t { Left = 0, Right = 1 };

inline char side_char(Side s) { return s == Side::Right ? 'R' : 'L'; }

struct NeighborEntry {
  NumericalId numerical_id = 0;
  NameId name_id;
  Address address;

  Bytes encoded() const;
  static NeighborEntry from_reader(ByteReader& r);
  void write(ByteWriter& w) const;
  friend bool operator==(const NeighborEntry&, const NeighborEntry&) = default;
};

/// Per-node routing state. Level 0 is the circular ring: both sides present
/// once the overlay is initialized (a singleton points at itself). At level
/// i > 0 neighbors share a name-id prefix of length >= i with the owner and
/// the lists are linear (no wrap).
struct LookupTable {
  struct LevelPair {
    std::optional<NeighborEntry> left;
    std::optional<NeighborEntry> right;
    friend bool operator==(const LevelPair&, const LevelPair&) = default;
  };
  std::vector<LevelPair> levels;

  int level_count() const { return static_cast<int>(levels.size()); }
  const std::optional<NeighborEntry>& get(int level, Side side) const;
  void set(int level, Side side, std::optional<NeighborEntry> e);

  Bytes encoded() const;
  static LookupTable from_bytes(std::span<const std::uint8_t> b);
  friend bool operator==(const LookupTable&, const LookupTable&) = default;
};

struct RoutingDecision {
  enum class Kind { Forward, Terminate } kind = Kind::Terminate;
  NeighborEntry next;  // meaningful only for Forward

  static RoutingDecision forward(NeighborEntry e) {
    return RoutingDecision{Kind::Forward, std::move(e)};
  }
  static RoutingDecision terminate() { return RoutingDecision{}; }
  friend bool operator==(const RoutingDecision&, const RoutingDecision&) = default;
};

/// The greedy step for numerical-id search: find max{id <= q}, wrapping to the
/// overlay maximum when q lies below every id. Pure; guards re-run it to check
/// that a transcript matches the prescribed route.
RoutingDecision local_next_hop(const LookupTable& table, NumericalId self, NumericalId q);

/// Canonical neighbor attestation text: atst||<owner hex16>||<level>||<R|L>.
Bytes make_attestation_message(NumericalId owner, int level, Side side);

/// Signatures a node collects from its neighbors, one per table entry.
struct TableProof {
  struct Key {
    int level;
    Side side;
    friend auto operator<=>(const Key&, const Key&) = default;
  };
  std::vector<std::pair<Key, Signature>> entries;  // kept sorted by key

  void add(int level, Side side, const Signature& sig);
  const Signature* find(int level, Side side) const;

  Bytes encoded() const;
  static TableProof from_bytes(std::span<const std::uint8_t> b);
  friend bool operator==(const TableProof&, const TableProof&) = default;
};

struct SearchPath {
  std::vector<NumericalId> hops;
  NeighborEntry result;
};

/// Sorted-array reference answer for numerical search (wrap semantics).
NumericalId oracle_numerical_answer(const std::vector<NumericalId>& sorted_ids, NumericalId q);

/// Brute-force reference for name search: longest common prefix with the
/// target, ties to the smaller numerical id.
NumericalId oracle_name_answer(const std::vector<std::pair<NumericalId, NameId>>& nodes,
                               const NameId& target);

/// In-memory overlay with fully built tables; the pure counterpart of the
/// networked protocol, used as the test oracle and by topology-level checks.
class StaticOverlay {
 public:
  static StaticOverlay build(const std::vector<NumericalId>& ids, int m);
  static StaticOverlay build_with_names(std::vector<std::pair<NumericalId, NameId>> nodes, int m);

  int m() const { return m_; }
  const std::vector<NumericalId>& ids_sorted() const { return sorted_ids_; }
  const NameId& name_of(NumericalId id) const;
  const LookupTable& table_of(NumericalId id) const;
  NeighborEntry entry_of(NumericalId id) const;

  SearchPath search_numerical(NumericalId from, NumericalId q) const;
  NeighborEntry search_name(NumericalId from, const NameId& target) const;

 private:
  int m_ = 0;
  std::vector<NumericalId> sorted_ids_;
  std::vector<NameId> names_;        // aligned with sorted_ids_
  std::vector<LookupTable> tables_;  // aligned with sorted_ids_
  std::size_t index_of(NumericalId id) const;
};

/// Smallest NumericalIds whose hashed names cover the full 2^m name space,
/// one representative per name (scans upward from zero).
std::vector<NumericalId> full_space_ids(int m);

}  // namespace guard
