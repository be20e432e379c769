#include "guard/overlay.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "guard/errors.hpp"

namespace guard {

Bytes NeighborEntry::encoded() const {
  ByteWriter w;
  write(w);
  return w.take();
}

void NeighborEntry::write(ByteWriter& w) const {
  w.u64(numerical_id);
  w.blob(name_id.packed());
  w.str(address.host);
  w.u16(address.port);
}

NeighborEntry NeighborEntry::from_reader(ByteReader& r) {
  NeighborEntry e;
  e.numerical_id = r.u64();
  e.name_id = BitString::from_packed(r.blob());
  e.address.host = r.str();
  e.address.port = r.u16();
  return e;
}

const std::optional<NeighborEntry>& LookupTable::get(int level, Side side) const {
  static const std::optional<NeighborEntry> kAbsent;
  if (level < 0 || level >= level_count()) return kAbsent;
  const LevelPair& p = levels[static_cast<std::size_t>(level)];
  return side == Side::Left ? p.left : p.right;
}

void LookupTable::set(int level, Side side, std::optional<NeighborEntry> e) {
  if (level < 0) {
    throw Error(Errc::TableError, "negative level");
  }
  if (level >= level_count()) {
    levels.resize(static_cast<std::size_t>(level) + 1);
  }
  LevelPair& p = levels[static_cast<std::size_t>(level)];
  (side == Side::Left ? p.left : p.right) = std::move(e);
}

Bytes LookupTable::encoded() const {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(levels.size()));
  for (const LevelPair& p : levels) {
    std::uint8_t flags = 0;
    if (p.left) flags |= 1;
    if (p.right) flags |= 2;
    w.u8(flags);
    if (p.left) p.left->write(w);
    if (p.right) p.right->write(w);
  }
  return w.take();
}

LookupTable LookupTable::from_bytes(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  LookupTable t;
  const int n = r.u16();
  t.levels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::uint8_t flags = r.u8();
    if (flags & 1) t.levels[static_cast<std::size_t>(i)].left = NeighborEntry::from_reader(r);
    if (flags & 2) t.levels[static_cast<std::size_t>(i)].right = NeighborEntry::from_reader(r);
  }
  if (!r.done()) {
    throw Error(Errc::EncodingError, "trailing bytes after lookup table");
  }
  return t;
}

namespace {

void check_table(const LookupTable& table) {
  if (table.level_count() < 1 || !table.get(0, Side::Left) || !table.get(0, Side::Right)) {
    throw Error(Errc::TableError, "level-0 ring entries missing");
  }
}

}  // namespace

RoutingDecision local_next_hop(const LookupTable& table, NumericalId self, NumericalId q) {
  check_table(table);
  if (q == self) {
    return RoutingDecision::terminate();
  }

  if (q > self) {
    // Highest-level right neighbor that does not overshoot the target.
    for (int lvl = table.level_count() - 1; lvl >= 0; --lvl) {
      const auto& r = table.get(lvl, Side::Right);
      if (r && r->numerical_id > self && r->numerical_id <= q) {
        return RoutingDecision::forward(*r);
      }
    }
    // Successor exceeds q, or wraps (self is the overlay maximum): stop here.
    return RoutingDecision::terminate();
  }

  // q < self. If the ring wraps here and q lies below the minimum id, the
  // overlay maximum is the answer under cyclic order.
  const NeighborEntry& succ = *table.get(0, Side::Right);
  if (succ.numerical_id < self && q < succ.numerical_id) {
    return RoutingDecision::terminate();
  }
  for (int lvl = table.level_count() - 1; lvl >= 0; --lvl) {
    const auto& l = table.get(lvl, Side::Left);
    if (l && l->numerical_id >= q && l->numerical_id < self) {
      return RoutingDecision::forward(*l);
    }
  }
  const NeighborEntry& pred = *table.get(0, Side::Left);
  if (pred.numerical_id == self) {
    return RoutingDecision::terminate();  // singleton overlay
  }
  // Either the predecessor is already below q (it is the answer and will
  // terminate there) or the ring wraps upward from the minimum toward the
  // overlay maximum.
  return RoutingDecision::forward(pred);
}

Bytes make_attestation_message(NumericalId owner, int level, Side side) {
  std::string s = "atst||" + hex16(owner) + "||" + std::to_string(level) + "||";
  s.push_back(side_char(side));
  return to_bytes(s);
}

void TableProof::add(int level, Side side, const Signature& sig) {
  const Key k{level, side};
  auto it = std::lower_bound(entries.begin(), entries.end(), k,
                             [](const auto& e, const Key& key) { return e.first < key; });
  if (it != entries.end() && it->first == k) {
    throw Error(Errc::ProofError, "duplicate table proof entry");
  }
  entries.insert(it, {k, sig});
}

const Signature* TableProof::find(int level, Side side) const {
  const Key k{level, side};
  auto it = std::lower_bound(entries.begin(), entries.end(), k,
                             [](const auto& e, const Key& key) { return e.first < key; });
  if (it != entries.end() && it->first == k) return &it->second;
  return nullptr;
}

Bytes TableProof::encoded() const {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(entries.size()));
  for (const auto& [k, sig] : entries) {
    w.u16(static_cast<std::uint16_t>(k.level));
    w.u8(static_cast<std::uint8_t>(k.side));
    w.raw(sig.encoded());
  }
  return w.take();
}

TableProof TableProof::from_bytes(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  TableProof p;
  const int n = r.u16();
  for (int i = 0; i < n; ++i) {
    const int level = r.u16();
    const auto side = static_cast<Side>(r.u8());
    if (side != Side::Left && side != Side::Right) {
      throw Error(Errc::EncodingError, "bad table proof side");
    }
    p.add(level, side, Signature::from_bytes(r.raw(64)));
  }
  if (!r.done()) {
    throw Error(Errc::EncodingError, "trailing bytes after table proof");
  }
  return p;
}

NumericalId oracle_numerical_answer(const std::vector<NumericalId>& sorted_ids, NumericalId q) {
  if (sorted_ids.empty()) {
    throw Error(Errc::ParamError, "oracle needs a nonempty overlay");
  }
  auto it = std::upper_bound(sorted_ids.begin(), sorted_ids.end(), q);
  if (it == sorted_ids.begin()) {
    return sorted_ids.back();  // q below the minimum wraps to the maximum
  }
  return *std::prev(it);
}

NumericalId oracle_name_answer(const std::vector<std::pair<NumericalId, NameId>>& nodes,
                               const NameId& target) {
  if (nodes.empty()) {
    throw Error(Errc::ParamError, "oracle needs a nonempty overlay");
  }
  int best_cpl = -1;
  NumericalId best_id = 0;
  for (const auto& [id, name] : nodes) {
    const int c = common_prefix_len(name, target);
    if (c > best_cpl || (c == best_cpl && id < best_id)) {
      best_cpl = c;
      best_id = id;
    }
  }
  return best_id;
}

StaticOverlay StaticOverlay::build(const std::vector<NumericalId>& ids, int m) {
  std::vector<std::pair<NumericalId, NameId>> nodes;
  nodes.reserve(ids.size());
  for (NumericalId id : ids) {
    nodes.emplace_back(id, hash_name_id(id, m));
  }
  return build_with_names(std::move(nodes), m);
}

StaticOverlay StaticOverlay::build_with_names(std::vector<std::pair<NumericalId, NameId>> nodes,
                                              int m) {
  if (nodes.empty()) {
    throw Error(Errc::ParamError, "empty overlay");
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i].first == nodes[i - 1].first) {
      throw Error(Errc::ParamError, "duplicate numerical id");
    }
  }
  StaticOverlay o;
  o.m_ = m;
  const std::size_t n = nodes.size();
  for (auto& [id, name] : nodes) {
    if (name.size() != m) {
      throw Error(Errc::ParamError, "name-id length does not match m");
    }
    o.sorted_ids_.push_back(id);
    o.names_.push_back(name);
  }
  o.tables_.resize(n);

  auto entry_at = [&](std::size_t i) {
    return NeighborEntry{o.sorted_ids_[i], o.names_[i],
                         Address{"static-" + hex16(o.sorted_ids_[i]), 1}};
  };

  for (std::size_t i = 0; i < n; ++i) {
    LookupTable& t = o.tables_[i];
    t.set(0, Side::Left, entry_at((i + n - 1) % n));
    t.set(0, Side::Right, entry_at((i + 1) % n));
    for (int lvl = 1; lvl <= m; ++lvl) {
      bool any = false;
      for (std::size_t j = i; j-- > 0;) {
        if (common_prefix_len(o.names_[i], o.names_[j]) >= lvl) {
          t.set(lvl, Side::Left, entry_at(j));
          any = true;
          break;
        }
      }
      for (std::size_t j = i + 1; j < n; ++j) {
        if (common_prefix_len(o.names_[i], o.names_[j]) >= lvl) {
          t.set(lvl, Side::Right, entry_at(j));
          any = true;
          break;
        }
      }
      if (!any) break;
    }
  }
  return o;
}

std::size_t StaticOverlay::index_of(NumericalId id) const {
  auto it = std::lower_bound(sorted_ids_.begin(), sorted_ids_.end(), id);
  if (it == sorted_ids_.end() || *it != id) {
    throw Error(Errc::ParamError, "unknown node id");
  }
  return static_cast<std::size_t>(it - sorted_ids_.begin());
}

const NameId& StaticOverlay::name_of(NumericalId id) const { return names_[index_of(id)]; }

const LookupTable& StaticOverlay::table_of(NumericalId id) const {
  return tables_[index_of(id)];
}

NeighborEntry StaticOverlay::entry_of(NumericalId id) const {
  const std::size_t i = index_of(id);
  return NeighborEntry{sorted_ids_[i], names_[i], Address{"static-" + hex16(sorted_ids_[i]), 1}};
}

SearchPath StaticOverlay::search_numerical(NumericalId from, NumericalId q) const {
  SearchPath path;
  NumericalId cur = from;
  path.hops.push_back(cur);
  const std::size_t limit = sorted_ids_.size() + 4;
  while (true) {
    const RoutingDecision d = local_next_hop(table_of(cur), cur, q);
    if (d.kind == RoutingDecision::Kind::Terminate) {
      path.result = entry_of(cur);
      return path;
    }
    cur = d.next.numerical_id;
    path.hops.push_back(cur);
    if (path.hops.size() > limit) {
      throw Error(Errc::TableError, "routing loop detected");
    }
  }
}

NeighborEntry StaticOverlay::search_name(NumericalId from, const NameId& target) const {
  if (target.size() != m_) {
    throw Error(Errc::ParamError, "target name length does not match m");
  }
  std::size_t cur = index_of(from);
  while (true) {
    const int c = common_prefix_len(names_[cur], target);
    // Enumerate the level-c list containing cur (everyone sharing a >= c
    // prefix with the target); linked linearly in numerical order.
    std::vector<std::size_t> members;
    members.push_back(cur);
    for (std::size_t j = cur; j-- > 0;) {
      if (common_prefix_len(names_[j], names_[cur]) >= c) members.push_back(j);
    }
    for (std::size_t j = cur + 1; j < sorted_ids_.size(); ++j) {
      if (common_prefix_len(names_[j], names_[cur]) >= c) members.push_back(j);
    }
    int best_cpl = -1;
    std::size_t best = cur;
    for (std::size_t j : members) {
      const int cj = common_prefix_len(names_[j], target);
      if (cj > best_cpl || (cj == best_cpl && sorted_ids_[j] < sorted_ids_[best])) {
        best_cpl = cj;
        best = j;
      }
    }
    if (best_cpl > c) {
      cur = best;  // strictly closer; rescan from the higher list
      continue;
    }
    return entry_of(sorted_ids_[best]);
  }
}

std::vector<NumericalId> full_space_ids(int m) {
  if (m < 1 || m > 20) {
    throw Error(Errc::ParamError, "full space enumeration is only sensible for small m");
  }
  const std::uint64_t space = 1ULL << m;
  std::map<BitString, NumericalId> owner;
  for (NumericalId id = 0; owner.size() < space; ++id) {
    const NameId name = hash_name_id(id, m);
    owner.emplace(name, id);  // keeps the first id found for each name
    if (id > space * 4096) {
      throw Error(Errc::ParamError, "name space not covered in a reasonable scan");
    }
  }
  std::vector<NumericalId> ids;
  ids.reserve(space);
  for (const auto& [name, id] : owner) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace guard
