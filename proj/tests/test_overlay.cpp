#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "guard/errors.hpp"
#include "guard/overlay.hpp"

using namespace guard;

namespace {

std::vector<NumericalId> random_ids(std::uint64_t seed, std::size_t n) {
  RngStream rng(seed, "overlay-ids");
  std::set<NumericalId> ids;
  while (ids.size() < n) ids.insert(rng.uniform(0, 1'000'000));
  return std::vector<NumericalId>(ids.begin(), ids.end());
}

std::vector<NumericalId> interesting_queries(const std::vector<NumericalId>& ids,
                                             std::uint64_t seed, std::size_t extra) {
  std::vector<NumericalId> qs;
  for (NumericalId id : ids) {
    qs.push_back(id);
    if (id > 0) qs.push_back(id - 1);
    qs.push_back(id + 1);
  }
  qs.push_back(0);
  qs.push_back(~0ULL);
  RngStream rng(seed, "overlay-queries");
  for (std::size_t i = 0; i < extra; ++i) qs.push_back(rng.uniform(0, 2'000'000));
  return qs;
}

}  // namespace

TEST_CASE("prefix length grammar cases") {
  CHECK(common_prefix_len(BitString::from_string("0110"), BitString::from_string("0100")) == 2);
  BitString x = BitString::from_string("10110101");
  CHECK(common_prefix_len(x, x) == 8);
  CHECK(common_prefix_len(BitString::from_string("1000"), BitString::from_string("0000")) == 0);
}

TEST_CASE("attestation message grammar") {
  CHECK(to_string(make_attestation_message(45, 2, Side::Right)) ==
        "atst||000000000000002d||2||R");
  CHECK(to_string(make_attestation_message(45, 0, Side::Left)) ==
        "atst||000000000000002d||0||L");
  CHECK(to_string(make_attestation_message(0xffffffffffffffffULL, 13, Side::Left)) ==
        "atst||ffffffffffffffff||13||L");
}

TEST_CASE("neighbor entry and lookup table encodings roundtrip") {
  NeighborEntry e{45, BitString::from_string("1010"), Address{"10.0.0.5", 7045}};
  const Bytes enc = e.encoded();
  ByteReader r(enc);
  CHECK(NeighborEntry::from_reader(r) == e);

  StaticOverlay o = StaticOverlay::build(random_ids(1, 8), 8);
  const LookupTable& t = o.table_of(o.ids_sorted()[3]);
  CHECK(LookupTable::from_bytes(t.encoded()) == t);
}

TEST_CASE("table proof container keeps entries unique and sorted") {
  TableProof p;
  Signature s1, s2;
  s1.R[0] = 1;
  s2.R[0] = 2;
  p.add(1, Side::Right, s1);
  p.add(0, Side::Left, s2);
  CHECK(p.entries.front().first.level == 0);
  CHECK(p.find(1, Side::Right) != nullptr);
  CHECK(*p.find(1, Side::Right) == s1);
  CHECK(p.find(2, Side::Left) == nullptr);
  CHECK_THROWS_AS(p.add(1, Side::Right, s2), Error);
  CHECK(TableProof::from_bytes(p.encoded()) == p);
}

TEST_CASE("three node line from the figure routes 45 -> 30 -> 20") {
  StaticOverlay o = StaticOverlay::build({20, 30, 45}, 4);
  RoutingDecision d = local_next_hop(o.table_of(45), 45, 21);
  REQUIRE(d.kind == RoutingDecision::Kind::Forward);
  CHECK(d.next.numerical_id == 30U);

  SearchPath p = o.search_numerical(45, 21);
  CHECK(p.hops == std::vector<NumericalId>{45, 30, 20});
  CHECK(p.result.numerical_id == 20U);
}

TEST_CASE("query equal to self terminates immediately") {
  StaticOverlay o = StaticOverlay::build({20, 30, 45}, 4);
  CHECK(local_next_hop(o.table_of(30), 30, 30).kind == RoutingDecision::Kind::Terminate);
  SearchPath p = o.search_numerical(30, 30);
  CHECK(p.hops == std::vector<NumericalId>{30});
  CHECK(p.result.numerical_id == 30U);
}

TEST_CASE("malformed table raises TableError") {
  LookupTable t;
  CHECK_THROWS_AS(local_next_hop(t, 1, 2), Error);
  t.set(0, Side::Left, NeighborEntry{1, BitString::from_string("0"), {}});
  CHECK_THROWS_AS(local_next_hop(t, 1, 2), Error);
}

TEST_CASE("iterated routing matches the sorted-array oracle on small overlays") {
  for (std::size_t n : {1u, 2u, 3u, 5u, 32u}) {
    StaticOverlay o = StaticOverlay::build(random_ids(100 + n, n), 8);
    const auto& ids = o.ids_sorted();
    for (NumericalId self : ids) {
      for (NumericalId q : interesting_queries(ids, 7, 20)) {
        SearchPath p = o.search_numerical(self, q);
        CHECK(p.result.numerical_id == oracle_numerical_answer(ids, q));
        CHECK(p.hops.front() == self);
      }
    }
  }
}

TEST_CASE("oracle agreement on a 128 node overlay with 500 random queries") {
  StaticOverlay o = StaticOverlay::build(random_ids(5, 128), 12);
  const auto& ids = o.ids_sorted();
  RngStream rng(6, "queries-128");
  for (int i = 0; i < 500; ++i) {
    const NumericalId q = rng.uniform(0, 1'200'000);
    const NumericalId from = ids[rng.uniform(0, ids.size() - 1)];
    CHECK(o.search_numerical(from, q).result.numerical_id == oracle_numerical_answer(ids, q));
  }
}

TEST_CASE("level zero ring visits all nodes in ascending cyclic order") {
  StaticOverlay o = StaticOverlay::build(random_ids(9, 24), 8);
  const auto& ids = o.ids_sorted();
  NumericalId cur = ids.front();
  std::vector<NumericalId> visited;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    visited.push_back(cur);
    cur = o.table_of(cur).get(0, Side::Right)->numerical_id;
  }
  CHECK(cur == ids.front());
  CHECK(visited == ids);
}

TEST_CASE("level i neighbors share a name prefix of length at least i") {
  StaticOverlay o = StaticOverlay::build(random_ids(11, 40), 10);
  for (NumericalId id : o.ids_sorted()) {
    const LookupTable& t = o.table_of(id);
    for (int lvl = 1; lvl < t.level_count(); ++lvl) {
      for (Side side : {Side::Left, Side::Right}) {
        const auto& e = t.get(lvl, side);
        if (e) {
          CHECK(common_prefix_len(e->name_id, o.name_of(id)) >= lvl);
        }
      }
    }
  }
}

TEST_CASE("name search finds the exact owner in a full name space") {
  const int m = 4;
  StaticOverlay o = StaticOverlay::build(full_space_ids(m), m);
  REQUIRE(o.ids_sorted().size() == 16);
  for (std::uint64_t v = 0; v < 16; ++v) {
    const NameId target = BitString::from_uint(m, v);
    for (NumericalId from : o.ids_sorted()) {
      NeighborEntry got = o.search_name(from, target);
      CHECK(got.name_id == target);
    }
  }
}

TEST_CASE("name search for own name returns self") {
  StaticOverlay o = StaticOverlay::build(random_ids(21, 12), 6);
  for (NumericalId id : o.ids_sorted()) {
    // Self ties with same-name nodes; the oracle applies the same tie-break.
    std::vector<std::pair<NumericalId, NameId>> nodes;
    for (NumericalId j : o.ids_sorted()) nodes.emplace_back(j, o.name_of(j));
    CHECK(o.search_name(id, o.name_of(id)).numerical_id ==
          oracle_name_answer(nodes, o.name_of(id)));
  }
}

TEST_CASE("sparse name search matches the brute force oracle") {
  StaticOverlay o = StaticOverlay::build(random_ids(33, 30), 8);
  std::vector<std::pair<NumericalId, NameId>> nodes;
  for (NumericalId id : o.ids_sorted()) nodes.emplace_back(id, o.name_of(id));
  RngStream rng(17, "name-targets");
  for (int i = 0; i < 200; ++i) {
    const NameId target = BitString::from_uint(8, rng.uniform(0, 255));
    const NumericalId from = o.ids_sorted()[rng.uniform(0, o.ids_sorted().size() - 1)];
    CHECK(o.search_name(from, target).numerical_id == oracle_name_answer(nodes, target));
  }
}

TEST_CASE("full space id scan produces one owner per name") {
  auto ids = full_space_ids(4);
  CHECK(ids.size() == 16);
  std::set<BitString> names;
  for (NumericalId id : ids) names.insert(hash_name_id(id, 4));
  CHECK(names.size() == 16);
}

TEST_CASE("mean hop count stays within the logarithmic budget") {
  for (std::size_t n : {16u, 64u, 256u}) {
    StaticOverlay o = StaticOverlay::build(random_ids(n, n), 12);
    const auto& ids = o.ids_sorted();
    RngStream rng(n, "hop-queries");
    std::uint64_t total_hops = 0;
    const int queries = 500;
    for (int i = 0; i < queries; ++i) {
      const NumericalId from = ids[rng.uniform(0, ids.size() - 1)];
      const NumericalId q = rng.uniform(0, 1'100'000);
      total_hops += o.search_numerical(from, q).hops.size() - 1;
    }
    const double mean = static_cast<double>(total_hops) / queries;
    const double budget = 2.0 * std::log2(static_cast<double>(n)) + 4.0;
    CHECK(mean <= budget);
  }
}
