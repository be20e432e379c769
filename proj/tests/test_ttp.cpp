#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "guard/errors.hpp"
#include "guard/ttp.hpp"

using namespace guard;

namespace {

MasterSecret test_master() {
  return MasterSecret::from_seed(to_bytes("ttp unit-test master secret, comfortably long"));
}

PermutationKey test_perm(int m) {
  RngStream rng(77, "ttp-test-perm");
  return PermutationKey{rng.bytes(32), m};
}

TtpCore make_core(int m = 8, std::uint64_t seed = 9, int id_bits = 64) {
  return TtpCore(test_master(), test_perm(m), m, seed, id_bits);
}

PhysicalIdentity phys(std::string_view tag) { return to_bytes(tag); }

Address addr_of(std::string_view host, std::uint16_t port = 1) {
  return Address{std::string(host), port};
}

std::array<Signature, 3> sign_challenges(const SigningKey& key, const ChallengeSet& cs) {
  std::array<Signature, 3> sigs;
  for (int i = 0; i < 3; ++i) {
    sigs[i] = sign(key, cs.challenges[i].v);
  }
  return sigs;
}

/// Neighbors countersign the owner's table, one attestation per present slot.
TableProof honest_proof(NumericalId owner, const LookupTable& table,
                        const std::map<NumericalId, SigningKey>& keys) {
  TableProof proof;
  for (int level = 0; level < table.level_count(); ++level) {
    for (const Side side : {Side::Left, Side::Right}) {
      const auto& e = table.get(level, side);
      if (!e) continue;
      proof.add(level, side, sign(keys.at(e->numerical_id), make_attestation_message(owner, level, side)));
    }
  }
  return proof;
}

struct Enrolled {
  TtpCore core;
  std::vector<NumericalId> ids;
  std::map<NumericalId, SigningKey> keys;
  StaticOverlay overlay;
};

/// Registers `n` peers, authenticates them all, and builds the overlay their
/// granted ids induce.
Enrolled enroll(int n, int m) {
  TtpCore core = make_core(m);
  std::vector<NumericalId> ids;
  std::map<NumericalId, SigningKey> keys;
  for (int i = 0; i < n; ++i) {
    const std::string tag = "peer-" + std::to_string(i);
    const RegistrationGrant g = core.register_peer(phys(tag), addr_of(tag));
    ids.push_back(g.numerical_id);
    keys.emplace(g.numerical_id, g.signing_key);
    const ChallengeSet cs = core.begin_auth(phys(tag));
    CHECK(core.complete_auth(cs.session, sign_challenges(g.signing_key, cs)));
  }
  StaticOverlay overlay = StaticOverlay::build(ids, m);
  return Enrolled{std::move(core), std::move(ids), std::move(keys), std::move(overlay)};
}

}  // namespace

TEST_CASE("published params are stable and usable") {
  TtpCore core = make_core(12);
  const PublicParams& a = core.publish_params();
  const PublicParams& b = core.publish_params();
  CHECK(a.to_text() == b.to_text());
  CHECK(a.m == 12);

  const RegistrationGrant g = core.register_peer(phys("alpha"), addr_of("alpha"));
  CHECK(verify_certificate(a, g.certificate));
  CHECK(g.certificate.identity == Identity::numerical(g.numerical_id));
  CHECK(g.certificate.pk == g.signing_key.pub);
}

TEST_CASE("registration is idempotent per physical identity") {
  TtpCore core = make_core();
  const RegistrationGrant g1 = core.register_peer(phys("alpha"), addr_of("alpha"));
  const RegistrationGrant g2 = core.register_peer(phys("alpha"), addr_of("alpha"));
  CHECK(g1.numerical_id == g2.numerical_id);
  CHECK(g1.signing_key.scalar == g2.signing_key.scalar);
  CHECK(g1.signing_key.nonce_seed == g2.signing_key.nonce_seed);
  CHECK(g1.signing_key.pub == g2.signing_key.pub);
  CHECK(g1.certificate == g2.certificate);
  CHECK(core.id_of(phys("alpha")) == g1.numerical_id);
  CHECK(!core.id_of(phys("beta")).has_value());
}

TEST_CASE("rebinding a physical identity is refused") {
  TtpCore core = make_core();
  core.register_peer(phys("alpha"), addr_of("alpha"));
  try {
    core.register_peer(phys("alpha"), addr_of("elsewhere"));
    FAIL("expected BindingError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BindingError);
  }
  // The original binding still answers.
  CHECK(core.register_peer(phys("alpha"), addr_of("alpha")).numerical_id ==
        core.id_of(phys("alpha")));
}

TEST_CASE("digest collisions probe to the next free id") {
  // At 8-bit truncation the id is the first digest byte, so colliding
  // addresses are easy to mine.
  std::map<std::uint8_t, std::vector<Address>> buckets;
  std::vector<Address> clash;
  for (std::uint16_t port = 1; port < 4000; ++port) {
    const Address a = addr_of("clash", port);
    const Bytes d = sha256(to_bytes(a.to_string()));
    auto& bucket = buckets[d[0]];
    bucket.push_back(a);
    if (bucket.size() == 3) {
      clash = bucket;
      break;
    }
  }
  REQUIRE(clash.size() == 3);

  TtpCore core = make_core(8, 9, /*id_bits=*/8);
  const NumericalId first = core.register_peer(phys("c0"), clash[0]).numerical_id;
  const NumericalId second = core.register_peer(phys("c1"), clash[1]).numerical_id;
  const NumericalId third = core.register_peer(phys("c2"), clash[2]).numerical_id;
  CHECK(first < 256);
  CHECK(second == ((first + 1) & 0xff));
  CHECK(third == ((first + 2) & 0xff));
}

TEST_CASE("a thousand registrations issue a thousand distinct ids") {
  TtpCore core = make_core();
  std::set<NumericalId> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::string tag = "bulk-" + std::to_string(i);
    seen.insert(core.register_peer(phys(tag), addr_of(tag)).numerical_id);
  }
  CHECK(seen.size() == 1000);
}

TEST_CASE("challenge response authenticates the key holder") {
  TtpCore core = make_core();
  const RegistrationGrant g = core.register_peer(phys("alpha"), addr_of("alpha"));
  CHECK(!core.authenticated(g.numerical_id));

  const ChallengeSet cs = core.begin_auth(phys("alpha"));
  CHECK(core.complete_auth(cs.session, sign_challenges(g.signing_key, cs)));
  CHECK(core.authenticated(g.numerical_id));

  CHECK_THROWS_AS(core.begin_auth(phys("ghost")), Error);
  try {
    core.begin_auth(phys("ghost"));
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownIdentity);
  }
}

TEST_CASE("signing with a different grant's key fails authentication") {
  TtpCore core = make_core();
  const RegistrationGrant alpha = core.register_peer(phys("alpha"), addr_of("alpha"));
  const RegistrationGrant beta = core.register_peer(phys("beta"), addr_of("beta"));

  const ChallengeSet cs = core.begin_auth(phys("alpha"));
  CHECK_THROWS_AS(core.complete_auth(cs.session, sign_challenges(beta.signing_key, cs)), Error);
  CHECK(!core.authenticated(alpha.numerical_id));
  CHECK(!core.authenticated(beta.numerical_id));
}

TEST_CASE("replayed responses fail against a fresh session") {
  TtpCore core = make_core();
  const RegistrationGrant g = core.register_peer(phys("alpha"), addr_of("alpha"));

  const ChallengeSet s1 = core.begin_auth(phys("alpha"));
  const std::array<Signature, 3> replay = sign_challenges(g.signing_key, s1);
  CHECK(core.complete_auth(s1.session, replay));

  const ChallengeSet s2 = core.begin_auth(phys("alpha"));
  CHECK(s2.session != s1.session);
  bool any_fresh = false;
  for (int i = 0; i < 3; ++i) {
    any_fresh = any_fresh || !(s2.challenges[i] == s1.challenges[i]);
  }
  CHECK(any_fresh);
  CHECK_THROWS_AS(core.complete_auth(s2.session, replay), Error);

  // Sessions are one-shot: the consumed session id is gone too.
  CHECK_THROWS_AS(core.complete_auth(s1.session, replay), Error);
}

TEST_CASE("honest table proofs verify for every node") {
  Enrolled e = enroll(16, 8);
  for (const NumericalId id : e.ids) {
    const LookupTable& t = e.overlay.table_of(id);
    CHECK(e.core.verify_table_proof(id, t, honest_proof(id, t, e.keys)));
  }
}

TEST_CASE("altered or incomplete table proofs are rejected") {
  Enrolled e = enroll(16, 8);
  const NumericalId owner = e.ids[5];
  LookupTable table = e.overlay.table_of(owner);
  const TableProof proof = honest_proof(owner, table, e.keys);
  REQUIRE(e.core.verify_table_proof(owner, table, proof));

  SUBCASE("entry numerical id altered") {
    auto entry = table.get(0, Side::Right);
    REQUIRE(entry.has_value());
    entry->numerical_id ^= 1;
    table.set(0, Side::Right, entry);
    CHECK(!e.core.verify_table_proof(owner, table, proof));
  }

  SUBCASE("one attestation missing") {
    TableProof pruned;
    bool dropped = false;
    for (int level = 0; level < table.level_count(); ++level) {
      for (const Side side : {Side::Left, Side::Right}) {
        const Signature* sig = proof.find(level, side);
        if (sig == nullptr) continue;
        if (!dropped) {
          dropped = true;
          continue;
        }
        pruned.add(level, side, *sig);
      }
    }
    REQUIRE(dropped);
    CHECK(!e.core.verify_table_proof(owner, table, pruned));
  }

  SUBCASE("signature swapped between slots") {
    const Signature* a = proof.find(0, Side::Left);
    REQUIRE(a != nullptr);
    TableProof twisted;
    for (int level = 0; level < table.level_count(); ++level) {
      for (const Side side : {Side::Left, Side::Right}) {
        if (proof.find(level, side) != nullptr) twisted.add(level, side, *a);
      }
    }
    CHECK(!e.core.verify_table_proof(owner, table, twisted));
  }
}

TEST_CASE("guard names are the keyed permutation of ring names") {
  const int m = 6;
  const PermutationKey pk = test_perm(m);
  RngStream rng(3, "guard-names");
  const NameId s = BitString::from_uint(m, rng.uniform(0, 63));
  const NameId l = BitString::from_uint(m, rng.uniform(0, 63));
  const NameId r = BitString::from_uint(m, rng.uniform(0, 63));

  const GuardNameIds g = compute_guard_name_ids(s, l, r, pk);
  CHECK(g.main == keyed_permutation(pk, s));
  CHECK(g.side_left == keyed_permutation(pk, l));
  CHECK(g.side_right == keyed_permutation(pk, r));

  CHECK_THROWS_AS(compute_guard_name_ids(BitString::from_uint(m + 1, 0), l, r, pk), Error);
}

TEST_CASE("a two-node ring gives identical side guards") {
  const int m = 8;
  const PermutationKey pk = test_perm(m);
  const StaticOverlay overlay = StaticOverlay::build({100, 200}, m);
  const LookupTable& t = overlay.table_of(100);
  REQUIRE(t.get(0, Side::Left)->numerical_id == 200);
  REQUIRE(t.get(0, Side::Right)->numerical_id == 200);
  const GuardNameIds g = compute_guard_name_ids(
      overlay.name_of(100), t.get(0, Side::Left)->name_id, t.get(0, Side::Right)->name_id, pk);
  CHECK(g.side_left == g.side_right);
}

TEST_CASE("side guards equal the main guards of ring neighbors") {
  const int m = 8;
  const PermutationKey pk = test_perm(m);
  const StaticOverlay overlay = StaticOverlay::build(
      {3, 19, 40, 77, 150, 288, 301, 444, 512, 690, 801, 923, 1000, 1555, 2000, 4095}, m);

  auto main_of = [&](NumericalId id) { return keyed_permutation(pk, overlay.name_of(id)); };

  for (const NumericalId id : overlay.ids_sorted()) {
    const LookupTable& t = overlay.table_of(id);
    const auto& left = t.get(0, Side::Left);
    const auto& right = t.get(0, Side::Right);
    REQUIRE(left.has_value());
    REQUIRE(right.has_value());
    const GuardNameIds g =
        compute_guard_name_ids(overlay.name_of(id), left->name_id, right->name_id, pk);
    CHECK(g.side_left == main_of(left->numerical_id));
    CHECK(g.side_right == main_of(right->numerical_id));
  }
}

TEST_CASE("three-node ring wraps side guards around the extremes") {
  const int m = 4;
  const PermutationKey pk = test_perm(m);
  const StaticOverlay overlay = StaticOverlay::build({20, 30, 45}, m);
  const LookupTable& t45 = overlay.table_of(45);
  REQUIRE(t45.get(0, Side::Left)->numerical_id == 30);
  REQUIRE(t45.get(0, Side::Right)->numerical_id == 20);

  const GuardNameIds g45 = compute_guard_name_ids(
      overlay.name_of(45), t45.get(0, Side::Left)->name_id, t45.get(0, Side::Right)->name_id, pk);
  CHECK(g45.side_left == keyed_permutation(pk, overlay.name_of(30)));
  CHECK(g45.side_right == keyed_permutation(pk, overlay.name_of(20)));
}

TEST_CASE("main guard names cover the whole name space on a full overlay") {
  const int m = 4;
  const PermutationKey pk = test_perm(m);
  const std::vector<NumericalId> ids = full_space_ids(m);
  REQUIRE(ids.size() == 16);

  std::set<NameId> mains;
  for (const NumericalId id : ids) {
    mains.insert(keyed_permutation(pk, hash_name_id(id, m)));
  }
  CHECK(mains.size() == 16);
}

TEST_CASE("table submission gates on authentication then proof validity") {
  Enrolled e = enroll(8, 8);
  const NumericalId subject = e.ids[2];
  const LookupTable& table = e.overlay.table_of(subject);
  const TableProof proof = honest_proof(subject, table, e.keys);

  SUBCASE("unauthenticated subject") {
    TtpCore fresh = make_core(8);
    const RegistrationGrant g = fresh.register_peer(phys("solo"), addr_of("solo"));
    try {
      fresh.submit_table(g.numerical_id, table, proof);
      FAIL("expected AuthError");
    } catch (const Error& err) {
      CHECK(err.code() == Errc::AuthError);
    }
  }

  SUBCASE("tampered proof is rejected and nothing is provisioned") {
    TableProof bad = proof;
    REQUIRE(!bad.entries.empty());
    bad.entries[0].second.s[0] ^= 0x01;
    try {
      e.core.submit_table(subject, table, bad);
      FAIL("expected ProofRejected");
    } catch (const Error& err) {
      CHECK(err.code() == Errc::ProofRejected);
    }
    try {
      e.core.provision_guard(e.ids[0], subject, 0);
      FAIL("expected ProofError");
    } catch (const Error& err) {
      CHECK(err.code() == Errc::ProofError);
    }
  }

  SUBCASE("honest submission returns permuted names and a name certificate") {
    const TableAccept acc = e.core.submit_table(subject, table, proof);
    const PermutationKey pk = test_perm(8);
    CHECK(acc.guards.main == keyed_permutation(pk, e.overlay.name_of(subject)));
    CHECK(acc.name_cert.identity == Identity::name(e.overlay.name_of(subject)));
    CHECK(verify_certificate(e.core.publish_params(), acc.name_cert));
  }
}

TEST_CASE("provisioned shares combine to the certified name key") {
  Enrolled e = enroll(8, 8);
  const NumericalId subject = e.ids[4];
  const LookupTable& table = e.overlay.table_of(subject);
  const TableAccept acc = e.core.submit_table(subject, table, honest_proof(subject, table, e.keys));

  // The subject resolves each guard name to its owner and sends it to the TTP.
  const std::array<NameId, 3> names = {acc.guards.main, acc.guards.side_left,
                                       acc.guards.side_right};
  std::vector<PartialSignature> partials;
  const Bytes msg = to_bytes("one transcript to cosign");
  std::set<int> indices;
  for (int i = 0; i < 3; ++i) {
    const NeighborEntry owner = e.overlay.search_name(subject, names[i]);
    const GuardProvision p = e.core.provision_guard(owner.numerical_id, subject, i);
    CHECK(p.subject == subject);
    CHECK(p.share.identity == Identity::name(e.overlay.name_of(subject)));
    CHECK(p.share.agg_pub == acc.name_cert.pk);
    CHECK(p.subject_table == table);
    indices.insert(p.share.index);
    partials.push_back(partial_sign(p.share, msg));
  }
  CHECK(indices == std::set<int>{0, 1, 2});

  const Signature combined = combine_partials(partials);
  CHECK(verify(Identity::name(e.overlay.name_of(subject)), acc.name_cert,
               e.core.publish_params(), msg, combined));

  SUBCASE("guard role checks") {
    try {
      e.core.provision_guard(e.ids[0], subject, 3);
      FAIL("expected ShareError");
    } catch (const Error& err) {
      CHECK(err.code() == Errc::ShareError);
    }
    TtpCore fresh = make_core(8);
    const RegistrationGrant g = fresh.register_peer(phys("outsider"), addr_of("outsider"));
    try {
      fresh.provision_guard(g.numerical_id, subject, 0);
      FAIL("expected AuthError");
    } catch (const Error& err) {
      CHECK(err.code() == Errc::AuthError);
    }
  }
}

TEST_CASE("every node of an overlay can be fully provisioned") {
  Enrolled e = enroll(12, 8);
  for (const NumericalId subject : e.ids) {
    const LookupTable& table = e.overlay.table_of(subject);
    const TableAccept acc =
        e.core.submit_table(subject, table, honest_proof(subject, table, e.keys));
    const std::array<NameId, 3> names = {acc.guards.main, acc.guards.side_left,
                                         acc.guards.side_right};
    std::set<int> indices;
    for (int i = 0; i < 3; ++i) {
      const NeighborEntry owner = e.overlay.search_name(subject, names[i]);
      indices.insert(e.core.provision_guard(owner.numerical_id, subject, i).share.index);
    }
    CHECK(indices == std::set<int>{0, 1, 2});
  }
}

TEST_CASE("ttp service round trip over the simulated network") {
  const int m = 8;
  Network net(42);
  TtpCore core = make_core(m);
  const Address ttp_addr{"ttp", 1};
  TtpService service(core, net.bind(ttp_addr));

  // Two clients register and authenticate over the wire.
  Endpoint& a = net.bind({"node-a", 1});
  Endpoint& b = net.bind({"node-b", 1});

  PublicParams params;
  const RegistrationGrant ga = ttpcall::register_peer(a, ttp_addr, phys("wire-a"), &params);
  const RegistrationGrant gb = ttpcall::register_peer(b, ttp_addr, phys("wire-b"));
  CHECK(params.to_text() == core.publish_params().to_text());
  CHECK(ga.numerical_id != gb.numerical_id);
  CHECK(verify_certificate(params, ga.certificate));

  // Re-registration over the wire is idempotent too.
  const RegistrationGrant ga2 = ttpcall::register_peer(a, ttp_addr, phys("wire-a"));
  CHECK(ga2.numerical_id == ga.numerical_id);
  CHECK(ga2.certificate == ga.certificate);

  // Table submission before authentication is refused remotely.
  const StaticOverlay overlay = StaticOverlay::build({ga.numerical_id, gb.numerical_id}, m);
  std::map<NumericalId, SigningKey> keys{{ga.numerical_id, ga.signing_key},
                                         {gb.numerical_id, gb.signing_key}};
  const LookupTable& table = overlay.table_of(ga.numerical_id);
  const TableProof proof = honest_proof(ga.numerical_id, table, keys);
  try {
    ttpcall::submit_table(a, ttp_addr, ga.numerical_id, table, proof);
    FAIL("expected AuthError");
  } catch (const Error& err) {
    CHECK(err.code() == Errc::AuthError);
  }

  ttpcall::authenticate(a, ttp_addr, phys("wire-a"), ga.signing_key);
  ttpcall::authenticate(b, ttp_addr, phys("wire-b"), gb.signing_key);
  CHECK(core.authenticated(ga.numerical_id));
  CHECK(core.authenticated(gb.numerical_id));

  const TableAccept acc = ttpcall::submit_table(a, ttp_addr, ga.numerical_id, table, proof);
  CHECK(acc.name_cert.identity == Identity::name(overlay.name_of(ga.numerical_id)));

  // All three provisions fetched over the wire; partials combine and verify.
  const std::array<NameId, 3> names = {acc.guards.main, acc.guards.side_left,
                                       acc.guards.side_right};
  const Bytes msg = to_bytes("wire transcript");
  std::vector<PartialSignature> partials;
  for (int i = 0; i < 3; ++i) {
    const NeighborEntry owner = overlay.search_name(ga.numerical_id, names[i]);
    const GuardProvision p = ttpcall::guard_connect(b, ttp_addr, owner.numerical_id,
                                                    ga.numerical_id, i);
    CHECK(p.share.index == i);
    CHECK(p.subject_table == table);
    CHECK(p.subject_table_proof == proof);
    partials.push_back(partial_sign(p.share, msg));
  }
  CHECK(verify(Identity::name(overlay.name_of(ga.numerical_id)), acc.name_cert, params, msg,
               combine_partials(partials)));

  // Unknown identities fail the challenge flow remotely.
  CHECK_THROWS_AS(ttpcall::begin_auth(a, ttp_addr, phys("wire-ghost")), Error);
}
