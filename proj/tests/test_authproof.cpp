#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "chain_fixture.hpp"
#include "guard/authproof.hpp"
#include "guard/errors.hpp"

using namespace guard;
using testfix::ChainBench;

namespace {

Nonce nonce_of_byte(std::uint8_t last) {
  Nonce n;
  n.v[15] = last;
  return n;
}

RoutingTranscript sample_transcript() {
  RoutingTranscript t;
  t.R = 0x2d;
  t.T = 0x1e;
  t.I = 0x2d;
  t.Q = 0x15;
  t.N = nonce_of_byte(1);
  return t;
}

}  // namespace

TEST_CASE("transcript grammar matches the documented example") {
  CHECK(encode_transcript(sample_transcript()) ==
        "000000000000002d||null||000000000000001e||000000000000002d||0000000000000015||"
        "00000000000000000000000000000001");
}

TEST_CASE("transcript encoding roundtrips over random values") {
  RngStream rng(4, "transcripts");
  for (int i = 0; i < 1000; ++i) {
    RoutingTranscript t;
    t.R = rng.next_u64();
    if (rng.chance(0.5)) t.F = rng.next_u64();
    if (rng.chance(0.5)) t.T = rng.next_u64();
    t.I = rng.next_u64();
    t.Q = rng.next_u64();
    t.N = random_nonce(rng);
    CHECK(decode_transcript(encode_transcript(t)) == t);
  }
}

TEST_CASE("transcripts differing only in the nonce encode differently") {
  RoutingTranscript a = sample_transcript();
  RoutingTranscript b = a;
  b.N = nonce_of_byte(2);
  CHECK(encode_transcript(a) != encode_transcript(b));
}

TEST_CASE("transcript decode is strict") {
  CHECK_THROWS_AS(decode_transcript("only||four||fields||here"), Error);
  CHECK_THROWS_AS(
      decode_transcript("000000000000002d||null||null||000000000000002d||0000000000000015||"
                        "00000000000000000000000000000001||extra"),
      Error);
  CHECK_THROWS_AS(
      decode_transcript("000000000000002D||null||null||000000000000002d||0000000000000015||"
                        "00000000000000000000000000000001"),
      Error);
  CHECK_THROWS_AS(
      decode_transcript("000000000000002d||null||null||000000000000002d||0000000000000015||"
                        "0000000000000000000000000000001"),
      Error);
}

TEST_CASE("hop transcript construction covers head, middle and tail shapes") {
  NeighborEntry to30{30, BitString::from_string("1010"), {}};
  RoutingTranscript head =
      make_hop_transcript(45, std::nullopt, RoutingDecision::forward(to30), 45, 21,
                          nonce_of_byte(3));
  CHECK(!head.F.has_value());
  CHECK(head.T == 30U);

  RoutingTranscript tail = make_hop_transcript(20, 30, RoutingDecision::terminate(), 45, 21,
                                               nonce_of_byte(3));
  CHECK(tail.F == 30U);
  CHECK(!tail.T.has_value());

  RoutingTranscript solo = make_hop_transcript(45, std::nullopt, RoutingDecision::terminate(),
                                               45, 45, nonce_of_byte(3));
  CHECK(!solo.F.has_value());
  CHECK(!solo.T.has_value());
}

TEST_CASE("routing proof and chain serialization roundtrip") {
  ChainBench bench(StaticOverlay::build({20, 30, 45}, 8), 8);
  ProofChain chain = bench.honest_chain(45, 21, nonce_of_byte(7));
  REQUIRE(chain.size() == 3);
  CHECK(RoutingProof::from_bytes(chain[0].encoded()) == chain[0]);
  CHECK(decode_chain(encode_chain(chain)) == chain);
}

TEST_CASE("nonce ledger records, detects and evicts") {
  NonceLedger ledger(4);
  CHECK(!ledger.contains(1, nonce_of_byte(1)));
  ledger.record(1, nonce_of_byte(1));
  CHECK(ledger.contains(1, nonce_of_byte(1)));
  ledger.record(1, nonce_of_byte(1));  // idempotent
  CHECK(ledger.size() == 1);
  for (std::uint8_t i = 2; i <= 5; ++i) ledger.record(1, nonce_of_byte(i));
  CHECK(ledger.size() == 4);
  CHECK(!ledger.contains(1, nonce_of_byte(1)));  // evicted first-in
  CHECK(ledger.contains(1, nonce_of_byte(5)));
}

TEST_CASE("honest three hop chain is accepted and replay is rejected") {
  ChainBench bench(StaticOverlay::build({20, 30, 45}, 8), 8);
  const Nonce n = nonce_of_byte(9);
  ProofChain chain = bench.honest_chain(45, 21, n);
  REQUIRE(chain.size() == 3);
  NonceLedger ledger;
  Verdict v = verify_proof_chain(chain, bench.params(), 45, 21, n, ledger);
  CHECK(v.accepted);
  Verdict again = verify_proof_chain(chain, bench.params(), 45, 21, n, ledger);
  CHECK(!again.accepted);
  CHECK(again.reason == RejectReason::ReplayedNonce);
}

TEST_CASE("empty chain and bad heads are rejected") {
  ChainBench bench(StaticOverlay::build({20, 30, 45}, 8), 8);
  const Nonce n = nonce_of_byte(10);
  NonceLedger ledger;
  Verdict v = verify_proof_chain({}, bench.params(), 45, 21, n, ledger);
  CHECK(!v.accepted);
  CHECK(v.reason == RejectReason::BadHead);

  // Head whose F is present, honestly signed.
  RoutingTranscript t = make_hop_transcript(45, 30, RoutingDecision::terminate(), 45, 21, n);
  ProofChain chain = {bench.make_proof(t)};
  v = verify_proof_chain(chain, bench.params(), 45, 21, n, ledger);
  CHECK(!v.accepted);
  CHECK(v.reason == RejectReason::BadHead);

  // Head router is not the expected initiator.
  RoutingTranscript t2 = make_hop_transcript(30, std::nullopt, RoutingDecision::terminate(),
                                             45, 21, n);
  ProofChain chain2 = {bench.make_proof(t2)};
  v = verify_proof_chain(chain2, bench.params(), 45, 21, n, ledger);
  CHECK(!v.accepted);
  CHECK(v.reason == RejectReason::BadHead);
}

TEST_CASE("broken linkage is rejected at the offending index") {
  ChainBench bench(StaticOverlay::build({20, 30, 45}, 8), 8);
  const Nonce n = nonce_of_byte(11);
  NeighborEntry to30{30, hash_name_id(30, 8), {}};
  // Honestly signed transcripts whose T/R linkage does not connect.
  RoutingTranscript t0 =
      make_hop_transcript(45, std::nullopt, RoutingDecision::forward(to30), 45, 21, n);
  RoutingTranscript t1 = make_hop_transcript(20, 45, RoutingDecision::terminate(), 45, 21, n);
  ProofChain chain = {bench.make_proof(t0), bench.make_proof(t1)};
  NonceLedger ledger;
  Verdict v = verify_proof_chain(chain, bench.params(), 45, 21, n, ledger);
  CHECK(!v.accepted);
  CHECK(v.reason == RejectReason::BrokenLink);
  CHECK(v.index == 1);
}

TEST_CASE("transcripts disagreeing on I Q or N are a field mismatch") {
  ChainBench bench(StaticOverlay::build({20, 30, 45}, 8), 8);
  const Nonce n = nonce_of_byte(12);
  NeighborEntry to20{20, hash_name_id(20, 8), {}};
  RoutingTranscript t0 =
      make_hop_transcript(45, std::nullopt, RoutingDecision::forward(to20), 45, 21, n);
  RoutingTranscript t1 = make_hop_transcript(20, 45, RoutingDecision::terminate(), 45, 22, n);
  ProofChain chain = {bench.make_proof(t0), bench.make_proof(t1)};
  NonceLedger ledger;
  Verdict v = verify_proof_chain(chain, bench.params(), 45, 21, n, ledger);
  CHECK(!v.accepted);
  CHECK(v.reason == RejectReason::FieldMismatch);
  CHECK(v.index == 1);
}

TEST_CASE("pending tails need the relaxed mode") {
  ChainBench bench(StaticOverlay::build({20, 30, 45}, 8), 8);
  const Nonce n = nonce_of_byte(13);
  ProofChain chain = bench.honest_chain(45, 21, n);
  ProofChain prefix(chain.begin(), chain.end() - 1);  // tail still has T set
  NonceLedger ledger;
  Verdict strict = verify_proof_chain(prefix, bench.params(), 45, 21, n, ledger);
  CHECK(!strict.accepted);
  CHECK(strict.reason == RejectReason::BadTail);

  NonceLedger ledger2;
  VerifyOptions relaxed;
  relaxed.relax_tail = true;
  CHECK(verify_proof_chain(prefix, bench.params(), 45, 21, n, ledger2, relaxed).accepted);
}

TEST_CASE("flipped signatures are rejected with the matching reason") {
  ChainBench bench(StaticOverlay::build({20, 30, 45}, 8), 8);
  const Nonce n = nonce_of_byte(14);
  ProofChain chain = bench.honest_chain(45, 21, n);

  ProofChain bad = chain;
  bad[1].sig_numerical.s[5] ^= 0x40;
  NonceLedger l1;
  Verdict v = verify_proof_chain(bad, bench.params(), 45, 21, n, l1);
  CHECK(!v.accepted);
  CHECK(v.reason == RejectReason::BadNumericalSig);
  CHECK(v.index == 1);

  bad = chain;
  bad[2].sig_name.R[0] ^= 0x01;
  NonceLedger l2;
  v = verify_proof_chain(bad, bench.params(), 45, 21, n, l2);
  CHECK(!v.accepted);
  CHECK(v.reason == RejectReason::BadNameSig);
  CHECK(v.index == 2);
}

TEST_CASE("global audit catches a premature termination") {
  ChainBench bench(StaticOverlay::build({20, 30, 45}, 8), 8);
  const Nonce n = nonce_of_byte(15);
  // Router 45 claims to terminate a query whose true answer is 20.
  RoutingTranscript t = make_hop_transcript(45, std::nullopt, RoutingDecision::terminate(),
                                            45, 21, n);
  ProofChain chain = {bench.make_proof(t)};
  NonceLedger ledger;
  VerifyOptions opts;
  const std::vector<NumericalId> ids = {20, 30, 45};
  opts.global_ids = &ids;
  Verdict v = verify_proof_chain(chain, bench.params(), 45, 21, n, ledger, opts);
  CHECK(!v.accepted);
  CHECK(v.reason == RejectReason::WrongTermination);
}

TEST_CASE("verify cache preserves verdicts") {
  ChainBench bench(StaticOverlay::build({20, 30, 45}, 8), 8);
  const Nonce n = nonce_of_byte(16);
  ProofChain chain = bench.honest_chain(45, 21, n);
  ProofVerifyCache cache;
  VerifyOptions opts;
  opts.cache = &cache;

  NonceLedger l1;
  CHECK(verify_proof_chain(chain, bench.params(), 45, 21, n, l1, opts).accepted);
  NonceLedger l2;
  CHECK(verify_proof_chain(chain, bench.params(), 45, 21, n, l2, opts).accepted);

  ProofChain bad = chain;
  bad[0].sig_name.s[3] ^= 0x08;
  NonceLedger l3;
  Verdict v = verify_proof_chain(bad, bench.params(), 45, 21, n, l3, opts);
  CHECK(!v.accepted);
  CHECK(v.reason == RejectReason::BadNameSig);
}

TEST_CASE("guards cosign exactly the prescribed hop") {
  ChainBench bench(StaticOverlay::build({20, 30, 45}, 8), 8);
  const Nonce n = nonce_of_byte(17);
  const NumericalId subject = 45;
  auto shares = split_3of3(bench.name_keys(subject).key);

  GuardProvision g;
  g.subject = subject;
  g.share = shares[0];
  g.subject_table = bench.overlay().table_of(subject);

  RoutingDecision d = local_next_hop(g.subject_table, subject, 21);
  RoutingTranscript honest = make_hop_transcript(subject, std::nullopt, d, subject, 21, n);
  auto verdict = guard_evaluate(g, honest);
  REQUIRE(std::holds_alternative<PartialSignature>(verdict));

  // All three guards together produce the verifying name signature.
  std::vector<PartialSignature> parts;
  for (const KeyShare& sh : shares) {
    GuardProvision gi = g;
    gi.share = sh;
    auto vi = guard_evaluate(gi, honest);
    REQUIRE(std::holds_alternative<PartialSignature>(vi));
    parts.push_back(std::get<PartialSignature>(vi));
  }
  Signature name_sig = combine_partials(parts);
  const Identity nid = Identity::name(hash_name_id(subject, 8));
  CHECK(verify(nid, bench.name_keys(subject).cert, bench.params(),
               to_bytes(encode_transcript(honest)), name_sig));

  // A successor that is not even a neighbor.
  RoutingTranscript fake = honest;
  fake.T = 999;
  CHECK(std::holds_alternative<GuardRefusal>(guard_evaluate(g, fake)));

  // A real neighbor that is not the prescribed hop.
  RoutingTranscript wrong_level = honest;
  wrong_level.T = g.subject_table.get(0, Side::Right)->numerical_id;
  if (wrong_level.T != honest.T) {
    CHECK(std::holds_alternative<GuardRefusal>(guard_evaluate(g, wrong_level)));
  }

  // Terminate claim when a forward is prescribed.
  RoutingTranscript stop = honest;
  stop.T.reset();
  CHECK(std::holds_alternative<GuardRefusal>(guard_evaluate(g, stop)));

  // Wrong subject is an error, not a refusal.
  RoutingTranscript other = honest;
  other.R = 30;
  CHECK_THROWS_AS((void)guard_evaluate(g, other), Error);
}

TEST_CASE("guard evaluation agrees with local routing on random overlays") {
  ChainBench bench(StaticOverlay::build(full_space_ids(4), 4), 4);
  const StaticOverlay& o = bench.overlay();
  RngStream rng(31, "guard-agreement");
  for (int iter = 0; iter < 300; ++iter) {
    const NumericalId subject =
        o.ids_sorted()[rng.uniform(0, o.ids_sorted().size() - 1)];
    const NumericalId q = rng.uniform(0, 2000);
    GuardProvision g;
    g.subject = subject;
    g.share = split_3of3(bench.name_keys(subject).key)[rng.uniform(0, 2)];
    g.subject_table = o.table_of(subject);

    const RoutingDecision d = local_next_hop(g.subject_table, subject, q);
    RoutingTranscript t =
        make_hop_transcript(subject, std::nullopt, d, subject, q, random_nonce(rng));
    CHECK(std::holds_alternative<PartialSignature>(guard_evaluate(g, t)));

    RoutingTranscript off = t;
    if (off.T.has_value()) {
      off.T = *off.T + 1 + rng.uniform(0, 5);
    } else {
      off.T = subject + 1;
    }
    CHECK(std::holds_alternative<GuardRefusal>(guard_evaluate(g, off)));
  }
}
