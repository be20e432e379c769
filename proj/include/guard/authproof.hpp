#pragma once

#include <deque>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "guard/crypto.hpp"
#include "guard/ids.hpp"
#include "guard/overlay.hpp"

namespace guard {

/// One hop's routing record: router, predecessor, successor, initiator,
/// query, nonce. F is absent only at the chain head; T only at the tail.
struct RoutingTranscript {
  NumericalId R = 0;
  std::optional<NumericalId> F;
  std::optional<NumericalId> T;
  NumericalId I = 0;
  NumericalId Q = 0;
  Nonce N;

  friend bool operator==(const RoutingTranscript&, const RoutingTranscript&) = default;
};

/// Canonical text form, the exact byte string both signatures cover:
/// <R:hex16>||<F:hex16|null>||<T:hex16|null>||<I:hex16>||<Q:hex16>||<N:hex32>
std::string encode_transcript(const RoutingTranscript& t);
RoutingTranscript decode_transcript(std::string_view text);

RoutingTranscript make_hop_transcript(NumericalId self, std::optional<NumericalId> from,
                                      const RoutingDecision& decision, NumericalId I,
                                      NumericalId Q, const Nonce& N);

/// Transcript plus the router's own numerical-id signature and the
/// guard-combined name-id signature, each with its certificate.
struct RoutingProof {
  RoutingTranscript transcript;
  Signature sig_numerical;
  Certificate cert_numerical;
  Signature sig_name;
  Certificate cert_name;

  Bytes encoded() const;
  void write(ByteWriter& w) const;
  static RoutingProof from_reader(ByteReader& r);
  static RoutingProof from_bytes(std::span<const std::uint8_t> b);
  friend bool operator==(const RoutingProof&, const RoutingProof&) = default;
};

using ProofChain = std::vector<RoutingProof>;

Bytes encode_chain(const ProofChain& chain);
ProofChain decode_chain(std::span<const std::uint8_t> b);

/// Bounded FIFO set of (initiator, nonce) pairs seen by one verifier.
class NonceLedger {
 public:
  explicit NonceLedger(std::size_t capacity = 65536);

  bool contains(NumericalId initiator, const Nonce& n) const;
  void record(NumericalId initiator, const Nonce& n);
  std::size_t size() const { return set_.size(); }

 private:
  std::size_t cap_;
  std::set<std::pair<NumericalId, Nonce>> set_;
  std::deque<std::pair<NumericalId, Nonce>> fifo_;
};

enum class RejectReason {
  BadNumericalSig,
  BadNameSig,
  BrokenLink,
  FieldMismatch,
  BadHead,
  BadTail,
  ReplayedNonce,
  WrongTermination,
};

const char* reject_reason_name(RejectReason r);

struct Verdict {
  bool accepted = false;
  RejectReason reason = RejectReason::BadHead;  // meaningful when rejected
  int index = 0;                                // earliest failing proof index

  static Verdict accept() { return Verdict{true, RejectReason::BadHead, 0}; }
  static Verdict reject(RejectReason r, int idx) { return Verdict{false, r, idx}; }
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Remembers proofs whose two signatures already verified under the current
/// params, so honest chain prefixes are not re-checked hop after hop.
/// Chain-level structure (linkage, head, tail, replay) is never cached.
class ProofVerifyCache {
 public:
  explicit ProofVerifyCache(std::size_t capacity = 8192);

  bool known_valid(const Bytes& digest) const;
  void mark_valid(const Bytes& digest);

 private:
  std::size_t cap_;
  std::set<Bytes> set_;
  std::deque<Bytes> fifo_;
};

struct VerifyOptions {
  /// In-flight chains still carry a pending T on their last proof.
  bool relax_tail = false;
  /// Test-only global audit: with the sorted overlay ids, additionally check
  /// the tail router is the true greatest id <= Q. Verifiers in the protocol
  /// have no such view.
  const std::vector<NumericalId>* global_ids = nullptr;
  ProofVerifyCache* cache = nullptr;
};

/// Full chain validation. On Accept the (I, N) pair is recorded in the
/// ledger; a pair already present rejects with ReplayedNonce before any
/// signature work.
Verdict verify_proof_chain(const ProofChain& chain, const PublicParams& params,
                           NumericalId expected_I, NumericalId expected_Q,
                           const Nonce& expected_N, NonceLedger& ledger,
                           const VerifyOptions& opts = {});

/// What the TTP deals to each of a subject's three guards: a share of the
/// subject's name-id signing key and a copy of its table (with proof).
struct GuardProvision {
  NumericalId subject = 0;
  KeyShare share;
  LookupTable subject_table;
  TableProof subject_table_proof;
};

struct GuardRefusal {
  std::string reason;
};

/// The guard-side check: recompute the prescribed hop from the subject's
/// table and cosign only an exactly matching transcript.
std::variant<PartialSignature, GuardRefusal> guard_evaluate(const GuardProvision& g,
                                                            const RoutingTranscript& t);

}  // namespace guard
