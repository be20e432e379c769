#pragma once

// Test fixture that signs honest proof chains directly from a StaticOverlay,
// bypassing the networked protocol: the fixture owns the master secret, so it
// can play every router and every guard.

#include <map>

#include "guard/authproof.hpp"
#include "guard/overlay.hpp"

namespace guard::testfix {

class ChainBench {
 public:
  ChainBench(StaticOverlay overlay, int m)
      : overlay_(std::move(overlay)),
        master_(MasterSecret::from_seed(to_bytes("chain bench master secret 32+ bytes long"))) {
    params_.hash_alg = "sha256";
    params_.m = m;
    params_.ttp_pk = ttp_signing_key(master_).pub;
  }

  const StaticOverlay& overlay() const { return overlay_; }
  const PublicParams& params() const { return params_; }

  const IdentityKeypair& numerical_keys(NumericalId id) {
    auto it = num_keys_.find(id);
    if (it == num_keys_.end()) {
      it = num_keys_.emplace(id, derive_identity_keypair(master_, Identity::numerical(id))).first;
    }
    return it->second;
  }

  const IdentityKeypair& name_keys(NumericalId id) {
    auto it = name_keys_.find(id);
    if (it == name_keys_.end()) {
      const Identity nid = Identity::name(hash_name_id(id, params_.m));
      it = name_keys_.emplace(id, derive_identity_keypair(master_, nid)).first;
    }
    return it->second;
  }

  RoutingProof make_proof(const RoutingTranscript& t) {
    RoutingProof p;
    p.transcript = t;
    const Bytes msg = to_bytes(encode_transcript(t));
    const IdentityKeypair& nk = numerical_keys(t.R);
    p.sig_numerical = sign(nk.key, msg);
    p.cert_numerical = nk.cert;
    const IdentityKeypair& mk = name_keys(t.R);
    auto shares = split_3of3(mk.key);
    std::vector<PartialSignature> parts;
    for (const KeyShare& sh : shares) parts.push_back(partial_sign(sh, msg));
    p.sig_name = combine_partials(parts);
    p.cert_name = mk.cert;
    return p;
  }

  ProofChain honest_chain(NumericalId from, NumericalId q, const Nonce& n) {
    const SearchPath path = overlay_.search_numerical(from, q);
    ProofChain chain;
    std::optional<NumericalId> prev;
    for (NumericalId hop : path.hops) {
      const RoutingDecision d = local_next_hop(overlay_.table_of(hop), hop, q);
      chain.push_back(make_proof(make_hop_transcript(hop, prev, d, from, q, n)));
      prev = hop;
    }
    return chain;
  }

 private:
  StaticOverlay overlay_;
  MasterSecret master_;
  PublicParams params_;
  std::map<NumericalId, IdentityKeypair> num_keys_;
  std::map<NumericalId, IdentityKeypair> name_keys_;
};

}  // namespace guard::testfix
