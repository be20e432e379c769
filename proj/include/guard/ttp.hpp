#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>

#include "guard/authproof.hpp"
#include "guard/crypto.hpp"
#include "guard/overlay.hpp"
#include "guard/transport.hpp"

namespace guard {

/// Harness-supplied token standing in for an unforgeable hardware identity.
using PhysicalIdentity = Bytes;

struct RegistrationGrant {
  NumericalId numerical_id = 0;
  SigningKey signing_key;   // for the numerical identity
  Certificate certificate;  // binds that identity to signing_key's public key
};

struct ChallengeSet {
  std::uint64_t session = 0;
  std::array<Nonce, 3> challenges;
};

struct GuardNameIds {
  NameId main;
  NameId side_left;
  NameId side_right;
};

/// main = perm(subject); sides = perm of the level-0 neighbors' names. All
/// three inputs must have length pk.m (ParamError).
GuardNameIds compute_guard_name_ids(const NameId& subject_name, const NameId& level0_left,
                                    const NameId& level0_right, const PermutationKey& pk);

struct TableAccept {
  GuardNameIds guards;
  /// Certificate for the subject's name identity. The subject attaches it to
  /// its routing proofs; the matching signing key exists only as guard shares.
  Certificate name_cert;
};

/// Registration, authentication and guard-assignment logic, independent of
/// any wire format. Single-threaded by design.
class TtpCore {
 public:
  /// id_bits narrows the address-digest truncation below 64 so collision
  /// handling is reachable in tests; production width is the default.
  TtpCore(MasterSecret master, PermutationKey perm, int m, std::uint64_t seed,
          int id_bits = 64);

  const PublicParams& publish_params() const { return params_; }

  /// Issues a numerical id from the digest of addr, probing +1 (mod the id
  /// space) past previously issued ids. Same phys re-registers to the
  /// identical grant; a different addr for a known phys is BindingError.
  RegistrationGrant register_peer(const PhysicalIdentity& phys, const Address& addr);

  /// Fresh random challenges for a registered phys (else UnknownIdentity).
  ChallengeSet begin_auth(const PhysicalIdentity& phys);
  /// All three signatures must verify under the registrant's numerical
  /// identity; any defect is AuthError. Sessions are single-use.
  bool complete_auth(std::uint64_t session, const std::array<Signature, 3>& sigs);
  bool authenticated(NumericalId id) const { return authenticated_.count(id) > 0; }

  /// True iff every present table entry carries a signature by that slot's
  /// neighbor over the canonical attestation for (owner, level, side).
  bool verify_table_proof(NumericalId owner, const LookupTable& table,
                          const TableProof& proof) const;

  /// Gate for guard assignment: subject must be authenticated (AuthError) and
  /// the proof must validate (ProofRejected). Stores the table for later
  /// provisioning and returns the three guard name ids plus the subject's
  /// name certificate.
  TableAccept submit_table(NumericalId subject, const LookupTable& table,
                           const TableProof& proof);

  /// Deals share_index of the subject's name key to an authenticated guard,
  /// with copies of the subject's table and proof. Requires a prior accepted
  /// submit_table for the subject.
  GuardProvision provision_guard(NumericalId guard, NumericalId subject, int share_index);

  std::optional<NumericalId> id_of(const PhysicalIdentity& phys) const;

 private:
  struct Registration {
    Address addr;
    NumericalId numerical_id;
  };
  struct AuthSession {
    NumericalId numerical_id;
    std::array<Nonce, 3> challenges;
  };

  MasterSecret master_;
  PermutationKey perm_;
  PublicParams params_;
  int id_bits_;
  RngStream rng_;
  std::uint64_t next_session_ = 1;
  std::map<Bytes, Registration> by_phys_;
  std::set<NumericalId> issued_;
  std::map<std::uint64_t, AuthSession> sessions_;
  std::set<NumericalId> authenticated_;
  std::map<NumericalId, std::pair<LookupTable, TableProof>> accepted_tables_;
};

/// Wire message kinds served by the TTP endpoint. PROVISION is the response
/// to GUARD_CONNECT; the others reply in kind.
enum class TtpMsg : std::uint8_t {
  REGISTER = 1,
  CHALLENGE = 2,
  CHALLENGE_RESPONSE = 3,
  TABLE_SUBMIT = 4,
  GUARD_CONNECT = 5,
  PROVISION = 6,
};

/// Response bodies open with a status byte: 0 for success, otherwise the
/// Errc value that aborted the request.
Bytes ttp_status_ok(std::span<const std::uint8_t> payload);
Bytes ttp_status_err(Errc code);
/// Strips the status byte, raising Error on a non-zero status.
Bytes ttp_unwrap(std::span<const std::uint8_t> response_body);

/// Serves TtpCore over a transport endpoint.
class TtpService {
 public:
  TtpService(TtpCore& core, Endpoint& ep);

  const Address& address() const { return ep_.address(); }

 private:
  void handle(const Envelope& env);

  TtpCore& core_;
  Endpoint& ep_;
};

/// Client-side calls matching TtpService's wire schema; each performs one
/// blocking round trip from `ep` and decodes the response.
namespace ttpcall {

RegistrationGrant register_peer(Endpoint& ep, const Address& ttp, const PhysicalIdentity& phys,
                                PublicParams* params_out = nullptr);
ChallengeSet begin_auth(Endpoint& ep, const Address& ttp, const PhysicalIdentity& phys);
void complete_auth(Endpoint& ep, const Address& ttp, std::uint64_t session,
                   const std::array<Signature, 3>& sigs);
/// Runs the whole challenge-response exchange with the grant's key.
void authenticate(Endpoint& ep, const Address& ttp, const PhysicalIdentity& phys,
                  const SigningKey& key);
TableAccept submit_table(Endpoint& ep, const Address& ttp, NumericalId subject,
                         const LookupTable& table, const TableProof& proof);
GuardProvision guard_connect(Endpoint& ep, const Address& ttp, NumericalId guard,
                             NumericalId subject, int share_index);

}  // namespace ttpcall

}  // namespace guard
