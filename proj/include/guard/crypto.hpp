#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "guard/bytes.hpp"
#include "guard/ids.hpp"
#include "guard/rng.hpp"

namespace guard {

Bytes sha256(std::span<const std::uint8_t> data);
Bytes sha512(std::span<const std::uint8_t> data);

enum class IdentityKind : std::uint8_t { Numerical = 1, Name = 2 };

/// An identifier a signature can be bound to. Numerical identities carry the
/// canonical 16-hex-char encoding of the node id; name identities carry the
/// packed bit string.
struct Identity {
  IdentityKind kind = IdentityKind::Numerical;
  Bytes value;

  static Identity numerical(NumericalId id);
  static Identity name(const NameId& n);

  NumericalId as_numerical() const;
  NameId as_name() const;

  /// Injective framing used in signed records and key derivation.
  Bytes encoded() const;
  /// EncodingError unless the value is canonical for the kind.
  void validate() const;

  friend bool operator==(const Identity&, const Identity&) = default;
};

struct MasterSecret {
  Bytes seed;
  /// ParamError if the seed is shorter than 32 bytes.
  static MasterSecret from_seed(Bytes seed);
};

struct PublicKey {
  std::array<std::uint8_t, 32> point{};
  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

/// Schnorr signature over ristretto255: commitment R and response s.
struct Signature {
  std::array<std::uint8_t, 32> R{};
  std::array<std::uint8_t, 32> s{};

  Bytes encoded() const;
  static Signature from_bytes(std::span<const std::uint8_t> b);
  friend bool operator==(const Signature&, const Signature&) = default;
};

struct SigningKey {
  Identity identity;
  std::array<std::uint8_t, 32> scalar{};
  std::array<std::uint8_t, 32> nonce_seed{};
  PublicKey pub;
};

/// Issuer-signed binding of an identity to its verification key.
struct Certificate {
  Identity identity;
  PublicKey pk;
  Signature sig;

  Bytes encoded() const;
  static Certificate from_bytes(std::span<const std::uint8_t> b);
  friend bool operator==(const Certificate&, const Certificate&) = default;
};

/// Published by the registration authority; everything a verifier needs.
struct PublicParams {
  std::string hash_alg = "sha256";
  int m = 0;
  PublicKey ttp_pk;

  std::string to_text() const;
  static PublicParams from_text(std::string_view text);
};

/// One of three additive shares of a signing key. nonce_seed is common to the
/// whole split so shareholders derive the same aggregate commitment without
/// talking to each other.
struct KeyShare {
  int index = 0;
  Identity identity;
  std::array<std::uint8_t, 32> scalar{};
  std::array<std::uint8_t, 32> nonce_seed{};
  PublicKey agg_pub;
};

struct PartialSignature {
  int index = 0;
  std::array<std::uint8_t, 32> R{};
  std::array<std::uint8_t, 32> s{};

  Bytes encoded() const;
  static PartialSignature from_bytes(std::span<const std::uint8_t> b);
  friend bool operator==(const PartialSignature&, const PartialSignature&) = default;
};

struct Nonce {
  std::array<std::uint8_t, 16> v{};

  std::string hex() const;
  static Nonce from_hex(std::string_view h);
  friend auto operator<=>(const Nonce&, const Nonce&) = default;
};

struct PermutationKey {
  Bytes key;
  int m = 0;
};

/// The root key all certificates chain to. Deterministic in the master secret.
SigningKey ttp_signing_key(const MasterSecret& master);

SigningKey derive_identity_key(const MasterSecret& master, const Identity& id);
Certificate issue_certificate(const SigningKey& issuer, const Identity& id, const PublicKey& pk);
bool verify_certificate(const PublicParams& params, const Certificate& cert);

struct IdentityKeypair {
  SigningKey key;
  PublicKey pub;
  Certificate cert;
};
IdentityKeypair derive_identity_keypair(const MasterSecret& master, const Identity& id);

Signature sign(const SigningKey& key, std::span<const std::uint8_t> msg);
/// True iff cert binds exactly this identity, the issuer signed the cert, and
/// sig verifies against the certified key. Never throws; false on any defect.
bool verify(const Identity& id, const Certificate& cert, const PublicParams& params,
            std::span<const std::uint8_t> msg, const Signature& sig);

std::array<KeyShare, 3> split_3of3(const SigningKey& key);
PartialSignature partial_sign(const KeyShare& share, std::span<const std::uint8_t> msg);
/// Requires exactly three partials with indices {0,1,2} (ShareError) over the
/// same message, which all honest partials expose as an equal R (CombineError).
Signature combine_partials(const std::vector<PartialSignature>& parts);

/// First m bits of the digest of the canonical numerical-id encoding.
NameId hash_name_id(NumericalId num, int m);

/// Keyed bijection on the m-bit space (Feistel network, 10 rounds).
NameId keyed_permutation(const PermutationKey& pk, const NameId& name);
NameId keyed_permutation_inverse(const PermutationKey& pk, const NameId& name);

Nonce random_nonce(RngStream& rng);

}  // namespace guard
