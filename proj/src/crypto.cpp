#include "guard/crypto.hpp"

#include <sodium.h>

#include <charconv>
#include <stdexcept>

#include "guard/errors.hpp"

namespace guard {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) {
    throw std::runtime_error("libsodium initialization failed");
  }
}

using Scalar = std::array<std::uint8_t, 32>;
using Point = std::array<std::uint8_t, 32>;

Scalar reduce64(const Bytes& h) {
  Scalar out{};
  crypto_core_ristretto255_scalar_reduce(out.data(), h.data());
  return out;
}

Scalar hash_to_scalar(const ByteWriter& framing) { return reduce64(sha512(framing.peek())); }

Point base_mul(const Scalar& n) {
  Point p{};
  if (crypto_scalarmult_ristretto255_base(p.data(), n.data()) != 0) {
    throw Error(Errc::ParamError, "degenerate scalar");
  }
  return p;
}

Scalar challenge(const Point& R, const Point& X, std::span<const std::uint8_t> msg) {
  ByteWriter w;
  w.raw(to_bytes("guard.chal.v1"));
  w.raw(R);
  w.raw(X);
  w.raw(msg);
  return hash_to_scalar(w);
}

// The scalarmult below masks bit 255 of its input, so s and s + 2^255 would
// verify identically; only the canonical representative mod the group order
// is admissible.
bool scalar_canonical(const Scalar& s) {
  std::array<std::uint8_t, 64> wide{};
  std::copy(s.begin(), s.end(), wide.begin());
  Scalar reduced{};
  crypto_core_ristretto255_scalar_reduce(reduced.data(), wide.data());
  return reduced == s;
}

bool schnorr_verify(const Point& X, std::span<const std::uint8_t> msg, const Signature& sig) {
  ensure_sodium();
  if (!scalar_canonical(sig.s)) return false;
  if (crypto_core_ristretto255_is_valid_point(sig.R.data()) != 1) return false;
  if (crypto_core_ristretto255_is_valid_point(X.data()) != 1) return false;
  const Scalar e = challenge(sig.R, X, msg);
  Point sG{};
  if (crypto_scalarmult_ristretto255_base(sG.data(), sig.s.data()) != 0) return false;
  Point eX{};
  if (crypto_scalarmult_ristretto255(eX.data(), e.data(), X.data()) != 0) return false;
  Point rhs{};
  if (crypto_core_ristretto255_add(rhs.data(), sig.R.data(), eX.data()) != 0) return false;
  return sG == rhs;
}

Bytes cert_binding(const Identity& id, const PublicKey& pk) {
  ByteWriter w;
  w.raw(to_bytes("guard.cert.v1"));
  w.raw(id.encoded());
  w.raw(pk.point);
  return w.take();
}

BitString subrange(const BitString& b, int from, int count) {
  BitString out = BitString::zeros(count);
  for (int i = 0; i < count; ++i) out.set_bit(i, b.bit(from + i));
  return out;
}

}  // namespace

Bytes sha256(std::span<const std::uint8_t> data) {
  ensure_sodium();
  Bytes out(crypto_hash_sha256_BYTES);
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

Bytes sha512(std::span<const std::uint8_t> data) {
  ensure_sodium();
  Bytes out(crypto_hash_sha512_BYTES);
  crypto_hash_sha512(out.data(), data.data(), data.size());
  return out;
}

Identity Identity::numerical(NumericalId id) {
  return Identity{IdentityKind::Numerical, to_bytes(hex16(id))};
}

Identity Identity::name(const NameId& n) {
  return Identity{IdentityKind::Name, n.packed()};
}

NumericalId Identity::as_numerical() const {
  if (kind != IdentityKind::Numerical) {
    throw Error(Errc::EncodingError, "identity is not numerical");
  }
  auto parsed = parse_hex16(to_string(value));
  if (!parsed) {
    throw Error(Errc::EncodingError, "non-canonical numerical identity");
  }
  return *parsed;
}

NameId Identity::as_name() const {
  if (kind != IdentityKind::Name) {
    throw Error(Errc::EncodingError, "identity is not a name id");
  }
  return BitString::from_packed(value);
}

Bytes Identity::encoded() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(kind));
  w.blob(value);
  return w.take();
}

void Identity::validate() const {
  switch (kind) {
    case IdentityKind::Numerical:
      (void)as_numerical();
      return;
    case IdentityKind::Name:
      (void)as_name();
      return;
  }
  throw Error(Errc::EncodingError, "unknown identity kind");
}

MasterSecret MasterSecret::from_seed(Bytes seed) {
  if (seed.size() < 32) {
    throw Error(Errc::ParamError, "master seed must be at least 32 bytes");
  }
  return MasterSecret{std::move(seed)};
}

Bytes Signature::encoded() const {
  Bytes out;
  out.reserve(64);
  out.insert(out.end(), R.begin(), R.end());
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

Signature Signature::from_bytes(std::span<const std::uint8_t> b) {
  if (b.size() != 64) {
    throw Error(Errc::EncodingError, "signature must be 64 bytes");
  }
  Signature sig;
  std::copy_n(b.begin(), 32, sig.R.begin());
  std::copy_n(b.begin() + 32, 32, sig.s.begin());
  return sig;
}

Bytes Certificate::encoded() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(identity.kind));
  w.blob(identity.value);
  w.raw(pk.point);
  w.raw(sig.encoded());
  return w.take();
}

Certificate Certificate::from_bytes(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  Certificate c;
  c.identity.kind = static_cast<IdentityKind>(r.u8());
  c.identity.value = r.blob();
  Bytes pk = r.raw(32);
  std::copy(pk.begin(), pk.end(), c.pk.point.begin());
  c.sig = Signature::from_bytes(r.raw(64));
  if (!r.done()) {
    throw Error(Errc::EncodingError, "trailing bytes after certificate");
  }
  return c;
}

std::string PublicParams::to_text() const {
  std::string out = "guard-params v1\n";
  out += "hash = " + hash_alg + "\n";
  out += "m = " + std::to_string(m) + "\n";
  out += "ttp_pk = " + hex_encode(ttp_pk.point) + "\n";
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

PublicParams PublicParams::from_text(std::string_view text) {
  PublicParams p;
  bool saw_header = false, saw_hash = false, saw_m = false, saw_pk = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = trim(text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                               : nl - pos));
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != "guard-params v1") {
        throw Error(Errc::EncodingError, "unrecognized params header");
      }
      saw_header = true;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::EncodingError, "malformed params line");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view val = trim(line.substr(eq + 1));
    if (key == "hash") {
      p.hash_alg = std::string(val);
      saw_hash = true;
    } else if (key == "m") {
      int v = 0;
      auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
      if (ec != std::errc{} || ptr != val.data() + val.size() || v < 1 || v > 256) {
        throw Error(Errc::EncodingError, "bad m in params");
      }
      p.m = v;
      saw_m = true;
    } else if (key == "ttp_pk") {
      auto bytes = hex_decode(val);
      if (!bytes || bytes->size() != 32) {
        throw Error(Errc::EncodingError, "bad ttp_pk in params");
      }
      std::copy(bytes->begin(), bytes->end(), p.ttp_pk.point.begin());
      saw_pk = true;
    } else {
      throw Error(Errc::EncodingError, "unknown params key");
    }
  }
  if (!saw_header || !saw_hash || !saw_m || !saw_pk) {
    throw Error(Errc::EncodingError, "incomplete params record");
  }
  return p;
}

Bytes PartialSignature::encoded() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(index));
  w.raw(R);
  w.raw(s);
  return w.take();
}

PartialSignature PartialSignature::from_bytes(std::span<const std::uint8_t> b) {
  if (b.size() != 65) {
    throw Error(Errc::EncodingError, "partial signature must be 65 bytes");
  }
  PartialSignature p;
  p.index = b[0];
  std::copy_n(b.begin() + 1, 32, p.R.begin());
  std::copy_n(b.begin() + 33, 32, p.s.begin());
  return p;
}

std::string Nonce::hex() const { return hex_encode(v); }

Nonce Nonce::from_hex(std::string_view h) {
  auto bytes = hex_decode(h);
  if (!bytes || bytes->size() != 16) {
    throw Error(Errc::EncodingError, "nonce must be 16 hex-encoded bytes");
  }
  Nonce n;
  std::copy(bytes->begin(), bytes->end(), n.v.begin());
  return n;
}

SigningKey ttp_signing_key(const MasterSecret& master) {
  ensure_sodium();
  ByteWriter kw;
  kw.raw(to_bytes("guard.ttpkey.v1"));
  kw.blob(master.seed);
  SigningKey key;
  key.identity = Identity::numerical(0);
  key.scalar = hash_to_scalar(kw);

  ByteWriter nw;
  nw.raw(to_bytes("guard.ttpnonce.v1"));
  nw.blob(master.seed);
  const Bytes ns = sha256(nw.peek());
  std::copy(ns.begin(), ns.end(), key.nonce_seed.begin());

  key.pub.point = base_mul(key.scalar);
  return key;
}

SigningKey derive_identity_key(const MasterSecret& master, const Identity& id) {
  ensure_sodium();
  id.validate();
  ByteWriter kw;
  kw.raw(to_bytes("guard.idkey.v1"));
  kw.blob(master.seed);
  kw.raw(id.encoded());
  SigningKey key;
  key.identity = id;
  key.scalar = hash_to_scalar(kw);

  ByteWriter nw;
  nw.raw(to_bytes("guard.idnonce.v1"));
  nw.blob(master.seed);
  nw.raw(id.encoded());
  const Bytes ns = sha256(nw.peek());
  std::copy(ns.begin(), ns.end(), key.nonce_seed.begin());

  key.pub.point = base_mul(key.scalar);
  return key;
}

Certificate issue_certificate(const SigningKey& issuer, const Identity& id, const PublicKey& pk) {
  Certificate cert;
  cert.identity = id;
  cert.pk = pk;
  cert.sig = sign(issuer, cert_binding(id, pk));
  return cert;
}

bool verify_certificate(const PublicParams& params, const Certificate& cert) {
  try {
    cert.identity.validate();
  } catch (const Error&) {
    return false;
  }
  return schnorr_verify(params.ttp_pk.point, cert_binding(cert.identity, cert.pk), cert.sig);
}

IdentityKeypair derive_identity_keypair(const MasterSecret& master, const Identity& id) {
  IdentityKeypair kp;
  kp.key = derive_identity_key(master, id);
  kp.pub = kp.key.pub;
  kp.cert = issue_certificate(ttp_signing_key(master), id, kp.pub);
  return kp;
}

Signature sign(const SigningKey& key, std::span<const std::uint8_t> msg) {
  ensure_sodium();
  ByteWriter kw;
  kw.raw(to_bytes("guard.nonce.v1"));
  kw.raw(key.nonce_seed);
  kw.raw(msg);
  const Scalar k = hash_to_scalar(kw);
  Signature sig;
  sig.R = base_mul(k);
  const Scalar e = challenge(sig.R, key.pub.point, msg);
  Scalar ex{};
  crypto_core_ristretto255_scalar_mul(ex.data(), e.data(), key.scalar.data());
  crypto_core_ristretto255_scalar_add(sig.s.data(), k.data(), ex.data());
  return sig;
}

bool verify(const Identity& id, const Certificate& cert, const PublicParams& params,
            std::span<const std::uint8_t> msg, const Signature& sig) {
  if (cert.identity != id) return false;
  if (!verify_certificate(params, cert)) return false;
  return schnorr_verify(cert.pk.point, msg, sig);
}

std::array<KeyShare, 3> split_3of3(const SigningKey& key) {
  ensure_sodium();
  std::array<Scalar, 3> xs{};
  for (int i = 0; i < 2; ++i) {
    ByteWriter w;
    w.raw(to_bytes("guard.share.v1"));
    w.raw(key.scalar);
    w.u8(static_cast<std::uint8_t>(i));
    xs[static_cast<std::size_t>(i)] = hash_to_scalar(w);
  }
  Scalar tmp{};
  crypto_core_ristretto255_scalar_sub(tmp.data(), key.scalar.data(), xs[0].data());
  crypto_core_ristretto255_scalar_sub(xs[2].data(), tmp.data(), xs[1].data());

  ByteWriter nw;
  nw.raw(to_bytes("guard.sharenonce.v1"));
  nw.raw(key.nonce_seed);
  const Bytes ns = sha256(nw.peek());

  std::array<KeyShare, 3> shares;
  for (int i = 0; i < 3; ++i) {
    KeyShare& sh = shares[static_cast<std::size_t>(i)];
    sh.index = i;
    sh.identity = key.identity;
    sh.scalar = xs[static_cast<std::size_t>(i)];
    std::copy(ns.begin(), ns.end(), sh.nonce_seed.begin());
    sh.agg_pub = key.pub;
  }
  return shares;
}

PartialSignature partial_sign(const KeyShare& share, std::span<const std::uint8_t> msg) {
  ensure_sodium();
  if (share.index < 0 || share.index > 2) {
    throw Error(Errc::ShareError, "share index out of range");
  }
  std::array<Scalar, 3> ks{};
  for (int j = 0; j < 3; ++j) {
    ByteWriter w;
    w.raw(to_bytes("guard.pnonce.v1"));
    w.raw(share.nonce_seed);
    w.u8(static_cast<std::uint8_t>(j));
    w.raw(msg);
    ks[static_cast<std::size_t>(j)] = hash_to_scalar(w);
  }
  Scalar k_agg{};
  crypto_core_ristretto255_scalar_add(k_agg.data(), ks[0].data(), ks[1].data());
  crypto_core_ristretto255_scalar_add(k_agg.data(), k_agg.data(), ks[2].data());

  PartialSignature part;
  part.index = share.index;
  part.R = base_mul(k_agg);
  const Scalar e = challenge(part.R, share.agg_pub.point, msg);
  Scalar ex{};
  crypto_core_ristretto255_scalar_mul(ex.data(), e.data(), share.scalar.data());
  crypto_core_ristretto255_scalar_add(part.s.data(),
                                      ks[static_cast<std::size_t>(share.index)].data(), ex.data());
  return part;
}

Signature combine_partials(const std::vector<PartialSignature>& parts) {
  if (parts.size() != 3) {
    throw Error(Errc::ShareError, "combine requires exactly 3 partials");
  }
  bool seen[3] = {false, false, false};
  for (const PartialSignature& p : parts) {
    if (p.index < 0 || p.index > 2 || seen[p.index]) {
      throw Error(Errc::ShareError, "partial share indices must be distinct in {0,1,2}");
    }
    seen[p.index] = true;
  }
  if (parts[1].R != parts[0].R || parts[2].R != parts[0].R) {
    throw Error(Errc::CombineError, "partials disagree on the commitment");
  }
  ensure_sodium();
  Signature sig;
  sig.R = parts[0].R;
  Scalar s{};
  crypto_core_ristretto255_scalar_add(s.data(), parts[0].s.data(), parts[1].s.data());
  crypto_core_ristretto255_scalar_add(s.data(), s.data(), parts[2].s.data());
  sig.s = s;
  return sig;
}

NameId hash_name_id(NumericalId num, int m) {
  if (m < 1 || m > BitString::kMaxBits) {
    throw Error(Errc::ParamError, "name-id length out of range");
  }
  ByteWriter w;
  w.raw(to_bytes("guard.nameid.v1"));
  w.str(hex16(num));
  const Bytes digest = sha256(w.peek());
  return NameId(m, digest);
}

namespace {

NameId feistel_apply(const PermutationKey& pk, const NameId& name, bool forward) {
  if (pk.m < 1 || pk.m > BitString::kMaxBits) {
    throw Error(Errc::ParamError, "permutation domain out of range");
  }
  if (name.size() != pk.m) {
    throw Error(Errc::ParamError, "name length does not match permutation domain");
  }
  if (pk.m == 1) {
    ByteWriter w;
    w.raw(to_bytes("guard.perm.v1"));
    w.blob(pk.key);
    w.u16(1);
    const Bytes d = sha256(w.peek());
    NameId out = name;
    out.set_bit(0, name.bit(0) ^ ((d[0] & 1) != 0));
    return out;
  }
  const int half = pk.m / 2;
  BitString a = subrange(name, 0, half);
  BitString b = subrange(name, half, pk.m - half);
  constexpr int kRounds = 10;
  for (int step = 0; step < kRounds; ++step) {
    const int r = forward ? step : kRounds - 1 - step;
    BitString& dst = (r % 2 == 0) ? a : b;
    const BitString& src = (r % 2 == 0) ? b : a;
    ByteWriter w;
    w.raw(to_bytes("guard.perm.v1"));
    w.blob(pk.key);
    w.u16(static_cast<std::uint16_t>(pk.m));
    w.u8(static_cast<std::uint8_t>(r));
    w.raw(src.packed());
    const Bytes d = sha256(w.peek());
    for (int i = 0; i < dst.size(); ++i) {
      const bool dbit = ((d[static_cast<std::size_t>(i) / 8] >> (7 - i % 8)) & 1) != 0;
      dst.set_bit(i, dst.bit(i) ^ dbit);
    }
  }
  NameId out = BitString::zeros(pk.m);
  for (int i = 0; i < half; ++i) out.set_bit(i, a.bit(i));
  for (int i = half; i < pk.m; ++i) out.set_bit(i, b.bit(i - half));
  return out;
}

}  // namespace

NameId keyed_permutation(const PermutationKey& pk, const NameId& name) {
  return feistel_apply(pk, name, true);
}

NameId keyed_permutation_inverse(const PermutationKey& pk, const NameId& name) {
  return feistel_apply(pk, name, false);
}

Nonce random_nonce(RngStream& rng) {
  const Bytes b = rng.bytes(16);
  Nonce n;
  std::copy(b.begin(), b.end(), n.v.begin());
  return n;
}

}  // namespace guard
