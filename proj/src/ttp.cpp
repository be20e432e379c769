#include "guard/ttp.hpp"

#include <algorithm>
#include <utility>

namespace guard {

namespace {

std::uint64_t digest_to_id(const Address& addr, int id_bits) {
  const Bytes d = sha256(to_bytes(addr.to_string()));
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v = (v << 8) | d[static_cast<std::size_t>(i)];
  }
  if (id_bits < 64) {
    v >>= (64 - id_bits);
  }
  return v;
}

Identity read_identity(ByteReader& r) {
  Identity id;
  id.kind = static_cast<IdentityKind>(r.u8());
  id.value = r.blob();
  id.validate();
  return id;
}

std::array<std::uint8_t, 32> read_32(ByteReader& r) {
  const Bytes b = r.raw(32);
  std::array<std::uint8_t, 32> out{};
  std::copy(b.begin(), b.end(), out.begin());
  return out;
}

}  // namespace

GuardNameIds compute_guard_name_ids(const NameId& subject_name, const NameId& level0_left,
                                    const NameId& level0_right, const PermutationKey& pk) {
  if (subject_name.size() != pk.m || level0_left.size() != pk.m ||
      level0_right.size() != pk.m) {
    throw Error(Errc::ParamError, "guard name inputs must have length m");
  }
  return GuardNameIds{
      keyed_permutation(pk, subject_name),
      keyed_permutation(pk, level0_left),
      keyed_permutation(pk, level0_right),
  };
}

TtpCore::TtpCore(MasterSecret master, PermutationKey perm, int m, std::uint64_t seed, int id_bits)
    : master_(std::move(master)), perm_(std::move(perm)), id_bits_(id_bits), rng_(seed, "ttp") {
  if (m < 1 || m > BitString::kMaxBits) {
    throw Error(Errc::ParamError, "m out of range");
  }
  if (perm_.m != m) {
    throw Error(Errc::ParamError, "permutation key width differs from m");
  }
  if (id_bits_ < 1 || id_bits_ > 64) {
    throw Error(Errc::ParamError, "id_bits out of range");
  }
  params_.hash_alg = "sha256";
  params_.m = m;
  params_.ttp_pk = ttp_signing_key(master_).pub;
}

RegistrationGrant TtpCore::register_peer(const PhysicalIdentity& phys, const Address& addr) {
  NumericalId id = 0;
  if (const auto it = by_phys_.find(phys); it != by_phys_.end()) {
    if (it->second.addr != addr) {
      throw Error(Errc::BindingError, "physical identity already bound to another address");
    }
    id = it->second.numerical_id;
  } else {
    id = digest_to_id(addr, id_bits_);
    const std::uint64_t mask =
        id_bits_ == 64 ? ~0ULL : ((1ULL << id_bits_) - 1);
    const std::uint64_t space = id_bits_ == 64 ? 0 : (1ULL << id_bits_);
    std::uint64_t probes = 0;
    while (issued_.count(id) > 0) {
      id = (id + 1) & mask;
      if (space != 0 && ++probes >= space) {
        throw Error(Errc::ParamError, "numerical id space exhausted");
      }
    }
    issued_.insert(id);
    by_phys_.emplace(phys, Registration{addr, id});
  }
  const IdentityKeypair kp = derive_identity_keypair(master_, Identity::numerical(id));
  return RegistrationGrant{id, kp.key, kp.cert};
}

ChallengeSet TtpCore::begin_auth(const PhysicalIdentity& phys) {
  const auto it = by_phys_.find(phys);
  if (it == by_phys_.end()) {
    throw Error(Errc::UnknownIdentity, "physical identity not registered");
  }
  ChallengeSet cs;
  cs.session = next_session_++;
  for (auto& c : cs.challenges) {
    c = random_nonce(rng_);
  }
  sessions_.emplace(cs.session, AuthSession{it->second.numerical_id, cs.challenges});
  return cs;
}

bool TtpCore::complete_auth(std::uint64_t session, const std::array<Signature, 3>& sigs) {
  const auto it = sessions_.find(session);
  if (it == sessions_.end()) {
    throw Error(Errc::AuthError, "unknown or expired session");
  }
  const AuthSession st = it->second;
  sessions_.erase(it);  // single use, valid or not

  const Identity ident = Identity::numerical(st.numerical_id);
  const IdentityKeypair kp = derive_identity_keypair(master_, ident);
  for (int i = 0; i < 3; ++i) {
    const auto& c = st.challenges[static_cast<std::size_t>(i)].v;
    if (!verify(ident, kp.cert, params_, c, sigs[static_cast<std::size_t>(i)])) {
      throw Error(Errc::AuthError, "challenge signature invalid");
    }
  }
  authenticated_.insert(st.numerical_id);
  return true;
}

bool TtpCore::verify_table_proof(NumericalId owner, const LookupTable& table,
                                 const TableProof& proof) const {
  for (int level = 0; level < table.level_count(); ++level) {
    for (const Side side : {Side::Left, Side::Right}) {
      const auto& entry = table.get(level, side);
      if (!entry) {
        continue;
      }
      const Signature* sig = proof.find(level, side);
      if (sig == nullptr) {
        return false;
      }
      const Identity ident = Identity::numerical(entry->numerical_id);
      const IdentityKeypair kp = derive_identity_keypair(master_, ident);
      const Bytes msg = make_attestation_message(owner, level, side);
      if (!verify(ident, kp.cert, params_, msg, *sig)) {
        return false;
      }
    }
  }
  return true;
}

TableAccept TtpCore::submit_table(NumericalId subject, const LookupTable& table,
                                  const TableProof& proof) {
  if (!authenticated(subject)) {
    throw Error(Errc::AuthError, "subject is not authenticated");
  }
  if (!verify_table_proof(subject, table, proof)) {
    throw Error(Errc::ProofRejected, "table proof did not validate");
  }
  const auto& left0 = table.get(0, Side::Left);
  const auto& right0 = table.get(0, Side::Right);
  if (!left0 || !right0) {
    throw Error(Errc::TableError, "level-0 ring entries required for guard assignment");
  }
  // Names recomputed from the numerical ids; the submitted name_id fields are
  // not trusted for guard placement.
  const NameId subject_name = hash_name_id(subject, params_.m);
  const GuardNameIds guards = compute_guard_name_ids(
      subject_name, hash_name_id(left0->numerical_id, params_.m),
      hash_name_id(right0->numerical_id, params_.m), perm_);
  accepted_tables_[subject] = {table, proof};
  const IdentityKeypair name_kp = derive_identity_keypair(master_, Identity::name(subject_name));
  return TableAccept{guards, name_kp.cert};
}

GuardProvision TtpCore::provision_guard(NumericalId guard, NumericalId subject, int share_index) {
  if (share_index < 0 || share_index > 2) {
    throw Error(Errc::ShareError, "share index must be 0, 1 or 2");
  }
  if (!authenticated(guard)) {
    throw Error(Errc::AuthError, "guard is not authenticated");
  }
  const auto it = accepted_tables_.find(subject);
  if (it == accepted_tables_.end()) {
    throw Error(Errc::ProofError, "no accepted table for subject");
  }
  const SigningKey name_key =
      derive_identity_key(master_, Identity::name(hash_name_id(subject, params_.m)));
  const std::array<KeyShare, 3> shares = split_3of3(name_key);
  return GuardProvision{subject, shares[static_cast<std::size_t>(share_index)],
                        it->second.first, it->second.second};
}

std::optional<NumericalId> TtpCore::id_of(const PhysicalIdentity& phys) const {
  const auto it = by_phys_.find(phys);
  if (it == by_phys_.end()) {
    return std::nullopt;
  }
  return it->second.numerical_id;
}

Bytes ttp_status_ok(std::span<const std::uint8_t> payload) {
  ByteWriter w;
  w.u8(0);
  w.raw(payload);
  return w.take();
}

Bytes ttp_status_err(Errc code) {
  ByteWriter w;
  w.u8(1);
  w.u8(static_cast<std::uint8_t>(code));
  return w.take();
}

Bytes ttp_unwrap(std::span<const std::uint8_t> response_body) {
  ByteReader r(response_body);
  const std::uint8_t tag = r.u8();
  if (tag == 0) {
    return r.rest();
  }
  if (tag == 1) {
    throw Error(static_cast<Errc>(r.u8()), "rejected by remote");
  }
  throw Error(Errc::EncodingError, "bad response status tag");
}

TtpService::TtpService(TtpCore& core, Endpoint& ep) : core_(core), ep_(ep) {
  ep_.on_message([this](const Envelope& env) { handle(env); });
}

void TtpService::handle(const Envelope& env) {
  const auto kind = static_cast<TtpMsg>(env.kind);
  const std::uint8_t reply_kind =
      kind == TtpMsg::GUARD_CONNECT ? static_cast<std::uint8_t>(TtpMsg::PROVISION) : env.kind;
  try {
    ByteReader r(env.body);
    ByteWriter w;
    switch (kind) {
      case TtpMsg::REGISTER: {
        const Bytes phys = r.blob();
        Address addr;
        addr.host = r.str();
        addr.port = r.u16();
        const RegistrationGrant g = core_.register_peer(phys, addr);
        w.u64(g.numerical_id);
        w.raw(g.signing_key.scalar);
        w.raw(g.signing_key.nonce_seed);
        w.raw(g.signing_key.pub.point);
        w.blob(g.certificate.encoded());
        w.str(core_.publish_params().to_text());
        break;
      }
      case TtpMsg::CHALLENGE: {
        const ChallengeSet cs = core_.begin_auth(r.blob());
        w.u64(cs.session);
        for (const auto& c : cs.challenges) {
          w.raw(c.v);
        }
        break;
      }
      case TtpMsg::CHALLENGE_RESPONSE: {
        const std::uint64_t session = r.u64();
        std::array<Signature, 3> sigs;
        for (auto& s : sigs) {
          s = Signature::from_bytes(r.raw(64));
        }
        core_.complete_auth(session, sigs);
        break;
      }
      case TtpMsg::TABLE_SUBMIT: {
        const NumericalId subject = r.u64();
        const Bytes tbl = r.blob();
        const Bytes prf = r.blob();
        const TableAccept acc = core_.submit_table(subject, LookupTable::from_bytes(tbl),
                                                   TableProof::from_bytes(prf));
        w.blob(acc.guards.main.packed());
        w.blob(acc.guards.side_left.packed());
        w.blob(acc.guards.side_right.packed());
        w.blob(acc.name_cert.encoded());
        break;
      }
      case TtpMsg::GUARD_CONNECT: {
        const NumericalId guard = r.u64();
        const NumericalId subject = r.u64();
        const int index = r.u8();
        const GuardProvision p = core_.provision_guard(guard, subject, index);
        w.u64(p.subject);
        w.u8(static_cast<std::uint8_t>(p.share.index));
        w.raw(p.share.identity.encoded());
        w.raw(p.share.scalar);
        w.raw(p.share.nonce_seed);
        w.raw(p.share.agg_pub.point);
        w.blob(p.subject_table.encoded());
        w.blob(p.subject_table_proof.encoded());
        break;
      }
      case TtpMsg::PROVISION:
        throw Error(Errc::EncodingError, "PROVISION is response-only");
    }
    ep_.reply(env, reply_kind, ttp_status_ok(w.peek()));
  } catch (const Error& e) {
    ep_.reply(env, reply_kind, ttp_status_err(e.code()));
  }
}

namespace ttpcall {

RegistrationGrant register_peer(Endpoint& ep, const Address& ttp, const PhysicalIdentity& phys,
                                PublicParams* params_out) {
  ByteWriter w;
  w.blob(phys);
  w.str(ep.address().host);
  w.u16(ep.address().port);
  const Envelope resp =
      ep.request(ttp, static_cast<std::uint8_t>(TtpMsg::REGISTER), w.peek());
  const Bytes body = ttp_unwrap(resp.body);
  ByteReader r(body);
  RegistrationGrant g;
  g.numerical_id = r.u64();
  g.signing_key.identity = Identity::numerical(g.numerical_id);
  g.signing_key.scalar = read_32(r);
  g.signing_key.nonce_seed = read_32(r);
  g.signing_key.pub.point = read_32(r);
  g.certificate = Certificate::from_bytes(r.blob());
  const std::string params_text = r.str();
  if (params_out != nullptr) {
    *params_out = PublicParams::from_text(params_text);
  }
  return g;
}

ChallengeSet begin_auth(Endpoint& ep, const Address& ttp, const PhysicalIdentity& phys) {
  ByteWriter w;
  w.blob(phys);
  const Envelope resp =
      ep.request(ttp, static_cast<std::uint8_t>(TtpMsg::CHALLENGE), w.peek());
  const Bytes body = ttp_unwrap(resp.body);
  ByteReader r(body);
  ChallengeSet cs;
  cs.session = r.u64();
  for (auto& c : cs.challenges) {
    const Bytes b = r.raw(16);
    std::copy(b.begin(), b.end(), c.v.begin());
  }
  return cs;
}

void complete_auth(Endpoint& ep, const Address& ttp, std::uint64_t session,
                   const std::array<Signature, 3>& sigs) {
  ByteWriter w;
  w.u64(session);
  for (const auto& s : sigs) {
    w.raw(s.encoded());
  }
  const Envelope resp =
      ep.request(ttp, static_cast<std::uint8_t>(TtpMsg::CHALLENGE_RESPONSE), w.peek());
  ttp_unwrap(resp.body);
}

void authenticate(Endpoint& ep, const Address& ttp, const PhysicalIdentity& phys,
                  const SigningKey& key) {
  const ChallengeSet cs = begin_auth(ep, ttp, phys);
  std::array<Signature, 3> sigs;
  for (int i = 0; i < 3; ++i) {
    sigs[static_cast<std::size_t>(i)] = sign(key, cs.challenges[static_cast<std::size_t>(i)].v);
  }
  complete_auth(ep, ttp, cs.session, sigs);
}

TableAccept submit_table(Endpoint& ep, const Address& ttp, NumericalId subject,
                         const LookupTable& table, const TableProof& proof) {
  ByteWriter w;
  w.u64(subject);
  w.blob(table.encoded());
  w.blob(proof.encoded());
  const Envelope resp =
      ep.request(ttp, static_cast<std::uint8_t>(TtpMsg::TABLE_SUBMIT), w.peek());
  const Bytes body = ttp_unwrap(resp.body);
  ByteReader r(body);
  TableAccept acc;
  const Bytes main_b = r.blob();
  const Bytes left_b = r.blob();
  const Bytes right_b = r.blob();
  acc.guards.main = BitString::from_packed(main_b);
  acc.guards.side_left = BitString::from_packed(left_b);
  acc.guards.side_right = BitString::from_packed(right_b);
  acc.name_cert = Certificate::from_bytes(r.blob());
  return acc;
}

GuardProvision guard_connect(Endpoint& ep, const Address& ttp, NumericalId guard,
                             NumericalId subject, int share_index) {
  ByteWriter w;
  w.u64(guard);
  w.u64(subject);
  w.u8(static_cast<std::uint8_t>(share_index));
  const Envelope resp =
      ep.request(ttp, static_cast<std::uint8_t>(TtpMsg::GUARD_CONNECT), w.peek());
  const Bytes body = ttp_unwrap(resp.body);
  ByteReader r(body);
  GuardProvision p;
  p.subject = r.u64();
  p.share.index = r.u8();
  p.share.identity = read_identity(r);
  p.share.scalar = read_32(r);
  p.share.nonce_seed = read_32(r);
  p.share.agg_pub.point = read_32(r);
  const Bytes tbl = r.blob();
  const Bytes prf = r.blob();
  p.subject_table = LookupTable::from_bytes(tbl);
  p.subject_table_proof = TableProof::from_bytes(prf);
  return p;
}

}  // namespace ttpcall

}  // namespace guard
