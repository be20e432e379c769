#include "guard/authproof.hpp"

#include <algorithm>

#include "guard/errors.hpp"

namespace guard {

namespace {

bool is_lower_hex(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
  });
}

std::optional<NumericalId> parse_opt_field(std::string_view s) {
  if (s == "null") return std::nullopt;
  auto v = parse_hex16(s);
  if (!v) {
    throw Error(Errc::EncodingError, "bad transcript field");
  }
  return *v;
}

}  // namespace

std::string encode_transcript(const RoutingTranscript& t) {
  std::string out = hex16(t.R);
  out += "||";
  out += t.F ? hex16(*t.F) : "null";
  out += "||";
  out += t.T ? hex16(*t.T) : "null";
  out += "||";
  out += hex16(t.I);
  out += "||";
  out += hex16(t.Q);
  out += "||";
  out += t.N.hex();
  return out;
}

RoutingTranscript decode_transcript(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t sep = text.find("||", pos);
    if (sep == std::string_view::npos) {
      parts.push_back(text.substr(pos));
      break;
    }
    parts.push_back(text.substr(pos, sep - pos));
    pos = sep + 2;
  }
  if (parts.size() != 6) {
    throw Error(Errc::EncodingError, "transcript must have six fields");
  }
  RoutingTranscript t;
  auto req = [](std::string_view s) {
    auto v = parse_hex16(s);
    if (!v) {
      throw Error(Errc::EncodingError, "bad transcript field");
    }
    return *v;
  };
  t.R = req(parts[0]);
  t.F = parse_opt_field(parts[1]);
  t.T = parse_opt_field(parts[2]);
  t.I = req(parts[3]);
  t.Q = req(parts[4]);
  if (parts[5].size() != 32 || !is_lower_hex(parts[5])) {
    throw Error(Errc::EncodingError, "bad transcript nonce");
  }
  t.N = Nonce::from_hex(parts[5]);
  return t;
}

RoutingTranscript make_hop_transcript(NumericalId self, std::optional<NumericalId> from,
                                      const RoutingDecision& decision, NumericalId I,
                                      NumericalId Q, const Nonce& N) {
  RoutingTranscript t;
  t.R = self;
  t.F = from;
  if (decision.kind == RoutingDecision::Kind::Forward) {
    t.T = decision.next.numerical_id;
  }
  t.I = I;
  t.Q = Q;
  t.N = N;
  return t;
}

Bytes RoutingProof::encoded() const {
  ByteWriter w;
  write(w);
  return w.take();
}

void RoutingProof::write(ByteWriter& w) const {
  w.str(encode_transcript(transcript));
  w.blob(sig_numerical.encoded());
  w.blob(cert_numerical.encoded());
  w.blob(sig_name.encoded());
  w.blob(cert_name.encoded());
}

RoutingProof RoutingProof::from_reader(ByteReader& r) {
  RoutingProof p;
  p.transcript = decode_transcript(r.str());
  p.sig_numerical = Signature::from_bytes(r.blob());
  p.cert_numerical = Certificate::from_bytes(r.blob());
  p.sig_name = Signature::from_bytes(r.blob());
  p.cert_name = Certificate::from_bytes(r.blob());
  return p;
}

RoutingProof RoutingProof::from_bytes(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  RoutingProof p = from_reader(r);
  if (!r.done()) {
    throw Error(Errc::EncodingError, "trailing bytes after routing proof");
  }
  return p;
}

Bytes encode_chain(const ProofChain& chain) {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(chain.size()));
  for (const RoutingProof& p : chain) p.write(w);
  return w.take();
}

ProofChain decode_chain(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  const int n = r.u16();
  ProofChain chain;
  chain.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) chain.push_back(RoutingProof::from_reader(r));
  if (!r.done()) {
    throw Error(Errc::EncodingError, "trailing bytes after proof chain");
  }
  return chain;
}

NonceLedger::NonceLedger(std::size_t capacity) : cap_(capacity) {
  if (cap_ == 0) {
    throw Error(Errc::ParamError, "ledger capacity must be positive");
  }
}

bool NonceLedger::contains(NumericalId initiator, const Nonce& n) const {
  return set_.count({initiator, n}) > 0;
}

void NonceLedger::record(NumericalId initiator, const Nonce& n) {
  auto [it, inserted] = set_.insert({initiator, n});
  if (!inserted) return;
  fifo_.push_back({initiator, n});
  if (fifo_.size() > cap_) {
    set_.erase(fifo_.front());
    fifo_.pop_front();
  }
}

const char* reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::BadNumericalSig: return "BadNumericalSig";
    case RejectReason::BadNameSig: return "BadNameSig";
    case RejectReason::BrokenLink: return "BrokenLink";
    case RejectReason::FieldMismatch: return "FieldMismatch";
    case RejectReason::BadHead: return "BadHead";
    case RejectReason::BadTail: return "BadTail";
    case RejectReason::ReplayedNonce: return "ReplayedNonce";
    case RejectReason::WrongTermination: return "WrongTermination";
  }
  return "Reject";
}

ProofVerifyCache::ProofVerifyCache(std::size_t capacity) : cap_(capacity) {
  if (cap_ == 0) {
    throw Error(Errc::ParamError, "cache capacity must be positive");
  }
}

bool ProofVerifyCache::known_valid(const Bytes& digest) const { return set_.count(digest) > 0; }

void ProofVerifyCache::mark_valid(const Bytes& digest) {
  auto [it, inserted] = set_.insert(digest);
  if (!inserted) return;
  fifo_.push_back(digest);
  if (fifo_.size() > cap_) {
    set_.erase(fifo_.front());
    fifo_.pop_front();
  }
}

namespace {

Bytes proof_digest(const RoutingProof& p, const PublicParams& params) {
  ByteWriter w;
  w.raw(to_bytes("guard.proofcache.v1"));
  w.u16(static_cast<std::uint16_t>(params.m));
  w.raw(params.ttp_pk.point);
  w.raw(p.encoded());
  return sha256(w.peek());
}

}  // namespace

Verdict verify_proof_chain(const ProofChain& chain, const PublicParams& params,
                           NumericalId expected_I, NumericalId expected_Q,
                           const Nonce& expected_N, NonceLedger& ledger,
                           const VerifyOptions& opts) {
  if (chain.empty()) {
    return Verdict::reject(RejectReason::BadHead, 0);
  }
  if (ledger.contains(expected_I, expected_N)) {
    return Verdict::reject(RejectReason::ReplayedNonce, 0);
  }
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const RoutingProof& p = chain[i];
    const RoutingTranscript& t = p.transcript;
    const int idx = static_cast<int>(i);

    bool sigs_ok = false;
    Bytes digest;
    if (opts.cache) {
      digest = proof_digest(p, params);
      sigs_ok = opts.cache->known_valid(digest);
    }
    if (!sigs_ok) {
      const Bytes msg = to_bytes(encode_transcript(t));
      if (!verify(Identity::numerical(t.R), p.cert_numerical, params, msg, p.sig_numerical)) {
        return Verdict::reject(RejectReason::BadNumericalSig, idx);
      }
      const Identity name_id = Identity::name(hash_name_id(t.R, params.m));
      if (!verify(name_id, p.cert_name, params, msg, p.sig_name)) {
        return Verdict::reject(RejectReason::BadNameSig, idx);
      }
      if (opts.cache) opts.cache->mark_valid(digest);
    }

    if (i == 0) {
      if (t.F.has_value() || t.R != expected_I) {
        return Verdict::reject(RejectReason::BadHead, 0);
      }
    } else {
      const RoutingTranscript& prev = chain[i - 1].transcript;
      if (!prev.T || *prev.T != t.R || !t.F || *t.F != prev.R) {
        return Verdict::reject(RejectReason::BrokenLink, idx);
      }
    }
    if (t.I != expected_I || t.Q != expected_Q || !(t.N == expected_N)) {
      return Verdict::reject(RejectReason::FieldMismatch, idx);
    }
  }
  const int last = static_cast<int>(chain.size()) - 1;
  if (!opts.relax_tail && chain.back().transcript.T.has_value()) {
    return Verdict::reject(RejectReason::BadTail, last);
  }
  if (opts.global_ids &&
      chain.back().transcript.R != oracle_numerical_answer(*opts.global_ids, expected_Q)) {
    return Verdict::reject(RejectReason::WrongTermination, last);
  }
  ledger.record(expected_I, expected_N);
  return Verdict::accept();
}

std::variant<PartialSignature, GuardRefusal> guard_evaluate(const GuardProvision& g,
                                                            const RoutingTranscript& t) {
  if (t.R != g.subject) {
    throw Error(Errc::WrongSubject, "transcript router is not the provisioned subject");
  }
  const RoutingDecision expected = local_next_hop(g.subject_table, t.R, t.Q);
  const bool matches =
      expected.kind == RoutingDecision::Kind::Forward
          ? (t.T.has_value() && *t.T == expected.next.numerical_id)
          : !t.T.has_value();
  if (!matches) {
    return GuardRefusal{"transcript does not match the prescribed hop"};
  }
  const Bytes msg = to_bytes(encode_transcript(t));
  return partial_sign(g.share, msg);
}

}  // namespace guard
