#include "guard/rng.hpp"

#include <sodium.h>

namespace guard {

RngStream::RngStream(std::uint64_t seed, std::string_view tag) {
  ByteWriter w;
  w.str("guard.rng.v1");
  w.u64(seed);
  w.str(tag);
  Bytes material = w.take();
  unsigned char digest[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(digest, material.data(), material.size());
  std::uint64_t s = 0;
  for (int i = 0; i < 8; ++i) s = (s << 8) | digest[i];
  gen_.seed(s);
}

std::uint64_t RngStream::next_u64() { return gen_(); }

std::uint64_t RngStream::uniform(std::uint64_t lo, std::uint64_t hi) {
  if (lo > hi) throw Error(Errc::ParamError, "uniform: lo > hi");
  std::uint64_t span = hi - lo;
  if (span == UINT64_MAX) return next_u64();
  std::uint64_t range = span + 1;
  std::uint64_t limit = UINT64_MAX - (UINT64_MAX % range);
  for (;;) {
    std::uint64_t v = next_u64();
    if (v < limit) return lo + (v % range);
  }
}

bool RngStream::chance(double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  // 53-bit uniform in [0,1)
  double u = static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
  return u < p;
}

Bytes RngStream::bytes(size_t n) {
  Bytes out(n);
  size_t i = 0;
  while (i < n) {
    std::uint64_t v = next_u64();
    for (int b = 0; b < 8 && i < n; ++b, ++i) {
      out[i] = static_cast<std::uint8_t>(v >> (8 * b));
    }
  }
  return out;
}

}  // namespace guard
