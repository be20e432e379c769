#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "guard/bytes.hpp"

namespace guard {

/// Deterministic random stream. Every logical actor in the simulation owns
/// its own stream, derived from the master seed and a unique tag, so that
/// consuming order inside one actor never perturbs another actor's draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view tag);

  std::uint64_t next_u64();

  /// Uniform integer in [lo, hi], inclusive. Rejection sampled, not
  /// std::uniform_int_distribution, so the byte stream is portable.
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi);

  /// True with probability p.
  bool chance(double p);

  Bytes bytes(size_t n);

 private:
  std::mt19937_64 gen_;
};

}  // namespace guard
