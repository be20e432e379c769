#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "guard/bytes.hpp"

namespace guard {

/// Fixed-length bit string, MSB first, up to 256 bits. Used for name ids
/// (membership vectors): bit 0 is the first routing-relevant bit.
class BitString {
 public:
  static constexpr int kMaxBits = 256;

  BitString() = default;
  BitString(int len, std::span<const std::uint8_t> prefix_source);

  static BitString zeros(int len);
  /// Parse from '0'/'1' characters; EncodingError on anything else.
  static BitString from_string(std::string_view s);
  /// Low `len` bits of v, most significant of those first.
  static BitString from_uint(int len, std::uint64_t v);

  int size() const { return len_; }
  bool empty() const { return len_ == 0; }
  bool bit(int i) const;
  void set_bit(int i, bool v);

  /// Value of bits [from, from+count) as an integer, count <= 64.
  std::uint64_t slice_uint(int from, int count) const;
  void store_uint(int from, int count, std::uint64_t v);

  std::string to_string() const;
  /// Canonical packed encoding: length byte pair then ceil(len/8) bytes.
  Bytes packed() const;
  static BitString from_packed(std::span<const std::uint8_t> b);

  friend bool operator==(const BitString& a, const BitString& b);
  /// Lexicographic by bits, then by length; a strict weak order for map keys.
  friend std::strong_ordering operator<=>(const BitString& a, const BitString& b);

 private:
  std::uint16_t len_ = 0;
  std::array<std::uint8_t, kMaxBits / 8> data_{};
};

/// Longest common prefix of two equal-length bit strings; ParamError otherwise.
int common_prefix_len(const BitString& a, const BitString& b);

}  // namespace guard
