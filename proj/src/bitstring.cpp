#include "guard/bitstring.hpp"

#include <algorithm>

#include "guard/errors.hpp"

namespace guard {

namespace {

void check_len(int len) {
  if (len < 0 || len > BitString::kMaxBits) {
    throw Error(Errc::ParamError, "bit string length out of range: " + std::to_string(len));
  }
}

}  // namespace

BitString::BitString(int len, std::span<const std::uint8_t> prefix_source) {
  check_len(len);
  len_ = static_cast<std::uint16_t>(len);
  const std::size_t need = (static_cast<std::size_t>(len) + 7) / 8;
  if (prefix_source.size() < need) {
    throw Error(Errc::ParamError, "prefix source shorter than requested length");
  }
  std::copy_n(prefix_source.begin(), need, data_.begin());
  // Clear tail bits in the final partially-used byte.
  if (len % 8 != 0 && need > 0) {
    data_[need - 1] &= static_cast<std::uint8_t>(0xffu << (8 - len % 8));
  }
}

BitString BitString::zeros(int len) {
  check_len(len);
  BitString b;
  b.len_ = static_cast<std::uint16_t>(len);
  return b;
}

BitString BitString::from_string(std::string_view s) {
  check_len(static_cast<int>(s.size()));
  BitString b = zeros(static_cast<int>(s.size()));
  for (int i = 0; i < static_cast<int>(s.size()); ++i) {
    const char c = s[static_cast<std::size_t>(i)];
    if (c != '0' && c != '1') {
      throw Error(Errc::EncodingError, "bit string may contain only '0' and '1'");
    }
    b.set_bit(i, c == '1');
  }
  return b;
}

BitString BitString::from_uint(int len, std::uint64_t v) {
  if (len > 64) {
    throw Error(Errc::ParamError, "from_uint supports at most 64 bits");
  }
  BitString b = zeros(len);
  b.store_uint(0, len, v);
  return b;
}

bool BitString::bit(int i) const {
  if (i < 0 || i >= len_) {
    throw Error(Errc::ParamError, "bit index out of range");
  }
  return (data_[static_cast<std::size_t>(i) / 8] >> (7 - i % 8)) & 1u;
}

void BitString::set_bit(int i, bool v) {
  if (i < 0 || i >= len_) {
    throw Error(Errc::ParamError, "bit index out of range");
  }
  const std::uint8_t mask = static_cast<std::uint8_t>(1u << (7 - i % 8));
  if (v) {
    data_[static_cast<std::size_t>(i) / 8] |= mask;
  } else {
    data_[static_cast<std::size_t>(i) / 8] &= static_cast<std::uint8_t>(~mask);
  }
}

std::uint64_t BitString::slice_uint(int from, int count) const {
  if (count < 0 || count > 64 || from < 0 || from + count > len_) {
    throw Error(Errc::ParamError, "bit slice out of range");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < count; ++i) {
    v = (v << 1) | (bit(from + i) ? 1u : 0u);
  }
  return v;
}

void BitString::store_uint(int from, int count, std::uint64_t v) {
  if (count < 0 || count > 64 || from < 0 || from + count > len_) {
    throw Error(Errc::ParamError, "bit slice out of range");
  }
  for (int i = 0; i < count; ++i) {
    set_bit(from + i, (v >> (count - 1 - i)) & 1u);
  }
}

std::string BitString::to_string() const {
  std::string s;
  s.reserve(len_);
  for (int i = 0; i < len_; ++i) {
    s.push_back(bit(i) ? '1' : '0');
  }
  return s;
}

Bytes BitString::packed() const {
  ByteWriter w;
  w.u16(len_);
  const std::size_t need = (static_cast<std::size_t>(len_) + 7) / 8;
  w.raw(std::span<const std::uint8_t>(data_.data(), need));
  return w.take();
}

BitString BitString::from_packed(std::span<const std::uint8_t> b) {
  ByteReader r(b);
  const int len = r.u16();
  check_len(len);
  const std::size_t need = (static_cast<std::size_t>(len) + 7) / 8;
  Bytes body = r.raw(need);
  if (!r.done()) {
    throw Error(Errc::EncodingError, "trailing bytes after packed bit string");
  }
  BitString out(len, body);
  // Reject non-canonical encodings with set tail bits.
  if (len % 8 != 0 && need > 0 &&
      out.data_[need - 1] != body[need - 1]) {
    throw Error(Errc::EncodingError, "packed bit string has nonzero padding bits");
  }
  return out;
}

bool operator==(const BitString& a, const BitString& b) {
  return a.len_ == b.len_ && std::equal(a.data_.begin(), a.data_.end(), b.data_.begin());
}

std::strong_ordering operator<=>(const BitString& a, const BitString& b) {
  const int n = std::min(a.size(), b.size());
  for (int i = 0; i < n; ++i) {
    if (a.bit(i) != b.bit(i)) {
      return a.bit(i) ? std::strong_ordering::greater : std::strong_ordering::less;
    }
  }
  return a.size() <=> b.size();
}

int common_prefix_len(const BitString& a, const BitString& b) {
  if (a.size() != b.size()) {
    throw Error(Errc::ParamError, "common prefix requires equal lengths");
  }
  for (int i = 0; i < a.size(); ++i) {
    if (a.bit(i) != b.bit(i)) {
      return i;
    }
  }
  return a.size();
}

}  // namespace guard
