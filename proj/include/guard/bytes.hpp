#pragma once

#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "guard/errors.hpp"

namespace guard {

using Bytes = std::vector<std::uint8_t>;

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline std::string to_string(std::span<const std::uint8_t> b) {
  return std::string(b.begin(), b.end());
}

std::string hex_encode(std::span<const std::uint8_t> data);
std::optional<Bytes> hex_decode(std::string_view hex);

/// 16 lowercase hex chars, zero padded. The canonical numerical-id encoding.
std::string hex16(std::uint64_t v);
std::optional<std::uint64_t> parse_hex16(std::string_view s);

/// Big-endian binary writer used by every wire body in the simulator.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void raw(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  /// u32 length prefix followed by the bytes.
  void blob(std::span<const std::uint8_t> b);
  void str(std::string_view s);

  Bytes take() { return std::move(buf_); }
  const Bytes& peek() const { return buf_; }

 private:
  Bytes buf_;
};

/// Matching reader; throws EncodingError on truncation.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : data_(b) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  Bytes blob();
  std::string str();
  Bytes raw(size_t n);
  Bytes rest();
  bool done() const { return pos_ == data_.size(); }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(size_t n);
  std::span<const std::uint8_t> data_;
  size_t pos_ = 0;
};

}  // namespace guard
