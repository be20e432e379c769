#include "guard/bytes.hpp"

namespace guard {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::EncodingError: return "EncodingError";
    case Errc::ParamError: return "ParamError";
    case Errc::ShareError: return "ShareError";
    case Errc::CombineError: return "CombineError";
    case Errc::TableError: return "TableError";
    case Errc::JoinError: return "JoinError";
    case Errc::ProofError: return "ProofError";
    case Errc::WrongSubject: return "WrongSubject";
    case Errc::BindingError: return "BindingError";
    case Errc::AuthError: return "AuthError";
    case Errc::UnknownIdentity: return "UnknownIdentity";
    case Errc::ProofRejected: return "ProofRejected";
    case Errc::AddressInUse: return "AddressInUse";
    case Errc::TimeoutError: return "TimeoutError";
    case Errc::Undeliverable: return "Undeliverable";
    case Errc::ConfigError: return "ConfigError";
    case Errc::PhaseError: return "PhaseError";
    case Errc::SchemaError: return "SchemaError";
  }
  return "Error";
}

static const char* kHexDigits = "0123456789abcdef";

std::string hex_encode(std::span<const std::uint8_t> data) {
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0x0f]);
  }
  return out;
}

static int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::optional<Bytes> hex_decode(std::string_view hex) {
  if (hex.size() % 2 != 0) return std::nullopt;
  Bytes out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_nibble(hex[i]);
    int lo = hex_nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

std::string hex16(std::uint64_t v) {
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = kHexDigits[v & 0x0f];
    v >>= 4;
  }
  return out;
}

std::optional<std::uint64_t> parse_hex16(std::string_view s) {
  if (s.size() != 16) return std::nullopt;
  std::uint64_t v = 0;
  for (char c : s) {
    int n = hex_nibble(c);
    if (n < 0 || (c >= 'A' && c <= 'F')) return std::nullopt;  // lowercase canonical
    v = (v << 4) | static_cast<std::uint64_t>(n);
  }
  return v;
}

void ByteWriter::u16(std::uint16_t v) {
  buf_.push_back(static_cast<std::uint8_t>(v >> 8));
  buf_.push_back(static_cast<std::uint8_t>(v));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 3; i >= 0; --i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 7; i >= 0; --i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::blob(std::span<const std::uint8_t> b) {
  u32(static_cast<std::uint32_t>(b.size()));
  raw(b);
}

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteReader::need(size_t n) {
  if (pos_ + n > data_.size()) throw Error(Errc::EncodingError, "truncated message");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint16_t ByteReader::u16() {
  need(2);
  std::uint16_t v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + static_cast<size_t>(i)];
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_ + static_cast<size_t>(i)];
  pos_ += 8;
  return v;
}

Bytes ByteReader::blob() {
  std::uint32_t n = u32();
  need(n);
  Bytes out(data_.begin() + static_cast<ptrdiff_t>(pos_),
            data_.begin() + static_cast<ptrdiff_t>(pos_ + n));
  pos_ += n;
  return out;
}

std::string ByteReader::str() {
  Bytes b = blob();
  return std::string(b.begin(), b.end());
}

Bytes ByteReader::raw(size_t n) {
  need(n);
  Bytes out(data_.begin() + static_cast<ptrdiff_t>(pos_),
            data_.begin() + static_cast<ptrdiff_t>(pos_ + n));
  pos_ += n;
  return out;
}

Bytes ByteReader::rest() {
  Bytes out(data_.begin() + static_cast<ptrdiff_t>(pos_), data_.end());
  pos_ = data_.size();
  return out;
}

}  // namespace guard
