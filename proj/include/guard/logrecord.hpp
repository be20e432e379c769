#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "guard/ids.hpp"

namespace guard {

enum class LogEvent {
  REGISTER,
  JOIN_DONE,
  GUARDS_DONE,
  SEARCH_START,
  SEARCH_DONE,
  HOP,
  COSIGN,
  VERIFY,
  REJECT,
};

const char* log_event_name(LogEvent e);
/// SchemaError on anything log_event_name never produces.
LogEvent log_event_from(std::string_view s);

/// One row of the per-node CSV log. String fields use "-" for not-applicable
/// so every row has all twelve columns.
struct LogRecord {
  std::uint64_t ts_us = 0;
  NumericalId node_id = 0;
  LogEvent event = LogEvent::HOP;
  std::uint64_t search_seq = 0;
  std::string mode = "-";  // AUTH | PLAIN | -
  std::string nonce_hex = "-";
  std::string q_hex = "-";
  int hop_count = 0;
  std::uint64_t latency_us = 0;
  std::uint64_t msg_bytes = 0;
  std::uint64_t compute_us = 0;
  std::string detail;

  std::string to_csv() const;
  /// Parses one data row; SchemaError on wrong arity or malformed numbers.
  static LogRecord from_csv(std::string_view line);

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

inline constexpr std::string_view kLogCsvHeader =
    "ts_us,node_id,event,search_seq,mode,nonce_hex,q_hex,hop_count,latency_us,msg_bytes,"
    "compute_us,detail";

}  // namespace guard
