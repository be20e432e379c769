#include "guard/logrecord.hpp"

#include <charconv>
#include <vector>

#include "guard/errors.hpp"

namespace guard {

namespace {

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s.empty() ? std::string("-") : s;
}

std::uint64_t parse_u64(std::string_view f, const char* what) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || p != f.data() + f.size()) {
    throw Error(Errc::SchemaError, std::string("bad numeric field: ") + what);
  }
  return v;
}

}  // namespace

const char* log_event_name(LogEvent e) {
  switch (e) {
    case LogEvent::REGISTER: return "REGISTER";
    case LogEvent::JOIN_DONE: return "JOIN_DONE";
    case LogEvent::GUARDS_DONE: return "GUARDS_DONE";
    case LogEvent::SEARCH_START: return "SEARCH_START";
    case LogEvent::SEARCH_DONE: return "SEARCH_DONE";
    case LogEvent::HOP: return "HOP";
    case LogEvent::COSIGN: return "COSIGN";
    case LogEvent::VERIFY: return "VERIFY";
    case LogEvent::REJECT: return "REJECT";
  }
  return "?";
}

LogEvent log_event_from(std::string_view s) {
  for (const LogEvent e :
       {LogEvent::REGISTER, LogEvent::JOIN_DONE, LogEvent::GUARDS_DONE, LogEvent::SEARCH_START,
        LogEvent::SEARCH_DONE, LogEvent::HOP, LogEvent::COSIGN, LogEvent::VERIFY,
        LogEvent::REJECT}) {
    if (s == log_event_name(e)) return e;
  }
  throw Error(Errc::SchemaError, "unknown log event: " + std::string(s));
}

std::string LogRecord::to_csv() const {
  std::string out;
  out += std::to_string(ts_us);
  out += ',';
  out += std::to_string(node_id);
  out += ',';
  out += log_event_name(event);
  out += ',';
  out += std::to_string(search_seq);
  out += ',';
  out += sanitize(mode);
  out += ',';
  out += sanitize(nonce_hex);
  out += ',';
  out += sanitize(q_hex);
  out += ',';
  out += std::to_string(hop_count);
  out += ',';
  out += std::to_string(latency_us);
  out += ',';
  out += std::to_string(msg_bytes);
  out += ',';
  out += std::to_string(compute_us);
  out += ',';
  out += sanitize(detail);
  return out;
}

LogRecord LogRecord::from_csv(std::string_view line) {
  std::vector<std::string_view> f;
  std::size_t pos = 0;
  while (true) {
    const std::size_t c = line.find(',', pos);
    if (c == std::string_view::npos) {
      f.push_back(line.substr(pos));
      break;
    }
    f.push_back(line.substr(pos, c - pos));
    pos = c + 1;
  }
  if (f.size() != 12) {
    throw Error(Errc::SchemaError, "log row must have 12 fields");
  }
  LogRecord r;
  r.ts_us = parse_u64(f[0], "ts_us");
  r.node_id = parse_u64(f[1], "node_id");
  r.event = log_event_from(f[2]);
  r.search_seq = parse_u64(f[3], "search_seq");
  r.mode = std::string(f[4]);
  r.nonce_hex = std::string(f[5]);
  r.q_hex = std::string(f[6]);
  r.hop_count = static_cast<int>(parse_u64(f[7], "hop_count"));
  r.latency_us = parse_u64(f[8], "latency_us");
  r.msg_bytes = parse_u64(f[9], "msg_bytes");
  r.compute_us = parse_u64(f[10], "compute_us");
  r.detail = std::string(f[11]);
  return r;
}

}  // namespace guard
