#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "guard/bytes.hpp"
#include "guard/rng.hpp"

namespace guard {

struct Address {
  std::string host;
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
  friend bool operator==(const Address&, const Address&) = default;
  friend auto operator<=>(const Address&, const Address&) = default;
};

/// High bit of the correlation id marks response envelopes.
inline constexpr std::uint64_t kResponseBit = 1ULL << 63;
/// Accounted per envelope on top of the body; keeps size metrics reproducible.
inline constexpr std::uint64_t kEnvelopeHeaderBytes = 16;

struct Envelope {
  Address src;
  Address dst;
  std::uint8_t kind = 0;
  std::uint64_t corr = 0;
  Bytes body;
  std::uint64_t payload_bytes = 0;  // application payload share of body, for accounting
  std::uint64_t size_bytes = 0;     // kEnvelopeHeaderBytes + body length
  std::uint64_t send_time = 0;
  std::uint64_t deliver_time = 0;
};

/// Serialized framing: kind, correlation id, length-prefixed body.
Bytes encode_wire(std::uint8_t kind, std::uint64_t corr, std::span<const std::uint8_t> body);
struct WireFrame {
  std::uint8_t kind;
  std::uint64_t corr;
  Bytes body;
};
WireFrame decode_wire(std::span<const std::uint8_t> frame);

struct LinkParams {
  std::uint64_t base_us = 1000;
  std::uint64_t jitter_us = 0;
  double loss_prob = 0.0;
};

class Network;

/// A bound endpoint. Owned by the Network; nodes keep references.
class Endpoint {
 public:
  using Handler = std::function<void(const Envelope&)>;

  const Address& address() const { return addr_; }
  void on_message(Handler h) { handler_ = std::move(h); }

  /// Fire-and-forget envelope.
  void send(const Address& dst, std::uint8_t kind, std::span<const std::uint8_t> body,
            std::uint64_t payload_bytes = 0);
  /// Correlated round trip; pumps the event loop until the response lands or
  /// virtual time passes the deadline (TimeoutError, or Undeliverable when the
  /// destination was never bound). timeout_us = 0 picks the network default.
  Envelope request(const Address& dst, std::uint8_t kind, std::span<const std::uint8_t> body,
                   std::uint64_t timeout_us = 0);
  /// Issues a correlated request without blocking. Responses park in the
  /// correlation slot until awaited, so several can be in flight at once.
  std::uint64_t request_async(const Address& dst, std::uint8_t kind,
                              std::span<const std::uint8_t> body,
                              std::uint64_t payload_bytes = 0);
  /// Blocks (pumping) on one request_async correlation id.
  Envelope await_response(std::uint64_t corr, std::uint64_t timeout_us = 0);
  /// Answer a request envelope.
  void reply(const Envelope& req, std::uint8_t kind, std::span<const std::uint8_t> body,
             std::uint64_t payload_bytes = 0);

 private:
  friend class Network;
  Endpoint(Network& net, Address addr) : net_(net), addr_(std::move(addr)) {}
  Network& net_;
  Address addr_;
  Handler handler_;
};

/// Deterministic discrete-event network. Single-threaded: handlers run one at
/// a time at their envelope's deliver_time; a blocking request() re-enters the
/// pump, so unrelated handlers may run beneath it on the same call stack.
class Network {
 public:
  explicit Network(std::uint64_t seed, LinkParams defaults = {});

  Endpoint& bind(const Address& addr);
  bool bound(const Address& addr) const { return endpoints_.count(addr) > 0; }

  void set_link(const Address& src, const Address& dst, LinkParams params);

  /// One-shot callback at now + delay_us; shares the event queue with
  /// deliveries, so ordering against envelopes is deterministic.
  void schedule(std::uint64_t delay_us, std::function<void()> fn);

  std::uint64_t now_us() const { return now_us_; }
  std::uint64_t default_timeout_us() const;

  void run_until_idle();
  void run_for(std::uint64_t duration_us);
  /// Pumps until done() holds, checking between events; gives up once no
  /// event is due within timeout_us and returns done()'s final value.
  bool run_until(const std::function<bool()>& done, std::uint64_t timeout_us);

  struct LogLine {
    std::uint64_t deliver_time;
    Address src;
    Address dst;
    std::uint8_t kind;
    std::uint64_t size_bytes;
    std::uint64_t payload_bytes;
    std::uint64_t send_time;
  };
  const std::vector<LogLine>& event_log() const { return log_; }
  /// One line per delivered envelope: deliver_time, src, dst, kind, size.
  std::string format_event_log() const;
  std::uint64_t total_delivered_bytes() const { return total_bytes_; }
  std::uint64_t delivered_count() const { return log_.size(); }

 private:
  friend class Endpoint;

  struct Event {
    std::uint64_t due;
    std::uint64_t seq;
    std::optional<Envelope> env;        // delivery when set
    std::function<void()> timer;        // timer otherwise
    bool operator>(const Event& o) const {
      return std::tie(due, seq) > std::tie(o.due, o.seq);
    }
  };

  void post(Envelope env);
  bool step();
  std::uint64_t next_due() const;
  void deliver(const Envelope& env);
  const LinkParams& link(const Address& src, const Address& dst) const;

  std::uint64_t now_us_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t next_corr_ = 1;
  LinkParams defaults_;
  RngStream rng_;
  std::map<Address, std::unique_ptr<Endpoint>> endpoints_;
  std::map<std::pair<Address, Address>, LinkParams> links_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::map<std::uint64_t, std::optional<Envelope>> pending_;  // corr -> response slot
  std::set<std::uint64_t> dead_corr_;                         // requests that hit no endpoint
  std::vector<LogLine> log_;
  std::uint64_t total_bytes_ = 0;
};

}  // namespace guard
