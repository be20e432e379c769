#include "guard/transport.hpp"

#include <algorithm>
#include <tuple>

#include "guard/errors.hpp"

namespace guard {

Bytes encode_wire(std::uint8_t kind, std::uint64_t corr, std::span<const std::uint8_t> body) {
  ByteWriter w;
  w.u8(kind);
  w.u64(corr);
  w.blob(body);
  return w.take();
}

WireFrame decode_wire(std::span<const std::uint8_t> frame) {
  ByteReader r(frame);
  WireFrame f;
  f.kind = r.u8();
  f.corr = r.u64();
  f.body = r.blob();
  if (!r.done()) {
    throw Error(Errc::EncodingError, "trailing bytes after wire frame");
  }
  return f;
}

void Endpoint::send(const Address& dst, std::uint8_t kind, std::span<const std::uint8_t> body,
                    std::uint64_t payload_bytes) {
  Envelope env;
  env.src = addr_;
  env.dst = dst;
  env.kind = kind;
  env.corr = 0;
  env.body.assign(body.begin(), body.end());
  env.payload_bytes = payload_bytes;
  net_.post(std::move(env));
}

Envelope Endpoint::request(const Address& dst, std::uint8_t kind,
                           std::span<const std::uint8_t> body, std::uint64_t timeout_us) {
  return await_response(request_async(dst, kind, body), timeout_us);
}

std::uint64_t Endpoint::request_async(const Address& dst, std::uint8_t kind,
                                      std::span<const std::uint8_t> body,
                                      std::uint64_t payload_bytes) {
  const std::uint64_t corr = net_.next_corr_++;
  net_.pending_.emplace(corr, std::nullopt);

  Envelope env;
  env.src = addr_;
  env.dst = dst;
  env.kind = kind;
  env.corr = corr;
  env.body.assign(body.begin(), body.end());
  env.payload_bytes = payload_bytes;
  net_.post(std::move(env));
  return corr;
}

Envelope Endpoint::await_response(std::uint64_t corr, std::uint64_t timeout_us) {
  const std::uint64_t budget = timeout_us ? timeout_us : net_.default_timeout_us();
  const std::uint64_t deadline = net_.now_us_ + budget;
  while (true) {
    auto slot = net_.pending_.find(corr);
    if (slot == net_.pending_.end()) {
      throw Error(Errc::ParamError, "unknown correlation id");
    }
    if (slot->second.has_value()) {
      Envelope resp = std::move(*slot->second);
      net_.pending_.erase(slot);
      return resp;
    }
    if (net_.queue_.empty() || net_.next_due() > deadline) {
      net_.now_us_ = std::max(net_.now_us_, deadline);
      net_.pending_.erase(corr);
      const bool dead = net_.dead_corr_.erase(corr) > 0;
      throw Error(dead ? Errc::Undeliverable : Errc::TimeoutError,
                  dead ? "request destination is not bound" : "request timed out");
    }
    net_.step();
  }
}

void Endpoint::reply(const Envelope& req, std::uint8_t kind, std::span<const std::uint8_t> body,
                     std::uint64_t payload_bytes) {
  if (req.corr == 0) {
    throw Error(Errc::ParamError, "cannot reply to a one-way envelope");
  }
  Envelope env;
  env.src = addr_;
  env.dst = req.src;
  env.kind = kind;
  env.corr = req.corr | kResponseBit;
  env.body.assign(body.begin(), body.end());
  env.payload_bytes = payload_bytes;
  net_.post(std::move(env));
}

Network::Network(std::uint64_t seed, LinkParams defaults)
    : defaults_(defaults), rng_(seed, "transport") {}

Endpoint& Network::bind(const Address& addr) {
  if (endpoints_.count(addr)) {
    throw Error(Errc::AddressInUse, "address already bound: " + addr.to_string());
  }
  auto ep = std::unique_ptr<Endpoint>(new Endpoint(*this, addr));
  Endpoint& ref = *ep;
  endpoints_.emplace(addr, std::move(ep));
  return ref;
}

void Network::set_link(const Address& src, const Address& dst, LinkParams params) {
  links_[{src, dst}] = params;
}

void Network::schedule(std::uint64_t delay_us, std::function<void()> fn) {
  Event ev;
  ev.due = now_us_ + delay_us;
  ev.seq = seq_++;
  ev.timer = std::move(fn);
  queue_.push(std::move(ev));
}

std::uint64_t Network::default_timeout_us() const {
  return 5 * (defaults_.base_us + defaults_.jitter_us);
}

const LinkParams& Network::link(const Address& src, const Address& dst) const {
  auto it = links_.find({src, dst});
  return it == links_.end() ? defaults_ : it->second;
}

void Network::post(Envelope env) {
  const LinkParams& lp = link(env.src, env.dst);
  // Draw jitter and loss unconditionally so the stream stays aligned across
  // configurations that only differ in link parameters.
  const std::uint64_t jitter = rng_.uniform(0, lp.jitter_us);
  const bool lost = rng_.chance(lp.loss_prob);
  env.send_time = now_us_;
  env.size_bytes = kEnvelopeHeaderBytes + env.body.size();
  env.deliver_time = now_us_ + std::max<std::uint64_t>(1, lp.base_us + jitter);
  if (lost) return;

  Event ev;
  ev.due = env.deliver_time;
  ev.seq = seq_++;
  ev.env = std::move(env);
  queue_.push(std::move(ev));
}

std::uint64_t Network::next_due() const { return queue_.top().due; }

bool Network::step() {
  if (queue_.empty()) return false;
  Event ev = queue_.top();
  queue_.pop();
  now_us_ = std::max(now_us_, ev.due);
  if (ev.env.has_value()) {
    deliver(*ev.env);
  } else {
    ev.timer();
  }
  return true;
}

void Network::deliver(const Envelope& env) {
  log_.push_back(LogLine{env.deliver_time, env.src, env.dst, env.kind, env.size_bytes,
                         env.payload_bytes, env.send_time});
  total_bytes_ += env.size_bytes;

  if (env.corr & kResponseBit) {
    auto slot = pending_.find(env.corr & ~kResponseBit);
    if (slot != pending_.end() && !slot->second.has_value()) {
      slot->second = env;
    }
    // A response nobody waits for anymore is dropped.
    return;
  }
  auto it = endpoints_.find(env.dst);
  if (it == endpoints_.end()) {
    if (env.corr != 0) dead_corr_.insert(env.corr);
    return;
  }
  if (it->second->handler_) {
    it->second->handler_(env);
  }
}

void Network::run_until_idle() {
  while (step()) {
  }
}

void Network::run_for(std::uint64_t duration_us) {
  const std::uint64_t target = now_us_ + duration_us;
  while (!queue_.empty() && next_due() <= target) {
    step();
  }
  now_us_ = std::max(now_us_, target);
}

bool Network::run_until(const std::function<bool()>& done, std::uint64_t timeout_us) {
  const std::uint64_t deadline = now_us_ + timeout_us;
  while (!done()) {
    if (queue_.empty() || next_due() > deadline) {
      now_us_ = std::max(now_us_, deadline);
      return done();
    }
    step();
  }
  return true;
}

std::string Network::format_event_log() const {
  std::string out;
  for (const LogLine& l : log_) {
    out += "t=" + std::to_string(l.deliver_time) + " src=" + l.src.to_string() +
           " dst=" + l.dst.to_string() + " kind=" + std::to_string(l.kind) +
           " size=" + std::to_string(l.size_bytes) + "\n";
  }
  return out;
}

}  // namespace guard
