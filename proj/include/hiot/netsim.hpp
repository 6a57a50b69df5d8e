#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hiot/util/rng.hpp"

namespace hiot::netsim {

using NodeId = std::uint32_t;

template <class Payload>
struct SimEvent {
  double fire_ms = 0;
  std::uint64_t seq = 0;
  NodeId target = 0;
  Payload payload;
};

/// Single-clock event kernel. Events fire in (fire_ms, seq) order; seq is the
/// insertion counter, so same-time events fire in scheduling order.
template <class Payload>
class Simulator {
 public:
  using Event = SimEvent<Payload>;
  using Handler = std::function<void(const Event&)>;
  using KindFn = std::function<std::string(const Payload&)>;

  explicit Simulator(std::uint64_t seed) : rng_(seed) {}

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  void set_handler(Handler h) { handler_ = std::move(h); }

  std::uint64_t schedule(double delay_ms, NodeId target, Payload payload) {
    if (!(delay_ms >= 0) || !std::isfinite(delay_ms)) throw std::invalid_argument("delay must be finite and >= 0");
    return push(now_ + delay_ms, target, std::move(payload));
  }

  std::uint64_t schedule_at(double fire_ms, NodeId target, Payload payload) {
    if (!(fire_ms >= now_) || !std::isfinite(fire_ms)) throw std::invalid_argument("cannot schedule into the past");
    return push(fire_ms, target, std::move(payload));
  }

  /// Fires every event with fire_ms <= t_ms, then advances the clock to t_ms.
  std::size_t run_until(double t_ms) {
    std::size_t fired = 0;
    while (!queue_.empty() && queue_.top().fire_ms <= t_ms) {
      fire_next();
      ++fired;
    }
    if (t_ms > now_) now_ = t_ms;
    return fired;
  }

  /// Drains the queue.
  std::size_t run() {
    std::size_t fired = 0;
    while (!queue_.empty()) {
      fire_next();
      ++fired;
    }
    return fired;
  }

  double now() const { return now_; }
  bool idle() const { return queue_.empty(); }
  std::size_t pending() const { return queue_.size(); }
  Rng& rng() { return rng_; }

  void enable_trace(KindFn kind_of) { kind_of_ = std::move(kind_of); }
  const std::vector<std::string>& trace() const { return trace_; }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.fire_ms != b.fire_ms) return a.fire_ms > b.fire_ms;
      return a.seq > b.seq;
    }
  };

  std::uint64_t push(double at, NodeId target, Payload payload) {
    const auto seq = next_seq_++;
    queue_.push(Event{at, seq, target, std::move(payload)});
    return seq;
  }

  void fire_next() {
    Event ev = queue_.top();
    queue_.pop();
    if (ev.fire_ms < now_) throw std::logic_error("causality violation in event queue");
    now_ = ev.fire_ms;
    if (kind_of_) {
      nlohmann::json line{{"fire_ms", ev.fire_ms}, {"seq", ev.seq}, {"target", ev.target},
                          {"kind", kind_of_(ev.payload)}};
      trace_.push_back(line.dump());
    }
    if (handler_) handler_(ev);
  }

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  Handler handler_;
  KindFn kind_of_;
  std::vector<std::string> trace_;
  Rng rng_;
  double now_ = 0;
  std::uint64_t next_seq_ = 0;
};

enum class LinkClass { lan, wan };

inline const char* to_string(LinkClass c) { return c == LinkClass::lan ? "LAN" : "WAN"; }

struct Link {
  NodeId src = 0;
  NodeId dst = 0;
  double base_ms = 0;
  double jitter_ms = 0;
  double bandwidth_kbps = 1000;
  LinkClass cls = LinkClass::lan;

  /// Serialization time: kbps is bits per millisecond.
  double serialization_ms(std::size_t size_bytes) const {
    return static_cast<double>(size_bytes) * 8.0 / bandwidth_kbps;
  }
};

// ---- energy accounting ---------------------------------------------------

/// Joule-equivalents per unit. KB means 1000 bytes.
struct EnergyCosts {
  double cpu_j_per_ms = 0.01;
  double lan_j_per_kb = 0.1;
  double wan_j_per_kb = 0.5;
  double hash_j = 0.001;
};

struct EnergyCounters {
  double cpu_ms = 0;
  double lan_tx_bytes = 0;
  double lan_rx_bytes = 0;
  double wan_tx_bytes = 0;
  double wan_rx_bytes = 0;
  double hash_attempts = 0;

  double total(const EnergyCosts& c) const {
    return cpu_ms * c.cpu_j_per_ms + (lan_tx_bytes + lan_rx_bytes) / 1000.0 * c.lan_j_per_kb +
           (wan_tx_bytes + wan_rx_bytes) / 1000.0 * c.wan_j_per_kb + hash_attempts * c.hash_j;
  }
};

enum class Charge { cpu_ms, lan_tx_bytes, lan_rx_bytes, wan_tx_bytes, wan_rx_bytes, hash_attempts };

class EnergyLedger {
 public:
  explicit EnergyLedger(EnergyCosts costs = {}) : costs_(costs) {}

  void charge(NodeId node, Charge kind, double amount) {
    if (!(amount >= 0) || !std::isfinite(amount)) throw std::invalid_argument("charge amount must be >= 0");
    auto& c = counters_[node];
    switch (kind) {
      case Charge::cpu_ms: c.cpu_ms += amount; break;
      case Charge::lan_tx_bytes: c.lan_tx_bytes += amount; break;
      case Charge::lan_rx_bytes: c.lan_rx_bytes += amount; break;
      case Charge::wan_tx_bytes: c.wan_tx_bytes += amount; break;
      case Charge::wan_rx_bytes: c.wan_rx_bytes += amount; break;
      case Charge::hash_attempts: c.hash_attempts += amount; break;
    }
  }

  double energy_total(NodeId node) const {
    auto it = counters_.find(node);
    return it == counters_.end() ? 0.0 : it->second.total(costs_);
  }

  double energy_total() const {
    double acc = 0;
    for (const auto& [_, c] : counters_) acc += c.total(costs_);
    return acc;
  }

  EnergyCounters counters(NodeId node) const {
    auto it = counters_.find(node);
    return it == counters_.end() ? EnergyCounters{} : it->second;
  }

  const std::map<NodeId, EnergyCounters>& all() const { return counters_; }
  const EnergyCosts& costs() const { return costs_; }

 private:
  EnergyCosts costs_;
  std::map<NodeId, EnergyCounters> counters_;
};

/// Directed links over a simulator, with per-endpoint byte accounting.
template <class Payload>
class Network {
 public:
  Network(Simulator<Payload>& sim, EnergyLedger& energy) : sim_(sim), energy_(energy) {}

  void add_link(const Link& l) {
    if (!(l.base_ms >= 0) || !(l.jitter_ms >= 0)) throw std::invalid_argument("link delays must be >= 0");
    if (!(l.bandwidth_kbps > 0)) throw std::invalid_argument("link bandwidth must be > 0");
    links_[{l.src, l.dst}] = l;
  }

  /// Adds the link and its reverse with the same parameters.
  void add_duplex(Link l) {
    add_link(l);
    std::swap(l.src, l.dst);
    add_link(l);
  }

  bool has_link(NodeId src, NodeId dst) const { return links_.contains({src, dst}); }

  const Link& link(NodeId src, NodeId dst) const {
    auto it = links_.find({src, dst});
    if (it == links_.end())
      throw std::out_of_range("no link " + std::to_string(src) + " -> " + std::to_string(dst));
    return it->second;
  }

  /// delay = base + U(-jitter, +jitter) + size*8/bandwidth, floored at 0.
  double delay_for(const Link& l, std::size_t size_bytes) {
    const double jitter = l.jitter_ms > 0 ? sim_.rng().uniform(-l.jitter_ms, l.jitter_ms) : 0.0;
    return std::max(0.0, l.base_ms + jitter + l.serialization_ms(size_bytes));
  }

  /// hold_ms is local processing time at src before the message goes out.
  std::uint64_t send(NodeId src, NodeId dst, std::size_t size_bytes, Payload payload, double hold_ms = 0) {
    if (!(hold_ms >= 0)) throw std::invalid_argument("hold_ms must be >= 0");
    const Link& l = link(src, dst);
    const double d = hold_ms + delay_for(l, size_bytes);
    const auto bytes = static_cast<double>(size_bytes);
    if (l.cls == LinkClass::lan) {
      energy_.charge(src, Charge::lan_tx_bytes, bytes);
      energy_.charge(dst, Charge::lan_rx_bytes, bytes);
    } else {
      energy_.charge(src, Charge::wan_tx_bytes, bytes);
      energy_.charge(dst, Charge::wan_rx_bytes, bytes);
    }
    ++sent_;
    return sim_.schedule(d, dst, std::move(payload));
  }

  std::uint64_t sent_count() const { return sent_; }

 private:
  Simulator<Payload>& sim_;
  EnergyLedger& energy_;
  std::map<std::pair<NodeId, NodeId>, Link> links_;
  std::uint64_t sent_ = 0;
};

}  // namespace hiot::netsim
