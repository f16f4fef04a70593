#include "tiktriage/flow.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>
#include <unordered_map>

namespace tiktriage {

std::string_view to_string(FlowState s) {
  switch (s) {
    case FlowState::SynOnly: return "SYN_ONLY";
    case FlowState::HandshakeComplete: return "HANDSHAKE_COMPLETE";
    case FlowState::Data: return "DATA";
    case FlowState::Closed: return "CLOSED";
    case FlowState::Reset: return "RESET";
  }
  return "SYN_ONLY";
}

namespace {

struct TupleKey {
  std::string_view sensor;
  std::uint8_t proto;
  std::uint32_t lo_ip, hi_ip;
  std::uint16_t lo_port, hi_port;

  bool operator==(const TupleKey&) const = default;
};

struct TupleHash {
  std::size_t operator()(const TupleKey& k) const {
    std::uint64_t h = std::hash<std::string_view>{}(k.sensor);
    h = Rng::mix(h ^ k.proto);
    h = Rng::mix(h ^ ((std::uint64_t{k.lo_ip} << 32) | k.hi_ip));
    h = Rng::mix(h ^ ((std::uint64_t{k.lo_port} << 16) | k.hi_port));
    return static_cast<std::size_t>(h);
  }
};

TupleKey key_of(const PacketRecord& p) {
  auto a = std::make_pair(p.src_ip.value, p.src_port);
  auto b = std::make_pair(p.dst_ip.value, p.dst_port);
  if (b < a) std::swap(a, b);
  return {p.sensor_id, p.ip_proto_code, a.first, b.first, a.second, b.second};
}

int rank(FlowState s) {
  switch (s) {
    case FlowState::SynOnly: return 0;
    case FlowState::HandshakeComplete: return 1;
    case FlowState::Data: return 2;
    case FlowState::Closed:
    case FlowState::Reset: return 3;
  }
  return 0;
}

void advance(FlowState& s, FlowState to) {
  if (rank(to) > rank(s)) s = to;
}

struct Tracker {
  bool syn_fwd = false;
  bool synack_rev = false;
};

void update_state(FlowRecord& f, Tracker& t, const PacketRecord& p, bool fwd) {
  if (p.ip_proto != IpProto::Tcp) {
    advance(f.state, FlowState::Data);
    return;
  }
  const bool syn = p.has(tcp_flag::kSyn);
  const bool ack = p.has(tcp_flag::kAck);
  if (fwd && syn && !ack) t.syn_fwd = true;
  if (!fwd && syn && ack && t.syn_fwd) t.synack_rev = true;
  if (fwd && ack && !syn && t.synack_rev) advance(f.state, FlowState::HandshakeComplete);
  if (!p.payload.empty()) advance(f.state, FlowState::Data);
  if (p.has(tcp_flag::kRst)) advance(f.state, FlowState::Reset);
  if (p.has(tcp_flag::kFin)) advance(f.state, FlowState::Closed);
}

}  // namespace

std::string make_flow_id(std::string_view sensor, std::uint8_t proto_code, Ipv4 a, std::uint16_t a_port, Ipv4 b,
                         std::uint16_t b_port, Micros first_ts) {
  auto x = std::make_pair(a.value, a_port);
  auto y = std::make_pair(b.value, b_port);
  if (y < x) std::swap(x, y);
  std::string canon;
  canon.reserve(sensor.size() + 64);
  canon.append(sensor);
  canon += '|' + std::to_string(proto_code) + '|' + std::to_string(x.first) + ':' + std::to_string(x.second) + '|' +
           std::to_string(y.first) + ':' + std::to_string(y.second) + '|' + std::to_string(first_ts);
  return hex64(fnv1a64(canon));
}

std::vector<FlowRecord> assemble_flows(std::span<const PacketRecord> packets, Micros idle_timeout) {
  std::vector<std::size_t> order(packets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = packets[a];
    const auto& pb = packets[b];
    return std::tie(pa.sensor_id, pa.ts) < std::tie(pb.sensor_id, pb.ts);
  });

  std::vector<FlowRecord> flows;
  std::vector<Tracker> trackers;
  std::unordered_map<TupleKey, std::size_t, TupleHash> active;
  active.reserve(packets.size() / 2 + 1);

  for (std::size_t idx : order) {
    const PacketRecord& p = packets[idx];
    const TupleKey key = key_of(p);
    auto it = active.find(key);
    if (it != active.end() && p.ts - flows[it->second].last_ts > idle_timeout) {
      active.erase(it);
      it = active.end();
    }
    if (it == active.end()) {
      FlowRecord f;
      f.sensor_id = p.sensor_id;
      f.ip_proto = p.ip_proto;
      f.ip_proto_code = p.ip_proto_code;
      f.initiator_ip = p.src_ip;
      f.initiator_port = p.src_port;
      f.responder_ip = p.dst_ip;
      f.responder_port = p.dst_port;
      f.first_ts = f.last_ts = p.ts;
      f.flow_id = make_flow_id(p.sensor_id, p.ip_proto_code, p.src_ip, p.src_port, p.dst_ip, p.dst_port, p.ts);
      flows.push_back(std::move(f));
      trackers.emplace_back();
      it = active.emplace(key_of(packets[idx]), flows.size() - 1).first;
    }
    FlowRecord& f = flows[it->second];
    const bool fwd = f.is_forward(p);
    f.last_ts = std::max(f.last_ts, p.ts);
    if (fwd) {
      ++f.fwd_packets;
      f.fwd_bytes += p.payload.size();
    } else {
      ++f.rev_packets;
      f.rev_bytes += p.payload.size();
    }
    f.flag_union |= p.tcp_flags;
    f.packet_indices.push_back(idx);
    update_state(f, trackers[it->second], p, fwd);
  }

  std::sort(flows.begin(), flows.end(), [](const FlowRecord& a, const FlowRecord& b) {
    return std::tie(a.sensor_id, a.first_ts, a.flow_id) < std::tie(b.sensor_id, b.first_ts, b.flow_id);
  });
  return flows;
}

}  // namespace tiktriage
