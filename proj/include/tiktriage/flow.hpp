#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tiktriage/packet.hpp"

namespace tiktriage {

enum class FlowState : std::uint8_t { SynOnly, HandshakeComplete, Data, Closed, Reset };

std::string_view to_string(FlowState s);

struct FlowRecord {
  std::string flow_id;
  std::string sensor_id;
  IpProto ip_proto = IpProto::Other;
  std::uint8_t ip_proto_code = 0;
  Ipv4 initiator_ip;
  std::uint16_t initiator_port = 0;
  Ipv4 responder_ip;
  std::uint16_t responder_port = 0;
  Micros first_ts = 0;
  Micros last_ts = 0;
  std::uint64_t fwd_packets = 0;
  std::uint64_t rev_packets = 0;
  std::uint64_t fwd_bytes = 0;
  std::uint64_t rev_bytes = 0;
  std::uint8_t flag_union = 0;
  FlowState state = FlowState::SynOnly;
  /// Indices into the packet vector given to assemble_flows, in time order.
  std::vector<std::size_t> packet_indices;

  std::uint64_t packets() const { return fwd_packets + rev_packets; }
  bool is_forward(const PacketRecord& p) const {
    return p.src_ip == initiator_ip && p.src_port == initiator_port;
  }
};

inline constexpr Micros kDefaultIdleTimeout = 60 * kMicrosPerSecond;

/// Stable flow identifier over the canonical (sorted-endpoint) tuple, sensor
/// and flow start time.
std::string make_flow_id(std::string_view sensor, std::uint8_t proto_code, Ipv4 a, std::uint16_t a_port, Ipv4 b,
                         std::uint16_t b_port, Micros first_ts);

/// Groups packets into bidirectional flows keyed by sensor and unordered
/// 5-tuple. A gap strictly greater than `idle_timeout` between consecutive
/// packets of one tuple starts a new flow. Packets may arrive in any order;
/// they are processed by (sensor, ts, input position). Output is sorted by
/// (sensor, first_ts, flow_id).
std::vector<FlowRecord> assemble_flows(std::span<const PacketRecord> packets,
                                       Micros idle_timeout = kDefaultIdleTimeout);

}  // namespace tiktriage
