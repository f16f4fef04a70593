#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tiktriage/net.hpp"
#include "tiktriage/util.hpp"

namespace tiktriage {

enum class IpProto : std::uint8_t { Tcp, Udp, Icmp, Gre, Other };

constexpr IpProto proto_from_code(std::uint8_t code) {
  switch (code) {
    case 6: return IpProto::Tcp;
    case 17: return IpProto::Udp;
    case 1: return IpProto::Icmp;
    case 47: return IpProto::Gre;
    default: return IpProto::Other;
  }
}

constexpr std::uint8_t proto_code(IpProto p) {
  switch (p) {
    case IpProto::Tcp: return 6;
    case IpProto::Udp: return 17;
    case IpProto::Icmp: return 1;
    case IpProto::Gre: return 47;
    case IpProto::Other: return 0;
  }
  return 0;
}

std::string_view to_string(IpProto p);

namespace tcp_flag {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
inline constexpr std::uint8_t kUrg = 0x20;
}  // namespace tcp_flag

/// "SYN|ACK" style rendering; empty set renders as "".
std::string format_tcp_flags(std::uint8_t flags);

/// One decoded IPv4 packet.
///
/// Ports are zero unless the protocol is TCP or UDP; `tcp_flags` and
/// `tcp_seq` are meaningful only for TCP. For TCP/UDP `payload` holds the
/// transport payload, for every other protocol the whole IP payload.
struct PacketRecord {
  Micros ts = 0;
  std::string sensor_id;
  Ipv4 src_ip;
  Ipv4 dst_ip;
  IpProto ip_proto = IpProto::Other;
  std::uint8_t ip_proto_code = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t tcp_flags = 0;
  std::uint32_t tcp_seq = 0;
  std::uint32_t tcp_ack = 0;
  std::vector<std::uint8_t> payload;
  std::uint32_t capture_len = 0;
  std::uint32_t orig_len = 0;

  bool has(std::uint8_t flag) const { return (tcp_flags & flag) != 0; }
  bool has_ports() const { return ip_proto == IpProto::Tcp || ip_proto == IpProto::Udp; }
};

}  // namespace tiktriage
