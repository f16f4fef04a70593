#include "tiktriage/pcap.hpp"

#include <algorithm>

namespace tiktriage {

namespace {

constexpr std::uint32_t kMagicMicros = 0xA1B2C3D4;
constexpr std::uint32_t kMagicMicrosSwapped = 0xD4C3B2A1;
constexpr std::uint32_t kMaxRecordLen = 256 * 1024;

std::uint16_t be16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }
std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void put16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}
void put32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int s = 24; s >= 0; s -= 8) v.push_back(static_cast<std::uint8_t>(x >> s));
}
void put32le(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int s = 0; s < 32; s += 8) v.push_back(static_cast<std::uint8_t>(x >> s));
}
void put16le(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
}

std::uint32_t checksum_add(std::uint32_t sum, std::span<const std::uint8_t> data) {
  std::size_t i = 0;
  for (; i + 1 < data.size(); i += 2) sum += (std::uint32_t{data[i]} << 8) | data[i + 1];
  if (i < data.size()) sum += std::uint32_t{data[i]} << 8;
  return sum;
}

std::uint16_t checksum_finish(std::uint32_t sum) {
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum);
}

}  // namespace

std::string_view to_string(IpProto p) {
  switch (p) {
    case IpProto::Tcp: return "tcp";
    case IpProto::Udp: return "udp";
    case IpProto::Icmp: return "icmp";
    case IpProto::Gre: return "gre";
    case IpProto::Other: return "other";
  }
  return "other";
}

std::string format_tcp_flags(std::uint8_t flags) {
  static constexpr std::pair<std::uint8_t, const char*> kNames[] = {
      {tcp_flag::kSyn, "SYN"}, {tcp_flag::kAck, "ACK"}, {tcp_flag::kFin, "FIN"},
      {tcp_flag::kRst, "RST"}, {tcp_flag::kPsh, "PSH"}, {tcp_flag::kUrg, "URG"}};
  std::string out;
  for (auto [bit, name] : kNames) {
    if (flags & bit) {
      if (!out.empty()) out.push_back('|');
      out += name;
    }
  }
  return out;
}

CaptureReader::CaptureReader(std::span<const std::uint8_t> bytes, std::string sensor_id)
    : bytes_(bytes), sensor_id_(std::move(sensor_id)) {
  if (bytes_.size() < 4) throw CaptureError(CaptureError::Kind::TruncatedHeader, "capture shorter than magic");
  const std::uint32_t magic_be = be32(bytes_.data());
  if (magic_be == kMagicMicros) {
    swapped_ = false;  // file is big-endian
  } else if (magic_be == kMagicMicrosSwapped) {
    swapped_ = true;  // file is little-endian
  } else {
    throw CaptureError(CaptureError::Kind::BadMagic, "not a capture file (bad magic)");
  }
  if (bytes_.size() < 24) throw CaptureError(CaptureError::Kind::TruncatedHeader, "truncated global header");
  const std::uint32_t link = read32(20) & 0x0FFFFFFF;
  if (link == static_cast<std::uint32_t>(LinkType::Ethernet)) {
    link_type_ = LinkType::Ethernet;
  } else if (link == static_cast<std::uint32_t>(LinkType::RawIp) || link == 12 || link == 228) {
    link_type_ = LinkType::RawIp;
  } else {
    throw CaptureError(CaptureError::Kind::UnsupportedLinkType,
                       "unsupported link type " + std::to_string(link));
  }
}

std::uint32_t CaptureReader::read32(std::size_t at) const {
  const std::uint8_t* p = bytes_.data() + at;
  if (swapped_) {
    return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
           (std::uint32_t{p[3]} << 24);
  }
  return be32(p);
}

std::optional<PacketRecord> CaptureReader::next() {
  while (pos_ < bytes_.size()) {
    if (bytes_.size() - pos_ < 16) {
      stats_.truncated_tail = true;
      pos_ = bytes_.size();
      return std::nullopt;
    }
    const std::uint32_t sec = read32(pos_);
    const std::uint32_t usec = read32(pos_ + 4);
    const std::uint32_t incl = read32(pos_ + 8);
    const std::uint32_t orig = read32(pos_ + 12);
    if (incl > kMaxRecordLen || bytes_.size() - pos_ - 16 < incl) {
      stats_.truncated_tail = true;
      pos_ = bytes_.size();
      return std::nullopt;
    }
    auto frame = bytes_.subspan(pos_ + 16, incl);
    pos_ += 16 + incl;
    ++stats_.records;
    PacketRecord pkt;
    pkt.ts = static_cast<Micros>(sec) * kMicrosPerSecond + usec;
    pkt.capture_len = incl;
    pkt.orig_len = std::max(orig, incl);
    if (decode(frame, pkt)) {
      ++stats_.ipv4_packets;
      pkt.sensor_id = sensor_id_;
      return pkt;
    }
  }
  return std::nullopt;
}

bool CaptureReader::decode(std::span<const std::uint8_t> frame, PacketRecord& out) {
  std::span<const std::uint8_t> ip = frame;
  if (link_type_ == LinkType::Ethernet) {
    if (frame.size() < 14) {
      ++stats_.malformed;
      return false;
    }
    std::size_t off = 12;
    std::uint16_t ethertype = be16(frame.data() + off);
    while ((ethertype == 0x8100 || ethertype == 0x88A8) && frame.size() >= off + 6) {
      off += 4;
      ethertype = be16(frame.data() + off);
    }
    off += 2;
    if (ethertype == 0x86DD) {
      ++stats_.ipv6;
      return false;
    }
    if (ethertype != 0x0800) {
      ++stats_.non_ipv4;
      return false;
    }
    ip = frame.subspan(std::min(off, frame.size()));
  }
  if (ip.empty()) {
    ++stats_.malformed;
    return false;
  }
  const unsigned version = ip[0] >> 4;
  if (version == 6) {
    ++stats_.ipv6;
    return false;
  }
  if (version != 4) {
    ++stats_.non_ipv4;
    return false;
  }
  const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0F) * 4;
  if (ihl < 20 || ip.size() < ihl) {
    ++stats_.malformed;
    return false;
  }
  const std::size_t total = be16(ip.data() + 2);
  if (total < ihl) {
    ++stats_.malformed;
    return false;
  }
  const std::uint16_t frag = be16(ip.data() + 6);
  if ((frag & 0x2000) != 0 || (frag & 0x1FFF) != 0) {
    ++stats_.fragments;
    return false;
  }
  out.ip_proto_code = ip[9];
  out.ip_proto = proto_from_code(ip[9]);
  out.src_ip = Ipv4{be32(ip.data() + 12)};
  out.dst_ip = Ipv4{be32(ip.data() + 16)};
  auto l4 = ip.subspan(ihl, std::min(ip.size(), total) - ihl);

  switch (out.ip_proto) {
    case IpProto::Tcp: {
      if (l4.size() < 20) {
        ++stats_.malformed;
        return false;
      }
      const std::size_t doff = static_cast<std::size_t>(l4[12] >> 4) * 4;
      if (doff < 20 || l4.size() < doff) {
        ++stats_.malformed;
        return false;
      }
      out.src_port = be16(l4.data());
      out.dst_port = be16(l4.data() + 2);
      out.tcp_seq = be32(l4.data() + 4);
      out.tcp_ack = be32(l4.data() + 8);
      out.tcp_flags = l4[13] & 0x3F;
      out.payload.assign(l4.begin() + static_cast<std::ptrdiff_t>(doff), l4.end());
      break;
    }
    case IpProto::Udp: {
      if (l4.size() < 8) {
        ++stats_.malformed;
        return false;
      }
      out.src_port = be16(l4.data());
      out.dst_port = be16(l4.data() + 2);
      out.payload.assign(l4.begin() + 8, l4.end());
      break;
    }
    default:
      out.payload.assign(l4.begin(), l4.end());
      break;
  }
  return true;
}

CaptureParseResult parse_capture_file(std::span<const std::uint8_t> bytes, const std::string& sensor_id) {
  CaptureReader reader(bytes, sensor_id);
  CaptureParseResult result;
  while (auto pkt = reader.next()) result.packets.push_back(std::move(*pkt));
  result.stats = reader.stats();
  return result;
}

CaptureWriter::CaptureWriter(LinkType link, std::uint32_t snaplen) : link_(link) {
  put32le(out_, kMagicMicros);
  put16le(out_, 2);
  put16le(out_, 4);
  put32le(out_, 0);
  put32le(out_, 0);
  put32le(out_, snaplen);
  put32le(out_, static_cast<std::uint32_t>(link));
}

std::vector<std::uint8_t> CaptureWriter::build_ipv4(const PacketRecord& pkt) {
  std::vector<std::uint8_t> l4;
  const std::uint8_t proto = pkt.ip_proto == IpProto::Other ? pkt.ip_proto_code : proto_code(pkt.ip_proto);
  if (pkt.ip_proto == IpProto::Tcp) {
    put16(l4, pkt.src_port);
    put16(l4, pkt.dst_port);
    put32(l4, pkt.tcp_seq);
    put32(l4, pkt.tcp_ack);
    l4.push_back(0x50);
    l4.push_back(pkt.tcp_flags);
    put16(l4, 64240);
    put16(l4, 0);  // checksum
    put16(l4, 0);
    l4.insert(l4.end(), pkt.payload.begin(), pkt.payload.end());
  } else if (pkt.ip_proto == IpProto::Udp) {
    put16(l4, pkt.src_port);
    put16(l4, pkt.dst_port);
    put16(l4, static_cast<std::uint16_t>(8 + pkt.payload.size()));
    put16(l4, 0);
    l4.insert(l4.end(), pkt.payload.begin(), pkt.payload.end());
  } else {
    l4 = pkt.payload;
  }
  if (pkt.ip_proto == IpProto::Tcp || pkt.ip_proto == IpProto::Udp) {
    std::vector<std::uint8_t> pseudo;
    put32(pseudo, pkt.src_ip.value);
    put32(pseudo, pkt.dst_ip.value);
    pseudo.push_back(0);
    pseudo.push_back(proto);
    put16(pseudo, static_cast<std::uint16_t>(l4.size()));
    std::uint32_t sum = checksum_add(0, pseudo);
    sum = checksum_add(sum, l4);
    std::uint16_t c = checksum_finish(sum);
    if (pkt.ip_proto == IpProto::Udp && c == 0) c = 0xFFFF;
    const std::size_t at = pkt.ip_proto == IpProto::Tcp ? 16 : 6;
    l4[at] = static_cast<std::uint8_t>(c >> 8);
    l4[at + 1] = static_cast<std::uint8_t>(c);
  }
  std::vector<std::uint8_t> ip;
  ip.reserve(20 + l4.size());
  ip.push_back(0x45);
  ip.push_back(0);
  put16(ip, static_cast<std::uint16_t>(20 + l4.size()));
  put16(ip, static_cast<std::uint16_t>(pkt.tcp_seq ^ pkt.src_port));  // identification
  put16(ip, 0x4000);                                                   // DF
  ip.push_back(64);
  ip.push_back(proto);
  put16(ip, 0);
  put32(ip, pkt.src_ip.value);
  put32(ip, pkt.dst_ip.value);
  const std::uint16_t hc = checksum_finish(checksum_add(0, ip));
  ip[10] = static_cast<std::uint8_t>(hc >> 8);
  ip[11] = static_cast<std::uint8_t>(hc);
  ip.insert(ip.end(), l4.begin(), l4.end());
  return ip;
}

void CaptureWriter::add(const PacketRecord& pkt) {
  std::vector<std::uint8_t> frame;
  if (link_ == LinkType::Ethernet) {
    static constexpr std::uint8_t kDst[6] = {0x02, 0x00, 0x5e, 0x00, 0x00, 0x01};
    static constexpr std::uint8_t kSrc[6] = {0x02, 0x00, 0x5e, 0x00, 0x00, 0x02};
    frame.insert(frame.end(), std::begin(kDst), std::end(kDst));
    frame.insert(frame.end(), std::begin(kSrc), std::end(kSrc));
    put16(frame, 0x0800);
  }
  auto ip = build_ipv4(pkt);
  frame.insert(frame.end(), ip.begin(), ip.end());
  const auto sec = static_cast<std::uint32_t>(pkt.ts / kMicrosPerSecond);
  const auto usec = static_cast<std::uint32_t>(pkt.ts % kMicrosPerSecond);
  put32le(out_, sec);
  put32le(out_, usec);
  put32le(out_, static_cast<std::uint32_t>(frame.size()));
  put32le(out_, static_cast<std::uint32_t>(frame.size()));
  out_.insert(out_.end(), frame.begin(), frame.end());
  ++count_;
}

}  // namespace tiktriage
