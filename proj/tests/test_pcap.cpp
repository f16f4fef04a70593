#include <gtest/gtest.h>

#include "support.hpp"
#include "tiktriage/pcap.hpp"

using namespace tiktriage;
using tt_test::kT0;

namespace {

PacketRecord random_packet(Rng& rng) {
  PacketRecord p;
  p.ts = kT0 + static_cast<Micros>(rng.below(86400ULL * 1000000ULL));
  p.sensor_id = "s1";
  p.src_ip = Ipv4(static_cast<std::uint32_t>(rng.next()));
  p.dst_ip = Ipv4(static_cast<std::uint32_t>(rng.next()));
  const auto kind = rng.below(3);
  p.ip_proto = kind == 0 ? IpProto::Tcp : kind == 1 ? IpProto::Udp : IpProto::Gre;
  p.ip_proto_code = proto_code(p.ip_proto);
  if (p.has_ports()) {
    p.src_port = static_cast<std::uint16_t>(rng.below(65536));
    p.dst_port = static_cast<std::uint16_t>(rng.below(65536));
  }
  if (p.ip_proto == IpProto::Tcp) {
    p.tcp_flags = static_cast<std::uint8_t>(rng.below(64));
    p.tcp_seq = static_cast<std::uint32_t>(rng.next());
    p.tcp_ack = static_cast<std::uint32_t>(rng.next());
  }
  p.payload.resize(rng.below(300));
  for (auto& b : p.payload) b = static_cast<std::uint8_t>(rng.below(256));
  return p;
}

void expect_same(const PacketRecord& a, const PacketRecord& b) {
  EXPECT_EQ(a.ts, b.ts);
  EXPECT_EQ(a.src_ip, b.src_ip);
  EXPECT_EQ(a.dst_ip, b.dst_ip);
  EXPECT_EQ(a.ip_proto, b.ip_proto);
  EXPECT_EQ(a.src_port, b.src_port);
  EXPECT_EQ(a.dst_port, b.dst_port);
  EXPECT_EQ(a.tcp_flags, b.tcp_flags);
  EXPECT_EQ(a.tcp_seq, b.tcp_seq);
  EXPECT_EQ(a.tcp_ack, b.tcp_ack);
  EXPECT_EQ(a.payload, b.payload);
}

void put32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put16be(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

TEST(Capture, RoundTripProperty) {
  Rng rng(21);
  for (auto link : {LinkType::Ethernet, LinkType::RawIp}) {
    std::vector<PacketRecord> in;
    CaptureWriter w(link);
    for (int i = 0; i < 500; ++i) {
      in.push_back(random_packet(rng));
      w.add(in.back());
    }
    const auto parsed = parse_capture_file(w.bytes(), "s1");
    ASSERT_EQ(parsed.packets.size(), in.size());
    EXPECT_EQ(parsed.stats.records, in.size());
    EXPECT_EQ(parsed.stats.skipped(), 0u);
    EXPECT_FALSE(parsed.stats.truncated_tail);
    for (std::size_t i = 0; i < in.size(); ++i) {
      expect_same(parsed.packets[i], in[i]);
      EXPECT_EQ(parsed.packets[i].sensor_id, "s1");
    }
  }
}

TEST(Capture, BigEndianFile) {
  auto pkt = tt_test::tcp("s", Ipv4(1, 2, 3, 4), 1234, Ipv4(5, 6, 7, 8), 80, kT0 + 7, tcp_flag::kSyn, 42, "hi");
  const auto ip = CaptureWriter::build_ipv4(pkt);
  std::vector<std::uint8_t> file;
  put32be(file, 0xa1b2c3d4);
  put16be(file, 2);
  put16be(file, 4);
  put32be(file, 0);
  put32be(file, 0);
  put32be(file, 65535);
  put32be(file, 101);
  put32be(file, static_cast<std::uint32_t>(pkt.ts / kMicrosPerSecond));
  put32be(file, static_cast<std::uint32_t>(pkt.ts % kMicrosPerSecond));
  put32be(file, static_cast<std::uint32_t>(ip.size()));
  put32be(file, static_cast<std::uint32_t>(ip.size()));
  file.insert(file.end(), ip.begin(), ip.end());
  const auto parsed = parse_capture_file(file, "s");
  ASSERT_EQ(parsed.packets.size(), 1u);
  expect_same(parsed.packets[0], pkt);
}

TEST(Capture, HeaderErrors) {
  std::vector<std::uint8_t> file(24, 0);
  try {
    parse_capture_file(file, "s");
    FAIL() << "expected bad magic";
  } catch (const CaptureError& e) {
    EXPECT_EQ(e.kind(), CaptureError::Kind::BadMagic);
  }
  std::vector<std::uint8_t> shortfile = {0xd4, 0xc3, 0xb2, 0xa1};
  try {
    parse_capture_file(shortfile, "s");
    FAIL() << "expected truncated header";
  } catch (const CaptureError& e) {
    EXPECT_EQ(e.kind(), CaptureError::Kind::TruncatedHeader);
  }
  CaptureWriter w;
  auto bytes = w.bytes();
  bytes[20] = 113;
  try {
    parse_capture_file(bytes, "s");
    FAIL() << "expected unsupported link type";
  } catch (const CaptureError& e) {
    EXPECT_EQ(e.kind(), CaptureError::Kind::UnsupportedLinkType);
  }
}

TEST(Capture, TruncatedTailKeepsEarlierPackets) {
  Rng rng(5);
  CaptureWriter w;
  for (int i = 0; i < 3; ++i) w.add(random_packet(rng));
  auto bytes = w.bytes();
  bytes.resize(bytes.size() - 3);
  const auto parsed = parse_capture_file(bytes, "s");
  EXPECT_EQ(parsed.packets.size(), 2u);
  EXPECT_TRUE(parsed.stats.truncated_tail);
}

TEST(Capture, NonIpv4AndFragmentsAreCounted) {
  auto pkt = tt_test::udp("s", Ipv4(1, 1, 1, 1), 53, Ipv4(2, 2, 2, 2), 53, kT0, "x");
  auto frag = CaptureWriter::build_ipv4(pkt);
  frag[6] = 0x20;  // more fragments
  std::vector<std::uint8_t> v6(40, 0);
  v6[0] = 0x60;
  std::vector<std::uint8_t> file = CaptureWriter(LinkType::RawIp).bytes();
  for (const auto* frame : {&frag, &v6}) {
    for (std::uint32_t v : {0u, 0u, static_cast<std::uint32_t>(frame->size()), static_cast<std::uint32_t>(frame->size())}) {
      for (int s = 0; s < 32; s += 8) file.push_back(static_cast<std::uint8_t>(v >> s));
    }
    file.insert(file.end(), frame->begin(), frame->end());
  }
  const auto parsed = parse_capture_file(file, "s");
  EXPECT_TRUE(parsed.packets.empty());
  EXPECT_EQ(parsed.stats.records, 2u);
  EXPECT_EQ(parsed.stats.fragments, 1u);
  EXPECT_EQ(parsed.stats.ipv6, 1u);
}
