#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "tiktriage/packet.hpp"
#include "tiktriage/util.hpp"

namespace tt_test {

using tiktriage::Ipv4;
using tiktriage::Micros;
using tiktriage::PacketRecord;

inline constexpr Micros kSec = tiktriage::kMicrosPerSecond;

/// 2019-07-25 00:00:00 UTC
inline constexpr Micros kT0 = 18102LL * tiktriage::kMicrosPerDay;

inline std::vector<std::uint8_t> bytes(std::string_view s) { return {s.begin(), s.end()}; }

inline PacketRecord tcp(std::string sensor, Ipv4 src, std::uint16_t sport, Ipv4 dst, std::uint16_t dport, Micros ts,
                        std::uint8_t flags, std::uint32_t seq = 1000, std::string_view payload = {}) {
  PacketRecord p;
  p.ts = ts;
  p.sensor_id = std::move(sensor);
  p.src_ip = src;
  p.dst_ip = dst;
  p.ip_proto = tiktriage::IpProto::Tcp;
  p.ip_proto_code = 6;
  p.src_port = sport;
  p.dst_port = dport;
  p.tcp_flags = flags;
  p.tcp_seq = seq;
  p.payload = bytes(payload);
  return p;
}

inline PacketRecord udp(std::string sensor, Ipv4 src, std::uint16_t sport, Ipv4 dst, std::uint16_t dport, Micros ts,
                        std::string_view payload = {}) {
  PacketRecord p;
  p.ts = ts;
  p.sensor_id = std::move(sensor);
  p.src_ip = src;
  p.dst_ip = dst;
  p.ip_proto = tiktriage::IpProto::Udp;
  p.ip_proto_code = 17;
  p.src_port = sport;
  p.dst_port = dport;
  p.payload = bytes(payload);
  return p;
}

/// A complete client/server TCP conversation with correct sequence numbers.
class Conversation {
 public:
  Conversation(std::string sensor, Ipv4 client, std::uint16_t cport, Ipv4 server, std::uint16_t sport, Micros t0,
               std::uint32_t cisn = 1000, std::uint32_t sisn = 50000)
      : sensor_(std::move(sensor)), c_(client), s_(server), cp_(cport), sp_(sport), t_(t0), cseq_(cisn), sseq_(sisn) {}

  Conversation& handshake() {
    push(true, tiktriage::tcp_flag::kSyn, {});
    ++cseq_;
    push(false, tiktriage::tcp_flag::kSyn | tiktriage::tcp_flag::kAck, {});
    ++sseq_;
    push(true, tiktriage::tcp_flag::kAck, {});
    return *this;
  }
  Conversation& client(std::string_view data) {
    push(true, tiktriage::tcp_flag::kPsh | tiktriage::tcp_flag::kAck, data);
    cseq_ += static_cast<std::uint32_t>(data.size());
    return *this;
  }
  Conversation& server(std::string_view data) {
    push(false, tiktriage::tcp_flag::kPsh | tiktriage::tcp_flag::kAck, data);
    sseq_ += static_cast<std::uint32_t>(data.size());
    return *this;
  }
  Conversation& fin() {
    push(true, tiktriage::tcp_flag::kFin | tiktriage::tcp_flag::kAck, {});
    push(false, tiktriage::tcp_flag::kFin | tiktriage::tcp_flag::kAck, {});
    return *this;
  }
  Conversation& rst() {
    push(true, tiktriage::tcp_flag::kRst, {});
    return *this;
  }
  const std::vector<PacketRecord>& packets() const { return packets_; }
  void append_to(std::vector<PacketRecord>& out) const { out.insert(out.end(), packets_.begin(), packets_.end()); }

 private:
  void push(bool from_client, std::uint8_t flags, std::string_view data) {
    auto p = from_client ? tcp(sensor_, c_, cp_, s_, sp_, t_, flags, cseq_, data)
                         : tcp(sensor_, s_, sp_, c_, cp_, t_, flags, sseq_, data);
    if (flags & tiktriage::tcp_flag::kAck) p.tcp_ack = from_client ? sseq_ : cseq_;
    packets_.push_back(std::move(p));
    t_ += 1000;
  }

  std::string sensor_;
  Ipv4 c_;
  Ipv4 s_;
  std::uint16_t cp_;
  std::uint16_t sp_;
  Micros t_;
  std::uint32_t cseq_;
  std::uint32_t sseq_;
  std::vector<PacketRecord> packets_;
};

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("tiktriage-test-" + std::to_string(rd()) + "-" + std::to_string(++counter));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Every regular file under `dir` keyed by relative path.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      out[std::filesystem::relative(e.path(), dir).generic_string()] = tiktriage::read_text_file(e.path());
    }
  }
  return out;
}

/// Hand-built PPTP control messages (156 bytes, big-endian fields).
inline std::string pptp_message(std::uint16_t ctrl_type, std::uint8_t result) {
  std::string m(156, '\0');
  auto put16 = [&](std::size_t at, std::uint16_t v) {
    m[at] = static_cast<char>(v >> 8);
    m[at + 1] = static_cast<char>(v & 0xFF);
  };
  put16(0, 156);
  put16(2, 1);
  m[4] = '\x1A';
  m[5] = '\x2B';
  m[6] = '\x3C';
  m[7] = '\x4D';
  put16(8, ctrl_type);
  put16(12, 0x0100);
  if (ctrl_type == 2) {
    m[14] = static_cast<char>(result);
    m[15] = 0;
  }
  m[19] = 1;  // framing caps
  m[23] = 1;  // bearer caps
  const std::string host = "peer";
  std::copy(host.begin(), host.end(), m.begin() + 28);
  return m;
}

}  // namespace tt_test
