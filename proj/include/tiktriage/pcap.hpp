#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tiktriage/packet.hpp"

namespace tiktriage {

/// Link types accepted in the capture global header.
enum class LinkType : std::uint32_t { Ethernet = 1, RawIp = 101 };

class CaptureError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, UnsupportedLinkType, TruncatedHeader };

  CaptureError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Per-file accounting. Everything that is not yielded as a PacketRecord is
/// counted in exactly one bucket.
struct CaptureStats {
  std::size_t records = 0;
  std::size_t ipv4_packets = 0;
  std::size_t non_ipv4 = 0;
  std::size_t ipv6 = 0;
  std::size_t fragments = 0;
  std::size_t malformed = 0;
  bool truncated_tail = false;

  std::size_t skipped() const { return non_ipv4 + ipv6 + fragments + malformed; }
};

/// Streaming decoder over an in-memory classic capture file (24-byte global
/// header, 16-byte record headers, microsecond timestamps, either byte order).
class CaptureReader {
 public:
  CaptureReader(std::span<const std::uint8_t> bytes, std::string sensor_id);

  /// Next IPv4 packet in file order, or nullopt at end of file (including a
  /// truncated trailing record, which sets stats().truncated_tail).
  std::optional<PacketRecord> next();

  const CaptureStats& stats() const { return stats_; }
  LinkType link_type() const { return link_type_; }

 private:
  bool decode(std::span<const std::uint8_t> frame, PacketRecord& out);
  std::uint32_t read32(std::size_t at) const;

  std::span<const std::uint8_t> bytes_;
  std::string sensor_id_;
  bool swapped_ = false;
  LinkType link_type_ = LinkType::Ethernet;
  std::size_t pos_ = 24;
  CaptureStats stats_;
};

struct CaptureParseResult {
  std::vector<PacketRecord> packets;
  CaptureStats stats;
};

CaptureParseResult parse_capture_file(std::span<const std::uint8_t> bytes, const std::string& sensor_id);

/// Serializes PacketRecords into a capture file (little-endian, microsecond
/// magic). IPv4 and transport checksums are filled in.
class CaptureWriter {
 public:
  explicit CaptureWriter(LinkType link = LinkType::Ethernet, std::uint32_t snaplen = 65535);

  void add(const PacketRecord& pkt);
  const std::vector<std::uint8_t>& bytes() const { return out_; }
  std::size_t count() const { return count_; }

  /// The IPv4 datagram (header + transport) that add() would frame.
  static std::vector<std::uint8_t> build_ipv4(const PacketRecord& pkt);

 private:
  LinkType link_;
  std::vector<std::uint8_t> out_;
  std::size_t count_ = 0;
};

}  // namespace tiktriage
