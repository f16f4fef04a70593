#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tiktriage/packet.hpp"
#include "tiktriage/reassembly.hpp"
#include "tiktriage/regex.hpp"

namespace tiktriage {

enum class PatternKind : std::uint8_t { Literal, Hex, Regex };
enum class PatternScope : std::uint8_t { Packet, StreamFwd, StreamRev, StreamEither };

std::string_view to_string(PatternKind k);
std::string_view to_string(PatternScope s);
std::optional<PatternScope> parse_scope(std::string_view text);

class PatternError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScopeMismatch : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A content matcher. Literal and hex patterns keep their bytes in `bytes`;
/// regex patterns keep the source in `source` and a compiled program.
///
/// When `offset_hint` is set only matches starting exactly at that offset
/// of the packet payload or stream count.
class PayloadPattern {
 public:
  static PayloadPattern literal(std::string_view bytes, PatternScope scope = PatternScope::Packet,
                                std::optional<std::size_t> offset = std::nullopt);
  static PayloadPattern hex(std::string_view hex_digits, PatternScope scope = PatternScope::Packet,
                            std::optional<std::size_t> offset = std::nullopt);
  static PayloadPattern regex(std::string_view source, PatternScope scope = PatternScope::Packet,
                              std::optional<std::size_t> offset = std::nullopt);

  /// Parses the signature-file form: `<scope>[@offset] lit:"..."`,
  /// `<scope>[@offset] hex:DEADBEEF` or `<scope>[@offset] re:"..."`.
  static PayloadPattern parse(std::string_view spec);
  /// Inverse of parse().
  std::string to_spec() const;

  PatternKind kind() const { return kind_; }
  PatternScope scope() const { return scope_; }
  std::optional<std::size_t> offset_hint() const { return offset_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  const std::string& source() const { return source_; }

  /// All non-overlapping leftmost matches in a byte run.
  std::vector<std::size_t> find_all(std::span<const std::uint8_t> data, std::size_t base_offset = 0) const;

  bool operator==(const PayloadPattern& o) const {
    return kind_ == o.kind_ && scope_ == o.scope_ && offset_ == o.offset_ && bytes_ == o.bytes_ &&
           source_ == o.source_;
  }

 private:
  PatternKind kind_ = PatternKind::Literal;
  PatternScope scope_ = PatternScope::Packet;
  std::optional<std::size_t> offset_;
  std::vector<std::uint8_t> bytes_;
  std::string source_;
  std::shared_ptr<const ByteRegex> re_;
};

/// Match offsets of `pat` in a packet payload. Requires PACKET scope.
std::vector<std::size_t> match_payload(const PayloadPattern& pat, const PacketRecord& pkt);
/// Match offsets (stream-relative) in one reassembled direction. Requires a
/// STREAM scope compatible with the stream's direction. Matches never span a gap.
std::vector<std::size_t> match_payload(const PayloadPattern& pat, const StreamPayload& stream);

/// Decodes a double-quoted string body with \\ \" \n \r \t \0 and \xHH escapes.
std::optional<std::string> unescape_quoted(std::string_view body);
/// Inverse of unescape_quoted (without the surrounding quotes).
std::string escape_quoted(std::string_view raw);

}  // namespace tiktriage
