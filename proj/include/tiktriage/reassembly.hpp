#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tiktriage/flow.hpp"

namespace tiktriage {

enum class Direction : std::uint8_t { Fwd, Rev };

inline constexpr std::size_t kMaxStreamBytes = 1u << 20;

/// One direction of a TCP conversation laid out by sequence offset.
///
/// `bytes[i]` is the byte at relative offset i; positions covered by `gaps`
/// are zero-filled placeholders and never part of a match.
struct StreamPayload {
  std::string flow_id;
  Direction direction = Direction::Fwd;
  std::vector<std::uint8_t> bytes;
  std::vector<std::pair<std::size_t, std::size_t>> gaps;  // (offset, length)
  bool truncated = false;

  bool complete() const { return gaps.empty(); }
  /// Maximal gap-free [begin, end) ranges in offset order.
  std::vector<std::pair<std::size_t, std::size_t>> runs() const;
  std::string_view text() const { return {reinterpret_cast<const char*>(bytes.data()), bytes.size()}; }
};

struct StreamPair {
  StreamPayload fwd;
  StreamPayload rev;
};

class ReassemblyError : public std::runtime_error {
 public:
  enum class Kind { NotTcp };
  explicit ReassemblyError(Kind kind) : std::runtime_error("reassembly requires a TCP flow"), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Rebuilds both directions of `flow` from its packets. Offsets are relative
/// to the first sequence number observed per direction (plus one for SYN);
/// overlapping bytes keep the first copy seen.
StreamPair reassemble_stream(const FlowRecord& flow, std::span<const PacketRecord> packets,
                             std::size_t max_bytes = kMaxStreamBytes);

}  // namespace tiktriage
