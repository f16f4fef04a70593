#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace tiktriage::pptp {

inline constexpr std::uint32_t kMagicCookie = 0x1A2B3C4D;
inline constexpr std::uint16_t kControlMessage = 1;
inline constexpr std::uint16_t kStartControlRequest = 1;
inline constexpr std::uint16_t kStartControlReply = 2;
inline constexpr std::size_t kStartControlLength = 156;

struct ControlMessage {
  std::uint16_t type = 0;  // control message type
  std::uint8_t result = 0; // SCCRP only
  std::size_t offset = 0;  // within the stream
};

/// Walks length-prefixed control messages from the start of a stream and
/// stops at the first frame that is not a well-formed control message.
std::vector<ControlMessage> parse_control_messages(std::span<const std::uint8_t> stream);

std::vector<std::uint8_t> build_sccrq(std::string_view hostname, std::string_view vendor);
std::vector<std::uint8_t> build_sccrp(std::uint8_t result_code, std::string_view hostname, std::string_view vendor);

}  // namespace tiktriage::pptp
