#include "tiktriage/pptp.hpp"

#include <algorithm>

namespace tiktriage::pptp {

namespace {

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
void put_padded(std::vector<std::uint8_t>& v, std::string_view s, std::size_t width) {
  const std::size_t n = std::min(s.size(), width);
  v.insert(v.end(), s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n));
  v.insert(v.end(), width - n, 0);
}

std::vector<std::uint8_t> header(std::uint16_t type) {
  std::vector<std::uint8_t> m;
  m.reserve(kStartControlLength);
  put16(m, static_cast<std::uint16_t>(kStartControlLength));
  put16(m, kControlMessage);
  put32(m, kMagicCookie);
  put16(m, type);
  put16(m, 0);
  return m;
}

}  // namespace

std::vector<ControlMessage> parse_control_messages(std::span<const std::uint8_t> stream) {
  std::vector<ControlMessage> out;
  std::size_t at = 0;
  while (stream.size() - at >= 12) {
    const std::uint8_t* p = stream.data() + at;
    const std::uint16_t length = be16(p);
    if (length < 12 || stream.size() - at < length) break;
    if (be16(p + 2) != kControlMessage || be32(p + 4) != kMagicCookie) break;
    ControlMessage msg;
    msg.type = be16(p + 8);
    msg.offset = at;
    if (msg.type == kStartControlReply && length >= 16) msg.result = p[14];
    out.push_back(msg);
    at += length;
  }
  return out;
}

std::vector<std::uint8_t> build_sccrq(std::string_view hostname, std::string_view vendor) {
  auto m = header(kStartControlRequest);
  put16(m, 0x0100);  // protocol version 1.0
  put16(m, 0);
  put32(m, 0x00000003);  // framing: async + sync
  put32(m, 0x00000003);  // bearer: analog + digital
  put16(m, 0);
  put16(m, 0x0001);
  put_padded(m, hostname, 64);
  put_padded(m, vendor, 64);
  return m;
}

std::vector<std::uint8_t> build_sccrp(std::uint8_t result_code, std::string_view hostname, std::string_view vendor) {
  auto m = header(kStartControlReply);
  put16(m, 0x0100);
  m.push_back(result_code);
  m.push_back(0);  // error code
  put32(m, 0x00000003);
  put32(m, 0x00000003);
  put16(m, 1);
  put16(m, 0x0600);
  put_padded(m, hostname, 64);
  put_padded(m, vendor, 64);
  return m;
}

}  // namespace tiktriage::pptp
