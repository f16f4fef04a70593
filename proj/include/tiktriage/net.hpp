#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace tiktriage {

/// An IPv4 address in host byte order.
struct Ipv4 {
  std::uint32_t value = 0;

  constexpr Ipv4() = default;
  constexpr explicit Ipv4(std::uint32_t v) : value(v) {}
  constexpr Ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
      : value((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d) {}

  /// Strict dotted-quad parse; rejects empty octets, values > 255 and trailing text.
  static std::optional<Ipv4> parse(std::string_view text);
  std::string to_string() const;

  constexpr bool is_unspecified() const { return value == 0; }

  auto operator<=>(const Ipv4&) const = default;
};

/// An IPv4 prefix. `network` always has its host bits cleared.
struct Cidr {
  Ipv4 network;
  std::uint8_t prefix = 32;

  static constexpr std::uint32_t mask_for(std::uint8_t prefix) {
    return prefix == 0 ? 0u : ~std::uint32_t{0} << (32 - prefix);
  }
  constexpr std::uint32_t mask() const { return mask_for(prefix); }
  constexpr bool contains(Ipv4 ip) const { return (ip.value & mask()) == network.value; }

  /// Parses "A.B.C.D/len". With `allow_host_bits` the host bits are cleared
  /// instead of rejected.
  static std::optional<Cidr> parse(std::string_view text, bool allow_host_bits = false);
  std::string to_string() const;

  auto operator<=>(const Cidr&) const = default;
};

}  // namespace tiktriage

template <>
struct std::hash<tiktriage::Ipv4> {
  std::size_t operator()(tiktriage::Ipv4 ip) const noexcept { return std::hash<std::uint32_t>{}(ip.value); }
};
