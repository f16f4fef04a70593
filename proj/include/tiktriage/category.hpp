#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace tiktriage {

enum class AttackCategory : std::uint8_t {
  CveExploit,
  LoginSuccess,
  BruteForce,
  MiraiScan,
  TunnelEstablished,
  ScriptScheduled,
  MinerInjection,
  DnsChanger,
  OtherSignature,
};

inline constexpr std::array<AttackCategory, 9> kAllCategories = {
    AttackCategory::CveExploit,      AttackCategory::LoginSuccess,     AttackCategory::BruteForce,
    AttackCategory::MiraiScan,       AttackCategory::TunnelEstablished, AttackCategory::ScriptScheduled,
    AttackCategory::MinerInjection,  AttackCategory::DnsChanger,       AttackCategory::OtherSignature,
};

std::string_view to_string(AttackCategory c);
std::optional<AttackCategory> parse_category(std::string_view text);

/// Attribute keys an event of category `c` may carry.
const std::set<std::string>& attribute_schema(AttackCategory c);

enum class Severity : std::uint8_t { Info, Low, Medium, High, Critical };

std::string_view to_string(Severity s);
std::optional<Severity> parse_severity(std::string_view text);

}  // namespace tiktriage
