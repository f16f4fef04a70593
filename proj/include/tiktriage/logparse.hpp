#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tiktriage/net.hpp"
#include "tiktriage/util.hpp"

namespace tiktriage {

enum class LogCategory : std::uint8_t {
  ScriptScheduled,
  PptpSettings,
  L2tpSettings,
  SstpSettings,
  DnsChanged,
  DhcpChanged,
  PppProfile,
  LoginSuccess,
  LoginFailure,
  UserChange,
  Fetch,
  TunnelEstablished,
  Other,
};

std::string_view to_string(LogCategory c);

struct LogEvent {
  Micros ts = 0;
  std::string sensor_id;
  std::vector<std::string> topics;
  std::string message;
  LogCategory category = LogCategory::Other;
  std::optional<std::string> actor;
  /// Upper-case service name: API, FTP, SSH, TELNET, WEB, WINBOX, PPTP, SSTP, L2TP.
  std::optional<std::string> service;
  std::optional<Ipv4> src_ip;
  /// Script text for SCRIPT_SCHEDULED; target user for USER_CHANGE.
  std::optional<std::string> detail;
  /// Remote peer for TUNNEL_ESTABLISHED.
  std::optional<Ipv4> peer_ip;
  std::string file;
  std::size_t line = 0;

  /// "log:<sensor>/<file>:<line>"
  std::string evidence() const;
};

/// Parses `YYYY-MM-DD HH:MM:SS topic[,topic...] message`. Never fails:
/// lines that do not fit the grammar keep their raw text as the message
/// and are categorized OTHER.
LogEvent parse_log_line(std::string_view line, std::string_view sensor_id);

/// Parses every non-empty line of a log file.
std::vector<LogEvent> parse_log_text(std::string_view text, std::string_view sensor_id, std::string_view file_name);

enum class ScriptSource : std::uint8_t { Log, Network };

using ActionCounts = std::map<std::string, std::size_t>;

struct ScriptRecord {
  Micros ts = 0;
  std::string sensor_id;
  ScriptSource source = ScriptSource::Log;
  std::string body;
  ActionCounts actions;
  std::vector<std::string> fetch_urls;
  Ipv4 src_ip;
  std::optional<std::string> actor;
  std::string evidence;
};

/// Closed action vocabulary, sorted.
std::span<const std::string_view> action_vocabulary();

/// Counts every `/word( word)*` command whose longest vocabulary prefix is a
/// known action. Commands start at the beginning of the body or after
/// whitespace, `;`, `{`, `[` or `"`.
ActionCounts extract_script_actions(std::string_view body);

/// The url= argument of every `/tool fetch` command in order, verbatim as
/// written (without surrounding quotes). Duplicates are kept.
std::vector<std::string> extract_fetch_urls(std::string_view body);

/// "scheme://host:port/path" -> "host:port"; bare hosts pass through.
std::string url_site(std::string_view url);

ScriptRecord make_script_record(Micros ts, std::string sensor, ScriptSource source, std::string body);

}  // namespace tiktriage
