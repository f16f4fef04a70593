#include "tiktriage/logparse.hpp"

#include <algorithm>
#include <array>

#include "tiktriage/regex.hpp"

namespace tiktriage {

std::string_view to_string(LogCategory c) {
  switch (c) {
    case LogCategory::ScriptScheduled: return "SCRIPT_SCHEDULED";
    case LogCategory::PptpSettings: return "PPTP_SETTINGS";
    case LogCategory::L2tpSettings: return "L2TP_SETTINGS";
    case LogCategory::SstpSettings: return "SSTP_SETTINGS";
    case LogCategory::DnsChanged: return "DNS_CHANGED";
    case LogCategory::DhcpChanged: return "DHCP_CHANGED";
    case LogCategory::PppProfile: return "PPP_PROFILE";
    case LogCategory::LoginSuccess: return "LOGIN_SUCCESS";
    case LogCategory::LoginFailure: return "LOGIN_FAILURE";
    case LogCategory::UserChange: return "USER_CHANGE";
    case LogCategory::Fetch: return "FETCH";
    case LogCategory::TunnelEstablished: return "TUNNEL_ESTABLISHED";
    case LogCategory::Other: return "OTHER";
  }
  return "OTHER";
}

std::string LogEvent::evidence() const { return "log:" + sensor_id + "/" + file + ":" + std::to_string(line); }

namespace {

enum class Rule {
  Script,
  TunnelSettings,
  Dns,
  Dhcp,
  PppProfile,
  LoginOk,
  LoginFail,
  UserChange,
  Tunnel,
  Fetch,
};

struct TaxonomyEntry {
  Rule rule;
  ByteRegex re;
};

const std::vector<TaxonomyEntry>& taxonomy() {
  static const std::vector<TaxonomyEntry> table = [] {
    std::vector<TaxonomyEntry> t;
    t.push_back({Rule::Script, ByteRegex(R"(new script scheduled by ([^\s:]+)(?::\s?(.*))?)")});
    t.push_back({Rule::TunnelSettings, ByteRegex(R"((PPTP|L2TP|SSTP) server settings changed(?: by (\S+))?)")});
    t.push_back({Rule::Dns, ByteRegex(R"(DNS changed(?: by (\S+))?)")});
    t.push_back({Rule::Dhcp, ByteRegex(R"(DHCP client changed(?: by (\S+))?)")});
    t.push_back({Rule::PppProfile, ByteRegex(R"(PPP profile <([^>]*)> changed(?: by (\S+))?)")});
    t.push_back({Rule::LoginOk, ByteRegex(R"(user (\S+) logged in from (\d{1,3}\.\d{1,3}\.\d{1,3}\.\d{1,3}) via (\S+))")});
    t.push_back({Rule::LoginFail,
                 ByteRegex(R"(login failure for user (\S+) from (\d{1,3}\.\d{1,3}\.\d{1,3}\.\d{1,3}) via (\S+))")});
    t.push_back({Rule::UserChange, ByteRegex(R"(user (\S+) (added|removed|changed) by (\S+))")});
    t.push_back({Rule::Tunnel, ByteRegex(R"((?i)(pptp|sstp|l2tp) tunnel established to (\d{1,3}\.\d{1,3}\.\d{1,3}\.\d{1,3}))")});
    t.push_back({Rule::Fetch, ByteRegex(R"(fetch:.*)")});
    return t;
  }();
  return table;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

void classify(LogEvent& ev) {
  const std::string_view msg = ev.message;
  for (const auto& entry : taxonomy()) {
    auto m = entry.re.full_match(msg);
    if (!m) continue;
    auto group = [&](std::size_t i) -> std::optional<std::string> {
      auto g = ByteRegex::group_text(msg, *m, i);
      if (!g) return std::nullopt;
      return std::string(*g);
    };
    switch (entry.rule) {
      case Rule::Script:
        ev.category = LogCategory::ScriptScheduled;
        ev.actor = group(1);
        ev.detail = group(2);
        break;
      case Rule::TunnelSettings: {
        const std::string proto = *group(1);
        ev.category = proto == "PPTP"   ? LogCategory::PptpSettings
                      : proto == "L2TP" ? LogCategory::L2tpSettings
                                        : LogCategory::SstpSettings;
        ev.service = proto;
        ev.actor = group(2);
        break;
      }
      case Rule::Dns:
        ev.category = LogCategory::DnsChanged;
        ev.actor = group(1);
        break;
      case Rule::Dhcp:
        ev.category = LogCategory::DhcpChanged;
        ev.actor = group(1);
        break;
      case Rule::PppProfile:
        ev.category = LogCategory::PppProfile;
        ev.detail = group(1);
        ev.actor = group(2);
        break;
      case Rule::LoginOk:
      case Rule::LoginFail: {
        auto ip = Ipv4::parse(*group(2));
        if (!ip) continue;
        ev.category = entry.rule == Rule::LoginOk ? LogCategory::LoginSuccess : LogCategory::LoginFailure;
        ev.actor = group(1);
        ev.src_ip = ip;
        ev.service = upper(*group(3));
        break;
      }
      case Rule::UserChange:
        ev.category = LogCategory::UserChange;
        ev.detail = group(1);
        ev.actor = group(3);
        break;
      case Rule::Tunnel: {
        auto ip = Ipv4::parse(*group(2));
        if (!ip) continue;
        ev.category = LogCategory::TunnelEstablished;
        ev.service = upper(*group(1));
        ev.peer_ip = ip;
        break;
      }
      case Rule::Fetch:
        ev.category = LogCategory::Fetch;
        break;
    }
    return;
  }
  ev.category = LogCategory::Other;
}

bool is_topic_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-' || c == ',';
}

}  // namespace

LogEvent parse_log_line(std::string_view line, std::string_view sensor_id) {
  LogEvent ev;
  ev.sensor_id = std::string(sensor_id);
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
  ev.message = std::string(line);
  if (line.size() < 21 || line[10] != ' ' || line[19] != ' ') return ev;
  auto ts = parse_timestamp(line.substr(0, 19));
  if (!ts) return ev;
  std::string_view rest = line.substr(20);
  const auto sp = rest.find(' ');
  const std::string_view topics = rest.substr(0, sp);
  if (topics.empty() || !std::all_of(topics.begin(), topics.end(), is_topic_char)) return ev;
  ev.ts = *ts;
  for (auto t : split(topics, ',')) {
    if (!t.empty()) ev.topics.emplace_back(t);
  }
  ev.message = sp == std::string_view::npos ? std::string() : std::string(rest.substr(sp + 1));
  classify(ev);
  return ev;
}

std::vector<LogEvent> parse_log_text(std::string_view text, std::string_view sensor_id, std::string_view file_name) {
  std::vector<LogEvent> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    LogEvent ev = parse_log_line(line, sensor_id);
    ev.file = std::string(file_name);
    ev.line = line_no;
    out.push_back(std::move(ev));
  }
  return out;
}

namespace {

constexpr std::array<std::string_view, 15> kVocabulary = {
    "/file remove", "/import",      "/ip dns",         "/ip firewall",       "/ip proxy",
    "/ip service",  "/ip socks",    "/system ntp client", "/system scheduler", "/system script",
    "/tool fetch",  "/tool sniffer", "/user add",      "/user remove",       "/user set",
};

bool is_boundary(std::string_view body, std::size_t i) {
  if (i == 0) return true;
  const char p = body[i - 1];
  return p == ' ' || p == '\t' || p == '\n' || p == '\r' || p == ';' || p == '{' || p == '[' || p == '"';
}

bool is_word_start(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }
bool is_word_char(char c) { return is_word_start(c) || c == '-'; }

struct Command {
  std::string key;
  std::size_t end = 0;  // offset just past the matched key
};

/// Longest vocabulary key of the command starting at `i` (which holds '/').
std::optional<Command> command_at(std::string_view body, std::size_t i) {
  std::vector<std::pair<std::string, std::size_t>> prefixes;
  std::string cur = "/";
  std::size_t j = i + 1;
  bool first = true;
  while (true) {
    std::size_t k = j;
    if (!first) {
      while (k < body.size() && (body[k] == ' ' || body[k] == '\t')) ++k;
      if (k == j) break;
    }
    if (k >= body.size() || !is_word_start(body[k])) break;
    std::size_t e = k;
    while (e < body.size() && is_word_char(body[e])) ++e;
    if (e < body.size() && body[e] == '=') break;
    if (!first) cur += ' ';
    cur.append(body.substr(k, e - k));
    prefixes.emplace_back(cur, e);
    j = e;
    first = false;
  }
  for (auto it = prefixes.rbegin(); it != prefixes.rend(); ++it) {
    if (std::binary_search(kVocabulary.begin(), kVocabulary.end(), std::string_view(it->first))) {
      return Command{it->first, it->second};
    }
  }
  return std::nullopt;
}

template <typename Fn>
void for_each_command(std::string_view body, Fn&& fn) {
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '/' || !is_boundary(body, i)) continue;
    if (auto cmd = command_at(body, i)) {
      fn(*cmd);
      i = cmd->end - 1;
    }
  }
}

}  // namespace

std::span<const std::string_view> action_vocabulary() { return kVocabulary; }

ActionCounts extract_script_actions(std::string_view body) {
  ActionCounts out;
  for_each_command(body, [&](const Command& c) { ++out[c.key]; });
  return out;
}

std::vector<std::string> extract_fetch_urls(std::string_view body) {
  std::vector<std::string> out;
  for_each_command(body, [&](const Command& c) {
    if (c.key != "/tool fetch") return;
    std::size_t i = c.end;
    while (i < body.size()) {
      while (i < body.size() && (body[i] == ' ' || body[i] == '\t')) ++i;
      if (i >= body.size() || body[i] == ';' || body[i] == '\n' || body[i] == '}' || body[i] == ']') break;
      std::size_t k = i;
      while (k < body.size() && body[k] != '=' && body[k] != ' ' && body[k] != ';' && body[k] != '\n' &&
             body[k] != '"') {
        ++k;
      }
      const std::string_view name = body.substr(i, k - i);
      std::string_view value;
      if (k < body.size() && body[k] == '=') {
        ++k;
        if (k < body.size() && body[k] == '"') {
          std::size_t e = k + 1;
          while (e < body.size() && body[e] != '"') e += body[e] == '\\' ? 2 : 1;
          e = std::min(e, body.size());
          value = body.substr(k + 1, e - k - 1);
          k = e < body.size() ? e + 1 : e;
        } else {
          std::size_t e = k;
          while (e < body.size() && body[e] != ' ' && body[e] != '\t' && body[e] != ';' && body[e] != '\n' &&
                 body[e] != '}' && body[e] != ']') {
            ++e;
          }
          value = body.substr(k, e - k);
          k = e;
        }
        if (name == "url" && !value.empty()) out.emplace_back(value);
      } else if (k < body.size() && body[k] == '"') {
        std::size_t e = k + 1;
        while (e < body.size() && body[e] != '"') e += body[e] == '\\' ? 2 : 1;
        k = std::min(e + 1, body.size());
      }
      if (k == i) ++k;
      i = k;
    }
  });
  return out;
}

std::string url_site(std::string_view url) {
  if (auto p = url.find("://"); p != std::string_view::npos) url.remove_prefix(p + 3);
  if (auto at = url.find('@'); at != std::string_view::npos && at < url.find('/')) url.remove_prefix(at + 1);
  const auto end = url.find_first_of("/?#");
  return to_lower(url.substr(0, end));
}

ScriptRecord make_script_record(Micros ts, std::string sensor, ScriptSource source, std::string body) {
  ScriptRecord r;
  r.ts = ts;
  r.sensor_id = std::move(sensor);
  r.source = source;
  r.actions = extract_script_actions(body);
  r.fetch_urls = extract_fetch_urls(body);
  r.body = std::move(body);
  return r;
}

}  // namespace tiktriage
