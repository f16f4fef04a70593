#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tiktriage/category.hpp"
#include "tiktriage/flow.hpp"
#include "tiktriage/logparse.hpp"
#include "tiktriage/reassembly.hpp"
#include "tiktriage/signature.hpp"

namespace tiktriage {

struct AttackEvent {
  std::string event_id;
  AttackCategory category = AttackCategory::OtherSignature;
  std::optional<std::string> signature_id;
  std::optional<std::string> cve_id;
  std::string sensor_id;
  Ipv4 src_ip;
  Micros ts_start = 0;
  Micros ts_end = 0;
  std::optional<std::string> service;
  std::optional<Ipv4> tunnel_endpoint;
  std::vector<std::string> evidence;
  std::map<std::string, std::string> attributes;
};

/// Fills event_id from the identifying fields.
void assign_event_id(AttackEvent& ev);

/// Sorts by (ts_start, event_id).
void sort_events(std::vector<AttackEvent>& events);

/// Canonical service label for a well-known honeypot port, if any.
std::optional<std::string> service_for_port(std::uint16_t port);

/// Optional reassembled streams, aligned index-for-index with a flow list.
using StreamTable = std::vector<std::optional<StreamPair>>;

/// Reassembles every TCP flow that carries payload.
StreamTable reassemble_all(std::span<const FlowRecord> flows, std::span<const PacketRecord> packets,
                           unsigned workers = 1);

std::vector<AttackEvent> classify_network(std::span<const FlowRecord> flows, std::span<const PacketRecord> packets,
                                          const StreamTable& streams, const SignatureDb& db, unsigned workers = 1);

/// Latest LOGIN_SUCCESS per sensor and UTC day, used to attribute log lines
/// that carry no address.
class SessionIndex {
 public:
  explicit SessionIndex(std::span<const LogEvent> events);
  /// Source of the latest login on the same sensor and day at or before
  /// `ts`, restricted to `actor` when given.
  std::optional<Ipv4> lookup(std::string_view sensor, Micros ts, const std::optional<std::string>& actor) const;

 private:
  struct Login {
    Micros ts;
    std::string actor;
    Ipv4 ip;
  };
  std::map<std::pair<std::string, std::int64_t>, std::vector<Login>, std::less<>> by_day_;
};

std::vector<AttackEvent> detect_logins(std::span<const LogEvent> events);

struct BruteForceParams {
  Micros window = 60 * kMicrosPerSecond;
  std::size_t threshold = 5;
};

struct BruteForceResult {
  std::vector<AttackEvent> events;
  /// Deduplicated attempts per service (SSH, TELNET, ...).
  std::map<std::string, std::uint64_t> attempts;
  /// Attempts per (day, service).
  std::map<std::pair<std::int64_t, std::string>, std::uint64_t> daily;
  std::size_t ssh_ips = 0;
  std::size_t telnet_ips = 0;
  std::size_t both_ips = 0;
  /// |IPs(22) ∩ IPs(23)| / |IPs(22) ∪ IPs(23)|, 0 when both are empty.
  double ip_overlap = 0.0;
};

BruteForceResult detect_bruteforce(std::span<const FlowRecord> flows, std::span<const LogEvent> events,
                                   const BruteForceParams& params = {});

/// True for a SYN (without ACK) to 23 or 2323 whose sequence number equals
/// the destination address.
bool is_mirai_probe(const PacketRecord& p);
std::vector<AttackEvent> detect_mirai(std::span<const PacketRecord> packets);

std::vector<AttackEvent> detect_tunnels(std::span<const FlowRecord> flows, const StreamTable& streams,
                                        std::span<const LogEvent> events,
                                        Micros merge_window = 300 * kMicrosPerSecond);

inline constexpr std::string_view kMinerMarker = "coinhive.min.js";

/// Script records from SCRIPT_SCHEDULED log lines, attributed through `sessions`.
std::vector<ScriptRecord> scripts_from_logs(std::span<const LogEvent> events, const SessionIndex& sessions);

/// Vocabulary lines in a forward stream joined with "; ", or empty.
std::string script_from_stream(std::string_view stream_text);

/// Scripts visible only on the wire: forward streams whose vocabulary lines
/// do not repeat a logged script of the same sensor, day and body.
std::vector<ScriptRecord> scripts_from_streams(std::span<const FlowRecord> flows, const StreamTable& streams,
                                               std::span<const ScriptRecord> logged);

bool is_miner_script(const ScriptRecord& s);
std::optional<std::string> dns_resolver(const ScriptRecord& s);

/// SCRIPT_SCHEDULED for every record, MINER_INJECTION for miner scripts and
/// HTML streams carrying the marker, DNS_CHANGER for resolver changes in
/// scripts or DNS_CHANGED log lines (merged per sensor, source and day).
std::vector<AttackEvent> detect_script_attacks(std::span<const ScriptRecord> scripts, std::span<const FlowRecord> flows,
                                               const StreamTable& streams, std::span<const LogEvent> events,
                                               const SessionIndex& sessions);

/// OTHER_SIGNATURE (or the rule's category) events for LOG signatures.
std::vector<AttackEvent> detect_log_signatures(std::span<const LogEvent> events, const SignatureDb& db,
                                               const SessionIndex& sessions);

struct ClassifyParams {
  BruteForceParams bruteforce;
  Micros tunnel_merge_window = 300 * kMicrosPerSecond;
  unsigned workers = 1;
};

struct ClassifyResult {
  std::vector<AttackEvent> events;
  std::vector<ScriptRecord> scripts;
  BruteForceResult bruteforce;
};

/// Runs every detector and returns the merged, sorted event list.
ClassifyResult classify_all(std::span<const PacketRecord> packets, std::span<const FlowRecord> flows,
                            const StreamTable& streams, std::span<const LogEvent> logs, const SignatureDb& db,
                            const ClassifyParams& params = {});

}  // namespace tiktriage
