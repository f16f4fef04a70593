#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tiktriage/analytics.hpp"
#include "tiktriage/category.hpp"
#include "tiktriage/landscape.hpp"
#include "tiktriage/net.hpp"
#include "tiktriage/util.hpp"

namespace tiktriage {

inline constexpr std::array<std::string_view, 14> kScenarioNames = {
    "benign_web",    "cve_traversal",   "login_winbox", "login_ftp",    "bruteforce_ssh",       "bruteforce_telnet",
    "mirai_scan",    "pptp_tunnel",     "sstp_tunnel_log", "script_fetch", "miner_inject",      "dns_changer",
    "campaign_static_port", "campaign_api_sweep",
};

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scenario weights are expected instances per sensor per day: the integer
/// part is always generated and the fraction is a Bernoulli draw.
struct ScenarioConfig {
  std::uint64_t seed = 42;
  int duration_days = 1;
  std::int64_t start_day = days_from_civil({2019, 7, 25});
  std::vector<std::string> sensors = {"aus", "bra", "hkg", "ind", "nld", "usa"};
  std::map<std::string, double> mix;
  /// When set, this share of brute-force sources attack both SSH and Telnet
  /// (Jaccard index of the two address sets).
  std::optional<double> bruteforce_overlap;
  /// Chance that a CVE or login attacker reuses an earlier address.
  double reuse_probability = 0.2;
  /// OTHER-category log lines per sensor and day.
  std::size_t log_noise_per_day = 288;

  /// Throws InvalidConfig (unknown scenario names are listed with the valid ones).
  void validate() const;
  static ScenarioConfig parse_json(std::string_view text);
  std::string to_json() const;
};

/// Every scenario at weight 1.
std::map<std::string, double> default_mix();

struct ExpectedEvent {
  AttackCategory category = AttackCategory::OtherSignature;
  std::string sensor_id;
  Ipv4 src_ip;
  Micros ts_start = 0;
  Micros ts_end = 0;
  std::optional<std::string> signature_id;
  std::optional<std::string> service;
  std::string scenario;

  auto operator<=>(const ExpectedEvent&) const = default;
};

struct ExpectedCampaign {
  Ipv4 src_ip;
  CampaignTrigger trigger = CampaignTrigger::VolumeOutlier;
  std::uint64_t flow_count = 0;
  std::set<std::uint16_t> targeted_ports;
  std::set<std::string> sensors_hit;
  std::optional<std::uint16_t> static_src_port;
};

struct CorpusFile {
  std::string path;  // relative to the corpus root
  std::string sensor_id;
  std::uint64_t packets = 0;
  std::uint64_t flows = 0;
  std::uint64_t lines = 0;
};

struct GroundTruthManifest {
  static constexpr int kSchemaVersion = 1;

  ScenarioConfig config;
  std::vector<ExpectedEvent> events;
  std::uint64_t packet_count = 0;
  std::uint64_t flow_count = 0;
  /// SYN_ONLY / HANDSHAKE_COMPLETE / DATA / CLOSED -> flows
  std::map<std::string, std::uint64_t> flow_states;
  std::uint64_t log_lines = 0;
  std::uint64_t noise_lines = 0;
  std::vector<ExpectedCampaign> campaigns;
  std::map<std::string, std::uint64_t> bruteforce_attempts;
  std::size_t ssh_ips = 0;
  std::size_t telnet_ips = 0;
  std::size_t both_ips = 0;
  double ip_overlap = 0.0;
  std::vector<CorpusFile> captures;
  std::vector<CorpusFile> logs;

  std::string to_json() const;
};

/// Receives each output file (relative path, bytes) as soon as it is complete.
using FileSink = std::function<void(const std::string& path, std::span<const std::uint8_t> bytes)>;

/// Generates captures/<sensor>/<date>.pcap and logs/<sensor>/<date>-<HH>.log
/// for every sensor and day and returns the ground truth. Deterministic in
/// the config.
GroundTruthManifest generate(const ScenarioConfig& config, const FileSink& sink);

struct GenerateResult {
  GroundTruthManifest manifest;
  std::filesystem::path manifest_path;
  /// fnv1a64 over every written file in order.
  std::string checksum;
};

/// Writes the corpus under `out_dir`, then manifest.json and attribution.csv.
GenerateResult generate_corpus(const ScenarioConfig& config, const std::filesystem::path& out_dir);

struct InMemoryCorpus {
  std::map<std::string, std::vector<std::uint8_t>> files;
  GroundTruthManifest manifest;
};

InMemoryCorpus generate_in_memory(const ScenarioConfig& config);

/// CIDR -> country/ASN rows covering every range the generator draws from.
std::string synthetic_attribution_csv();

/// A month of scan observations whose distinct totals and top-10 tables
/// match the published device landscape exactly.
struct LandscapeFixture {
  struct Row {
    std::string key;
    std::uint64_t count;
  };
  std::vector<Row> ports;      // every port, descending
  std::vector<Row> countries;  // every country, descending
  std::uint64_t distinct_records = 0;
  std::uint64_t distinct_ips = 0;
  std::uint64_t conflicts = 0;
  std::int64_t first_day = 0;
  std::vector<std::uint64_t> new_records;  // per day from first_day
  std::vector<std::uint64_t> new_ips;
};

/// Builds the fixture description; `scale` divides every count (1 = full size).
LandscapeFixture landscape_fixture(std::uint64_t scale = 1);

/// Emits every observation of the fixture in a seed-determined order.
/// `country` is empty for observations without a country.
void emit_landscape_fixture(const LandscapeFixture& fx, std::uint64_t seed,
                            const std::function<void(std::int64_t day, Ipv4 ip, std::uint16_t port,
                                                     std::string_view country)>& emit);

/// Renders the fixture as JSON scan lines split into one file per day, plus
/// non-matching noise lines.
void write_landscape_fixture(const LandscapeFixture& fx, std::uint64_t seed, const std::filesystem::path& dir);

}  // namespace tiktriage
