#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tiktriage/classify.hpp"
#include "tiktriage/flow.hpp"
#include "tiktriage/logparse.hpp"

namespace tiktriage {

enum class CampaignTrigger : std::uint8_t { StaticSrcPort, ServiceSweep, VolumeOutlier };

std::string_view to_string(CampaignTrigger t);

struct CampaignParams {
  std::size_t min_flows = 100;
  double static_port_frac = 0.9;
  double volume_sigma = 3.0;
};

struct Campaign {
  std::string campaign_id;
  std::set<Ipv4> src_ips;
  Micros ts_start = 0;
  Micros ts_end = 0;
  std::set<std::uint16_t> targeted_ports;
  std::set<std::string> sensors_hit;
  CampaignTrigger trigger = CampaignTrigger::VolumeOutlier;
  std::uint64_t flow_count = 0;
  std::optional<std::uint16_t> static_src_port;
};

/// Groups flows by source address. Triggers are tested in the order
/// STATIC_SRC_PORT, SERVICE_SWEEP, VOLUME_OUTLIER and every campaign holds at
/// least `min_flows` flows. Sorted by flow_count descending, then address.
std::vector<Campaign> detect_campaigns(std::span<const FlowRecord> flows, const CampaignParams& params = {});

class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Dispersal {
  /// sensors hit -> number of source addresses
  std::map<std::size_t, std::size_t> counts;
  std::size_t total_ips = 0;

  double fraction(std::size_t k) const;
};

/// Distinct-sensor histogram over event sources (0.0.0.0 excluded).
/// Throws EmptyInput when no event has a source address.
Dispersal dispersal(std::span<const AttackEvent> events);

struct AttributionRecord {
  Cidr cidr;
  std::string country;
  std::uint32_t asn = 0;
  std::string as_name;
};

class AttributionError : public std::runtime_error {
 public:
  AttributionError(std::size_t line, const std::string& msg)
      : std::runtime_error("attribution line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Longest-prefix CIDR -> (country, ASN) table.
class AttributionTable {
 public:
  /// `cidr,country_alpha3,asn,as_name` per line; an optional header line
  /// starting with "cidr" is skipped. Duplicate prefixes are an error.
  static AttributionTable parse(std::string_view text);
  static AttributionTable load(const std::filesystem::path& path);

  void add(const AttributionRecord& rec);
  const AttributionRecord* lookup(Ipv4 ip) const;
  std::size_t size() const { return count_; }

 private:
  std::map<std::uint32_t, AttributionRecord> by_len_[33];
  std::size_t count_ = 0;
};

struct Heatmap {
  /// (endpoint, sensor) -> tunnels
  std::map<std::pair<Ipv4, std::string>, std::uint64_t> cells;
  /// Endpoints by row total descending, ties by ascending address.
  std::vector<std::pair<Ipv4, std::uint64_t>> endpoint_totals;
  /// Sensors by column total descending, ties by name.
  std::vector<std::pair<std::string, std::uint64_t>> sensor_totals;
  std::map<Ipv4, std::size_t> endpoint_days;
  std::uint64_t total = 0;
};

Heatmap endpoint_heatmap(std::span<const AttackEvent> events);

enum class Bucket : std::uint8_t { Hour, Day };

struct TimeSeries {
  Micros start = 0;
  Micros width = kMicrosPerDay;
  std::vector<std::uint64_t> flows;
  std::vector<std::uint64_t> log_events;
  /// Pearson correlation; nullopt when either series has zero variance.
  std::optional<double> correlation;
};

/// Flow starts and non-OTHER log lines per bucket, zero-filled over the span
/// covered by either input.
TimeSeries timeseries(std::span<const FlowRecord> flows, std::span<const LogEvent> logs, Bucket bucket);

std::optional<double> pearson(std::span<const std::uint64_t> x, std::span<const std::uint64_t> y);

}  // namespace tiktriage
