#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tiktriage/analytics.hpp"
#include "tiktriage/classify.hpp"
#include "tiktriage/landscape.hpp"
#include "tiktriage/signature.hpp"

namespace tiktriage {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitWarnings = 2;

/// Bad flags, missing paths or unloadable inputs. Nothing is written.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::optional<std::filesystem::path> captures;
  std::optional<std::filesystem::path> logs;
  /// Empty means the bundled databases.
  std::vector<std::filesystem::path> signatures;
  std::optional<std::filesystem::path> attribution;
  std::filesystem::path out;
  Micros idle_timeout = kDefaultIdleTimeout;
  BruteForceParams bruteforce;
  CampaignParams campaign;
  Bucket bucket = Bucket::Day;
  unsigned workers = 1;
  bool lax = false;

  /// Throws ConfigError naming the offending flag or path.
  void validate() const;
};

/// In-memory result of one classification run.
struct Analysis {
  std::uint64_t capture_files = 0;
  std::uint64_t log_files = 0;
  std::uint64_t packets = 0;
  std::uint64_t skipped_packets = 0;
  std::vector<FlowRecord> flows;
  std::vector<LogEvent> logs;
  ClassifyResult classified;
  std::vector<Campaign> campaigns;
  Dispersal dispersal;
  Heatmap heatmap;
  TimeSeries series;
  std::optional<AttributionTable> attribution;
  std::vector<std::string> sensors;
  /// Data-quality problems; any entry turns a successful run into exit 2.
  std::vector<std::string> warnings;
};

/// Loads every input and runs the full chain. Throws ConfigError.
Analysis analyze(const RunConfig& config);

/// Report file name -> content, in a fixed order. Content depends only on
/// the inputs and thresholds, never on worker count or wall time.
std::map<std::string, std::string> render_reports(const Analysis& a, const RunConfig& config);

/// One JSON object per event.
std::string events_jsonl(const std::vector<AttackEvent>& events, const AttributionTable* attribution);

/// analyze + render + write. Returns the exit code; fatal errors are
/// reported through `error` and leave the output directory untouched.
int run_classify(const RunConfig& config, std::string* error = nullptr, Analysis* analysis = nullptr);

struct LandscapeConfig {
  std::filesystem::path scans;
  std::filesystem::path out;
  std::string filter = std::string(kDefaultDeviceFilter);
  std::size_t top = 10;
  unsigned workers = 1;
  bool lax = false;
  std::size_t memory_budget = std::size_t{1} << 30;
  std::optional<std::filesystem::path> overlap_ips;
  std::optional<std::filesystem::path> overlap_reference;
};

/// Writes ports.csv, countries.csv, series.csv and summary.json.
int run_landscape(const LandscapeConfig& config, std::string* error = nullptr);

/// One address per line; blank lines and '#' comments are ignored.
std::vector<Ipv4> read_ip_list(const std::filesystem::path& path);

}  // namespace tiktriage
