#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tiktriage/net.hpp"

namespace tiktriage {

/// One banner-scan observation at day granularity.
struct ScanRecord {
  std::int64_t day = 0;
  Ipv4 ip;
  std::uint16_t port = 0;
  std::string banner;
  std::optional<std::string> product;
  std::optional<std::string> country_code;
  std::optional<std::uint32_t> asn;
};

inline constexpr std::string_view kDefaultDeviceFilter = "mikrotik";

/// Case-insensitive substring test over banner and product.
bool matches_device(const ScanRecord& rec, std::string_view filter = kDefaultDeviceFilter);

/// Parses one JSON scan line (timestamp, ip_str, port, data, product,
/// location.country_code3, asn). Throws std::invalid_argument.
ScanRecord parse_scan_line(std::string_view line);

class EmptyStore : public std::logic_error {
 public:
  EmptyStore() : std::logic_error("landscape store is empty") {}
};

class ScanParseError : public std::runtime_error {
 public:
  ScanParseError(std::string file, std::size_t line, const std::string& msg)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + msg), file_(std::move(file)), line_(line) {}
  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// Open-addressing set of packed 64-bit slots (0 = empty). Storage is an
/// anonymous mapping while it fits the budget and a mapped temporary file
/// once it does not.
class SlotTable {
 public:
  SlotTable(unsigned value_bits, std::size_t memory_budget);
  ~SlotTable();
  SlotTable(const SlotTable&) = delete;
  SlotTable& operator=(const SlotTable&) = delete;
  SlotTable(SlotTable&& other) noexcept;
  SlotTable& operator=(SlotTable&& other) noexcept;

  /// Inserts `key` with `value`, or replaces the stored value with
  /// merge(old_value, value).
  template <typename Merge>
  void upsert(std::uint64_t key, std::uint64_t value, Merge merge) {
    if ((size_ + 1) * 10 > capacity_ * 7) grow();
    std::uint64_t& slot = locate(key);
    if (slot == 0) {
      slot = pack(key, value);
      ++size_;
    } else {
      slot = pack(key, merge(slot & value_mask_, value));
    }
  }

  std::size_t size() const { return size_; }
  bool file_backed() const { return file_backed_; }

  template <typename Fn>
  void for_each(Fn fn) const {
    for (std::size_t i = 0; i < capacity_; ++i) {
      if (slots_[i] != 0) fn(slots_[i] >> value_bits_, slots_[i] & value_mask_);
    }
  }

 private:
  std::uint64_t pack(std::uint64_t key, std::uint64_t value) const { return (key << value_bits_) | value; }
  std::uint64_t& locate(std::uint64_t key);
  void allocate(std::size_t capacity);
  void release();
  void grow();

  unsigned value_bits_;
  std::uint64_t value_mask_;
  std::size_t budget_;
  std::uint64_t* slots_ = nullptr;
  std::size_t capacity_ = 0;
  std::size_t size_ = 0;
  bool file_backed_ = false;
};

struct SeriesRow {
  std::int64_t day = 0;
  std::uint64_t cumulative_records = 0;
  std::uint64_t cumulative_ips = 0;
  std::uint64_t new_records = 0;
  std::uint64_t new_ips = 0;
};

struct RankRow {
  std::string key;
  std::uint64_t count = 0;
  /// Share of the total in tenths of a percent, rounded half up.
  std::uint64_t permille = 0;
};

inline constexpr std::string_view kUnknownCountry = "UNKNOWN";

/// Distinct (ip, port) records and distinct IPs with first-seen day and
/// country. Nothing is ever evicted.
class LandscapeStore {
 public:
  explicit LandscapeStore(std::size_t memory_budget = std::size_t{1} << 30);

  /// Adds one matching observation; an empty country means unknown.
  /// Days must lie in [0, 65534).
  void add(std::int64_t day, Ipv4 ip, std::uint16_t port, std::string_view country);
  void add(const ScanRecord& rec);

  std::uint64_t distinct_records() const { return records_.size(); }
  std::uint64_t distinct_ips() const { return ips_.size(); }
  std::uint64_t observations() const { return observations_; }
  /// IPs reported in more than one known country.
  std::uint64_t country_conflicts() const;
  bool spilled() const { return records_.file_backed() || ips_.file_backed() || ip_country_.file_backed(); }

  /// Zero-filled from the first to the last first-seen day. Throws EmptyStore.
  std::vector<SeriesRow> cumulative_series() const;
  /// Ranked by count descending, ties by ascending port. Throws EmptyStore.
  std::vector<RankRow> top_ports(std::size_t n) const;
  /// Distinct IPs per country, ties by ascending code. An IP's country is the
  /// known code with the earliest day (then smallest code); IPs never seen
  /// with a country count as UNKNOWN. Throws EmptyStore.
  std::vector<RankRow> top_countries(std::size_t n) const;

 private:
  std::uint16_t country_index(std::string_view code);

  SlotTable records_;     // ip << 16 | port -> first day + 1
  SlotTable ips_;         // ip -> first day + 1
  SlotTable ip_country_;  // ip -> first known country (see add)
  std::vector<std::string> countries_;
  std::unordered_map<std::string, std::uint16_t> country_ids_;
  std::uint64_t observations_ = 0;
};

struct IngestOptions {
  std::string filter = std::string(kDefaultDeviceFilter);
  bool lax = false;
  unsigned workers = 1;
  std::size_t memory_budget = std::size_t{1} << 30;
};

struct IngestStats {
  std::uint64_t lines = 0;
  std::uint64_t matched = 0;
  std::uint64_t skipped = 0;
};

/// Parses files in parallel and merges them in file order. Strict mode throws
/// ScanParseError on the first bad line; lax mode skips and counts.
LandscapeStore ingest_scan_files(std::span<const std::filesystem::path> files, const IngestOptions& opts,
                                 IngestStats* stats = nullptr);

/// "58.1" for 581.
std::string format_permille(std::uint64_t permille);
std::uint64_t permille_of(std::uint64_t count, std::uint64_t total);

/// |ips ∩ reference| / |reference| over distinct addresses. Throws
/// std::invalid_argument when the reference is empty.
double ip_overlap(std::span<const Ipv4> ips, std::span<const Ipv4> reference);

std::string ports_csv(std::span<const RankRow> rows);
std::string countries_csv(std::span<const RankRow> rows);
std::string series_csv(std::span<const SeriesRow> rows);

}  // namespace tiktriage
