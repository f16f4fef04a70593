#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tiktriage {

/// Microseconds since the Unix epoch (UTC).
using Micros = std::int64_t;

inline constexpr Micros kMicrosPerSecond = 1'000'000;
inline constexpr Micros kMicrosPerHour = 3600 * kMicrosPerSecond;
inline constexpr Micros kMicrosPerDay = 86400 * kMicrosPerSecond;

/// Days since 1970-01-01, flooring for negative timestamps.
constexpr std::int64_t day_index(Micros ts) {
  return ts >= 0 ? ts / kMicrosPerDay : -((-ts + kMicrosPerDay - 1) / kMicrosPerDay);
}
constexpr std::int64_t second_index(Micros ts) {
  return ts >= 0 ? ts / kMicrosPerSecond : -((-ts + kMicrosPerSecond - 1) / kMicrosPerSecond);
}

struct CivilDate {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;
};

std::int64_t days_from_civil(CivilDate date);
CivilDate civil_from_days(std::int64_t days);

/// "YYYY-MM-DD".
std::string format_date(std::int64_t day);
/// "YYYY-MM-DD HH:MM:SS" (sub-second part dropped).
std::string format_datetime(Micros ts);
/// "YYYY-MM-DDTHH:MM:SS.ffffffZ"
std::string format_iso8601(Micros ts);
std::optional<std::int64_t> parse_date(std::string_view text);
/// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM:SS" and "YYYY-MM-DDTHH:MM:SS[.frac][Z]".
std::optional<Micros> parse_timestamp(std::string_view text);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);
std::string hex_encode(std::span<const std::uint8_t> bytes);
std::optional<std::vector<std::uint8_t>> hex_decode(std::string_view text);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::string to_lower(std::string_view s);
bool starts_with_icase(std::string_view s, std::string_view prefix);

/// RFC 4180 field quoting, applied only when needed.
std::string csv_field(std::string_view value);
/// Splits one CSV record; double-quoted fields may contain commas and "" escapes.
std::optional<std::vector<std::string>> parse_csv_line(std::string_view line);

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);
void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Regular files under `root` with one of `extensions` (empty = any), sorted
/// by relative path.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& root,
                                              std::span<const std::string_view> extensions = {});

/// Runs body(i) for i in [0, n) on up to `workers` threads. Chunks are
/// contiguous; output order must not depend on scheduling, so callers write
/// into pre-sized per-index slots.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body);

unsigned default_workers();

/// splitmix64-seeded xoshiro256** with distribution helpers whose output is
/// identical on every platform (unlike the <random> distributions).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform in [0, bound) without modulo bias; bound > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  /// Uniform in [0, 1) with 53 bits.
  double unit();
  bool chance(double p) { return unit() < p; }

  template <typename T>
  const T& pick(std::span<const T> items) {
    return items[below(items.size())];
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t s_[4];
};

}  // namespace tiktriage
