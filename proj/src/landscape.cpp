#include "tiktriage/landscape.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>
#include <map>
#include <json.hpp>
#include <set>
#include <system_error>

#include "tiktriage/util.hpp"

namespace tiktriage {

bool matches_device(const ScanRecord& rec, std::string_view filter) {
  const std::string needle = to_lower(filter);
  if (to_lower(rec.banner).find(needle) != std::string::npos) return true;
  return rec.product && to_lower(*rec.product).find(needle) != std::string::npos;
}

ScanRecord parse_scan_line(std::string_view line) {
  const auto doc = nlohmann::json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw std::invalid_argument("not a JSON object");
  ScanRecord rec;
  const auto ts = doc.find("timestamp");
  if (ts == doc.end() || !ts->is_string()) throw std::invalid_argument("missing timestamp");
  const auto when = parse_timestamp(ts->get<std::string>());
  if (!when) throw std::invalid_argument("bad timestamp");
  rec.day = day_index(*when);
  const auto ip = doc.find("ip_str");
  if (ip == doc.end() || !ip->is_string()) throw std::invalid_argument("missing ip_str");
  const auto addr = Ipv4::parse(ip->get<std::string>());
  if (!addr) throw std::invalid_argument("bad ip_str");
  rec.ip = *addr;
  const auto port = doc.find("port");
  if (port == doc.end() || !port->is_number_integer()) throw std::invalid_argument("missing port");
  const auto p = port->get<std::int64_t>();
  if (p < 0 || p > 65535) throw std::invalid_argument("port out of range");
  rec.port = static_cast<std::uint16_t>(p);
  if (auto d = doc.find("data"); d != doc.end() && d->is_string()) rec.banner = d->get<std::string>();
  if (auto d = doc.find("product"); d != doc.end() && d->is_string()) rec.product = d->get<std::string>();
  if (auto loc = doc.find("location"); loc != doc.end() && loc->is_object()) {
    if (auto c = loc->find("country_code3"); c != loc->end() && c->is_string() && !c->get<std::string>().empty()) {
      rec.country_code = c->get<std::string>();
    }
  }
  if (auto a = doc.find("asn"); a != doc.end()) {
    if (a->is_number_unsigned()) {
      rec.asn = a->get<std::uint32_t>();
    } else if (a->is_string()) {
      std::string_view s = a->get_ref<const std::string&>();
      if (starts_with_icase(s, "AS")) s.remove_prefix(2);
      if (!s.empty() && s.size() <= 10 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        const auto v = std::stoull(std::string(s));
        if (v <= 0xFFFFFFFFull) rec.asn = static_cast<std::uint32_t>(v);
      }
    }
  }
  return rec;
}

SlotTable::SlotTable(unsigned value_bits, std::size_t memory_budget)
    : value_bits_(value_bits), value_mask_((std::uint64_t{1} << value_bits) - 1), budget_(memory_budget) {}

SlotTable::~SlotTable() { release(); }

SlotTable::SlotTable(SlotTable&& other) noexcept
    : value_bits_(other.value_bits_),
      value_mask_(other.value_mask_),
      budget_(other.budget_),
      slots_(std::exchange(other.slots_, nullptr)),
      capacity_(std::exchange(other.capacity_, 0)),
      size_(std::exchange(other.size_, 0)),
      file_backed_(std::exchange(other.file_backed_, false)) {}

SlotTable& SlotTable::operator=(SlotTable&& other) noexcept {
  if (this != &other) {
    release();
    value_bits_ = other.value_bits_;
    value_mask_ = other.value_mask_;
    budget_ = other.budget_;
    slots_ = std::exchange(other.slots_, nullptr);
    capacity_ = std::exchange(other.capacity_, 0);
    size_ = std::exchange(other.size_, 0);
    file_backed_ = std::exchange(other.file_backed_, false);
  }
  return *this;
}

void SlotTable::allocate(std::size_t capacity) {
  const std::size_t bytes = capacity * sizeof(std::uint64_t);
  void* mem = MAP_FAILED;
  bool file_backed = false;
  if (bytes <= budget_) {
    mem = ::mmap(nullptr, bytes, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
  } else {
    std::string tmpl = (std::filesystem::temp_directory_path() / "tiktriage-slots-XXXXXX").string();
    const int fd = ::mkstemp(tmpl.data());
    if (fd < 0) throw std::system_error(errno, std::generic_category(), "mkstemp");
    ::unlink(tmpl.c_str());
    if (::ftruncate(fd, static_cast<off_t>(bytes)) != 0) {
      const int err = errno;
      ::close(fd);
      throw std::system_error(err, std::generic_category(), "ftruncate");
    }
    mem = ::mmap(nullptr, bytes, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
    ::close(fd);
    file_backed = true;
  }
  if (mem == MAP_FAILED) throw std::system_error(errno, std::generic_category(), "mmap");
  slots_ = static_cast<std::uint64_t*>(mem);
  capacity_ = capacity;
  file_backed_ = file_backed;
}

void SlotTable::release() {
  if (slots_) ::munmap(slots_, capacity_ * sizeof(std::uint64_t));
  slots_ = nullptr;
  capacity_ = 0;
}

std::uint64_t& SlotTable::locate(std::uint64_t key) {
  const std::size_t mask = capacity_ - 1;
  std::size_t i = Rng::mix(key) & mask;
  while (slots_[i] != 0 && (slots_[i] >> value_bits_) != key) i = (i + 1) & mask;
  return slots_[i];
}

void SlotTable::grow() {
  std::uint64_t* old = slots_;
  const std::size_t old_cap = capacity_;
  allocate(old_cap ? old_cap * 2 : 1024);
  for (std::size_t i = 0; i < old_cap; ++i) {
    if (old[i] != 0) locate(old[i] >> value_bits_) = old[i];
  }
  if (old) ::munmap(old, old_cap * sizeof(std::uint64_t));
}

namespace {

// Country slot value: (day + 1) << 16 | country << 1 | conflict
constexpr std::uint64_t country_value(std::uint64_t day1, std::uint64_t country, bool conflict) {
  return (day1 << 16) | (country << 1) | (conflict ? 1u : 0u);
}

constexpr auto min_merge = [](std::uint64_t a, std::uint64_t b) { return std::min(a, b); };

}  // namespace

LandscapeStore::LandscapeStore(std::size_t memory_budget)
    : records_(16, memory_budget / 3), ips_(16, memory_budget / 3), ip_country_(32, memory_budget / 3) {
  countries_.emplace_back(kUnknownCountry);
}

std::uint16_t LandscapeStore::country_index(std::string_view code) {
  auto it = country_ids_.find(std::string(code));
  if (it != country_ids_.end()) return it->second;
  if (countries_.size() >= 0x7FFF) throw std::length_error("too many distinct country codes");
  const auto idx = static_cast<std::uint16_t>(countries_.size());
  countries_.emplace_back(code);
  country_ids_.emplace(std::string(code), idx);
  return idx;
}

void LandscapeStore::add(std::int64_t day, Ipv4 ip, std::uint16_t port, std::string_view country) {
  if (day < 0 || day >= 0xFFFE) throw std::out_of_range("scan day outside the supported range");
  const auto day1 = static_cast<std::uint64_t>(day + 1);
  ++observations_;
  records_.upsert((std::uint64_t{ip.value} << 16) | port, day1, min_merge);
  ips_.upsert(ip.value, day1, min_merge);
  if (country.empty() || country == kUnknownCountry) return;
  const std::uint16_t c = country_index(country);
  ip_country_.upsert(ip.value, country_value(day1, c, false), [this](std::uint64_t old, std::uint64_t in) {
    const std::uint64_t d0 = old >> 16;
    const std::uint64_t d1 = in >> 16;
    const std::uint64_t c0 = (old >> 1) & 0x7FFF;
    const std::uint64_t c1 = (in >> 1) & 0x7FFF;
    const bool conflict = (old & 1) || c0 != c1;
    const bool incoming_first = d1 < d0 || (d1 == d0 && countries_[c1] < countries_[c0]);
    return incoming_first ? country_value(d1, c1, conflict) : country_value(d0, c0, conflict);
  });
}

void LandscapeStore::add(const ScanRecord& rec) {
  add(rec.day, rec.ip, rec.port, rec.country_code ? std::string_view(*rec.country_code) : std::string_view{});
}

std::uint64_t LandscapeStore::country_conflicts() const {
  std::uint64_t n = 0;
  ip_country_.for_each([&](std::uint64_t, std::uint64_t v) { n += v & 1; });
  return n;
}

std::vector<SeriesRow> LandscapeStore::cumulative_series() const {
  if (records_.size() == 0) throw EmptyStore();
  std::map<std::int64_t, std::pair<std::uint64_t, std::uint64_t>> fresh;
  records_.for_each([&](std::uint64_t, std::uint64_t v) { ++fresh[static_cast<std::int64_t>(v) - 1].first; });
  ips_.for_each([&](std::uint64_t, std::uint64_t v) { ++fresh[static_cast<std::int64_t>(v) - 1].second; });
  const std::int64_t lo = fresh.begin()->first;
  const std::int64_t hi = fresh.rbegin()->first;
  std::vector<SeriesRow> out;
  out.reserve(static_cast<std::size_t>(hi - lo + 1));
  std::uint64_t cr = 0;
  std::uint64_t ci = 0;
  for (std::int64_t d = lo; d <= hi; ++d) {
    SeriesRow row;
    row.day = d;
    if (auto it = fresh.find(d); it != fresh.end()) {
      row.new_records = it->second.first;
      row.new_ips = it->second.second;
    }
    cr += row.new_records;
    ci += row.new_ips;
    row.cumulative_records = cr;
    row.cumulative_ips = ci;
    out.push_back(row);
  }
  return out;
}

namespace {

std::vector<RankRow> rank(std::vector<std::pair<std::string, std::uint64_t>> counts, std::uint64_t total,
                          std::size_t n) {
  std::stable_sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (counts.size() > n) counts.resize(n);
  std::vector<RankRow> out;
  for (auto& [key, count] : counts) out.push_back({std::move(key), count, permille_of(count, total)});
  return out;
}

}  // namespace

std::vector<RankRow> LandscapeStore::top_ports(std::size_t n) const {
  if (records_.size() == 0) throw EmptyStore();
  std::vector<std::uint64_t> per_port(65536, 0);
  records_.for_each([&](std::uint64_t key, std::uint64_t) { ++per_port[key & 0xFFFF]; });
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  for (std::size_t p = 0; p < per_port.size(); ++p) {
    if (per_port[p]) counts.emplace_back(std::to_string(p), per_port[p]);
  }
  return rank(std::move(counts), records_.size(), n);
}

std::vector<RankRow> LandscapeStore::top_countries(std::size_t n) const {
  if (ips_.size() == 0) throw EmptyStore();
  std::vector<std::uint64_t> per_country(countries_.size(), 0);
  ip_country_.for_each([&](std::uint64_t, std::uint64_t v) { ++per_country[(v >> 1) & 0x7FFF]; });
  per_country[0] = ips_.size() - ip_country_.size();
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  for (std::size_t c = 0; c < per_country.size(); ++c) {
    if (per_country[c]) counts.emplace_back(countries_[c], per_country[c]);
  }
  std::sort(counts.begin(), counts.end());
  return rank(std::move(counts), ips_.size(), n);
}

namespace {

struct Parsed {
  std::vector<ScanRecord> records;
  std::uint64_t lines = 0;
  std::uint64_t skipped = 0;
  std::optional<ScanParseError> error;
};

Parsed parse_file(const std::filesystem::path& path, const IngestOptions& opts) {
  Parsed out;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    out.error.emplace(path.string(), 0, "cannot open");
    return out;
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++out.lines;
    try {
      ScanRecord rec = parse_scan_line(line);
      if (matches_device(rec, opts.filter)) {
        rec.banner.clear();
        rec.product.reset();
        out.records.push_back(std::move(rec));
      }
    } catch (const std::exception& e) {
      if (!opts.lax) {
        out.error.emplace(path.string(), line_no, e.what());
        return out;
      }
      ++out.skipped;
    }
  }
  return out;
}

}  // namespace

LandscapeStore ingest_scan_files(std::span<const std::filesystem::path> files, const IngestOptions& opts,
                                 IngestStats* stats) {
  LandscapeStore store(opts.memory_budget);
  IngestStats local;
  const std::size_t batch = std::max(1u, opts.workers);
  for (std::size_t begin = 0; begin < files.size(); begin += batch) {
    const std::size_t n = std::min(batch, files.size() - begin);
    std::vector<Parsed> parsed(n);
    parallel_for(n, opts.workers, [&](std::size_t i) { parsed[i] = parse_file(files[begin + i], opts); });
    for (auto& p : parsed) {
      if (p.error) throw *p.error;
      local.lines += p.lines;
      local.skipped += p.skipped;
      local.matched += p.records.size();
      for (const auto& rec : p.records) store.add(rec);
    }
  }
  if (stats) *stats = local;
  return store;
}

std::uint64_t permille_of(std::uint64_t count, std::uint64_t total) {
  if (total == 0) return 0;
  return (2 * count * 1000 + total) / (2 * total);
}

std::string format_permille(std::uint64_t permille) {
  return std::to_string(permille / 10) + "." + std::to_string(permille % 10);
}

double ip_overlap(std::span<const Ipv4> ips, std::span<const Ipv4> reference) {
  const std::set<Ipv4> ref(reference.begin(), reference.end());
  if (ref.empty()) throw std::invalid_argument("reference IP list is empty");
  const std::set<Ipv4> mine(ips.begin(), ips.end());
  std::size_t common = 0;
  for (const auto& ip : mine) common += ref.contains(ip);
  return static_cast<double>(common) / static_cast<double>(ref.size());
}

namespace {

std::string rank_csv(std::string_view header, std::span<const RankRow> rows) {
  std::string out(header);
  out += '\n';
  for (const auto& r : rows) {
    out += csv_field(r.key) + "," + std::to_string(r.count) + "," + format_permille(r.permille) + "\n";
  }
  return out;
}

}  // namespace

std::string ports_csv(std::span<const RankRow> rows) { return rank_csv("port,records,percent", rows); }

std::string countries_csv(std::span<const RankRow> rows) { return rank_csv("country,ips,percent", rows); }

std::string series_csv(std::span<const SeriesRow> rows) {
  std::string out = "day,cumulative_records,cumulative_ips,new_records,new_ips\n";
  for (const auto& r : rows) {
    out += format_date(r.day) + "," + std::to_string(r.cumulative_records) + "," + std::to_string(r.cumulative_ips) +
           "," + std::to_string(r.new_records) + "," + std::to_string(r.new_ips) + "\n";
  }
  return out;
}

}  // namespace tiktriage
