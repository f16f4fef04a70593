#include "tiktriage/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace tiktriage {

std::string_view to_string(CampaignTrigger t) {
  switch (t) {
    case CampaignTrigger::StaticSrcPort: return "STATIC_SRC_PORT";
    case CampaignTrigger::ServiceSweep: return "SERVICE_SWEEP";
    case CampaignTrigger::VolumeOutlier: return "VOLUME_OUTLIER";
  }
  return "VOLUME_OUTLIER";
}

namespace {

struct SourceStats {
  std::uint64_t flows = 0;
  Micros first = 0;
  Micros last = 0;
  std::map<std::int64_t, std::uint64_t> per_day;
  std::map<std::uint16_t, std::uint64_t> src_ports;
  std::map<std::uint16_t, std::set<std::uint16_t>> dst_ports_by_src_port;
  std::map<std::uint16_t, std::uint64_t> dst_port_flows;
  std::map<std::uint16_t, std::set<std::string>> dst_port_sensors;
  std::set<std::uint16_t> dst_ports;
  std::set<std::string> sensors;
};

}  // namespace

std::vector<Campaign> detect_campaigns(std::span<const FlowRecord> flows, const CampaignParams& params) {
  std::map<Ipv4, SourceStats> sources;
  for (const auto& f : flows) {
    SourceStats& s = sources[f.initiator_ip];
    if (s.flows == 0) {
      s.first = f.first_ts;
      s.last = f.last_ts;
    }
    ++s.flows;
    s.first = std::min(s.first, f.first_ts);
    s.last = std::max(s.last, f.last_ts);
    ++s.per_day[day_index(f.first_ts)];
    ++s.src_ports[f.initiator_port];
    s.dst_ports_by_src_port[f.initiator_port].insert(f.responder_port);
    ++s.dst_port_flows[f.responder_port];
    s.dst_port_sensors[f.responder_port].insert(f.sensor_id);
    s.dst_ports.insert(f.responder_port);
    s.sensors.insert(f.sensor_id);
  }

  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto& [ip, s] : sources) {
    for (const auto& [day, count] : s.per_day) {
      sum += static_cast<double>(count);
      sum_sq += static_cast<double>(count) * static_cast<double>(count);
      ++n;
    }
  }
  const double mean = n ? sum / static_cast<double>(n) : 0.0;
  const double var = n ? std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean) : 0.0;
  const double volume_limit = mean + params.volume_sigma * std::sqrt(var);

  std::vector<Campaign> out;
  for (const auto& [ip, s] : sources) {
    if (s.flows < params.min_flows) continue;
    Campaign c;
    bool hit = false;
    // Static source port: the dominant port carries enough flows and spreads over >= 3 destination ports.
    for (const auto& [port, count] : s.src_ports) {
      if (count >= params.min_flows &&
          static_cast<double>(count) >= params.static_port_frac * static_cast<double>(s.flows) &&
          s.dst_ports_by_src_port.at(port).size() >= 3) {
        c.trigger = CampaignTrigger::StaticSrcPort;
        c.static_src_port = port;
        hit = true;
        break;
      }
    }
    if (!hit) {
      for (const auto& [port, count] : s.dst_port_flows) {
        if (count >= params.min_flows && s.dst_port_sensors.at(port).size() >= 3) {
          c.trigger = CampaignTrigger::ServiceSweep;
          hit = true;
          break;
        }
      }
    }
    if (!hit) {
      for (const auto& [day, count] : s.per_day) {
        if (static_cast<double>(count) > volume_limit) {
          c.trigger = CampaignTrigger::VolumeOutlier;
          hit = true;
          break;
        }
      }
    }
    if (!hit) continue;
    c.src_ips.insert(ip);
    c.ts_start = s.first;
    c.ts_end = s.last;
    c.targeted_ports = s.dst_ports;
    c.sensors_hit = s.sensors;
    c.flow_count = s.flows;
    c.campaign_id = "C-" + hex64(fnv1a64(ip.to_string())).substr(0, 8);
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const Campaign& a, const Campaign& b) {
    if (a.flow_count != b.flow_count) return a.flow_count > b.flow_count;
    return *a.src_ips.begin() < *b.src_ips.begin();
  });
  return out;
}

double Dispersal::fraction(std::size_t k) const {
  auto it = counts.find(k);
  if (it == counts.end() || total_ips == 0) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(total_ips);
}

Dispersal dispersal(std::span<const AttackEvent> events) {
  std::map<Ipv4, std::set<std::string>> sensors;
  for (const auto& ev : events) {
    if (ev.src_ip.is_unspecified()) continue;
    sensors[ev.src_ip].insert(ev.sensor_id);
  }
  if (sensors.empty()) throw EmptyInput("dispersal needs at least one attributed event");
  Dispersal d;
  for (const auto& [ip, set] : sensors) ++d.counts[set.size()];
  d.total_ips = sensors.size();
  return d;
}

AttributionTable AttributionTable::parse(std::string_view text) {
  AttributionTable table;
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1 && starts_with_icase(line, "cidr")) continue;
    auto fields = parse_csv_line(line);
    if (!fields || fields->size() != 4) throw AttributionError(line_no, "expected cidr,country,asn,as_name");
    AttributionRecord rec;
    auto cidr = Cidr::parse(trim((*fields)[0]));
    if (!cidr) throw AttributionError(line_no, "bad prefix '" + (*fields)[0] + "'");
    rec.cidr = *cidr;
    rec.country = std::string(trim((*fields)[1]));
    if (rec.country.size() != 3 ||
        !std::all_of(rec.country.begin(), rec.country.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) {
      throw AttributionError(line_no, "country must be an upper-case alpha-3 code");
    }
    std::string_view asn = trim((*fields)[2]);
    if (starts_with_icase(asn, "AS")) asn.remove_prefix(2);
    if (asn.empty() || asn.size() > 10 || !std::all_of(asn.begin(), asn.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw AttributionError(line_no, "bad ASN");
    }
    const unsigned long long v = std::stoull(std::string(asn));
    if (v > 0xFFFFFFFFull) throw AttributionError(line_no, "ASN out of range");
    rec.asn = static_cast<std::uint32_t>(v);
    rec.as_name = (*fields)[3];
    if (table.by_len_[rec.cidr.prefix].contains(rec.cidr.network.value)) {
      throw AttributionError(line_no, "duplicate prefix " + rec.cidr.to_string());
    }
    table.add(rec);
  }
  return table;
}

AttributionTable AttributionTable::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

void AttributionTable::add(const AttributionRecord& rec) {
  auto [it, fresh] = by_len_[rec.cidr.prefix].insert_or_assign(rec.cidr.network.value, rec);
  if (fresh) ++count_;
}

const AttributionRecord* AttributionTable::lookup(Ipv4 ip) const {
  for (int len = 32; len >= 0; --len) {
    const auto& m = by_len_[len];
    if (m.empty()) continue;
    auto it = m.find(ip.value & Cidr::mask_for(static_cast<std::uint8_t>(len)));
    if (it != m.end()) return &it->second;
  }
  return nullptr;
}

Heatmap endpoint_heatmap(std::span<const AttackEvent> events) {
  Heatmap h;
  std::map<Ipv4, std::uint64_t> rows;
  std::map<std::string, std::uint64_t> cols;
  std::map<Ipv4, std::set<std::int64_t>> days;
  for (const auto& ev : events) {
    if (ev.category != AttackCategory::TunnelEstablished || !ev.tunnel_endpoint) continue;
    ++h.cells[{*ev.tunnel_endpoint, ev.sensor_id}];
    ++rows[*ev.tunnel_endpoint];
    ++cols[ev.sensor_id];
    days[*ev.tunnel_endpoint].insert(day_index(ev.ts_start));
    ++h.total;
  }
  h.endpoint_totals.assign(rows.begin(), rows.end());
  std::stable_sort(h.endpoint_totals.begin(), h.endpoint_totals.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  h.sensor_totals.assign(cols.begin(), cols.end());
  std::stable_sort(h.sensor_totals.begin(), h.sensor_totals.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [ip, set] : days) h.endpoint_days[ip] = set.size();
  return h;
}

std::optional<double> pearson(std::span<const std::uint64_t> x, std::span<const std::uint64_t> y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return std::nullopt;
  long double mx = 0;
  long double my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0;
  long double sxx = 0;
  long double syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long double dx = x[i] - mx;
    const long double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

TimeSeries timeseries(std::span<const FlowRecord> flows, std::span<const LogEvent> logs, Bucket bucket) {
  TimeSeries ts;
  ts.width = bucket == Bucket::Hour ? kMicrosPerHour : kMicrosPerDay;
  auto index = [&](Micros t) {
    return t >= 0 ? t / ts.width : -((-t + ts.width - 1) / ts.width);
  };
  std::optional<std::int64_t> lo;
  std::optional<std::int64_t> hi;
  auto extend = [&](Micros t) {
    const auto b = index(t);
    lo = lo ? std::min(*lo, b) : b;
    hi = hi ? std::max(*hi, b) : b;
  };
  for (const auto& f : flows) extend(f.first_ts);
  for (const auto& l : logs) {
    if (l.category != LogCategory::Other) extend(l.ts);
  }
  if (!lo) return ts;
  ts.start = *lo * ts.width;
  const auto n = static_cast<std::size_t>(*hi - *lo + 1);
  ts.flows.assign(n, 0);
  ts.log_events.assign(n, 0);
  for (const auto& f : flows) ++ts.flows[static_cast<std::size_t>(index(f.first_ts) - *lo)];
  for (const auto& l : logs) {
    if (l.category != LogCategory::Other) ++ts.log_events[static_cast<std::size_t>(index(l.ts) - *lo)];
  }
  ts.correlation = pearson(ts.flows, ts.log_events);
  return ts;
}

}  // namespace tiktriage
