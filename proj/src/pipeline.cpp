#include "tiktriage/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <set>

#include "tiktriage/pcap.hpp"

namespace tiktriage {

using ojson = nlohmann::ordered_json;

namespace fs = std::filesystem;

void RunConfig::validate() const {
  if (!captures && !logs) throw ConfigError("at least one of --captures or --logs is required");
  if (captures && !fs::is_directory(*captures)) throw ConfigError("--captures: not a directory: " + captures->string());
  if (logs && !fs::is_directory(*logs)) throw ConfigError("--logs: not a directory: " + logs->string());
  for (const auto& s : signatures) {
    if (!fs::exists(s)) throw ConfigError("--signatures: no such file: " + s.string());
  }
  if (attribution && !fs::is_regular_file(*attribution)) {
    throw ConfigError("--attribution: no such file: " + attribution->string());
  }
  if (out.empty()) throw ConfigError("--out is required");
  if (idle_timeout < kMicrosPerSecond || idle_timeout > kMicrosPerDay) {
    throw ConfigError("--idle-timeout must be in [1, 86400] seconds");
  }
  if (bruteforce.window < kMicrosPerSecond || bruteforce.window > kMicrosPerDay) {
    throw ConfigError("--bf-window must be in [1, 86400] seconds");
  }
  if (bruteforce.threshold < 1) throw ConfigError("--bf-threshold must be >= 1");
  if (campaign.min_flows < 1) throw ConfigError("--campaign-min-flows must be >= 1");
  if (!(campaign.static_port_frac > 0.0 && campaign.static_port_frac <= 1.0)) {
    throw ConfigError("--static-port-frac must be in (0, 1]");
  }
  if (!(campaign.volume_sigma >= 0.0 && std::isfinite(campaign.volume_sigma))) {
    throw ConfigError("--volume-sigma must be >= 0");
  }
  if (workers < 1 || workers > 256) throw ConfigError("--workers must be in [1, 256]");
}

namespace {

/// <root>/<sensor>/<file> names the sensor by directory; loose files by the
/// stem up to the first '-' or '_'.
std::string sensor_of(const fs::path& root, const fs::path& file) {
  const fs::path rel = fs::relative(file, root);
  if (rel.has_parent_path()) return rel.begin()->string();
  const std::string stem = rel.stem().string();
  return stem.substr(0, stem.find_first_of("-_"));
}

std::string rel_name(const fs::path& root, const fs::path& file) { return fs::relative(file, root).generic_string(); }

struct CaptureSlot {
  std::vector<PacketRecord> packets;
  CaptureStats stats;
  std::optional<std::string> error;
};

std::vector<PacketRecord> load_captures(const fs::path& root, unsigned workers, Analysis& a,
                                        std::set<std::string>& sensors) {
  static constexpr std::string_view kExt[] = {".pcap", ".cap"};
  const auto files = list_files(root, kExt);
  std::vector<CaptureSlot> slots(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) {
    try {
      const auto bytes = read_binary_file(files[i]);
      auto parsed = parse_capture_file(bytes, sensor_of(root, files[i]));
      slots[i].packets = std::move(parsed.packets);
      slots[i].stats = parsed.stats;
    } catch (const std::exception& e) {
      slots[i].error = e.what();
    }
  });
  std::size_t total = 0;
  for (const auto& s : slots) total += s.packets.size();
  std::vector<PacketRecord> packets;
  packets.reserve(total);
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string name = rel_name(root, files[i]);
    auto& s = slots[i];
    ++a.capture_files;
    sensors.insert(sensor_of(root, files[i]));
    if (s.error) {
      a.warnings.push_back("capture " + name + " skipped: " + *s.error);
      continue;
    }
    a.skipped_packets += s.stats.skipped();
    if (s.stats.malformed) {
      a.warnings.push_back("capture " + name + ": " + std::to_string(s.stats.malformed) + " malformed packets skipped");
    }
    if (s.stats.truncated_tail) a.warnings.push_back("capture " + name + ": truncated final record");
    std::move(s.packets.begin(), s.packets.end(), std::back_inserter(packets));
    s.packets = {};
  }
  a.packets = packets.size();
  return packets;
}

void load_logs(const fs::path& root, unsigned workers, Analysis& a, std::set<std::string>& sensors) {
  static constexpr std::string_view kExt[] = {".log", ".txt"};
  const auto files = list_files(root, kExt);
  std::vector<std::vector<LogEvent>> slots(files.size());
  std::vector<std::optional<std::string>> errors(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) {
    try {
      slots[i] = parse_log_text(read_text_file(files[i]), sensor_of(root, files[i]), rel_name(root, files[i]));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < files.size(); ++i) {
    ++a.log_files;
    sensors.insert(sensor_of(root, files[i]));
    if (errors[i]) {
      a.warnings.push_back("log " + rel_name(root, files[i]) + " skipped: " + *errors[i]);
      continue;
    }
    std::move(slots[i].begin(), slots[i].end(), std::back_inserter(a.logs));
  }
  std::stable_sort(a.logs.begin(), a.logs.end(), [](const LogEvent& x, const LogEvent& y) {
    return std::tie(x.sensor_id, x.ts, x.file, x.line) < std::tie(y.sensor_id, y.ts, y.file, y.line);
  });
}

SignatureDb load_databases(const RunConfig& config) {
  SignatureDb db;
  try {
    if (config.signatures.empty()) {
      db = load_signatures(bundled_signature_dir()).db;
    } else {
      for (const auto& path : config.signatures) db.merge(load_signatures(path).db);
    }
  } catch (const std::exception& e) {
    throw ConfigError(std::string("signatures: ") + e.what());
  }
  return db;
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string country_of(const AttributionTable* table, Ipv4 ip) {
  if (!table) return std::string(kUnknownCountry);
  const auto* rec = table->lookup(ip);
  return rec ? rec->country : std::string(kUnknownCountry);
}

template <typename Map>
std::vector<std::pair<typename Map::key_type, typename Map::mapped_type>> ranked(const Map& m) {
  std::vector<std::pair<typename Map::key_type, typename Map::mapped_type>> rows(m.begin(), m.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
  return rows;
}

std::string join_csv(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  return out + "\n";
}

/// Row per sensor plus a TOTAL row; `columns` fixed, counts keyed by (sensor, column).
std::string sensor_table(std::string_view first, const std::vector<std::string>& sensors,
                         const std::vector<std::string>& columns,
                         const std::map<std::pair<std::string, std::string>, std::uint64_t>& counts) {
  std::vector<std::string> header = {std::string(first)};
  header.insert(header.end(), columns.begin(), columns.end());
  header.push_back("total");
  std::string out = join_csv(header);
  std::vector<std::uint64_t> col_totals(columns.size(), 0);
  for (const auto& s : sensors) {
    std::vector<std::string> row = {s};
    std::uint64_t total = 0;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      auto it = counts.find({s, columns[c]});
      const std::uint64_t n = it == counts.end() ? 0 : it->second;
      row.push_back(std::to_string(n));
      col_totals[c] += n;
      total += n;
    }
    row.push_back(std::to_string(total));
    out += join_csv(row);
  }
  std::vector<std::string> row = {"TOTAL"};
  std::uint64_t grand = 0;
  for (auto n : col_totals) {
    row.push_back(std::to_string(n));
    grand += n;
  }
  row.push_back(std::to_string(grand));
  return out + join_csv(row);
}

std::string join_set(const auto& items) {
  std::string out;
  for (const auto& x : items) {
    if (!out.empty()) out += ' ';
    if constexpr (std::is_same_v<std::decay_t<decltype(x)>, Ipv4>) {
      out += x.to_string();
    } else if constexpr (std::is_arithmetic_v<std::decay_t<decltype(x)>>) {
      out += std::to_string(x);
    } else {
      out += x;
    }
  }
  return out;
}

}  // namespace

Analysis analyze(const RunConfig& config) {
  config.validate();
  Analysis a;
  const SignatureDb db = load_databases(config);
  if (config.attribution) {
    try {
      a.attribution = AttributionTable::load(*config.attribution);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("--attribution: ") + e.what());
    }
  }
  std::set<std::string> sensors;
  std::vector<PacketRecord> packets;
  if (config.captures) packets = load_captures(*config.captures, config.workers, a, sensors);
  if (config.logs) load_logs(*config.logs, config.workers, a, sensors);
  a.sensors.assign(sensors.begin(), sensors.end());

  a.flows = assemble_flows(packets, config.idle_timeout);
  const StreamTable streams = reassemble_all(a.flows, packets, config.workers);
  ClassifyParams params;
  params.bruteforce = config.bruteforce;
  params.workers = config.workers;
  a.classified = classify_all(packets, a.flows, streams, a.logs, db, params);
  a.campaigns = detect_campaigns(a.flows, config.campaign);
  try {
    a.dispersal = dispersal(a.classified.events);
  } catch (const EmptyInput&) {
    a.dispersal = {};
  }
  a.heatmap = endpoint_heatmap(a.classified.events);
  a.series = timeseries(a.flows, a.logs, config.bucket);
  return a;
}

std::string events_jsonl(const std::vector<AttackEvent>& events, const AttributionTable* attribution) {
  std::string out;
  for (const auto& e : events) {
    ojson j;
    j["event_id"] = e.event_id;
    j["category"] = to_string(e.category);
    if (e.signature_id) j["signature_id"] = *e.signature_id;
    if (e.cve_id) j["cve_id"] = *e.cve_id;
    j["sensor"] = e.sensor_id;
    j["src_ip"] = e.src_ip.to_string();
    j["ts_start"] = format_iso8601(e.ts_start);
    j["ts_end"] = format_iso8601(e.ts_end);
    if (e.service) j["service"] = *e.service;
    if (e.tunnel_endpoint) j["tunnel_endpoint"] = e.tunnel_endpoint->to_string();
    j["evidence"] = e.evidence;
    j["attributes"] = ojson::object();
    for (const auto& [k, v] : e.attributes) j["attributes"][k] = v;
    if (attribution) {
      if (const auto* rec = attribution->lookup(e.src_ip)) {
        j["src_country"] = rec->country;
        j["src_asn"] = rec->asn;
        j["src_as_name"] = rec->as_name;
      }
    }
    out += j.dump() + "\n";
  }
  return out;
}

std::map<std::string, std::string> render_reports(const Analysis& a, const RunConfig& config) {
  std::map<std::string, std::string> files;
  const auto& events = a.classified.events;
  const AttributionTable* attr = a.attribution ? &*a.attribution : nullptr;
  files["events.jsonl"] = events_jsonl(events, attr);

  std::vector<std::string> category_names;
  for (auto c : kAllCategories) category_names.emplace_back(to_string(c));
  {
    std::map<std::pair<std::string, std::string>, std::uint64_t> counts;
    for (const auto& e : events) ++counts[{std::string(to_string(e.category)), e.sensor_id}];
    // categories as rows, sensors as columns
    std::string out = join_csv([&] {
      std::vector<std::string> h = {"category"};
      h.insert(h.end(), a.sensors.begin(), a.sensors.end());
      h.push_back("total");
      return h;
    }());
    std::vector<std::uint64_t> col(a.sensors.size(), 0);
    for (const auto& cat : category_names) {
      std::vector<std::string> row = {cat};
      std::uint64_t total = 0;
      for (std::size_t s = 0; s < a.sensors.size(); ++s) {
        auto it = counts.find({cat, a.sensors[s]});
        const std::uint64_t n = it == counts.end() ? 0 : it->second;
        row.push_back(std::to_string(n));
        col[s] += n;
        total += n;
      }
      row.push_back(std::to_string(total));
      out += join_csv(row);
    }
    std::vector<std::string> row = {"TOTAL"};
    for (auto n : col) row.push_back(std::to_string(n));
    row.push_back(std::to_string(events.size()));
    files["categories.csv"] = out + join_csv(row);
  }

  {
    std::map<std::pair<std::string, std::string>, std::uint64_t> counts;
    const std::vector<std::string> services = {"API", "FTP", "SSH", "TELNET", "WEB", "WINBOX", "OTHER"};
    for (const auto& e : events) {
      if (e.category != AttackCategory::LoginSuccess) continue;
      std::string svc = e.service.value_or("OTHER");
      if (std::find(services.begin(), services.end(), svc) == services.end()) svc = "OTHER";
      ++counts[{e.sensor_id, svc}];
    }
    files["logins_by_sensor.csv"] = sensor_table("sensor", a.sensors, services, counts);
  }

  {
    std::map<std::pair<std::string, std::string>, std::uint64_t> counts;
    std::map<std::string, std::set<Ipv4>> endpoints_by_country;
    std::map<std::string, std::uint64_t> tunnels_by_country;
    for (const auto& e : events) {
      if (e.category != AttackCategory::TunnelEstablished) continue;
      ++counts[{e.sensor_id, e.service.value_or("PPTP")}];
      const Ipv4 ep = e.tunnel_endpoint.value_or(e.src_ip);
      const std::string country = country_of(attr, ep);
      endpoints_by_country[country].insert(ep);
      ++tunnels_by_country[country];
    }
    files["tunnels_by_sensor.csv"] = sensor_table("sensor", a.sensors, {"PPTP", "SSTP"}, counts);
    std::string out = "country,endpoints,tunnels\n";
    for (const auto& [country, n] : ranked(tunnels_by_country)) {
      out += join_csv({country, std::to_string(endpoints_by_country[country].size()), std::to_string(n)});
    }
    files["tunnel_endpoints.csv"] = out;
  }

  {
    const auto& daily = a.classified.bruteforce.daily;
    std::set<std::string> services = {"SSH", "TELNET"};
    for (const auto& [key, n] : daily) services.insert(key.second);
    std::vector<std::string> cols(services.begin(), services.end());
    std::string out = join_csv([&] {
      std::vector<std::string> h = {"day"};
      h.insert(h.end(), cols.begin(), cols.end());
      h.push_back("total");
      return h;
    }());
    if (!daily.empty()) {
      const std::int64_t lo = daily.begin()->first.first;
      const std::int64_t hi = daily.rbegin()->first.first;
      for (std::int64_t d = lo; d <= hi; ++d) {
        std::vector<std::string> row = {format_date(d)};
        std::uint64_t total = 0;
        for (const auto& svc : cols) {
          auto it = daily.find({d, svc});
          const std::uint64_t n = it == daily.end() ? 0 : it->second;
          row.push_back(std::to_string(n));
          total += n;
        }
        row.push_back(std::to_string(total));
        out += join_csv(row);
      }
    }
    files["bruteforce_series.csv"] = out;
  }

  {
    std::map<std::string, std::set<Ipv4>> ips;
    std::map<std::string, std::uint64_t> count;
    for (const auto& e : events) {
      if (e.category != AttackCategory::MiraiScan) continue;
      const std::string c = country_of(attr, e.src_ip);
      ips[c].insert(e.src_ip);
      ++count[c];
    }
    std::map<std::string, std::uint64_t> by_ips;
    for (const auto& [c, set] : ips) by_ips[c] = set.size();
    std::string out = "country,ips,events\n";
    std::uint64_t total_ips = 0;
    for (const auto& [c, n] : ranked(by_ips)) {
      out += join_csv({c, std::to_string(n), std::to_string(count[c])});
      total_ips += n;
    }
    std::uint64_t total_events = 0;
    for (const auto& [c, n] : count) total_events += n;
    files["mirai_countries.csv"] = out + join_csv({"TOTAL", std::to_string(total_ips), std::to_string(total_events)});
  }

  {
    std::string out = "campaign_id,trigger,src_ips,flow_count,ts_start,ts_end,targeted_ports,sensors_hit,static_src_port\n";
    for (const auto& c : a.campaigns) {
      out += join_csv({c.campaign_id, std::string(to_string(c.trigger)), join_set(c.src_ips),
                       std::to_string(c.flow_count), format_iso8601(c.ts_start), format_iso8601(c.ts_end),
                       join_set(c.targeted_ports), join_set(c.sensors_hit),
                       c.static_src_port ? std::to_string(*c.static_src_port) : ""});
    }
    files["campaigns.csv"] = out;
  }

  {
    std::string out = "sensors_hit,ips,fraction\n";
    for (const auto& [k, n] : a.dispersal.counts) {
      out += join_csv({std::to_string(k), std::to_string(n), fixed(a.dispersal.fraction(k))});
    }
    files["dispersal.csv"] = out;
  }

  {
    std::vector<std::string> h = {"endpoint"};
    h.insert(h.end(), a.sensors.begin(), a.sensors.end());
    h.push_back("total");
    std::string out = join_csv(h);
    std::vector<std::uint64_t> col(a.sensors.size(), 0);
    for (const auto& [ep, total] : a.heatmap.endpoint_totals) {
      std::vector<std::string> row = {ep.to_string()};
      for (std::size_t s = 0; s < a.sensors.size(); ++s) {
        auto it = a.heatmap.cells.find({ep, a.sensors[s]});
        const std::uint64_t n = it == a.heatmap.cells.end() ? 0 : it->second;
        row.push_back(std::to_string(n));
        col[s] += n;
      }
      row.push_back(std::to_string(total));
      out += join_csv(row);
    }
    std::vector<std::string> row = {"TOTAL"};
    for (auto n : col) row.push_back(std::to_string(n));
    row.push_back(std::to_string(a.heatmap.total));
    files["heatmap.csv"] = out + join_csv(row);
  }

  {
    std::string out = "bucket_start,flows,log_events\n";
    for (std::size_t i = 0; i < a.series.flows.size(); ++i) {
      out += join_csv({format_iso8601(a.series.start + static_cast<Micros>(i) * a.series.width),
                       std::to_string(a.series.flows[i]), std::to_string(a.series.log_events[i])});
    }
    files["timeseries.csv"] = out;
  }

  {
    std::map<std::string, std::uint64_t> actions;
    for (auto c : {LogCategory::PptpSettings, LogCategory::L2tpSettings, LogCategory::SstpSettings,
                   LogCategory::DnsChanged, LogCategory::DhcpChanged, LogCategory::PppProfile, LogCategory::UserChange,
                   LogCategory::ScriptScheduled, LogCategory::Fetch}) {
      actions[std::string(to_string(c))] = 0;
    }
    for (const auto& l : a.logs) {
      auto it = actions.find(std::string(to_string(l.category)));
      if (it != actions.end()) ++it->second;
    }
    std::string out = "action,events\n";
    for (const auto& [k, n] : ranked(actions)) out += join_csv({k, std::to_string(n)});
    files["log_actions.csv"] = out;
  }

  {
    std::map<std::string, std::uint64_t> fetches;
    std::map<std::string, std::uint64_t> scripts;
    std::map<std::string, std::uint64_t> occurrences;
    std::map<std::string, std::uint64_t> action_scripts;
    for (const auto& s : a.classified.scripts) {
      std::set<std::string> sites;
      for (const auto& url : s.fetch_urls) {
        const std::string site = url_site(url);
        ++fetches[site];
        sites.insert(site);
      }
      for (const auto& site : sites) ++scripts[site];
      for (const auto& [action, n] : s.actions) {
        occurrences[action] += n;
        ++action_scripts[action];
      }
    }
    std::string out = "site,fetches,scripts\n";
    for (const auto& [site, n] : ranked(fetches)) out += join_csv({site, std::to_string(n), std::to_string(scripts[site])});
    files["script_sites.csv"] = out;
    out = "action,occurrences,scripts\n";
    for (const auto& [act, n] : ranked(occurrences)) {
      out += join_csv({act, std::to_string(n), std::to_string(action_scripts[act])});
    }
    files["script_actions.csv"] = out;
  }

  if (attr) {
    struct AsRow {
      std::string name;
      std::string country;
      std::set<Ipv4> ips;
      std::uint64_t events = 0;
    };
    std::map<std::uint32_t, AsRow> rows;
    for (const auto& e : events) {
      if (e.src_ip == Ipv4{}) continue;
      const auto* rec = attr->lookup(e.src_ip);
      const std::uint32_t asn = rec ? rec->asn : 0;
      AsRow& r = rows[asn];
      if (rec) {
        r.name = rec->as_name;
        r.country = rec->country;
      } else {
        r.country = std::string(kUnknownCountry);
      }
      r.ips.insert(e.src_ip);
      ++r.events;
    }
    std::map<std::uint32_t, std::uint64_t> order;
    for (const auto& [asn, r] : rows) order[asn] = r.events;
    std::string out = "asn,as_name,country,ips,events\n";
    for (const auto& [asn, n] : ranked(order)) {
      const AsRow& r = rows[asn];
      out += join_csv({asn ? "AS" + std::to_string(asn) : "UNKNOWN", r.name, r.country, std::to_string(r.ips.size()),
                       std::to_string(n)});
    }
    files["sources_by_as.csv"] = out;
  }

  {
    ojson s;
    s["inputs"] = {{"capture_files", a.capture_files},
                   {"log_files", a.log_files},
                   {"packets", a.packets},
                   {"skipped_packets", a.skipped_packets},
                   {"flows", a.flows.size()},
                   {"log_lines", a.logs.size()}};
    s["sensors"] = a.sensors;
    std::map<std::string, std::uint64_t> states;
    for (const auto& f : a.flows) ++states[std::string(to_string(f.state))];
    s["flow_states"] = states;
    ojson per = ojson::object();
    for (const auto& c : category_names) per[c] = 0;
    for (const auto& e : events) per[std::string(to_string(e.category))] = per[std::string(to_string(e.category))].get<std::uint64_t>() + 1;
    s["events"] = per;
    s["events_total"] = events.size();
    const auto& bf = a.classified.bruteforce;
    s["bruteforce"] = {{"attempts", bf.attempts},
                       {"ssh_ips", bf.ssh_ips},
                       {"telnet_ips", bf.telnet_ips},
                       {"both_ips", bf.both_ips},
                       {"ip_overlap", bf.ip_overlap}};
    std::uint64_t log_scripts = 0;
    for (const auto& sc : a.classified.scripts) log_scripts += sc.source == ScriptSource::Log;
    s["scripts"] = {{"log", log_scripts}, {"network", a.classified.scripts.size() - log_scripts}};
    s["campaigns"] = a.campaigns.size();
    s["heatmap_total"] = a.heatmap.total;
    s["timeseries"] = {{"bucket", config.bucket == Bucket::Hour ? "hour" : "day"},
                       {"correlation", a.series.correlation ? ojson(*a.series.correlation) : ojson(nullptr)}};
    s["thresholds"] = {{"idle_timeout_s", config.idle_timeout / kMicrosPerSecond},
                       {"bf_window_s", config.bruteforce.window / kMicrosPerSecond},
                       {"bf_threshold", config.bruteforce.threshold},
                       {"campaign_min_flows", config.campaign.min_flows},
                       {"static_port_frac", config.campaign.static_port_frac},
                       {"volume_sigma", config.campaign.volume_sigma}};
    s["warnings"] = a.warnings;
    files["summary.json"] = s.dump(2) + "\n";
  }
  return files;
}

namespace {

void write_reports(const fs::path& out, const std::map<std::string, std::string>& files) {
  fs::create_directories(out);
  for (const auto& [name, content] : files) write_text_file(out / name, content);
}

}  // namespace

int run_classify(const RunConfig& config, std::string* error, Analysis* analysis) {
  try {
    Analysis a = analyze(config);
    write_reports(config.out, render_reports(a, config));
    const int code = a.warnings.empty() ? kExitOk : kExitWarnings;
    if (analysis) *analysis = std::move(a);
    return code;
  } catch (const std::exception& e) {
    if (error) *error = e.what();
    return kExitFatal;
  }
}

std::vector<Ipv4> read_ip_list(const fs::path& path) {
  std::vector<Ipv4> out;
  std::size_t n = 0;
  for (auto line : split(read_text_file(path), '\n')) {
    ++n;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto ip = Ipv4::parse(line);
    if (!ip) throw std::invalid_argument(path.string() + ":" + std::to_string(n) + ": not an IPv4 address");
    out.push_back(*ip);
  }
  return out;
}

int run_landscape(const LandscapeConfig& config, std::string* error) {
  try {
    if (!fs::is_directory(config.scans)) throw ConfigError("--scans: not a directory: " + config.scans.string());
    if (config.out.empty()) throw ConfigError("--out is required");
    if (config.top < 1) throw ConfigError("--top must be >= 1");
    if (config.workers < 1 || config.workers > 256) throw ConfigError("--workers must be in [1, 256]");
    if (config.overlap_ips.has_value() != config.overlap_reference.has_value()) {
      throw ConfigError("--overlap-ips and --overlap-reference go together");
    }
    static constexpr std::string_view kExt[] = {".json", ".jsonl", ".ndjson"};
    const auto files = list_files(config.scans, kExt);
    if (files.empty()) throw ConfigError("no scan files under " + config.scans.string());

    IngestOptions opts;
    opts.filter = config.filter;
    opts.lax = config.lax;
    opts.workers = config.workers;
    opts.memory_budget = config.memory_budget;
    IngestStats stats;
    LandscapeStore store = ingest_scan_files(files, opts, &stats);
    if (store.distinct_records() == 0) throw EmptyStore();

    const auto ports = store.top_ports(config.top);
    const auto countries = store.top_countries(config.top);
    const auto series = store.cumulative_series();

    ojson s;
    s["files"] = files.size();
    s["lines"] = stats.lines;
    s["matched"] = stats.matched;
    s["skipped"] = stats.skipped;
    s["filter"] = config.filter;
    s["distinct_records"] = store.distinct_records();
    s["distinct_ips"] = store.distinct_ips();
    s["observations"] = store.observations();
    s["country_conflicts"] = store.country_conflicts();
    s["first_day"] = format_date(series.front().day);
    s["last_day"] = format_date(series.back().day);
    if (config.overlap_ips) {
      const auto ips = read_ip_list(*config.overlap_ips);
      const auto ref = read_ip_list(*config.overlap_reference);
      s["ip_overlap"] = ip_overlap(ips, ref);
    }
    std::map<std::string, std::string> out;
    out["ports.csv"] = ports_csv(ports);
    out["countries.csv"] = countries_csv(countries);
    out["series.csv"] = series_csv(series);
    out["summary.json"] = s.dump(2) + "\n";
    write_reports(config.out, out);
    return stats.skipped ? kExitWarnings : kExitOk;
  } catch (const std::exception& e) {
    if (error) *error = e.what();
    return kExitFatal;
  }
}

}  // namespace tiktriage
