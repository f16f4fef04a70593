#include "tiktriage/classify.hpp"

#include <algorithm>
#include <tuple>
#include <unordered_map>

#include "tiktriage/pptp.hpp"

namespace tiktriage {

void assign_event_id(AttackEvent& ev) {
  std::string canon(to_string(ev.category));
  canon += '|' + ev.sensor_id + '|' + ev.src_ip.to_string() + '|' + std::to_string(ev.ts_start) + '|' +
           std::to_string(ev.ts_end) + '|' + ev.signature_id.value_or("");
  for (const auto& e : ev.evidence) canon += '|' + e;
  ev.event_id = hex64(fnv1a64(canon));
}

void sort_events(std::vector<AttackEvent>& events) {
  std::sort(events.begin(), events.end(), [](const AttackEvent& a, const AttackEvent& b) {
    return std::tie(a.ts_start, a.event_id) < std::tie(b.ts_start, b.event_id);
  });
}

std::optional<std::string> service_for_port(std::uint16_t port) {
  switch (port) {
    case 21: return "FTP";
    case 22: return "SSH";
    case 23:
    case 2323: return "TELNET";
    case 80: return "WEB";
    case 139: return "NETBIOS";
    case 161: return "SNMP";
    case 443: return "SSTP";
    case 445: return "SMB";
    case 1723: return "PPTP";
    case 2000: return "BTEST";
    case 8080: return "PROXY";
    case 8291: return "WINBOX";
    case 8728: return "API";
    case 8729: return "API_SSL";
    default: return std::nullopt;
  }
}

StreamTable reassemble_all(std::span<const FlowRecord> flows, std::span<const PacketRecord> packets, unsigned workers) {
  StreamTable out(flows.size());
  parallel_for(flows.size(), workers, [&](std::size_t i) {
    const FlowRecord& f = flows[i];
    if (f.ip_proto != IpProto::Tcp || f.fwd_bytes + f.rev_bytes == 0) return;
    out[i] = reassemble_stream(f, packets);
  });
  return out;
}

namespace {

std::string flow_ref(const FlowRecord& f) { return "flow:" + f.flow_id; }

std::optional<std::size_t> pattern_hit(const PayloadPattern& pat, const FlowRecord& flow,
                                       std::span<const PacketRecord> packets, const std::optional<StreamPair>& streams,
                                       const FilterAst& filter, std::string& where) {
  switch (pat.scope()) {
    case PatternScope::Packet:
      for (std::size_t idx : flow.packet_indices) {
        const PacketRecord& p = packets[idx];
        if (!eval_filter(filter, p)) continue;
        auto hits = match_payload(pat, p);
        if (!hits.empty()) {
          where = "packet:" + flow.flow_id + "@" + std::to_string(p.ts);
          return hits.front();
        }
      }
      return std::nullopt;
    case PatternScope::StreamFwd:
    case PatternScope::StreamRev:
    case PatternScope::StreamEither: {
      if (!streams) return std::nullopt;
      if (pat.scope() != PatternScope::StreamRev) {
        auto hits = match_payload(pat, streams->fwd);
        if (!hits.empty()) {
          where = "stream:" + flow.flow_id + ":fwd";
          return hits.front();
        }
      }
      if (pat.scope() != PatternScope::StreamFwd) {
        auto hits = match_payload(pat, streams->rev);
        if (!hits.empty()) {
          where = "stream:" + flow.flow_id + ":rev";
          return hits.front();
        }
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::vector<AttackEvent> match_flow(const FlowRecord& flow, std::span<const PacketRecord> packets,
                                    const std::optional<StreamPair>& streams,
                                    std::span<const CompiledSignature* const> sigs) {
  std::vector<AttackEvent> out;
  for (const CompiledSignature* cs : sigs) {
    if (!cs->dst_ports.empty() && !cs->dst_ports.contains(flow.responder_port) &&
        !cs->dst_ports.contains(flow.initiator_port)) {
      continue;
    }
    const bool filter_ok = std::any_of(flow.packet_indices.begin(), flow.packet_indices.end(),
                                       [&](std::size_t idx) { return eval_filter(cs->filter, packets[idx]); });
    if (!filter_ok) continue;
    std::vector<std::string> refs;
    std::size_t matched = 0;
    for (const auto& pat : cs->patterns) {
      std::string where;
      if (auto off = pattern_hit(pat, flow, packets, streams, cs->filter, where)) {
        ++matched;
        refs.push_back(where + "@" + std::to_string(*off));
      } else if (cs->sig.match_mode == MatchMode::All) {
        break;
      }
    }
    const bool ok = cs->patterns.empty() ||
                    (cs->sig.match_mode == MatchMode::All ? matched == cs->patterns.size() : matched > 0);
    if (!ok) continue;
    AttackEvent ev;
    ev.category = cs->sig.category;
    ev.signature_id = cs->sig.id;
    ev.cve_id = cs->sig.cve_id;
    ev.sensor_id = flow.sensor_id;
    ev.src_ip = flow.initiator_ip;
    ev.ts_start = flow.first_ts;
    ev.ts_end = flow.last_ts;
    ev.service = cs->sig.service ? cs->sig.service : service_for_port(flow.responder_port);
    ev.evidence.push_back(flow_ref(flow));
    ev.evidence.insert(ev.evidence.end(), refs.begin(), refs.end());
    for (const auto& [k, v] : cs->sig.attributes) ev.attributes[k] = v;
    out.push_back(std::move(ev));
  }
  return out;
}

}  // namespace

std::vector<AttackEvent> classify_network(std::span<const FlowRecord> flows, std::span<const PacketRecord> packets,
                                          const StreamTable& streams, const SignatureDb& db, unsigned workers) {
  const auto sigs = db.by_kind(SignatureKind::Network);
  std::vector<std::vector<AttackEvent>> slots(flows.size());
  static const std::optional<StreamPair> kNone;
  parallel_for(flows.size(), workers, [&](std::size_t i) {
    slots[i] = match_flow(flows[i], packets, i < streams.size() ? streams[i] : kNone, sigs);
  });
  std::vector<AttackEvent> out;
  for (auto& s : slots) {
    for (auto& ev : s) {
      assign_event_id(ev);
      out.push_back(std::move(ev));
    }
  }
  sort_events(out);
  return out;
}

SessionIndex::SessionIndex(std::span<const LogEvent> events) {
  for (const auto& ev : events) {
    if (ev.category != LogCategory::LoginSuccess || !ev.src_ip) continue;
    by_day_[{ev.sensor_id, day_index(ev.ts)}].push_back({ev.ts, ev.actor.value_or(""), *ev.src_ip});
  }
  for (auto& [key, logins] : by_day_) {
    std::stable_sort(logins.begin(), logins.end(), [](const Login& a, const Login& b) { return a.ts < b.ts; });
  }
}

std::optional<Ipv4> SessionIndex::lookup(std::string_view sensor, Micros ts,
                                         const std::optional<std::string>& actor) const {
  auto it = by_day_.find(std::make_pair(std::string(sensor), day_index(ts)));
  if (it == by_day_.end()) return std::nullopt;
  const auto& logins = it->second;
  auto end = std::upper_bound(logins.begin(), logins.end(), ts, [](Micros t, const Login& l) { return t < l.ts; });
  for (auto rit = std::make_reverse_iterator(end); rit != logins.rend(); ++rit) {
    if (!actor || rit->actor == *actor) return rit->ip;
  }
  return std::nullopt;
}

std::vector<AttackEvent> detect_logins(std::span<const LogEvent> events) {
  std::vector<AttackEvent> out;
  for (const auto& ev : events) {
    if (ev.category != LogCategory::LoginSuccess || !ev.src_ip) continue;
    AttackEvent a;
    a.category = AttackCategory::LoginSuccess;
    a.sensor_id = ev.sensor_id;
    a.src_ip = *ev.src_ip;
    a.ts_start = a.ts_end = ev.ts;
    a.service = ev.service;
    a.evidence.push_back(ev.evidence());
    if (ev.actor) a.attributes["user"] = *ev.actor;
    assign_event_id(a);
    out.push_back(std::move(a));
  }
  sort_events(out);
  return out;
}

namespace {

struct AttemptKey {
  std::string sensor;
  std::uint32_t ip;
  std::string service;
  std::int64_t second;

  auto operator<=>(const AttemptKey&) const = default;
};

struct AttemptBucket {
  std::uint64_t flows = 0;
  std::uint64_t logs = 0;
  Micros first = 0;
  Micros last = 0;
  std::vector<std::string> evidence;

  void touch(Micros ts) {
    if (flows + logs == 0) {
      first = last = ts;
    } else {
      first = std::min(first, ts);
      last = std::max(last, ts);
    }
  }
  std::uint64_t attempts() const { return std::max(flows, logs); }
};

}  // namespace

BruteForceResult detect_bruteforce(std::span<const FlowRecord> flows, std::span<const LogEvent> events,
                                   const BruteForceParams& params) {
  std::map<AttemptKey, AttemptBucket> buckets;
  for (const auto& f : flows) {
    if (f.ip_proto != IpProto::Tcp || !(f.flag_union & tcp_flag::kSyn)) continue;
    if (f.responder_port != 22 && f.responder_port != 23) continue;
    auto& b = buckets[{f.sensor_id, f.initiator_ip.value, f.responder_port == 22 ? "SSH" : "TELNET",
                       second_index(f.first_ts)}];
    b.touch(f.first_ts);
    ++b.flows;
    b.evidence.push_back(flow_ref(f));
  }
  for (const auto& ev : events) {
    if (ev.category != LogCategory::LoginFailure || !ev.src_ip || !ev.service) continue;
    auto& b = buckets[{ev.sensor_id, ev.src_ip->value, *ev.service, second_index(ev.ts)}];
    b.touch(ev.ts);
    ++b.logs;
    b.evidence.push_back(ev.evidence());
  }

  BruteForceResult result;
  std::set<std::uint32_t> ssh;
  std::set<std::uint32_t> telnet;
  const std::int64_t window_s = std::max<std::int64_t>(1, params.window / kMicrosPerSecond);

  auto it = buckets.begin();
  while (it != buckets.end()) {
    // One (sensor, ip, service) group; buckets are ordered by second within it.
    auto group_end = it;
    while (group_end != buckets.end() && group_end->first.sensor == it->first.sensor &&
           group_end->first.ip == it->first.ip && group_end->first.service == it->first.service) {
      ++group_end;
    }
    const std::string& service = it->first.service;
    if (service == "SSH") ssh.insert(it->first.ip);
    if (service == "TELNET") telnet.insert(it->first.ip);

    std::vector<std::pair<const AttemptKey*, const AttemptBucket*>> items;
    for (auto g = it; g != group_end; ++g) {
      items.emplace_back(&g->first, &g->second);
      result.attempts[service] += g->second.attempts();
      result.daily[{day_index(g->second.first), service}] += g->second.attempts();
    }
    std::size_t start = 0;
    while (start < items.size()) {
      std::size_t end = start + 1;
      while (end < items.size() && items[end].first->second - items[end - 1].first->second <= window_s) ++end;
      std::uint64_t total = 0;
      std::uint64_t peak = 0;
      std::uint64_t running = 0;
      std::size_t lo = start;
      for (std::size_t hi = start; hi < end; ++hi) {
        running += items[hi].second->attempts();
        while (items[hi].first->second - items[lo].first->second >= window_s) {
          running -= items[lo].second->attempts();
          ++lo;
        }
        peak = std::max(peak, running);
        total += items[hi].second->attempts();
      }
      if (peak >= params.threshold) {
        AttackEvent ev;
        ev.category = AttackCategory::BruteForce;
        ev.sensor_id = it->first.sensor;
        ev.src_ip = Ipv4{it->first.ip};
        ev.service = service;
        ev.ts_start = items[start].second->first;
        ev.ts_end = items[end - 1].second->last;
        for (std::size_t k = start; k < end; ++k) {
          const auto& e = items[k].second->evidence;
          ev.evidence.insert(ev.evidence.end(), e.begin(), e.end());
        }
        ev.attributes["attempts"] = std::to_string(total);
        ev.attributes["peak_window_attempts"] = std::to_string(peak);
        assign_event_id(ev);
        result.events.push_back(std::move(ev));
      }
      start = end;
    }
    it = group_end;
  }
  std::vector<std::uint32_t> both;
  std::set_intersection(ssh.begin(), ssh.end(), telnet.begin(), telnet.end(), std::back_inserter(both));
  result.ssh_ips = ssh.size();
  result.telnet_ips = telnet.size();
  result.both_ips = both.size();
  const std::size_t uni = ssh.size() + telnet.size() - both.size();
  result.ip_overlap = uni == 0 ? 0.0 : static_cast<double>(both.size()) / static_cast<double>(uni);
  sort_events(result.events);
  return result;
}

bool is_mirai_probe(const PacketRecord& p) {
  return p.ip_proto == IpProto::Tcp && p.has(tcp_flag::kSyn) && !p.has(tcp_flag::kAck) &&
         (p.dst_port == 23 || p.dst_port == 2323) && p.tcp_seq == p.dst_ip.value;
}

std::vector<AttackEvent> detect_mirai(std::span<const PacketRecord> packets) {
  struct Acc {
    Micros first = 0;
    Micros last = 0;
    std::uint64_t probes = 0;
    std::vector<std::string> evidence;
  };
  std::map<std::tuple<std::string, std::uint32_t, std::int64_t>, Acc> groups;
  for (const auto& p : packets) {
    if (!is_mirai_probe(p)) continue;
    auto& a = groups[{p.sensor_id, p.src_ip.value, day_index(p.ts)}];
    if (a.probes == 0) {
      a.first = a.last = p.ts;
    } else {
      a.first = std::min(a.first, p.ts);
      a.last = std::max(a.last, p.ts);
    }
    ++a.probes;
    if (a.evidence.size() < 4) {
      a.evidence.push_back("packet:" + p.sensor_id + "@" + std::to_string(p.ts) + ":" + p.src_ip.to_string() + ":" +
                           std::to_string(p.src_port) + ">" + p.dst_ip.to_string() + ":" + std::to_string(p.dst_port));
    }
  }
  std::vector<AttackEvent> out;
  for (auto& [key, a] : groups) {
    AttackEvent ev;
    ev.category = AttackCategory::MiraiScan;
    ev.sensor_id = std::get<0>(key);
    ev.src_ip = Ipv4{std::get<1>(key)};
    ev.ts_start = a.first;
    ev.ts_end = a.last;
    ev.service = "TELNET";
    std::sort(a.evidence.begin(), a.evidence.end());
    ev.evidence = std::move(a.evidence);
    ev.attributes["probes"] = std::to_string(a.probes);
    assign_event_id(ev);
    out.push_back(std::move(ev));
  }
  sort_events(out);
  return out;
}

std::vector<AttackEvent> detect_tunnels(std::span<const FlowRecord> flows, const StreamTable& streams,
                                        std::span<const LogEvent> events, Micros merge_window) {
  std::vector<AttackEvent> wire;
  for (std::size_t i = 0; i < flows.size() && i < streams.size(); ++i) {
    const FlowRecord& f = flows[i];
    if (!streams[i] || (f.responder_port != 1723 && f.initiator_port != 1723)) continue;
    const auto fwd = pptp::parse_control_messages(streams[i]->fwd.bytes);
    const auto rev = pptp::parse_control_messages(streams[i]->rev.bytes);
    auto has = [](const std::vector<pptp::ControlMessage>& msgs, std::uint16_t type, bool need_ok) {
      return std::any_of(msgs.begin(), msgs.end(), [&](const pptp::ControlMessage& m) {
        return m.type == type && (!need_ok || m.result == 1);
      });
    };
    std::optional<Ipv4> endpoint;
    if (has(fwd, pptp::kStartControlRequest, false) && has(rev, pptp::kStartControlReply, true)) {
      endpoint = f.initiator_ip;
    } else if (has(rev, pptp::kStartControlRequest, false) && has(fwd, pptp::kStartControlReply, true)) {
      endpoint = f.responder_ip;
    }
    if (!endpoint) continue;
    AttackEvent ev;
    ev.category = AttackCategory::TunnelEstablished;
    ev.sensor_id = f.sensor_id;
    ev.src_ip = *endpoint;
    ev.tunnel_endpoint = *endpoint;
    ev.service = "PPTP";
    ev.ts_start = f.first_ts;
    ev.ts_end = f.last_ts;
    ev.evidence.push_back(flow_ref(f));
    ev.attributes["source"] = "wire";
    wire.push_back(std::move(ev));
  }
  std::sort(wire.begin(), wire.end(), [](const AttackEvent& a, const AttackEvent& b) {
    return std::tie(a.ts_start, a.evidence.front()) < std::tie(b.ts_start, b.evidence.front());
  });
  std::vector<bool> merged(wire.size(), false);

  std::vector<const LogEvent*> logs;
  for (const auto& ev : events) {
    if (ev.category == LogCategory::TunnelEstablished && ev.peer_ip && ev.service &&
        (*ev.service == "PPTP" || *ev.service == "SSTP")) {
      logs.push_back(&ev);
    }
  }
  std::stable_sort(logs.begin(), logs.end(), [](const LogEvent* a, const LogEvent* b) {
    return std::tie(a->sensor_id, a->ts, a->file, a->line) < std::tie(b->sensor_id, b->ts, b->file, b->line);
  });

  std::vector<AttackEvent> out;
  for (const LogEvent* lg : logs) {
    std::optional<std::size_t> best;
    Micros best_gap = 0;
    for (std::size_t k = 0; k < wire.size(); ++k) {
      const auto& w = wire[k];
      if (merged[k] || w.sensor_id != lg->sensor_id || *w.service != *lg->service || *w.tunnel_endpoint != *lg->peer_ip) {
        continue;
      }
      const Micros gap = w.ts_start > lg->ts ? w.ts_start - lg->ts : lg->ts - w.ts_start;
      if (gap > merge_window) continue;
      if (!best || gap < best_gap) {
        best = k;
        best_gap = gap;
      }
    }
    if (best) {
      auto& w = wire[*best];
      merged[*best] = true;
      w.ts_start = std::min(w.ts_start, lg->ts);
      w.ts_end = std::max(w.ts_end, lg->ts);
      w.evidence.push_back(lg->evidence());
      w.attributes["source"] = "wire+log";
      continue;
    }
    AttackEvent ev;
    ev.category = AttackCategory::TunnelEstablished;
    ev.sensor_id = lg->sensor_id;
    ev.src_ip = *lg->peer_ip;
    ev.tunnel_endpoint = *lg->peer_ip;
    ev.service = *lg->service;
    ev.ts_start = ev.ts_end = lg->ts;
    ev.evidence.push_back(lg->evidence());
    ev.attributes["source"] = "log";
    out.push_back(std::move(ev));
  }
  for (auto& w : wire) out.push_back(std::move(w));
  for (auto& ev : out) assign_event_id(ev);
  sort_events(out);
  return out;
}

std::vector<ScriptRecord> scripts_from_logs(std::span<const LogEvent> events, const SessionIndex& sessions) {
  std::vector<ScriptRecord> out;
  for (const auto& ev : events) {
    if (ev.category != LogCategory::ScriptScheduled) continue;
    ScriptRecord r = make_script_record(ev.ts, ev.sensor_id, ScriptSource::Log, ev.detail.value_or(""));
    r.actor = ev.actor;
    r.src_ip = sessions.lookup(ev.sensor_id, ev.ts, ev.actor).value_or(Ipv4{});
    r.evidence = ev.evidence();
    out.push_back(std::move(r));
  }
  return out;
}

std::string script_from_stream(std::string_view text) {
  std::string body;
  for (auto raw : split(text, '\n')) {
    const auto line = trim(raw);
    if (line.empty() || line.front() != '/') continue;
    if (extract_script_actions(line).empty()) continue;
    if (!body.empty()) body += "; ";
    body.append(line);
  }
  return body;
}

std::vector<ScriptRecord> scripts_from_streams(std::span<const FlowRecord> flows, const StreamTable& streams,
                                               std::span<const ScriptRecord> logged) {
  std::set<std::tuple<std::string, std::int64_t, std::string>> seen;
  for (const auto& s : logged) seen.emplace(s.sensor_id, day_index(s.ts), s.body);
  std::vector<ScriptRecord> out;
  for (std::size_t i = 0; i < flows.size() && i < streams.size(); ++i) {
    if (!streams[i]) continue;
    std::string body = script_from_stream(streams[i]->fwd.text());
    if (body.empty()) continue;
    const FlowRecord& f = flows[i];
    if (seen.contains({f.sensor_id, day_index(f.first_ts), body})) continue;
    ScriptRecord r = make_script_record(f.first_ts, f.sensor_id, ScriptSource::Network, std::move(body));
    r.src_ip = f.initiator_ip;
    r.evidence = "stream:" + f.flow_id + ":fwd";
    out.push_back(std::move(r));
  }
  return out;
}

bool is_miner_script(const ScriptRecord& s) {
  return s.actions.contains("/ip proxy") && s.body.find("/ip firewall nat") != std::string::npos &&
         s.body.find("action=redirect") != std::string::npos && s.body.find(kMinerMarker) != std::string::npos;
}

std::optional<std::string> dns_resolver(const ScriptRecord& s) {
  if (!s.actions.contains("/ip dns")) return std::nullopt;
  std::size_t at = s.body.find("/ip dns");
  while (at != std::string::npos) {
    const std::size_t stmt_end = s.body.find(';', at);
    const std::string_view stmt = std::string_view(s.body).substr(at, stmt_end == std::string::npos ? std::string::npos
                                                                                                    : stmt_end - at);
    if (auto k = stmt.find("servers="); k != std::string_view::npos) {
      std::string_view v = stmt.substr(k + 8);
      if (!v.empty() && v.front() == '"') {
        v.remove_prefix(1);
        v = v.substr(0, v.find('"'));
      } else {
        v = v.substr(0, v.find_first_of(" \t"));
      }
      if (!v.empty()) return std::string(v);
    }
    at = s.body.find("/ip dns", at + 1);
  }
  return std::nullopt;
}

namespace {

std::string join_actions(const ActionCounts& actions) {
  std::string out;
  for (const auto& [k, v] : actions) {
    if (!out.empty()) out += ';';
    out += k + "=" + std::to_string(v);
  }
  return out;
}

std::string_view source_label(ScriptSource s) { return s == ScriptSource::Log ? "log" : "network"; }

}  // namespace

std::vector<AttackEvent> detect_script_attacks(std::span<const ScriptRecord> scripts, std::span<const FlowRecord> flows,
                                               const StreamTable& streams, std::span<const LogEvent> events,
                                               const SessionIndex& sessions) {
  std::vector<AttackEvent> out;
  struct DnsAcc {
    AttackEvent ev;
    bool from_script = false;
    bool from_log = false;
  };
  std::map<std::tuple<std::string, std::uint32_t, std::int64_t>, DnsAcc> dns;
  auto add_dns = [&](const std::string& sensor, Ipv4 src, Micros ts, const std::string& evidence,
                     const std::optional<std::string>& resolver, bool from_script) {
    auto [it, fresh] = dns.try_emplace({sensor, src.value, day_index(ts)});
    DnsAcc& acc = it->second;
    if (fresh) {
      acc.ev.category = AttackCategory::DnsChanger;
      acc.ev.sensor_id = sensor;
      acc.ev.src_ip = src;
      acc.ev.ts_start = acc.ev.ts_end = ts;
    }
    acc.ev.ts_start = std::min(acc.ev.ts_start, ts);
    acc.ev.ts_end = std::max(acc.ev.ts_end, ts);
    acc.ev.evidence.push_back(evidence);
    if (resolver && !acc.ev.attributes.contains("resolver")) acc.ev.attributes["resolver"] = *resolver;
    (from_script ? acc.from_script : acc.from_log) = true;
  };

  for (const auto& s : scripts) {
    AttackEvent ev;
    ev.category = AttackCategory::ScriptScheduled;
    ev.sensor_id = s.sensor_id;
    ev.src_ip = s.src_ip;
    ev.ts_start = ev.ts_end = s.ts;
    ev.evidence.push_back(s.evidence);
    ev.attributes["source"] = std::string(source_label(s.source));
    ev.attributes["actions"] = join_actions(s.actions);
    if (!s.fetch_urls.empty()) {
      std::string urls;
      for (const auto& u : s.fetch_urls) urls += (urls.empty() ? "" : " ") + u;
      ev.attributes["fetch_urls"] = urls;
    }
    out.push_back(ev);
    if (is_miner_script(s)) {
      AttackEvent m = ev;
      m.category = AttackCategory::MinerInjection;
      m.attributes = {{"source", std::string(source_label(s.source))}, {"marker", std::string(kMinerMarker)}};
      out.push_back(std::move(m));
    }
    if (auto r = dns_resolver(s)) add_dns(s.sensor_id, s.src_ip, s.ts, s.evidence, r, true);
  }

  for (const auto& ev : events) {
    if (ev.category != LogCategory::DnsChanged) continue;
    const Ipv4 src = ev.src_ip.value_or(sessions.lookup(ev.sensor_id, ev.ts, ev.actor).value_or(Ipv4{}));
    add_dns(ev.sensor_id, src, ev.ts, ev.evidence(), std::nullopt, false);
  }
  for (auto& [key, acc] : dns) {
    acc.ev.attributes["source"] = acc.from_script && acc.from_log ? "script+log" : acc.from_script ? "script" : "log";
    out.push_back(std::move(acc.ev));
  }

  for (std::size_t i = 0; i < flows.size() && i < streams.size(); ++i) {
    if (!streams[i]) continue;
    const auto text = streams[i]->fwd.text();
    if (text.find(kMinerMarker) == std::string_view::npos) continue;
    if (!script_from_stream(text).empty()) continue;
    const FlowRecord& f = flows[i];
    AttackEvent m;
    m.category = AttackCategory::MinerInjection;
    m.sensor_id = f.sensor_id;
    m.src_ip = f.initiator_ip;
    m.ts_start = f.first_ts;
    m.ts_end = f.last_ts;
    m.service = service_for_port(f.responder_port);
    m.evidence.push_back(flow_ref(f));
    m.attributes = {{"source", "network"}, {"marker", std::string(kMinerMarker)}};
    out.push_back(std::move(m));
  }
  for (auto& ev : out) assign_event_id(ev);
  sort_events(out);
  return out;
}

std::vector<AttackEvent> detect_log_signatures(std::span<const LogEvent> events, const SignatureDb& db,
                                               const SessionIndex& sessions) {
  const auto sigs = db.by_kind(SignatureKind::Log);
  std::vector<AttackEvent> out;
  if (sigs.empty()) return out;
  for (const auto& ev : events) {
    for (const CompiledSignature* cs : sigs) {
      if (!cs->log_re->full_match(ev.message)) continue;
      AttackEvent a;
      a.category = cs->sig.category;
      a.signature_id = cs->sig.id;
      a.cve_id = cs->sig.cve_id;
      a.sensor_id = ev.sensor_id;
      a.src_ip = ev.src_ip.value_or(sessions.lookup(ev.sensor_id, ev.ts, ev.actor).value_or(Ipv4{}));
      a.ts_start = a.ts_end = ev.ts;
      a.service = cs->sig.service ? cs->sig.service : ev.service;
      a.evidence.push_back(ev.evidence());
      for (const auto& [k, v] : cs->sig.attributes) a.attributes[k] = v;
      assign_event_id(a);
      out.push_back(std::move(a));
    }
  }
  sort_events(out);
  return out;
}

ClassifyResult classify_all(std::span<const PacketRecord> packets, std::span<const FlowRecord> flows,
                            const StreamTable& streams, std::span<const LogEvent> logs, const SignatureDb& db,
                            const ClassifyParams& params) {
  ClassifyResult result;
  const SessionIndex sessions(logs);
  auto append = [&](std::vector<AttackEvent>&& part) {
    result.events.insert(result.events.end(), std::make_move_iterator(part.begin()),
                         std::make_move_iterator(part.end()));
  };
  append(classify_network(flows, packets, streams, db, params.workers));
  append(detect_logins(logs));
  result.bruteforce = detect_bruteforce(flows, logs, params.bruteforce);
  append(std::vector<AttackEvent>(result.bruteforce.events));
  append(detect_mirai(packets));
  append(detect_tunnels(flows, streams, logs, params.tunnel_merge_window));

  result.scripts = scripts_from_logs(logs, sessions);
  auto wire_scripts = scripts_from_streams(flows, streams, result.scripts);
  result.scripts.insert(result.scripts.end(), std::make_move_iterator(wire_scripts.begin()),
                        std::make_move_iterator(wire_scripts.end()));
  append(detect_script_attacks(result.scripts, flows, streams, logs, sessions));
  append(detect_log_signatures(logs, db, sessions));
  sort_events(result.events);
  return result;
}

}  // namespace tiktriage
