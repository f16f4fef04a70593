#include <fcntl.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "filter_oracle.hpp"
#include "ground_truth.hpp"
#include "support.hpp"
#include "tiktriage/analytics.hpp"
#include "tiktriage/classify.hpp"
#include "tiktriage/filter.hpp"
#include "tiktriage/flow.hpp"
#include "tiktriage/landscape.hpp"
#include "tiktriage/pipeline.hpp"
#include "tiktriage/signature.hpp"
#include "tiktriage/synth.hpp"

using namespace tiktriage;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ScenarioConfig all_scenarios_config() {
  ScenarioConfig c;
  c.seed = 20190725;
  c.duration_days = 12;
  return c;
}

RunConfig classify_config(const fs::path& corpus, const fs::path& out, unsigned workers) {
  RunConfig rc;
  rc.captures = corpus / "captures";
  rc.logs = corpus / "logs";
  rc.out = out;
  rc.workers = workers;
  return rc;
}

Outcome detector_exactness(const tt_test::TempDir& scratch) {
  Outcome o;
  const auto gen = generate_corpus(all_scenarios_config(), scratch / "c1");
  const auto& m = gen.manifest;
  o.require(m.packet_count >= 25000 && m.packet_count <= 100000, "packet count " + std::to_string(m.packet_count));
  o.require(m.log_lines >= 10000 && m.log_lines <= 40000, "log lines " + std::to_string(m.log_lines));
  std::set<std::string> scenarios;
  for (const auto& e : m.events) scenarios.insert(e.scenario);
  const auto t0 = std::chrono::steady_clock::now();
  Analysis a;
  std::string error;
  const int code = run_classify(classify_config(scratch / "c1", scratch / "o1", 1), &error, &a);
  const double elapsed = seconds_since(t0);
  o.require(code == kExitOk, "exit " + std::to_string(code) + " " + error);
  o.require(elapsed < 30.0, "runtime " + std::to_string(elapsed) + " s");
  const auto scores = tt_test::score_events(m.events, a.classified.events);
  std::size_t categories = 0;
  for (const auto& [cat, s] : scores) {
    ++categories;
    o.require(s.precision() == 1.0 && s.recall() == 1.0,
              std::string(to_string(cat)) + " expected " + std::to_string(s.expected) + " detected " +
                  std::to_string(s.detected) + " matched " + std::to_string(s.matched));
  }
  o.require(categories >= 8, "only " + std::to_string(categories) + " categories present");
  o.require(a.campaigns.size() == m.campaigns.size(), "campaign count");
  if (o.pass) {
    o.detail << m.packet_count << " packets, " << m.log_lines << " log lines, " << m.events.size() << " events, "
             << scenarios.size() << " labelled scenarios, " << categories << " categories at P=R=1.0, classify "
             << elapsed << " s";
  }
  return o;
}

Outcome filter_oracle() {
  Outcome o;
  Rng rng(0xF17E5);
  std::size_t disagreements = 0;
  std::size_t matched = 0;
  for (int i = 0; i < 100000; ++i) {
    const auto ref = tt_test::random_ref(rng, 0);
    const std::string text = tt_test::render_ref(*ref, rng);
    const auto p = tt_test::random_filter_packet(rng);
    bool got = false;
    try {
      got = eval_filter(parse_filter(text), p);
    } catch (const std::exception&) {
      ++disagreements;
      continue;
    }
    const bool want = tt_test::ref_eval(*ref, p);
    disagreements += got != want;
    matched += want;
  }
  std::size_t round_trip_failures = 0;
  for (int i = 0; i < 10000; ++i) {
    FilterAst ast;
    ast.set_root(tt_test::random_ast(ast, rng, 0));
    const std::string text = to_string(ast);
    try {
      const FilterAst back = parse_filter(text);
      round_trip_failures += !structurally_equal(ast, back) || to_string(back) != text;
    } catch (const std::exception&) {
      ++round_trip_failures;
    }
  }
  o.require(disagreements == 0, std::to_string(disagreements) + " of 100000 pairs disagree");
  o.require(round_trip_failures == 0, std::to_string(round_trip_failures) + " of 10000 round trips fail");
  if (o.pass) o.detail << "100000 pairs agree (" << matched << " matching), 10000 round trips exact";
  return o;
}

struct PublishedRow {
  const char* key;
  std::uint64_t count;
  const char* percent;
};

// Published top-10 rows for the device landscape.
constexpr PublishedRow kPublishedPorts[] = {
    {"2000", 3769843, "58.1"}, {"1723", 1265191, "19.5"}, {"80", 410289, "6.3"}, {"21", 311952, "4.8"},
    {"23", 164330, "2.5"},     {"8080", 139277, "2.1"},   {"161", 91453, "1.4"}, {"8888", 41233, "0.6"},
    {"81", 36292, "0.6"},      {"22", 28705, "0.4"},
};
constexpr PublishedRow kPublishedCountries[] = {
    {"BRA", 759770, "16.0"}, {"CHN", 715325, "15.1"}, {"USA", 272470, "5.7"}, {"RUS", 260553, "5.5"},
    {"IDN", 239598, "5.1"},  {"ITA", 207229, "4.4"},  {"IRN", 197756, "4.2"}, {"IND", 153757, "3.2"},
    {"THA", 137036, "2.9"},  {"ZAF", 134124, "2.8"},
};

Outcome landscape_fidelity() {
  Outcome o;
  const auto fx = landscape_fixture(1);
  LandscapeStore store;
  emit_landscape_fixture(fx, 42, [&](std::int64_t day, Ipv4 ip, std::uint16_t port, std::string_view country) {
    store.add(day, ip, port, country);
  });
  const auto ports = store.top_ports(10);
  const auto countries = store.top_countries(10);
  auto check = [&](const std::vector<RankRow>& got, const PublishedRow (&want)[10], const char* table) {
    if (got.size() != 10) {
      o.require(false, std::string(table) + " has " + std::to_string(got.size()) + " rows");
      return;
    }
    for (std::size_t i = 0; i < 10; ++i) {
      const std::string pct = format_permille(got[i].permille);
      o.require(got[i].key == want[i].key && got[i].count == want[i].count && pct == want[i].percent,
                std::string(table) + " row " + std::to_string(i + 1) + " = " + got[i].key + "," +
                    std::to_string(got[i].count) + "," + pct);
    }
  };
  check(ports, kPublishedPorts, "ports");
  check(countries, kPublishedCountries, "countries");
  const std::string csv = ports_csv(ports);
  o.require(csv.find("\n2000,3769843,58.1\n") != std::string::npos, "ports.csv first row");
  const auto series = store.cumulative_series();
  std::uint64_t prev_r = 0;
  std::uint64_t prev_i = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& row = series[i];
    o.require(row.cumulative_records >= prev_r && row.cumulative_ips >= prev_i, "series decreases at row " + std::to_string(i));
    o.require(row.new_records == row.cumulative_records - prev_r && row.new_ips == row.cumulative_ips - prev_i,
              "new counts differ from first differences at row " + std::to_string(i));
    prev_r = row.cumulative_records;
    prev_i = row.cumulative_ips;
  }
  o.require(!series.empty() && series.back().cumulative_records == store.distinct_records() &&
                series.back().cumulative_ips == store.distinct_ips(),
            "series end differs from distinct totals");
  o.require(store.distinct_records() == fx.distinct_records && store.distinct_ips() == fx.distinct_ips,
            "distinct totals differ from fixture");
  if (o.pass) {
    o.detail << "20 published rows exact, " << store.distinct_records() << " records, " << store.distinct_ips()
             << " addresses over " << series.size() << " days";
  }
  return o;
}

const SignatureDb& bundled_db() {
  static const SignatureDb db = load_signatures(bundled_signature_dir()).db;
  return db;
}

std::vector<AttackEvent> tunnel_events(std::uint8_t result_base, bool vary) {
  static const char* kSensors[] = {"aus", "bra", "hkg", "ind", "nld", "usa"};
  const Ipv4 sensor_ip(198, 51, 100, 10);
  std::vector<PacketRecord> packets;
  for (int i = 0; i < 1000; ++i) {
    const Ipv4 client(0xCB000000u | static_cast<std::uint32_t>(i % 37) << 8 | static_cast<std::uint32_t>(i % 211));
    const std::uint8_t result = vary ? static_cast<std::uint8_t>(i % 2 ? 0 : 2 + i % 6) : result_base;
    tt_test::Conversation c(kSensors[i % 6], client, static_cast<std::uint16_t>(10000 + i), sensor_ip, 1723,
                            tt_test::kT0 + static_cast<Micros>(i) * 700 * tt_test::kSec);
    c.handshake().client(tt_test::pptp_message(1, 0)).server(tt_test::pptp_message(2, result)).fin();
    c.append_to(packets);
  }
  const auto flows = assemble_flows(packets);
  const auto streams = reassemble_all(flows, packets);
  auto r = classify_all(packets, flows, streams, {}, bundled_db());
  std::vector<AttackEvent> out;
  for (auto& e : r.events) {
    if (e.category == AttackCategory::TunnelEstablished) out.push_back(std::move(e));
  }
  return out;
}

Outcome tunnel_correctness() {
  Outcome o;
  const auto ok = tunnel_events(1, false);
  const auto rejected = tunnel_events(0, true);
  o.require(ok.size() == 1000, std::to_string(ok.size()) + " events for 1000 accepted handshakes");
  o.require(rejected.empty(), std::to_string(rejected.size()) + " events for 1000 refused handshakes");
  const auto heat = endpoint_heatmap(ok);
  o.require(heat.total == ok.size(), "heatmap total " + std::to_string(heat.total));
  std::uint64_t cells = 0;
  for (const auto& [k, n] : heat.cells) cells += n;
  o.require(cells == ok.size(), "heatmap cells sum " + std::to_string(cells));
  if (o.pass) o.detail << "1000 -> " << ok.size() << ", refused -> 0, heatmap total " << heat.total;
  return o;
}

Outcome bruteforce_and_mirai(const tt_test::TempDir& scratch) {
  Outcome o;
  ScenarioConfig cfg;
  cfg.seed = 39;
  cfg.sensors = {"nld"};
  cfg.mix = {{"bruteforce_ssh", 139.0}, {"bruteforce_telnet", 139.0}};
  cfg.bruteforce_overlap = 0.39;
  generate_corpus(cfg, scratch / "c5");
  Analysis a;
  std::string error;
  const int code = run_classify(classify_config(scratch / "c5", scratch / "o5", 1), &error, &a);
  o.require(code == kExitOk, "exit " + std::to_string(code) + " " + error);
  const auto& bf = a.classified.bruteforce;
  // 139 + 139 - both = union and both / union = 0.39 give both = 78, union = 200.
  o.require(bf.ssh_ips == 139 && bf.telnet_ips == 139 && bf.both_ips == 78,
            "sets " + std::to_string(bf.ssh_ips) + "/" + std::to_string(bf.telnet_ips) + "/" + std::to_string(bf.both_ips));
  o.require(bf.ip_overlap == 0.39, "overlap " + std::to_string(bf.ip_overlap));
  const std::string summary = read_text_file(scratch / "o5" / "summary.json");
  o.require(summary.find("\"ip_overlap\": 0.39") != std::string::npos, "summary.json overlap");

  Rng rng(0x5EED);
  std::vector<PacketRecord> syns;
  syns.reserve(1000000);
  std::size_t probe_hits = 0;
  for (int i = 0; i < 1000000; ++i) {
    auto p = tt_test::tcp("nld", Ipv4(static_cast<std::uint32_t>(rng.next())), static_cast<std::uint16_t>(1024 + rng.below(60000)),
                          Ipv4(static_cast<std::uint32_t>(rng.next())), rng.chance(0.5) ? 23 : 2323,
                          tt_test::kT0 + static_cast<Micros>(rng.below(86400)) * tt_test::kSec, tcp_flag::kSyn,
                          static_cast<std::uint32_t>(rng.next()));
    probe_hits += is_mirai_probe(p);
    syns.push_back(std::move(p));
  }
  const auto flows = assemble_flows(syns);
  const auto result = classify_all(syns, flows, StreamTable(flows.size()), {}, bundled_db());
  std::size_t mirai_events = 0;
  for (const auto& e : result.events) mirai_events += e.category == AttackCategory::MiraiScan;
  o.require(probe_hits <= 2, std::to_string(probe_hits) + " fingerprint hits");
  o.require(mirai_events <= 2, std::to_string(mirai_events) + " MIRAI_SCAN events");
  if (o.pass) {
    o.detail << "SSH " << bf.ssh_ips << ", Telnet " << bf.telnet_ips << ", both " << bf.both_ips << ", overlap "
             << bf.ip_overlap << "; " << probe_hits << " fingerprint hits in 1000000 random SYNs";
  }
  return o;
}

Outcome determinism(const tt_test::TempDir& scratch) {
  Outcome o;
  const fs::path corpus = scratch / "c1";
  if (!fs::exists(corpus)) generate_corpus(all_scenarios_config(), corpus);
  const unsigned workers[] = {1, 8, 1, 8};
  std::optional<std::map<std::string, std::string>> first;
  for (std::size_t i = 0; i < std::size(workers); ++i) {
    const fs::path out = scratch / ("o6-" + std::to_string(i));
    o.require(run_classify(classify_config(corpus, out, workers[i])) == kExitOk, "run " + std::to_string(i) + " failed");
    const auto snap = tt_test::snapshot(out);
    if (!first) {
      first = snap;
    } else if (snap != *first) {
      o.require(false, "run " + std::to_string(i) + " (--workers " + std::to_string(workers[i]) + ") differs");
    }
  }
  if (o.pass) o.detail << first->size() << " report files identical over 4 runs (workers 1, 8, 1, 8)";
  return o;
}

Outcome scale_sanity(const tt_test::TempDir& scratch) {
  Outcome o;
  auto cfg = all_scenarios_config();
  cfg.mix = default_mix();
  for (auto& [name, w] : cfg.mix) w *= 20;
  const auto gen = generate_corpus(cfg, scratch / "c7");
  o.require(gen.manifest.packet_count >= 1000000, "corpus has only " + std::to_string(gen.manifest.packet_count) + " packets");
  const std::string captures = (scratch / "c7" / "captures").string();
  const std::string logs = (scratch / "c7" / "logs").string();
  const std::string out = (scratch / "o7").string();
  const auto t0 = std::chrono::steady_clock::now();
  const pid_t pid = fork();
  if (pid == 0) {
    const int null = open("/dev/null", O_WRONLY);
    dup2(null, STDOUT_FILENO);
    execl(TIKTRIAGE_CLI, TIKTRIAGE_CLI, "classify", "--captures", captures.c_str(), "--logs", logs.c_str(), "--out",
          out.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  int status = 0;
  rusage usage{};
  wait4(pid, &status, 0, &usage);
  const double elapsed = seconds_since(t0);
  const double peak_mib = static_cast<double>(usage.ru_maxrss) / 1024.0;
  o.require(WIFEXITED(status) && WEXITSTATUS(status) == 0, "classify exit status " + std::to_string(status));
  o.require(elapsed < 60.0, "wall time " + std::to_string(elapsed) + " s");
  o.require(peak_mib < 1024.0, "peak RSS " + std::to_string(peak_mib) + " MiB");
  if (o.pass) {
    o.detail << gen.manifest.packet_count << " packets in " << elapsed << " s, peak RSS " << static_cast<long>(peak_mib)
             << " MiB";
  }
  return o;
}

}  // namespace

int main() {
  tt_test::TempDir scratch;
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"detector exactness", [&] { return detector_exactness(scratch); }},
      {"filter oracle equivalence", [] { return filter_oracle(); }},
      {"landscape fixture fidelity", [] { return landscape_fidelity(); }},
      {"tunnel protocol correctness", [] { return tunnel_correctness(); }},
      {"brute-force overlap and Mirai fingerprint", [&] { return bruteforce_and_mirai(scratch); }},
      {"determinism across runs and workers", [&] { return determinism(scratch); }},
      {"scale sanity", [&] { return scale_sanity(scratch); }},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << index << " " << c.name << ": " << o.detail.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
