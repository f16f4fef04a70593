#include <gtest/gtest.h>

#include <atomic>
#include <set>

#include "support.hpp"
#include "tiktriage/net.hpp"
#include "tiktriage/util.hpp"

using namespace tiktriage;

TEST(Dates, KnownEpochOffsets) {
  EXPECT_EQ(days_from_civil({1970, 1, 1}), 0);
  EXPECT_EQ(days_from_civil({2000, 3, 1}), 11017);
  EXPECT_EQ(days_from_civil({2019, 6, 1}), 18048);
  EXPECT_EQ(days_from_civil({1969, 12, 31}), -1);
  EXPECT_EQ(format_date(18102), "2019-07-25");
  EXPECT_EQ(format_datetime(18102 * kMicrosPerDay + 3723 * kMicrosPerSecond + 999), "2019-07-25 01:02:03");
  EXPECT_EQ(format_iso8601(5), "1970-01-01T00:00:00.000005Z");
}

TEST(Dates, CivilRoundTripProperty) {
  Rng rng(1);
  for (int i = 0; i < 20000; ++i) {
    const std::int64_t d = rng.between(-200000, 200000);
    EXPECT_EQ(days_from_civil(civil_from_days(d)), d);
    EXPECT_EQ(parse_date(format_date(d)).value_or(INT64_MIN), d);
  }
}

TEST(Dates, TimestampForms) {
  const Micros base = 18102 * kMicrosPerDay;
  EXPECT_EQ(parse_timestamp("2019-07-25"), base);
  EXPECT_EQ(parse_timestamp("2019-07-25 00:00:01"), base + kMicrosPerSecond);
  EXPECT_EQ(parse_timestamp("2019-07-25T00:00:01.5Z"), base + kMicrosPerSecond + 500000);
  EXPECT_FALSE(parse_timestamp("2019-02-30"));
  EXPECT_FALSE(parse_timestamp("yesterday"));
  EXPECT_EQ(day_index(-1), -1);
  EXPECT_EQ(second_index(-1), -1);
}

TEST(Hashing, FnvReferenceVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Hex, RoundTripProperty) {
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::uint8_t> b(rng.below(40));
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.below(256));
    EXPECT_EQ(hex_decode(hex_encode(b)), b);
  }
  EXPECT_FALSE(hex_decode("abc"));
  EXPECT_FALSE(hex_decode("zz"));
}

TEST(Csv, QuotingRoundTripProperty) {
  Rng rng(3);
  const std::string alphabet = "ab,\" \n";
  for (int i = 0; i < 3000; ++i) {
    std::vector<std::string> fields(1 + rng.below(4));
    std::string line;
    for (auto& f : fields) {
      const auto n = rng.below(6);
      for (std::uint64_t k = 0; k < n; ++k) {
        const char c = alphabet[rng.below(alphabet.size())];
        if (c != '\n') f.push_back(c);
      }
      if (!line.empty() || &f != &fields.front()) line += ',';
      line += csv_field(f);
    }
    EXPECT_EQ(parse_csv_line(line), fields) << line;
  }
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
}

TEST(Ipv4Parse, StrictDottedQuad) {
  EXPECT_EQ(Ipv4::parse("10.0.0.1"), Ipv4(10, 0, 0, 1));
  for (auto bad : {"", "1.2.3", "1.2.3.4.5", "256.1.1.1", "1..2.3", "1.2.3.4x", " 1.2.3.4"}) {
    EXPECT_FALSE(Ipv4::parse(bad)) << bad;
  }
  Rng rng(4);
  for (int i = 0; i < 5000; ++i) {
    const Ipv4 ip(static_cast<std::uint32_t>(rng.next()));
    EXPECT_EQ(Ipv4::parse(ip.to_string()), ip);
  }
}

TEST(CidrParse, HostBits) {
  EXPECT_FALSE(Cidr::parse("10.0.0.1/8"));
  const auto c = Cidr::parse("10.0.0.1/8", true);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->to_string(), "10.0.0.0/8");
  EXPECT_TRUE(c->contains(Ipv4(10, 255, 1, 1)));
  EXPECT_FALSE(c->contains(Ipv4(11, 0, 0, 0)));
  EXPECT_TRUE(Cidr::parse("0.0.0.0/0")->contains(Ipv4(1, 2, 3, 4)));
  EXPECT_FALSE(Cidr::parse("1.2.3.4/33"));
}

TEST(RngTest, DeterministicAndBounded) {
  Rng a(99);
  Rng b(99);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next(), b.next());
  Rng r(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const auto v = r.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
    const auto w = r.between(-3, 3);
    ASSERT_GE(w, -3);
    ASSERT_LE(w, 3);
    const double u = r.unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Parallel, EveryIndexOnce) {
  for (unsigned workers : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(1001);
    parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i].fetch_add(1); });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(Files, ListSortedByRelativePath) {
  tt_test::TempDir dir;
  write_text_file(dir / "b/2.log", "x");
  write_text_file(dir / "a/1.log", "x");
  write_text_file(dir / "a/ignore.bin", "x");
  static constexpr std::string_view kExt[] = {".log"};
  const auto files = list_files(dir.path(), kExt);
  ASSERT_EQ(files.size(), 2u);
  EXPECT_EQ(files[0].filename(), "1.log");
  EXPECT_EQ(files[1].filename(), "2.log");
}
