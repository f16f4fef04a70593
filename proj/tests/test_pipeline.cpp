#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "support.hpp"
#include "tiktriage/pipeline.hpp"
#include "tiktriage/synth.hpp"

using namespace tiktriage;
namespace fs = std::filesystem;

namespace {

ScenarioConfig corpus_config() {
  ScenarioConfig c;
  c.seed = 5;
  c.duration_days = 2;
  c.sensors = {"aus", "bra", "usa"};
  c.log_noise_per_day = 24;
  return c;
}

RunConfig run_config(const fs::path& corpus, const fs::path& out) {
  RunConfig rc;
  rc.captures = corpus / "captures";
  rc.logs = corpus / "logs";
  rc.out = out;
  return rc;
}

struct Shell {
  int code;
  std::string out;
};

Shell run_cli(const std::string& args, const tt_test::TempDir& scratch) {
  const auto log = scratch / "cli-output.txt";
  const std::string cmd = std::string(TIKTRIAGE_CLI) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text_file(log)};
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    rows.push_back(parse_csv_line(text.substr(pos, nl - pos)).value());
    pos = nl == std::string::npos ? text.size() : nl + 1;
  }
  return rows;
}

/// Every row and the TOTAL row sum consistently across sensor columns.
void expect_consistent_sensor_table(const std::string& text) {
  const auto rows = read_csv(text);
  ASSERT_GE(rows.size(), 2u);
  const std::size_t width = rows[0].size();
  std::vector<std::uint64_t> col(width, 0);
  for (std::size_t r = 1; r + 1 < rows.size(); ++r) {
    ASSERT_EQ(rows[r].size(), width);
    std::uint64_t sum = 0;
    for (std::size_t c = 1; c + 1 < width; ++c) {
      sum += std::stoull(rows[r][c]);
      col[c] += std::stoull(rows[r][c]);
    }
    EXPECT_EQ(sum, std::stoull(rows[r].back())) << rows[r][0];
  }
  const auto& total = rows.back();
  ASSERT_EQ(total[0], "TOTAL");
  for (std::size_t c = 1; c + 1 < width; ++c) EXPECT_EQ(std::stoull(total[c]), col[c]) << rows[0][c];
}

}  // namespace

TEST(Pipeline, MissingSignatureFileIsFatal) {
  tt_test::TempDir dir;
  generate_corpus(corpus_config(), dir / "corpus");
  auto rc = run_config(dir / "corpus", dir / "out");
  rc.signatures = {dir / "nowhere.rules"};
  std::string error;
  EXPECT_EQ(run_classify(rc, &error), kExitFatal);
  EXPECT_NE(error.find("nowhere.rules"), std::string::npos) << error;
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Pipeline, InvalidFlagsAreFatal) {
  tt_test::TempDir dir;
  auto rc = run_config(dir / "missing", dir / "out");
  std::string error;
  EXPECT_EQ(run_classify(rc, &error), kExitFatal);
  EXPECT_FALSE(error.empty());
  rc = run_config(dir.path(), dir / "out");
  rc.workers = 0;
  EXPECT_EQ(run_classify(rc, &error), kExitFatal);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Pipeline, CorruptCaptureIsSkippedWithWarning) {
  tt_test::TempDir dir;
  const auto gen = generate_corpus(corpus_config(), dir / "corpus");
  const auto& victim = gen.manifest.captures.front();
  write_text_file(dir / "corpus" / victim.path, "this is not a capture file at all");
  Analysis a;
  std::string error;
  EXPECT_EQ(run_classify(run_config(dir / "corpus", dir / "out"), &error, &a), kExitWarnings);
  EXPECT_EQ(a.packets, gen.manifest.packet_count - victim.packets);
  ASSERT_EQ(a.warnings.size(), 1u);
  EXPECT_NE(a.warnings[0].find(fs::path(victim.path).filename().string()), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.json"));
}

TEST(Pipeline, TruncatedCaptureKeepsCompleteRecords) {
  tt_test::TempDir dir;
  const auto gen = generate_corpus(corpus_config(), dir / "corpus");
  const auto& victim = gen.manifest.captures.front();
  auto bytes = read_binary_file(dir / "corpus" / victim.path);
  bytes.resize(bytes.size() - 3);
  write_text_file(dir / "corpus" / victim.path, std::string(bytes.begin(), bytes.end()));
  Analysis a;
  EXPECT_EQ(run_classify(run_config(dir / "corpus", dir / "out"), nullptr, &a), kExitWarnings);
  EXPECT_EQ(a.packets, gen.manifest.packet_count - 1);
}

TEST(Pipeline, ReportTablesAreConsistent) {
  tt_test::TempDir dir;
  generate_corpus(corpus_config(), dir / "corpus");
  auto rc = run_config(dir / "corpus", dir / "out");
  rc.attribution = dir / "corpus" / "attribution.csv";
  Analysis a;
  ASSERT_EQ(run_classify(rc, nullptr, &a), kExitOk);
  const auto reports = render_reports(a, rc);
  expect_consistent_sensor_table(reports.at("categories.csv"));
  const auto cats = read_csv(reports.at("categories.csv"));
  EXPECT_EQ(std::stoull(cats.back().back()), a.classified.events.size());
  const auto files = tt_test::snapshot(dir / "out");
  EXPECT_EQ(files.size(), reports.size());
  for (const auto& [name, content] : reports) EXPECT_EQ(files.at(name), content) << name;
  std::size_t lines = 0;
  for (char c : reports.at("events.jsonl")) lines += c == '\n';
  EXPECT_EQ(lines, a.classified.events.size());
}

TEST(Pipeline, ReportsIndependentOfWorkerCount) {
  tt_test::TempDir dir;
  generate_corpus(corpus_config(), dir / "corpus");
  auto one = run_config(dir / "corpus", dir / "one");
  auto many = run_config(dir / "corpus", dir / "many");
  one.workers = 1;
  many.workers = 6;
  ASSERT_EQ(run_classify(one), kExitOk);
  ASSERT_EQ(run_classify(many), kExitOk);
  EXPECT_EQ(tt_test::snapshot(dir / "one"), tt_test::snapshot(dir / "many"));
}

TEST(Cli, GenerateIsReproducible) {
  tt_test::TempDir dir;
  const std::string args = "generate --seed 3 --days 1 --sensors aus bra usa --noise 10 --out ";
  const auto a = run_cli(args + (dir / "a").string(), dir);
  const auto b = run_cli(args + (dir / "b").string(), dir);
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(b.code, 0) << b.out;
  const auto checksum = [](const std::string& out) { return out.substr(out.find("checksum")); };
  EXPECT_EQ(checksum(a.out), checksum(b.out));
  EXPECT_TRUE(fs::exists(dir / "a" / "manifest.json"));
}

TEST(Cli, UnknownScenarioListsValidNames) {
  tt_test::TempDir dir;
  const auto r = run_cli("generate --mix mirai=1 --out " + (dir / "x").string(), dir);
  EXPECT_EQ(r.code, kExitFatal);
  EXPECT_NE(r.out.find("mirai_scan"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("campaign_api_sweep"), std::string::npos) << r.out;
}

TEST(Cli, ClassifyExitCodes) {
  tt_test::TempDir dir;
  ASSERT_EQ(run_cli("generate --seed 4 --days 1 --sensors aus bra usa --noise 10 --out " + (dir / "c").string(), dir).code, 0);
  const std::string base = "classify --captures " + (dir / "c" / "captures").string() + " --logs " +
                           (dir / "c" / "logs").string() + " --workers 2";
  const auto ok = run_cli(base + " --out " + (dir / "o").string(), dir);
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_TRUE(fs::exists(dir / "o" / "events.jsonl"));
  const auto bad = run_cli(base + " --signatures " + (dir / "gone.yaml").string() + " --out " + (dir / "p").string(), dir);
  EXPECT_EQ(bad.code, kExitFatal);
  EXPECT_NE(bad.out.find("gone.yaml"), std::string::npos) << bad.out;
  EXPECT_FALSE(fs::exists(dir / "p"));
  EXPECT_EQ(run_cli("classify --bucket week --out " + (dir / "q").string(), dir).code, kExitFatal);
  EXPECT_EQ(run_cli("validate-signatures " + (dir / "gone.yaml").string(), dir).code, kExitFatal);
}

TEST(Cli, LandscapeRuns) {
  tt_test::TempDir dir;
  fs::create_directories(dir / "empty");
  EXPECT_EQ(run_cli("landscape --scans " + (dir / "empty").string() + " --out " + (dir / "o").string(), dir).code,
            kExitFatal);
  const std::string day1 =
      R"({"timestamp":"2019-06-01T00:00:00","ip_str":"192.0.2.1","port":8291,"product":"MikroTik","location":{"country_code3":"BRA"}})";
  const std::string day2 =
      R"({"timestamp":"2019-06-02T00:00:00","ip_str":"192.0.2.2","port":2000,"data":"MikroTik bandwidth-test"})";
  write_text_file(dir / "scans" / "a.json", day1 + "\n" + day2 + "\n");
  const auto r = run_cli("landscape --scans " + (dir / "scans").string() + " --out " + (dir / "o").string(), dir);
  ASSERT_EQ(r.code, 0) << r.out;
  const auto series = read_csv(read_text_file(dir / "o" / "series.csv"));
  EXPECT_EQ(series.size(), 3u);
  const auto countries = read_text_file(dir / "o" / "countries.csv");
  EXPECT_NE(countries.find("BRA,1,50.0"), std::string::npos) << countries;
  EXPECT_NE(countries.find("UNKNOWN,1,50.0"), std::string::npos) << countries;
  write_text_file(dir / "scans" / "b.json", "garbage\n");
  EXPECT_EQ(run_cli("landscape --scans " + (dir / "scans").string() + " --out " + (dir / "p").string(), dir).code,
            kExitFatal);
  EXPECT_EQ(run_cli("landscape --lax --scans " + (dir / "scans").string() + " --out " + (dir / "p").string(), dir).code,
            kExitWarnings);
}
