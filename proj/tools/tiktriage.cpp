#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

#include "tiktriage/pipeline.hpp"
#include "tiktriage/signature.hpp"
#include "tiktriage/synth.hpp"

namespace tt = tiktriage;
namespace fs = std::filesystem;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("tiktriage");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("TIKTRIAGE_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level != spdlog::level::off || std::string_view(env) == "off") spdlog::set_level(level);
  }
}

int classify(const tt::RunConfig& cfg) {
  spdlog::info("classify: captures={} logs={} workers={}", cfg.captures ? cfg.captures->string() : "-",
               cfg.logs ? cfg.logs->string() : "-", cfg.workers);
  std::string error;
  tt::Analysis a;
  const int code = tt::run_classify(cfg, &error, &a);
  if (code == tt::kExitFatal) {
    spdlog::error("{}", error);
    std::cerr << "error: " << error << "\n";
    return code;
  }
  for (const auto& w : a.warnings) spdlog::warn("{}", w);
  std::cout << "packets " << a.packets << ", flows " << a.flows.size() << ", log lines " << a.logs.size()
            << ", events " << a.classified.events.size() << "\n";
  std::cout << "reports written to " << cfg.out.string() << "\n";
  return code;
}

int landscape(const tt::LandscapeConfig& cfg) {
  std::string error;
  const int code = tt::run_landscape(cfg, &error);
  if (code == tt::kExitFatal) {
    spdlog::error("{}", error);
    std::cerr << "error: " << error << "\n";
    return code;
  }
  if (code == tt::kExitWarnings) spdlog::warn("some scan lines could not be parsed; see summary.json");
  std::cout << "reports written to " << cfg.out.string() << "\n";
  return code;
}

struct GenerateArgs {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> days;
  std::optional<std::string> start;
  std::vector<std::string> sensors;
  std::vector<std::string> mix;
  double scale = 1.0;
  std::optional<double> overlap;
  std::optional<std::size_t> noise;
  fs::path out;
  bool landscape_fixture = false;
  std::uint64_t landscape_scale = 100;
};

tt::ScenarioConfig build_scenario(const GenerateArgs& g) {
  tt::ScenarioConfig c = g.config ? tt::ScenarioConfig::parse_json(tt::read_text_file(*g.config)) : tt::ScenarioConfig{};
  if (g.seed) c.seed = *g.seed;
  if (g.days) c.duration_days = *g.days;
  if (g.start) {
    const auto d = tt::parse_date(*g.start);
    if (!d) throw tt::InvalidConfig("--start must be YYYY-MM-DD");
    c.start_day = *d;
  }
  if (!g.sensors.empty()) c.sensors = g.sensors;
  if (!g.mix.empty()) {
    c.mix.clear();
    for (const auto& item : g.mix) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw tt::InvalidConfig("--mix expects name=weight, got '" + item + "'");
      try {
        c.mix[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
      } catch (const std::exception&) {
        throw tt::InvalidConfig("--mix weight is not a number in '" + item + "'");
      }
    }
  }
  if (g.scale != 1.0) {
    if (!(g.scale > 0.0)) throw tt::InvalidConfig("--scale must be > 0");
    auto mix = c.mix.empty() ? tt::default_mix() : c.mix;
    for (auto& [name, w] : mix) w *= g.scale;
    c.mix = mix;
  }
  if (g.overlap) c.bruteforce_overlap = *g.overlap;
  if (g.noise) c.log_noise_per_day = *g.noise;
  c.validate();
  return c;
}

int generate(const GenerateArgs& g) {
  try {
    if (g.landscape_fixture) {
      const auto fx = tt::landscape_fixture(g.landscape_scale);
      tt::write_landscape_fixture(fx, g.seed.value_or(42), g.out);
      std::cout << "landscape fixture written to " << g.out.string() << " (" << fx.distinct_records << " records, "
                << fx.distinct_ips << " addresses)\n";
      return tt::kExitOk;
    }
    const auto cfg = build_scenario(g);
    const auto result = tt::generate_corpus(cfg, g.out);
    std::cout << "manifest " << result.manifest_path.string() << "\n";
    std::cout << "checksum " << result.checksum << "\n";
    spdlog::info("{} packets, {} log lines, {} events", result.manifest.packet_count, result.manifest.log_lines,
                 result.manifest.events.size());
    return tt::kExitOk;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    std::cerr << "error: " << e.what() << "\n";
    return tt::kExitFatal;
  }
}

int validate_signatures(const std::vector<fs::path>& paths) {
  int code = tt::kExitOk;
  for (const auto& path : paths) {
    try {
      const auto loaded = tt::load_signatures(path);
      for (const auto& w : loaded.warnings) std::cout << path.string() << ": warning: " << w << "\n";
      std::cout << path.string() << ": " << loaded.db.size() << " signatures ok\n";
    } catch (const std::exception& e) {
      std::cerr << path.string() << ": " << e.what() << "\n";
      code = tt::kExitFatal;
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Honeypot capture and log triage"};
  app.require_subcommand(1);

  tt::RunConfig rc;
  rc.workers = tt::default_workers();
  std::optional<fs::path> captures;
  std::optional<fs::path> logs;
  std::optional<fs::path> attribution;
  std::int64_t idle_s = 60;
  std::int64_t bf_window_s = 60;
  std::string bucket = "day";
  auto* cls = app.add_subcommand("classify", "Classify captures and logs and write reports");
  cls->add_option("--captures", captures, "Directory of capture files (<sensor>/<name>.pcap)");
  cls->add_option("--logs", logs, "Directory of log files (<sensor>/<name>.log)");
  cls->add_option("--signatures", rc.signatures, "Signature file or directory (repeatable; default: bundled)");
  cls->add_option("--attribution", attribution, "CIDR,country,asn,as_name table");
  cls->add_option("--out", rc.out, "Report directory")->required();
  cls->add_option("--idle-timeout", idle_s, "Flow idle timeout in seconds")->capture_default_str();
  cls->add_option("--bf-window", bf_window_s, "Brute-force window in seconds")->capture_default_str();
  cls->add_option("--bf-threshold", rc.bruteforce.threshold, "Attempts per window for BRUTE_FORCE")->capture_default_str();
  cls->add_option("--campaign-min-flows", rc.campaign.min_flows, "Minimum flows per campaign")->capture_default_str();
  cls->add_option("--static-port-frac", rc.campaign.static_port_frac, "Share of flows on one source port")
      ->capture_default_str();
  cls->add_option("--volume-sigma", rc.campaign.volume_sigma, "Standard deviations for volume outliers")
      ->capture_default_str();
  cls->add_option("--bucket", bucket, "Timeseries bucket")->check(CLI::IsMember({"hour", "day"}))->capture_default_str();
  cls->add_option("--workers", rc.workers, "Worker threads")->capture_default_str();
  cls->add_flag("--lax", rc.lax, "Accepted for symmetry with landscape");

  tt::LandscapeConfig lc;
  lc.workers = tt::default_workers();
  std::size_t budget_mb = 1024;
  std::optional<fs::path> overlap_ips;
  std::optional<fs::path> overlap_ref;
  auto* land = app.add_subcommand("landscape", "Aggregate banner-scan dumps into port, country and growth tables");
  land->add_option("--scans", lc.scans, "Directory of line-delimited JSON scan files")->required();
  land->add_option("--out", lc.out, "Report directory")->required();
  land->add_option("--filter", lc.filter, "Case-insensitive device substring")->capture_default_str();
  land->add_option("--top", lc.top, "Rows per ranking")->capture_default_str();
  land->add_option("--workers", lc.workers, "Parser threads")->capture_default_str();
  land->add_option("--memory-budget", budget_mb, "In-memory index budget in MiB")->capture_default_str();
  land->add_option("--overlap-ips", overlap_ips, "Address list to compare");
  land->add_option("--overlap-reference", overlap_ref, "Reference address list");
  land->add_flag("--lax", lc.lax, "Skip and count unparseable lines");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Write a synthetic corpus with its ground-truth manifest");
  gen->add_option("--config", ga.config, "Scenario config (JSON)");
  gen->add_option("--seed", ga.seed, "Random seed");
  gen->add_option("--days", ga.days, "Duration in days");
  gen->add_option("--start", ga.start, "First day (YYYY-MM-DD)");
  gen->add_option("--sensors", ga.sensors, "Sensor names");
  gen->add_option("--mix", ga.mix, "Scenario weight name=w (repeatable)");
  gen->add_option("--scale", ga.scale, "Multiplier on every weight");
  gen->add_option("--overlap", ga.overlap, "SSH/Telnet brute-force source overlap");
  gen->add_option("--noise", ga.noise, "Noise log lines per sensor and day");
  gen->add_option("--out", ga.out, "Output directory")->required();
  gen->add_flag("--landscape-fixture", ga.landscape_fixture, "Write the scan-landscape fixture instead");
  gen->add_option("--landscape-scale", ga.landscape_scale, "Divisor for the fixture counts")->capture_default_str();

  std::vector<fs::path> sig_paths;
  auto* val = app.add_subcommand("validate-signatures", "Load and validate signature files");
  val->add_option("paths", sig_paths, "Signature files or directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tt::kExitFatal;
  }

  if (*cls) {
    rc.captures = captures;
    rc.logs = logs;
    rc.attribution = attribution;
    rc.idle_timeout = idle_s * tt::kMicrosPerSecond;
    rc.bruteforce.window = bf_window_s * tt::kMicrosPerSecond;
    rc.bucket = bucket == "hour" ? tt::Bucket::Hour : tt::Bucket::Day;
    return classify(rc);
  }
  if (*land) {
    lc.memory_budget = budget_mb << 20;
    lc.overlap_ips = overlap_ips;
    lc.overlap_reference = overlap_ref;
    return landscape(lc);
  }
  if (*gen) return generate(ga);
  return validate_signatures(sig_paths);
}
