#include "tiktriage/signature.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include "tiktriage/util.hpp"

#ifndef TIKTRIAGE_DATA_DIR
#define TIKTRIAGE_DATA_DIR "data"
#endif

namespace tiktriage {

std::string_view to_string(AttackCategory c) {
  switch (c) {
    case AttackCategory::CveExploit: return "CVE_EXPLOIT";
    case AttackCategory::LoginSuccess: return "LOGIN_SUCCESS";
    case AttackCategory::BruteForce: return "BRUTE_FORCE";
    case AttackCategory::MiraiScan: return "MIRAI_SCAN";
    case AttackCategory::TunnelEstablished: return "TUNNEL_ESTABLISHED";
    case AttackCategory::ScriptScheduled: return "SCRIPT_SCHEDULED";
    case AttackCategory::MinerInjection: return "MINER_INJECTION";
    case AttackCategory::DnsChanger: return "DNS_CHANGER";
    case AttackCategory::OtherSignature: return "OTHER_SIGNATURE";
  }
  return "OTHER_SIGNATURE";
}

std::optional<AttackCategory> parse_category(std::string_view text) {
  for (AttackCategory c : kAllCategories) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

const std::set<std::string>& attribute_schema(AttackCategory c) {
  static const std::map<AttackCategory, std::set<std::string>> kSchema = {
      {AttackCategory::CveExploit, {"credential_file_requested", "credentials_acquired", "target"}},
      {AttackCategory::LoginSuccess, {"user"}},
      {AttackCategory::BruteForce, {"attempts", "peak_window_attempts"}},
      {AttackCategory::MiraiScan, {"probes"}},
      {AttackCategory::TunnelEstablished, {"source"}},
      {AttackCategory::ScriptScheduled, {"source", "actions", "fetch_urls"}},
      {AttackCategory::MinerInjection, {"source", "marker"}},
      {AttackCategory::DnsChanger, {"source", "resolver"}},
      {AttackCategory::OtherSignature, {"probe", "log_action"}},
  };
  return kSchema.at(c);
}

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::Info: return "info";
    case Severity::Low: return "low";
    case Severity::Medium: return "medium";
    case Severity::High: return "high";
    case Severity::Critical: return "critical";
  }
  return "medium";
}

std::optional<Severity> parse_severity(std::string_view text) {
  const std::string t = to_lower(text);
  for (Severity s : {Severity::Info, Severity::Low, Severity::Medium, Severity::High, Severity::Critical}) {
    if (to_string(s) == t) return s;
  }
  return std::nullopt;
}

namespace {

bool valid_id(std::string_view id) {
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

bool valid_cve(std::string_view cve) {
  static const ByteRegex re(R"(CVE-\d{4}-\d{4,})");
  return re.full_match(cve).has_value();
}

std::optional<std::string> parse_quoted_regex(std::string_view value) {
  if (!value.starts_with("re:\"") || value.size() < 5 || value.back() != '"') return std::nullopt;
  const auto inner = value.substr(4, value.size() - 5);
  std::string out;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    if (inner[i] == '\\' && i + 1 < inner.size() && inner[i + 1] == '"') {
      out.push_back('"');
      ++i;
    } else {
      out.push_back(inner[i]);
    }
  }
  return out;
}

std::string quote_regex(std::string_view src) {
  std::string out = "re:\"";
  for (char c : src) {
    if (c == '"') out += "\\\"";
    else out.push_back(c);
  }
  return out + "\"";
}

struct ParsedRecord {
  Signature sig;
  std::size_t line = 0;
};

std::vector<ParsedRecord> parse_records(std::string_view text, const std::string& file, const LoadOptions& opts,
                                        std::vector<std::string>* warnings) {
  std::vector<ParsedRecord> out;
  std::optional<ParsedRecord> cur;
  std::set<std::string> seen_keys;

  auto fail = [&](std::size_t line, const std::string& msg) -> SignatureError {
    return SignatureError(SignatureError::Kind::Parse, file + ":" + std::to_string(line) + ": " + msg, file, line);
  };
  auto flush = [&] {
    if (!cur) return;
    if (cur->sig.id.empty()) throw fail(cur->line, "record has no id");
    out.push_back(std::move(*cur));
    cur.reset();
    seen_keys.clear();
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') {
      if (nl == text.size()) break;
      continue;
    }
    if (line == "---") {
      flush();
      if (nl == text.size()) break;
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw fail(line_no, "expected 'key: value'");
    const std::string key(trim(line.substr(0, colon)));
    const std::string_view value = trim(line.substr(colon + 1));
    if (!cur) {
      cur.emplace();
      cur->line = line_no;
    }
    Signature& s = cur->sig;
    static const std::set<std::string> kRepeatable = {"pattern", "attribute", "reference"};
    static const std::set<std::string> kKnown = {"id",     "kind",        "category",  "cve",       "severity",
                                                 "service", "filter",     "match",     "pattern",   "log_pattern",
                                                 "attribute", "reference", "reconstructed"};
    if (!kKnown.contains(key)) {
      if (opts.strict) throw fail(line_no, "unknown key '" + key + "'");
      if (warnings) warnings->push_back(file + ":" + std::to_string(line_no) + ": ignoring unknown key '" + key + "'");
      continue;
    }
    if (!kRepeatable.contains(key) && !seen_keys.insert(key).second) {
      throw fail(line_no, "duplicate key '" + key + "'");
    }
    if (key == "id") {
      s.id = std::string(value);
    } else if (key == "kind") {
      const std::string v = to_lower(value);
      if (v == "network") s.kind = SignatureKind::Network;
      else if (v == "log") s.kind = SignatureKind::Log;
      else throw fail(line_no, "kind must be network or log");
    } else if (key == "category") {
      auto c = parse_category(value);
      if (!c) throw fail(line_no, "unknown category '" + std::string(value) + "'");
      s.category = *c;
    } else if (key == "cve") {
      s.cve_id = std::string(value);
    } else if (key == "severity") {
      auto v = parse_severity(value);
      if (!v) throw fail(line_no, "unknown severity '" + std::string(value) + "'");
      s.severity = *v;
    } else if (key == "service") {
      s.service = std::string(value);
    } else if (key == "filter") {
      s.filter = std::string(value);
    } else if (key == "match") {
      const std::string v = to_lower(value);
      if (v == "all") s.match_mode = MatchMode::All;
      else if (v == "any") s.match_mode = MatchMode::Any;
      else throw fail(line_no, "match must be all or any");
    } else if (key == "pattern") {
      try {
        s.patterns.push_back(PayloadPattern::parse(value).to_spec());
      } catch (const PatternError&) {
        s.patterns.emplace_back(value);
      }
    } else if (key == "log_pattern") {
      auto re = parse_quoted_regex(value);
      if (!re) throw fail(line_no, "log_pattern must be re:\"...\"");
      s.log_pattern = *re;
    } else if (key == "attribute") {
      const auto eq = value.find('=');
      if (eq == std::string_view::npos || eq == 0) throw fail(line_no, "attribute must be name=value");
      s.attributes.emplace_back(std::string(trim(value.substr(0, eq))), std::string(trim(value.substr(eq + 1))));
    } else if (key == "reference") {
      s.references.emplace_back(value);
    } else if (key == "reconstructed") {
      const std::string v = to_lower(value);
      if (v == "true") s.reconstructed = true;
      else if (v == "false") s.reconstructed = false;
      else throw fail(line_no, "reconstructed must be true or false");
    }
    if (nl == text.size()) break;
  }
  flush();
  return out;
}

}  // namespace

std::vector<Finding> validate_signature(const Signature& sig) {
  std::vector<Finding> out;
  if (sig.id.empty()) {
    out.push_back({"MISSING_ID", "signature has no id"});
  } else if (!valid_id(sig.id)) {
    out.push_back({"INVALID_ID", "id may only contain letters, digits, '-', '_' and '.'"});
  }
  if (sig.kind == SignatureKind::Network) {
    if (sig.filter.empty()) {
      out.push_back({"MISSING_FILTER", "network signature needs a filter"});
    } else {
      try {
        (void)parse_filter(sig.filter);
      } catch (const FilterError& e) {
        out.push_back({"INVALID_FILTER", e.what()});
      }
    }
    for (const auto& p : sig.patterns) {
      try {
        (void)PayloadPattern::parse(p);
      } catch (const PatternError& e) {
        out.push_back({"INVALID_PATTERN", e.what()});
      }
    }
    if (!sig.log_pattern.empty()) out.push_back({"KIND_FIELD_MISMATCH", "log_pattern on a network signature"});
  } else {
    if (sig.log_pattern.empty()) {
      out.push_back({"MISSING_LOG_PATTERN", "log signature needs log_pattern"});
    } else {
      try {
        ByteRegex re(sig.log_pattern);
      } catch (const RegexError& e) {
        out.push_back({"INVALID_PATTERN", e.what()});
      }
    }
    if (!sig.filter.empty() || !sig.patterns.empty()) {
      out.push_back({"KIND_FIELD_MISMATCH", "filter or payload pattern on a log signature"});
    }
  }
  if (sig.cve_id && !valid_cve(*sig.cve_id)) {
    out.push_back({"INVALID_CVE", "cve must look like CVE-YYYY-NNNN"});
  }
  if (sig.category == AttackCategory::CveExploit && !sig.cve_id) {
    out.push_back({"MISSING_CVE", "CVE_EXPLOIT signature without cve"});
  }
  const auto& schema = attribute_schema(sig.category);
  for (const auto& [key, value] : sig.attributes) {
    if (!schema.contains(key)) {
      out.push_back({"ATTRIBUTE_SCHEMA", "attribute '" + key + "' is not defined for " +
                                             std::string(to_string(sig.category))});
    }
  }
  return out;
}

CompiledSignature compile_signature(const Signature& sig) {
  const auto findings = validate_signature(sig);
  if (!findings.empty()) {
    const Finding& f = findings.front();
    if (f.code == "INVALID_FILTER") {
      std::size_t column = 0;
      try {
        (void)parse_filter(sig.filter);
      } catch (const FilterError& e) {
        column = e.column();
      }
      throw SignatureError(SignatureError::Kind::InvalidFilter, sig.id + ": " + f.detail, {}, 0, sig.id, column);
    }
    if (f.code == "INVALID_PATTERN") {
      throw SignatureError(SignatureError::Kind::InvalidPattern, sig.id + ": " + f.detail, {}, 0, sig.id);
    }
    throw SignatureError(SignatureError::Kind::Parse, sig.id + ": " + f.code + ": " + f.detail, {}, 0, sig.id);
  }
  CompiledSignature c;
  c.sig = sig;
  if (sig.kind == SignatureKind::Network) {
    c.filter = parse_filter(sig.filter);
    c.dst_ports = required_dst_ports(c.filter);
    for (const auto& p : sig.patterns) c.patterns.push_back(PayloadPattern::parse(p));
  } else {
    c.log_re.emplace(sig.log_pattern);
  }
  return c;
}

void SignatureDb::add(CompiledSignature sig) {
  if (by_id_.contains(sig.sig.id)) {
    throw SignatureError(SignatureError::Kind::DuplicateId, "duplicate signature id '" + sig.sig.id + "'", {}, 0,
                         sig.sig.id);
  }
  by_id_.emplace(sig.sig.id, sigs_.size());
  sigs_.push_back(std::move(sig));
}

void SignatureDb::merge(const SignatureDb& other) {
  for (const auto& s : other.sigs_) add(s);
}

const CompiledSignature* SignatureDb::find(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &sigs_[it->second];
}

std::vector<const CompiledSignature*> SignatureDb::by_category(AttackCategory c) const {
  std::vector<const CompiledSignature*> out;
  for (const auto& s : sigs_) {
    if (s.sig.category == c) out.push_back(&s);
  }
  return out;
}

std::vector<const CompiledSignature*> SignatureDb::by_kind(SignatureKind k) const {
  std::vector<const CompiledSignature*> out;
  for (const auto& s : sigs_) {
    if (s.sig.kind == k) out.push_back(&s);
  }
  return out;
}

std::vector<const CompiledSignature*> SignatureDb::by_dst_port(std::uint16_t port) const {
  std::vector<const CompiledSignature*> out;
  for (const auto& s : sigs_) {
    if (s.dst_ports.contains(port)) out.push_back(&s);
  }
  return out;
}

std::vector<Signature> parse_signature_text(std::string_view text, const std::string& file_name,
                                            const LoadOptions& opts, std::vector<std::string>* warnings) {
  std::vector<Signature> out;
  for (auto& r : parse_records(text, file_name, opts, warnings)) out.push_back(std::move(r.sig));
  return out;
}

LoadResult load_signature_text(std::string_view text, const std::string& file_name, const LoadOptions& opts) {
  LoadResult result;
  for (auto& rec : parse_records(text, file_name, opts, &result.warnings)) {
    try {
      result.db.add(compile_signature(rec.sig));
    } catch (const SignatureError& e) {
      throw SignatureError(e.kind(), file_name + ":" + std::to_string(rec.line) + ": " + e.what(), file_name, rec.line,
                           e.id(), e.position());
    }
  }
  return result;
}

LoadResult load_signatures(const std::filesystem::path& path, const LoadOptions& opts) {
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) {
    LoadResult merged;
    static constexpr std::string_view kExt[] = {".sig"};
    for (const auto& file : list_files(path, kExt)) {
      LoadResult part = load_signatures(file, opts);
      merged.db.merge(part.db);
      merged.warnings.insert(merged.warnings.end(), part.warnings.begin(), part.warnings.end());
    }
    return merged;
  }
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw SignatureError(SignatureError::Kind::Io, e.what(), path.string());
  }
  return load_signature_text(text, path.string(), opts);
}

std::string serialize_signatures(const std::vector<Signature>& sigs) {
  std::string out;
  for (std::size_t i = 0; i < sigs.size(); ++i) {
    const Signature& s = sigs[i];
    if (i > 0) out += "---\n";
    out += "id: " + s.id + "\n";
    out += std::string("kind: ") + (s.kind == SignatureKind::Network ? "network" : "log") + "\n";
    out += "category: " + std::string(to_string(s.category)) + "\n";
    if (s.cve_id) out += "cve: " + *s.cve_id + "\n";
    out += "severity: " + std::string(to_string(s.severity)) + "\n";
    if (s.service) out += "service: " + *s.service + "\n";
    if (s.kind == SignatureKind::Network) {
      out += "filter: " + s.filter + "\n";
      out += std::string("match: ") + (s.match_mode == MatchMode::All ? "all" : "any") + "\n";
      for (const auto& p : s.patterns) out += "pattern: " + p + "\n";
    } else {
      out += "log_pattern: " + quote_regex(s.log_pattern) + "\n";
    }
    for (const auto& [k, v] : s.attributes) out += "attribute: " + k + "=" + v + "\n";
    for (const auto& r : s.references) out += "reference: " + r + "\n";
    out += std::string("reconstructed: ") + (s.reconstructed ? "true" : "false") + "\n";
  }
  return out;
}

std::string serialize_signatures(const SignatureDb& db) {
  std::vector<Signature> sigs;
  for (const auto& c : db.all()) sigs.push_back(c.sig);
  return serialize_signatures(sigs);
}

std::filesystem::path bundled_signature_dir() {
  if (const char* env = std::getenv("TIKTRIAGE_SIGNATURE_DIR"); env && *env) return env;
  return std::filesystem::path(TIKTRIAGE_DATA_DIR) / "signatures";
}

}  // namespace tiktriage
