#include <gtest/gtest.h>

#include "support.hpp"
#include "tiktriage/signature.hpp"

using namespace tiktriage;

namespace {

bool has_code(const std::vector<Finding>& f, std::string_view code) {
  return std::any_of(f.begin(), f.end(), [&](const Finding& x) { return x.code == code; });
}

Signature network_sig(std::string id) {
  Signature s;
  s.id = std::move(id);
  s.kind = SignatureKind::Network;
  s.category = AttackCategory::OtherSignature;
  s.filter = "tcp and dst port 80";
  s.patterns = {PayloadPattern::literal("GET /x", PatternScope::StreamFwd).to_spec()};
  return s;
}

Signature random_sig(Rng& rng, int i) {
  Signature s;
  s.id = "rand-" + std::to_string(i);
  s.kind = rng.chance(0.5) ? SignatureKind::Network : SignatureKind::Log;
  s.category = kAllCategories[rng.below(kAllCategories.size())];
  if (s.category == AttackCategory::CveExploit || rng.chance(0.2)) s.cve_id = "CVE-2019-" + std::to_string(1000 + rng.below(9000));
  s.severity = static_cast<Severity>(rng.below(5));
  if (rng.chance(0.5)) s.service = rng.chance(0.5) ? "WEB" : "WINBOX";
  if (s.kind == SignatureKind::Network) {
    s.filter = rng.chance(0.5) ? "tcp and dst port 8291" : "(udp or tcp) and not src net 10.0.0.0/8";
    s.match_mode = rng.chance(0.5) ? MatchMode::All : MatchMode::Any;
    for (std::uint64_t k = 0, n = 1 + rng.below(3); k < n; ++k) {
      std::string lit;
      for (std::uint64_t j = 0, m = 1 + rng.below(8); j < m; ++j) lit.push_back(static_cast<char>(rng.below(256)));
      s.patterns.push_back(PayloadPattern::literal(lit, PatternScope::StreamFwd).to_spec());
    }
  } else {
    s.log_pattern = rng.chance(0.5) ? "user \\S+ logged in" : "say \"hi\" .*";
  }
  const auto& schema = attribute_schema(s.category);
  for (const auto& key : schema) {
    if (rng.chance(0.5)) s.attributes.emplace_back(key, "v" + std::to_string(rng.below(10)));
  }
  if (rng.chance(0.5)) s.references.push_back("https://example.org/" + std::to_string(i));
  s.reconstructed = rng.chance(0.5);
  return s;
}

}  // namespace

TEST(Signatures, BundledRulesLoadAndValidate) {
  const auto loaded = load_signatures(bundled_signature_dir());
  EXPECT_GE(loaded.db.size(), 8u);
  EXPECT_TRUE(loaded.warnings.empty());
  for (const auto& c : loaded.db.all()) {
    EXPECT_TRUE(validate_signature(c.sig).empty()) << c.sig.id;
  }
  for (const char* cve : {"CVE-2018-14847", "CVE-2019-3924", "CVE-2019-3943"}) {
    const auto cves = loaded.db.by_category(AttackCategory::CveExploit);
    EXPECT_TRUE(std::any_of(cves.begin(), cves.end(), [&](const auto* c) { return c->sig.cve_id == cve; })) << cve;
  }
  const auto winbox = loaded.db.by_dst_port(8291);
  EXPECT_FALSE(winbox.empty());
  EXPECT_FALSE(loaded.db.by_kind(SignatureKind::Log).empty());
}

TEST(Signatures, ValidationFindings) {
  auto s = network_sig("ok");
  EXPECT_TRUE(validate_signature(s).empty());
  s.filter = "tcp and";
  EXPECT_TRUE(has_code(validate_signature(s), "INVALID_FILTER"));
  s = network_sig("");
  EXPECT_TRUE(has_code(validate_signature(s), "MISSING_ID"));
  s = network_sig("bad id");
  EXPECT_TRUE(has_code(validate_signature(s), "INVALID_ID"));
  s = network_sig("x");
  s.filter.clear();
  EXPECT_TRUE(has_code(validate_signature(s), "MISSING_FILTER"));
  s = network_sig("x");
  s.patterns.push_back("packet hex:zz");
  EXPECT_TRUE(has_code(validate_signature(s), "INVALID_PATTERN"));
  s = network_sig("x");
  s.category = AttackCategory::CveExploit;
  EXPECT_TRUE(has_code(validate_signature(s), "MISSING_CVE"));
  s.cve_id = "CVE-19-1";
  EXPECT_TRUE(has_code(validate_signature(s), "INVALID_CVE"));
  s = network_sig("x");
  s.log_pattern = "a";
  EXPECT_TRUE(has_code(validate_signature(s), "KIND_FIELD_MISMATCH"));
  s = network_sig("x");
  s.attributes.emplace_back("resolver", "1.1.1.1");
  EXPECT_TRUE(has_code(validate_signature(s), "ATTRIBUTE_SCHEMA"));
  Signature log;
  log.id = "l";
  log.kind = SignatureKind::Log;
  EXPECT_TRUE(has_code(validate_signature(log), "MISSING_LOG_PATTERN"));
}

TEST(Signatures, LoadErrorsCarryLocation) {
  const std::string text =
      "id: a\nkind: network\ncategory: OTHER_SIGNATURE\nfilter: tcp\n---\n"
      "# comment\n\nid: b\nkind: network\ncategory: OTHER_SIGNATURE\nfilter: tcp and port 99999\n";
  try {
    load_signature_text(text, "rules.sig");
    FAIL();
  } catch (const SignatureError& e) {
    EXPECT_EQ(e.kind(), SignatureError::Kind::InvalidFilter);
    EXPECT_EQ(e.file(), "rules.sig");
    EXPECT_EQ(e.line(), 8u);
    EXPECT_EQ(e.id(), "b");
    EXPECT_EQ(e.position(), 14u);
  }
  const std::string dup = "id: a\nfilter: tcp\n---\nid: a\nfilter: udp\n";
  try {
    load_signature_text(dup);
    FAIL();
  } catch (const SignatureError& e) {
    EXPECT_EQ(e.kind(), SignatureError::Kind::DuplicateId);
  }
  EXPECT_THROW(load_signature_text("id: a\nbogus: 1\nfilter: tcp\n"), SignatureError);
  const auto lax = load_signature_text("id: a\nbogus: 1\nfilter: tcp\n", "<m>", LoadOptions{false});
  EXPECT_EQ(lax.db.size(), 1u);
  EXPECT_EQ(lax.warnings.size(), 1u);
  EXPECT_THROW(load_signatures("/nonexistent/rules.sig"), SignatureError);
}

TEST(Signatures, SerializeParseRoundTripProperty) {
  Rng rng(71);
  for (int round = 0; round < 200; ++round) {
    std::vector<Signature> sigs;
    for (int i = 0, n = 1 + static_cast<int>(rng.below(5)); i < n; ++i) sigs.push_back(random_sig(rng, i));
    const std::string text = serialize_signatures(sigs);
    const auto back = parse_signature_text(text, "<rt>", {}, nullptr);
    ASSERT_EQ(back, sigs) << text;
    const auto db = load_signature_text(text);
    EXPECT_EQ(serialize_signatures(db.db), text);
  }
}

TEST(Signatures, ValidatorAgreesWithCompiler) {
  Rng rng(72);
  for (int i = 0; i < 500; ++i) {
    auto s = random_sig(rng, i);
    if (rng.chance(0.3)) s.filter = "tcp and port";
    if (rng.chance(0.2)) s.cve_id = "CVE-x";
    if (rng.chance(0.2)) s.attributes.emplace_back("nope", "1");
    const bool valid = validate_signature(s).empty();
    bool compiled = true;
    try {
      compile_signature(s);
    } catch (const SignatureError&) {
      compiled = false;
    }
    EXPECT_EQ(valid, compiled);
  }
}
