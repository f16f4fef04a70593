#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tiktriage/category.hpp"
#include "tiktriage/filter.hpp"
#include "tiktriage/payload.hpp"
#include "tiktriage/regex.hpp"

namespace tiktriage {

enum class SignatureKind : std::uint8_t { Network, Log };
enum class MatchMode : std::uint8_t { All, Any };

/// Uncompiled rule as written in a signature file. Kept textual so that
/// malformed rules can still be represented and validated.
struct Signature {
  std::string id;
  SignatureKind kind = SignatureKind::Network;
  AttackCategory category = AttackCategory::OtherSignature;
  std::optional<std::string> cve_id;
  Severity severity = Severity::Medium;
  std::optional<std::string> service;
  std::string filter;                 // NETWORK only
  std::vector<std::string> patterns;  // NETWORK only, PayloadPattern::parse form
  MatchMode match_mode = MatchMode::All;
  std::string log_pattern;  // LOG only, must match the whole message
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<std::string> references;
  bool reconstructed = false;

  bool operator==(const Signature&) const = default;
};

struct Finding {
  std::string code;  // e.g. INVALID_FILTER
  std::string detail;

  bool operator==(const Finding&) const = default;
};

/// Empty iff the signature satisfies every structural invariant.
///
/// Codes: MISSING_ID, INVALID_ID, INVALID_FILTER, MISSING_FILTER,
/// INVALID_PATTERN, MISSING_LOG_PATTERN, INVALID_CVE, MISSING_CVE,
/// KIND_FIELD_MISMATCH, ATTRIBUTE_SCHEMA.
std::vector<Finding> validate_signature(const Signature& sig);

class SignatureError : public std::runtime_error {
 public:
  enum class Kind { Parse, DuplicateId, InvalidFilter, InvalidPattern, Io };

  SignatureError(Kind kind, std::string message, std::string file = {}, std::size_t line = 0, std::string id = {},
                 std::size_t position = 0)
      : std::runtime_error(std::move(message)),
        kind_(kind),
        file_(std::move(file)),
        line_(line),
        id_(std::move(id)),
        position_(position) {}

  Kind kind() const { return kind_; }
  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }
  const std::string& id() const { return id_; }
  /// 1-based filter column for InvalidFilter.
  std::size_t position() const { return position_; }

 private:
  Kind kind_;
  std::string file_;
  std::size_t line_;
  std::string id_;
  std::size_t position_;
};

struct CompiledSignature {
  Signature sig;
  FilterAst filter;
  std::vector<PayloadPattern> patterns;
  std::optional<ByteRegex> log_re;
  std::set<std::uint16_t> dst_ports;
};

class SignatureDb {
 public:
  /// Takes ownership of already-compiled rules; throws DuplicateId.
  void add(CompiledSignature sig);
  /// Appends every rule of `other`; throws DuplicateId on collision.
  void merge(const SignatureDb& other);

  std::size_t size() const { return sigs_.size(); }
  bool empty() const { return sigs_.empty(); }
  const std::vector<CompiledSignature>& all() const { return sigs_; }
  const CompiledSignature* find(std::string_view id) const;
  std::vector<const CompiledSignature*> by_category(AttackCategory c) const;
  std::vector<const CompiledSignature*> by_kind(SignatureKind k) const;
  /// Rules whose filter pins the destination port to a set including `port`.
  std::vector<const CompiledSignature*> by_dst_port(std::uint16_t port) const;

 private:
  std::vector<CompiledSignature> sigs_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

struct LoadOptions {
  bool strict = true;
};

struct LoadResult {
  SignatureDb db;
  std::vector<std::string> warnings;
};

/// Parses signature text. Records are separated by a line holding only
/// `---`; blank lines and lines starting with `#` are ignored.
std::vector<Signature> parse_signature_text(std::string_view text, const std::string& file_name,
                                            const LoadOptions& opts, std::vector<std::string>* warnings);

/// Validates and compiles; all-or-nothing.
CompiledSignature compile_signature(const Signature& sig);

LoadResult load_signature_text(std::string_view text, const std::string& file_name = "<memory>",
                               const LoadOptions& opts = {});
/// Loads one file, or every *.sig file (sorted) of a directory, into one database.
LoadResult load_signatures(const std::filesystem::path& path, const LoadOptions& opts = {});

/// Canonical text for a list of signatures; reloading yields equal rules.
std::string serialize_signatures(const std::vector<Signature>& sigs);
std::string serialize_signatures(const SignatureDb& db);

std::filesystem::path bundled_signature_dir();

}  // namespace tiktriage
