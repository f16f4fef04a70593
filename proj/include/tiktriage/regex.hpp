#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tiktriage {

class RegexError : public std::runtime_error {
 public:
  RegexError(std::size_t position, const std::string& message)
      : std::runtime_error("regex error at offset " + std::to_string(position) + ": " + message),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Byte-oriented regular expression evaluated by a Pike VM, so matching is
/// O(text * program) regardless of the pattern.
///
/// Supported: literals, `.` (any byte), classes `[...]`/`[^...]`, escapes
/// `\d \w \s \D \W \S \n \r \t \f \v \xHH` and escaped punctuation, groups
/// `(...)` / `(?:...)`, alternation, greedy and lazy `* + ? {n} {n,} {n,m}`,
/// anchors `^ $` (input boundaries only) and a leading `(?i)` flag.
/// Backreferences and lookaround are rejected.
class ByteRegex {
 public:
  using Span = std::pair<std::size_t, std::size_t>;

  struct Match {
    std::size_t begin = 0;
    std::size_t end = 0;
    /// Capture groups 1..N; nullopt when the group did not participate.
    std::vector<std::optional<Span>> groups;

    std::size_t length() const { return end - begin; }
  };

  explicit ByteRegex(std::string_view pattern);

  /// Leftmost-first match starting at or after `start`.
  std::optional<Match> search(std::span<const std::uint8_t> text, std::size_t start = 0) const;
  std::optional<Match> search(std::string_view text, std::size_t start = 0) const {
    return search(as_bytes(text), start);
  }
  /// The match must span the whole input.
  std::optional<Match> full_match(std::span<const std::uint8_t> text) const;
  std::optional<Match> full_match(std::string_view text) const { return full_match(as_bytes(text)); }

  std::size_t group_count() const;
  const std::string& pattern() const;

  /// Captured substring helper for string inputs.
  static std::optional<std::string_view> group_text(std::string_view text, const Match& m, std::size_t group);

 private:
  static std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
  }

  struct Program;
  std::optional<Match> run(std::span<const std::uint8_t> text, std::size_t start, bool anchored,
                           bool full) const;

  std::shared_ptr<const Program> prog_;
};

}  // namespace tiktriage
