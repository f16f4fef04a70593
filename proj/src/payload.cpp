#include "tiktriage/payload.hpp"

#include <algorithm>
#include <functional>

namespace tiktriage {

std::string_view to_string(PatternKind k) {
  switch (k) {
    case PatternKind::Literal: return "lit";
    case PatternKind::Hex: return "hex";
    case PatternKind::Regex: return "re";
  }
  return "lit";
}

std::string_view to_string(PatternScope s) {
  switch (s) {
    case PatternScope::Packet: return "packet";
    case PatternScope::StreamFwd: return "stream_fwd";
    case PatternScope::StreamRev: return "stream_rev";
    case PatternScope::StreamEither: return "stream";
  }
  return "packet";
}

std::optional<PatternScope> parse_scope(std::string_view text) {
  if (text == "packet") return PatternScope::Packet;
  if (text == "stream_fwd") return PatternScope::StreamFwd;
  if (text == "stream_rev") return PatternScope::StreamRev;
  if (text == "stream" || text == "stream_either") return PatternScope::StreamEither;
  return std::nullopt;
}

std::optional<std::string> unescape_quoted(std::string_view body) {
  std::string out;
  out.reserve(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '"') return std::nullopt;
    if (c != '\\') {
      out.push_back(c);
      continue;
    }
    if (++i == body.size()) return std::nullopt;
    switch (body[i]) {
      case '\\': out.push_back('\\'); break;
      case '"': out.push_back('"'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      case 't': out.push_back('\t'); break;
      case '0': out.push_back('\0'); break;
      case 'x': {
        if (i + 2 >= body.size()) return std::nullopt;
        auto hex = hex_decode(body.substr(i + 1, 2));
        if (!hex || hex->size() != 1) return std::nullopt;
        out.push_back(static_cast<char>((*hex)[0]));
        i += 2;
        break;
      }
      default: return std::nullopt;
    }
  }
  return out;
}

std::string escape_quoted(std::string_view raw) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    switch (ch) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20 || c >= 0x7F) {
          out += "\\x";
          out.push_back(kHex[c >> 4]);
          out.push_back(kHex[c & 0xF]);
        } else {
          out.push_back(ch);
        }
    }
  }
  return out;
}

PayloadPattern PayloadPattern::literal(std::string_view bytes, PatternScope scope, std::optional<std::size_t> offset) {
  if (bytes.empty()) throw PatternError("empty literal pattern");
  PayloadPattern p;
  p.kind_ = PatternKind::Literal;
  p.scope_ = scope;
  p.offset_ = offset;
  p.bytes_.assign(bytes.begin(), bytes.end());
  return p;
}

PayloadPattern PayloadPattern::hex(std::string_view hex_digits, PatternScope scope, std::optional<std::size_t> offset) {
  auto decoded = hex_decode(hex_digits);
  if (!decoded) throw PatternError("invalid hex pattern '" + std::string(hex_digits) + "'");
  if (decoded->empty()) throw PatternError("empty hex pattern");
  PayloadPattern p;
  p.kind_ = PatternKind::Hex;
  p.scope_ = scope;
  p.offset_ = offset;
  p.bytes_ = std::move(*decoded);
  return p;
}

PayloadPattern PayloadPattern::regex(std::string_view source, PatternScope scope, std::optional<std::size_t> offset) {
  if (source.empty()) throw PatternError("empty regex pattern");
  PayloadPattern p;
  p.kind_ = PatternKind::Regex;
  p.scope_ = scope;
  p.offset_ = offset;
  p.source_ = std::string(source);
  try {
    p.re_ = std::make_shared<const ByteRegex>(source);
  } catch (const RegexError& e) {
    throw PatternError(e.what());
  }
  return p;
}

PayloadPattern PayloadPattern::parse(std::string_view spec) {
  spec = trim(spec);
  const auto space = spec.find_first_of(" \t");
  if (space == std::string_view::npos) throw PatternError("pattern needs '<scope> <kind>:<value>'");
  std::string_view head = spec.substr(0, space);
  std::string_view body = trim(spec.substr(space + 1));

  std::optional<std::size_t> offset;
  if (const auto at = head.find('@'); at != std::string_view::npos) {
    const auto digits = head.substr(at + 1);
    if (digits.empty() || digits.size() > 9 ||
        !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw PatternError("bad offset '" + std::string(digits) + "'");
    }
    offset = std::stoul(std::string(digits));
    head = head.substr(0, at);
  }
  auto scope = parse_scope(head);
  if (!scope) throw PatternError("unknown scope '" + std::string(head) + "'");

  auto quoted = [&](std::string_view rest) -> std::string_view {
    if (rest.size() < 2 || rest.front() != '"' || rest.back() != '"') {
      throw PatternError("expected a double-quoted value");
    }
    return rest.substr(1, rest.size() - 2);
  };
  if (body.starts_with("hex:")) return hex(body.substr(4), *scope, offset);
  if (body.starts_with("lit:")) {
    auto text = unescape_quoted(quoted(body.substr(4)));
    if (!text) throw PatternError("bad escape in literal");
    return literal(*text, *scope, offset);
  }
  if (body.starts_with("re:")) {
    // Regex text is verbatim except for \".
    std::string src;
    const auto inner = quoted(body.substr(3));
    for (std::size_t i = 0; i < inner.size(); ++i) {
      if (inner[i] == '\\' && i + 1 < inner.size() && inner[i + 1] == '"') {
        src.push_back('"');
        ++i;
      } else {
        src.push_back(inner[i]);
      }
    }
    return regex(src, *scope, offset);
  }
  throw PatternError("pattern kind must be lit:, hex: or re:");
}

std::string PayloadPattern::to_spec() const {
  std::string out(to_string(scope_));
  if (offset_) out += "@" + std::to_string(*offset_);
  out += ' ';
  switch (kind_) {
    case PatternKind::Literal:
      out += "lit:\"" +
             escape_quoted(std::string_view(reinterpret_cast<const char*>(bytes_.data()), bytes_.size())) + "\"";
      break;
    case PatternKind::Hex: out += "hex:" + hex_encode(bytes_); break;
    case PatternKind::Regex: {
      out += "re:\"";
      for (char c : source_) {
        if (c == '"') out += "\\\"";
        else out.push_back(c);
      }
      out += "\"";
      break;
    }
  }
  return out;
}

std::vector<std::size_t> PayloadPattern::find_all(std::span<const std::uint8_t> data, std::size_t base_offset) const {
  std::vector<std::size_t> out;
  if (offset_) {
    if (*offset_ < base_offset || *offset_ - base_offset > data.size()) return out;
    const std::size_t at = *offset_ - base_offset;
    if (kind_ == PatternKind::Regex) {
      auto m = re_->search(data, at);
      if (m && m->begin == at) out.push_back(*offset_);
    } else if (data.size() - at >= bytes_.size() &&
               std::equal(bytes_.begin(), bytes_.end(), data.begin() + static_cast<std::ptrdiff_t>(at))) {
      out.push_back(*offset_);
    }
    return out;
  }
  if (kind_ == PatternKind::Regex) {
    std::size_t pos = 0;
    while (pos <= data.size()) {
      auto m = re_->search(data, pos);
      if (!m) break;
      out.push_back(base_offset + m->begin);
      pos = m->end > m->begin ? m->end : m->begin + 1;
    }
    return out;
  }
  const std::boyer_moore_horspool_searcher searcher(bytes_.begin(), bytes_.end());
  auto it = data.begin();
  while (true) {
    it = std::search(it, data.end(), searcher);
    if (it == data.end()) break;
    out.push_back(base_offset + static_cast<std::size_t>(it - data.begin()));
    it += static_cast<std::ptrdiff_t>(bytes_.size());
  }
  return out;
}

std::vector<std::size_t> match_payload(const PayloadPattern& pat, const PacketRecord& pkt) {
  if (pat.scope() != PatternScope::Packet) {
    throw ScopeMismatch("stream-scoped pattern applied to a packet");
  }
  return pat.find_all(pkt.payload);
}

std::vector<std::size_t> match_payload(const PayloadPattern& pat, const StreamPayload& stream) {
  switch (pat.scope()) {
    case PatternScope::Packet: throw ScopeMismatch("packet-scoped pattern applied to a stream");
    case PatternScope::StreamFwd:
      if (stream.direction != Direction::Fwd) throw ScopeMismatch("forward-stream pattern applied to reverse stream");
      break;
    case PatternScope::StreamRev:
      if (stream.direction != Direction::Rev) throw ScopeMismatch("reverse-stream pattern applied to forward stream");
      break;
    case PatternScope::StreamEither: break;
  }
  std::vector<std::size_t> out;
  const std::span<const std::uint8_t> all(stream.bytes);
  for (auto [begin, end] : stream.runs()) {
    auto part = pat.find_all(all.subspan(begin, end - begin), begin);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace tiktriage
