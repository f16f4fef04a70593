#include "tiktriage/regex.hpp"

#include <algorithm>
#include <bitset>

namespace tiktriage {

namespace {

constexpr int kMaxRepeat = 1000;
constexpr std::size_t kMaxProgram = 200'000;
constexpr int kMaxNesting = 250;

using ByteSet = std::bitset<256>;

struct Node {
  enum class Kind { Empty, Set, Concat, Alt, Repeat, Group, Bol, Eol } kind = Kind::Empty;
  int set = -1;
  std::vector<Node> kids;
  int min = 0;
  int max = -1;  // -1 = unbounded
  bool greedy = true;
  int capture = -1;  // group index (1-based) or -1
};

struct Inst {
  enum class Op : std::uint8_t { Set, Split, Jmp, Save, Bol, Eol, Match, LoopBack } op;
  std::uint32_t x = 0;
  std::uint32_t y = 0;
};

class Parser {
 public:
  Parser(std::string_view pattern, std::vector<ByteSet>& sets) : p_(pattern), sets_(sets) {}

  Node parse() {
    if (p_.substr(0, 4) == "(?i)") {
      icase_ = true;
      pos_ = 4;
    }
    Node n = parse_alt(0);
    if (pos_ != p_.size()) fail(p_[pos_] == ')' ? "unbalanced ')'" : "unexpected character");
    return n;
  }

  int groups() const { return groups_; }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw RegexError(pos_, msg); }

  bool more() const { return pos_ < p_.size(); }
  char peek() const { return p_[pos_]; }

  int add_set(ByteSet s) {
    if (icase_) {
      for (int c = 'a'; c <= 'z'; ++c) {
        const int u = c - 'a' + 'A';
        if (s[c] || s[u]) {
          s.set(c);
          s.set(u);
        }
      }
    }
    sets_.push_back(s);
    return static_cast<int>(sets_.size() - 1);
  }

  Node set_node(const ByteSet& s) {
    Node n;
    n.kind = Node::Kind::Set;
    n.set = add_set(s);
    return n;
  }

  Node parse_alt(int depth) {
    if (depth > kMaxNesting) fail("pattern nested too deeply");
    std::vector<Node> branches;
    branches.push_back(parse_concat(depth));
    while (more() && peek() == '|') {
      ++pos_;
      branches.push_back(parse_concat(depth));
    }
    if (branches.size() == 1) return std::move(branches.front());
    Node n;
    n.kind = Node::Kind::Alt;
    n.kids = std::move(branches);
    return n;
  }

  Node parse_concat(int depth) {
    Node n;
    n.kind = Node::Kind::Concat;
    while (more() && peek() != '|' && peek() != ')') {
      Node atom = parse_atom(depth);
      atom = parse_quantifiers(std::move(atom));
      n.kids.push_back(std::move(atom));
    }
    if (n.kids.size() == 1) return std::move(n.kids.front());
    if (n.kids.empty()) n.kind = Node::Kind::Empty;
    return n;
  }

  bool parse_int(int& out) {
    std::size_t start = pos_;
    long value = 0;
    while (more() && peek() >= '0' && peek() <= '9') {
      value = value * 10 + (peek() - '0');
      if (value > 100000) value = 100000;
      ++pos_;
    }
    if (pos_ == start) return false;
    out = static_cast<int>(value);
    return true;
  }

  // Attempts to read {n}, {n,}, {n,m}; restores position and returns false if
  // the brace does not start a valid quantifier (it is then a literal).
  bool try_brace(int& min, int& max) {
    std::size_t save = pos_;
    ++pos_;  // '{'
    if (!parse_int(min)) {
      pos_ = save;
      return false;
    }
    max = min;
    if (more() && peek() == ',') {
      ++pos_;
      if (!parse_int(max)) max = -1;
    }
    if (!more() || peek() != '}') {
      pos_ = save;
      return false;
    }
    ++pos_;
    if (min > kMaxRepeat || max > kMaxRepeat) throw RegexError(save, "repetition count exceeds 1000");
    if (max != -1 && max < min) throw RegexError(save, "repetition range is reversed");
    return true;
  }

  Node parse_quantifiers(Node atom) {
    while (more()) {
      int min = 0;
      int max = -1;
      const char c = peek();
      if (c == '*') {
        ++pos_;
      } else if (c == '+') {
        min = 1;
        ++pos_;
      } else if (c == '?') {
        max = 1;
        ++pos_;
      } else if (c == '{') {
        if (!try_brace(min, max)) break;
      } else {
        break;
      }
      if (atom.kind == Node::Kind::Bol || atom.kind == Node::Kind::Eol) fail("quantifier on anchor");
      Node rep;
      rep.kind = Node::Kind::Repeat;
      rep.min = min;
      rep.max = max;
      if (more() && peek() == '?') {
        rep.greedy = false;
        ++pos_;
      }
      rep.kids.push_back(std::move(atom));
      atom = std::move(rep);
    }
    return atom;
  }

  static ByteSet class_digit() {
    ByteSet s;
    for (int c = '0'; c <= '9'; ++c) s.set(c);
    return s;
  }
  static ByteSet class_word() {
    ByteSet s = class_digit();
    for (int c = 'a'; c <= 'z'; ++c) s.set(c);
    for (int c = 'A'; c <= 'Z'; ++c) s.set(c);
    s.set('_');
    return s;
  }
  static ByteSet class_space() {
    ByteSet s;
    for (char c : std::string_view(" \t\n\r\f\v")) s.set(static_cast<unsigned char>(c));
    return s;
  }

  int hex_digit(char c) const {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  }

  // Parses an escape after the backslash. Returns either a single byte
  // (is_set == false) or a class.
  struct Escape {
    bool is_set = false;
    unsigned char byte = 0;
    ByteSet set;
  };

  Escape parse_escape() {
    if (!more()) fail("trailing backslash");
    const char c = peek();
    ++pos_;
    Escape e;
    switch (c) {
      case 'd': e.is_set = true; e.set = class_digit(); return e;
      case 'D': e.is_set = true; e.set = ~class_digit(); return e;
      case 'w': e.is_set = true; e.set = class_word(); return e;
      case 'W': e.is_set = true; e.set = ~class_word(); return e;
      case 's': e.is_set = true; e.set = class_space(); return e;
      case 'S': e.is_set = true; e.set = ~class_space(); return e;
      case 'n': e.byte = '\n'; return e;
      case 'r': e.byte = '\r'; return e;
      case 't': e.byte = '\t'; return e;
      case 'f': e.byte = '\f'; return e;
      case 'v': e.byte = '\v'; return e;
      case 'x': {
        if (pos_ + 2 > p_.size()) fail("\\x needs two hex digits");
        const int hi = hex_digit(p_[pos_]);
        const int lo = hex_digit(p_[pos_ + 1]);
        if (hi < 0 || lo < 0) fail("\\x needs two hex digits");
        pos_ += 2;
        e.byte = static_cast<unsigned char>(hi * 16 + lo);
        return e;
      }
      default: break;
    }
    if (c >= '1' && c <= '9') {
      --pos_;
      fail("backreferences are not supported");
    }
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) {
      --pos_;
      fail(std::string("unsupported escape \\") + c);
    }
    e.byte = static_cast<unsigned char>(c);
    return e;
  }

  Node parse_class() {
    const std::size_t open = pos_;
    ++pos_;  // '['
    bool negate = false;
    if (more() && peek() == '^') {
      negate = true;
      ++pos_;
    }
    ByteSet s;
    bool first = true;
    for (;;) {
      if (!more()) throw RegexError(open, "unterminated character class");
      char c = peek();
      if (c == ']' && !first) {
        ++pos_;
        break;
      }
      first = false;
      unsigned char lo = 0;
      if (c == '\\') {
        ++pos_;
        Escape e = parse_escape();
        if (e.is_set) {
          s |= e.set;
          continue;
        }
        lo = e.byte;
      } else {
        lo = static_cast<unsigned char>(c);
        ++pos_;
      }
      if (pos_ + 1 < p_.size() && peek() == '-' && p_[pos_ + 1] != ']') {
        ++pos_;
        unsigned char hi = 0;
        if (peek() == '\\') {
          ++pos_;
          Escape e = parse_escape();
          if (e.is_set) fail("class escape cannot end a range");
          hi = e.byte;
        } else {
          hi = static_cast<unsigned char>(peek());
          ++pos_;
        }
        if (hi < lo) fail("character range is reversed");
        for (int b = lo; b <= hi; ++b) s.set(static_cast<std::size_t>(b));
      } else {
        s.set(lo);
      }
    }
    if (negate) {
      // Case folding must happen before negation.
      if (icase_) {
        for (int ch = 'a'; ch <= 'z'; ++ch) {
          const int u = ch - 'a' + 'A';
          if (s[ch] || s[u]) {
            s.set(ch);
            s.set(u);
          }
        }
      }
      s = ~s;
      Node n;
      n.kind = Node::Kind::Set;
      sets_.push_back(s);
      n.set = static_cast<int>(sets_.size() - 1);
      return n;
    }
    return set_node(s);
  }

  Node parse_atom(int depth) {
    const char c = peek();
    switch (c) {
      case '(': {
        const std::size_t open = pos_;
        ++pos_;
        int capture = -1;
        if (p_.substr(pos_, 2) == "?:") {
          pos_ += 2;
        } else if (more() && peek() == '?') {
          fail("unsupported group syntax");
        } else {
          capture = ++groups_;
        }
        Node inner = parse_alt(depth + 1);
        if (!more() || peek() != ')') throw RegexError(open, "unbalanced '('");
        ++pos_;
        Node g;
        g.kind = Node::Kind::Group;
        g.capture = capture;
        g.kids.push_back(std::move(inner));
        return g;
      }
      case ')':
        fail("unbalanced ')'");
      case '*':
      case '+':
      case '?':
        fail("quantifier without operand");
      case '[':
        return parse_class();
      case '.': {
        ++pos_;
        ByteSet all;
        all.set();
        return set_node(all);
      }
      case '^': {
        ++pos_;
        Node n;
        n.kind = Node::Kind::Bol;
        return n;
      }
      case '$': {
        ++pos_;
        Node n;
        n.kind = Node::Kind::Eol;
        return n;
      }
      case '\\': {
        ++pos_;
        Escape e = parse_escape();
        if (e.is_set) return set_node(e.set);
        ByteSet s;
        s.set(e.byte);
        return set_node(s);
      }
      default: {
        ++pos_;
        ByteSet s;
        s.set(static_cast<unsigned char>(c));
        return set_node(s);
      }
    }
  }

  std::string_view p_;
  std::vector<ByteSet>& sets_;
  std::size_t pos_ = 0;
  int groups_ = 0;
  bool icase_ = false;
};

class Compiler {
 public:
  Compiler(std::vector<Inst>& code, std::size_t first_free_slot) : code_(code), next_slot_(first_free_slot) {}

  std::size_t slots_used() const { return next_slot_; }

  void emit(const Node& n) {
    switch (n.kind) {
      case Node::Kind::Empty:
        return;
      case Node::Kind::Set:
        push({Inst::Op::Set, static_cast<std::uint32_t>(n.set), 0});
        return;
      case Node::Kind::Bol:
        push({Inst::Op::Bol, 0, 0});
        return;
      case Node::Kind::Eol:
        push({Inst::Op::Eol, 0, 0});
        return;
      case Node::Kind::Concat:
        for (const auto& k : n.kids) emit(k);
        return;
      case Node::Kind::Group:
        if (n.capture > 0) push({Inst::Op::Save, static_cast<std::uint32_t>(2 * n.capture), 0});
        emit(n.kids.front());
        if (n.capture > 0) push({Inst::Op::Save, static_cast<std::uint32_t>(2 * n.capture + 1), 0});
        return;
      case Node::Kind::Alt: {
        std::vector<std::size_t> jumps;
        for (std::size_t i = 0; i < n.kids.size(); ++i) {
          if (i + 1 < n.kids.size()) {
            const std::size_t split = push({Inst::Op::Split, 0, 0});
            code_[split].x = static_cast<std::uint32_t>(code_.size());
            emit(n.kids[i]);
            jumps.push_back(push({Inst::Op::Jmp, 0, 0}));
            code_[split].y = static_cast<std::uint32_t>(code_.size());
          } else {
            emit(n.kids[i]);
          }
        }
        for (auto j : jumps) code_[j].x = static_cast<std::uint32_t>(code_.size());
        return;
      }
      case Node::Kind::Repeat:
        emit_repeat(n);
        return;
    }
  }

 private:
  std::size_t push(Inst inst) {
    if (code_.size() >= kMaxProgram) throw RegexError(0, "pattern too large");
    code_.push_back(inst);
    return code_.size() - 1;
  }

  // Split preferring `first` when greedy.
  void set_split(std::size_t at, std::uint32_t body, std::uint32_t out, bool greedy) {
    code_[at].x = greedy ? body : out;
    code_[at].y = greedy ? out : body;
  }

  static bool nullable(const Node& n) {
    switch (n.kind) {
      case Node::Kind::Set: return false;
      case Node::Kind::Concat:
        return std::all_of(n.kids.begin(), n.kids.end(), [](const Node& k) { return nullable(k); });
      case Node::Kind::Alt:
        return std::any_of(n.kids.begin(), n.kids.end(), [](const Node& k) { return nullable(k); });
      case Node::Kind::Repeat: return n.min == 0 || nullable(n.kids.front());
      case Node::Kind::Group: return nullable(n.kids.front());
      default: return true;
    }
  }

  void emit_repeat(const Node& n) {
    const Node& body = n.kids.front();
    for (int i = 0; i < n.min; ++i) emit(body);
    if (n.max == -1) {
      const std::size_t split = push({Inst::Op::Split, 0, 0});
      if (nullable(body)) {
        // An iteration that consumes nothing leaves the loop instead of repeating.
        const auto slot = static_cast<std::uint32_t>(next_slot_++);
        push({Inst::Op::Save, slot, 0});
        emit(body);
        const std::size_t back = push({Inst::Op::LoopBack, slot, static_cast<std::uint32_t>(split)});
        set_split(split, static_cast<std::uint32_t>(split + 1), static_cast<std::uint32_t>(back + 1), n.greedy);
        return;
      }
      emit(body);
      push({Inst::Op::Jmp, static_cast<std::uint32_t>(split), 0});
      set_split(split, static_cast<std::uint32_t>(split + 1), static_cast<std::uint32_t>(code_.size()),
                n.greedy);
      return;
    }
    std::vector<std::size_t> splits;
    for (int i = n.min; i < n.max; ++i) {
      const std::size_t split = push({Inst::Op::Split, 0, 0});
      splits.push_back(split);
      emit(body);
    }
    const auto out = static_cast<std::uint32_t>(code_.size());
    for (auto s : splits) set_split(s, static_cast<std::uint32_t>(s + 1), out, n.greedy);
  }

  std::vector<Inst>& code_;
  std::size_t next_slot_;
};

}  // namespace

struct ByteRegex::Program {
  std::string pattern;
  std::vector<Inst> code;
  std::vector<ByteSet> sets;
  std::size_t groups = 0;
  std::size_t slots = 2;
};

ByteRegex::ByteRegex(std::string_view pattern) {
  auto prog = std::make_shared<Program>();
  prog->pattern = std::string(pattern);
  Parser parser(pattern, prog->sets);
  Node root = parser.parse();
  prog->groups = static_cast<std::size_t>(parser.groups());
  prog->slots = 2 * (prog->groups + 1);
  Compiler compiler(prog->code, prog->slots);
  prog->code.push_back({Inst::Op::Save, 0, 0});
  compiler.emit(root);
  prog->slots = compiler.slots_used();
  prog->code.push_back({Inst::Op::Save, 1, 0});
  prog->code.push_back({Inst::Op::Match, 0, 0});
  prog_ = std::move(prog);
}

std::size_t ByteRegex::group_count() const { return prog_->groups; }
const std::string& ByteRegex::pattern() const { return prog_->pattern; }

namespace {

constexpr std::size_t kNoPos = static_cast<std::size_t>(-1);

struct ThreadList {
  std::vector<std::uint32_t> pcs;
  std::vector<std::size_t> caps;  // pcs.size() * slots

  void clear() {
    pcs.clear();
    caps.clear();
  }
};

class Vm {
 public:
  Vm(const std::vector<Inst>& code, std::size_t slots)
      : code_(code), mark_(code.size(), 0), scratch_(slots, kNoPos) {}

  void begin_step() { ++gen_; }

  // Follows epsilon edges from `pc` with the captures in scratch_, appending
  // consuming and match instructions to `list` in priority order.
  void add(ThreadList& list, std::uint32_t pc0, std::size_t pos, std::size_t text_len) {
    stack_.clear();
    stack_.push_back({false, pc0, 0, 0});
    while (!stack_.empty()) {
      Frame f = stack_.back();
      stack_.pop_back();
      if (f.restore) {
        scratch_[f.slot] = f.value;
        continue;
      }
      const Inst& in = code_[f.pc];
      if (in.op == Inst::Op::LoopBack) {
        stack_.push_back({false, scratch_[in.x] == pos ? f.pc + 1 : in.y, 0, 0});
        continue;
      }
      if (mark_[f.pc] == gen_) continue;
      mark_[f.pc] = gen_;
      switch (in.op) {
        case Inst::Op::Jmp:
          stack_.push_back({false, in.x, 0, 0});
          break;
        case Inst::Op::Split:
          stack_.push_back({false, in.y, 0, 0});
          stack_.push_back({false, in.x, 0, 0});
          break;
        case Inst::Op::Save:
          stack_.push_back({true, 0, in.x, scratch_[in.x]});
          scratch_[in.x] = pos;
          stack_.push_back({false, f.pc + 1, 0, 0});
          break;
        case Inst::Op::Bol:
          if (pos == 0) stack_.push_back({false, f.pc + 1, 0, 0});
          break;
        case Inst::Op::Eol:
          if (pos == text_len) stack_.push_back({false, f.pc + 1, 0, 0});
          break;
        case Inst::Op::LoopBack:
          break;
        case Inst::Op::Set:
        case Inst::Op::Match:
          list.pcs.push_back(f.pc);
          list.caps.insert(list.caps.end(), scratch_.begin(), scratch_.end());
          break;
      }
    }
  }

  std::vector<std::size_t>& scratch() { return scratch_; }

 private:
  struct Frame {
    bool restore;
    std::uint32_t pc;
    std::size_t slot;
    std::size_t value;
  };

  const std::vector<Inst>& code_;
  std::vector<std::uint64_t> mark_;
  std::uint64_t gen_ = 0;
  std::vector<std::size_t> scratch_;
  std::vector<Frame> stack_;
};

}  // namespace

std::optional<ByteRegex::Match> ByteRegex::run(std::span<const std::uint8_t> text, std::size_t start,
                                               bool anchored, bool full) const {
  const Program& prog = *prog_;
  if (start > text.size()) return std::nullopt;
  const std::size_t slots = prog.slots;
  Vm vm(prog.code, slots);
  ThreadList clist, nlist;
  std::vector<std::size_t> best;

  auto seed = [&](ThreadList& list, std::size_t pos) {
    std::fill(vm.scratch().begin(), vm.scratch().end(), kNoPos);
    vm.add(list, 0, pos, text.size());
  };

  vm.begin_step();
  seed(clist, start);
  for (std::size_t pos = start;; ++pos) {
    if (clist.pcs.empty() && (anchored || !best.empty())) break;
    vm.begin_step();
    nlist.clear();
    const bool at_end = pos >= text.size();
    const std::uint8_t byte = at_end ? 0 : text[pos];
    for (std::size_t i = 0; i < clist.pcs.size(); ++i) {
      const Inst& in = prog.code[clist.pcs[i]];
      const std::size_t* caps = clist.caps.data() + i * slots;
      if (in.op == Inst::Op::Match) {
        if (full && pos != text.size()) continue;
        best.assign(caps, caps + slots);
        break;  // lower-priority threads are cut
      }
      if (!at_end && prog.sets[in.x][byte]) {
        std::copy(caps, caps + slots, vm.scratch().begin());
        vm.add(nlist, clist.pcs[i] + 1, pos + 1, text.size());
      }
    }
    if (at_end) break;
    if (best.empty() && !anchored) seed(nlist, pos + 1);
    std::swap(clist, nlist);
  }
  if (best.empty()) return std::nullopt;
  Match m;
  m.begin = best[0];
  m.end = best[1];
  m.groups.resize(prog.groups);
  for (std::size_t g = 1; g <= prog.groups; ++g) {
    const std::size_t b = best[2 * g];
    const std::size_t e = best[2 * g + 1];
    if (b != kNoPos && e != kNoPos) m.groups[g - 1] = Span{b, e};
  }
  return m;
}

std::optional<ByteRegex::Match> ByteRegex::search(std::span<const std::uint8_t> text, std::size_t start) const {
  return run(text, start, false, false);
}

std::optional<ByteRegex::Match> ByteRegex::full_match(std::span<const std::uint8_t> text) const {
  return run(text, 0, true, true);
}

std::optional<std::string_view> ByteRegex::group_text(std::string_view text, const Match& m, std::size_t group) {
  if (group == 0) return text.substr(m.begin, m.end - m.begin);
  if (group > m.groups.size() || !m.groups[group - 1]) return std::nullopt;
  const auto [b, e] = *m.groups[group - 1];
  return text.substr(b, e - b);
}

}  // namespace tiktriage
