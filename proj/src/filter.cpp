#include "tiktriage/filter.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <optional>

namespace tiktriage {

namespace {

constexpr std::size_t kMaxNesting = 256;

struct Token {
  enum class Type { Word, LParen, RParen, Not, And, Or, End };
  Type type = Type::End;
  std::string_view text;
  std::size_t column = 0;
};

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '/' || c == '-' || c == '_';
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    Token t;
    t.column = i + 1;
    if (c == '(') {
      t.type = Token::Type::LParen;
      t.text = s.substr(i, 1);
      ++i;
    } else if (c == ')') {
      t.type = Token::Type::RParen;
      t.text = s.substr(i, 1);
      ++i;
    } else if (c == '!') {
      t.type = Token::Type::Not;
      t.text = s.substr(i, 1);
      ++i;
    } else if (c == '&' && i + 1 < s.size() && s[i + 1] == '&') {
      t.type = Token::Type::And;
      t.text = s.substr(i, 2);
      i += 2;
    } else if (c == '|' && i + 1 < s.size() && s[i + 1] == '|') {
      t.type = Token::Type::Or;
      t.text = s.substr(i, 2);
      i += 2;
    } else if (is_word_char(c)) {
      std::size_t j = i;
      while (j < s.size() && is_word_char(s[j])) ++j;
      t.text = s.substr(i, j - i);
      if (t.text == "and") {
        t.type = Token::Type::And;
      } else if (t.text == "or") {
        t.type = Token::Type::Or;
      } else if (t.text == "not") {
        t.type = Token::Type::Not;
      } else {
        t.type = Token::Type::Word;
      }
      i = j;
    } else {
      throw FilterError(FilterError::Kind::Syntax, i + 1, std::string("unexpected character '") + c + "'");
    }
    out.push_back(t);
  }
  Token end;
  end.type = Token::Type::End;
  end.column = s.size() + 1;
  out.push_back(end);
  return out;
}

std::optional<std::uint32_t> parse_uint(std::string_view s) {
  if (s.empty() || s.size() > 9) return std::nullopt;
  std::uint32_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + static_cast<std::uint32_t>(c - '0');
  }
  return v;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

  FilterAst run() {
    if (tokens_.size() == 1) throw FilterError(FilterError::Kind::Syntax, 1, "empty expression");
    const std::uint32_t root = expr();
    if (peek().type != Token::Type::End) {
      throw FilterError(FilterError::Kind::Syntax, peek().column,
                        "expected 'and', 'or' or end of input, found '" + std::string(peek().text) + "'");
    }
    ast_.set_root(root);
    return std::move(ast_);
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  const Token& take() { return tokens_[pos_++]; }

  std::uint32_t node(const FilterNode& n, std::size_t depth, std::size_t column) {
    if (depth > kMaxFilterDepth) {
      throw FilterError(FilterError::Kind::Syntax, column,
                        "expression deeper than " + std::to_string(kMaxFilterDepth) + " levels");
    }
    const std::uint32_t id = ast_.add(n);
    depths_.push_back(depth);
    return id;
  }

  std::uint32_t binary(FilterOp op, std::uint32_t l, std::uint32_t r, std::size_t column) {
    FilterNode n;
    n.op = op;
    n.left = l;
    n.right = r;
    return node(n, 1 + std::max(depths_[l], depths_[r]), column);
  }

  void enter(const Token& t) {
    if (++nesting_ > kMaxNesting) throw FilterError(FilterError::Kind::Syntax, t.column, "expression nested too deeply");
  }

  std::uint32_t expr() {
    std::uint32_t left = term();
    while (peek().type == Token::Type::Or) {
      const std::size_t col = take().column;
      const std::uint32_t right = term();
      left = binary(FilterOp::Or, left, right, col);
    }
    return left;
  }

  std::uint32_t term() {
    std::uint32_t left = factor();
    while (peek().type == Token::Type::And) {
      const std::size_t col = take().column;
      const std::uint32_t right = factor();
      left = binary(FilterOp::And, left, right, col);
    }
    return left;
  }

  std::uint32_t factor() {
    const Token& t = peek();
    switch (t.type) {
      case Token::Type::Not: {
        enter(take());
        const std::uint32_t x = factor();
        --nesting_;
        FilterNode n;
        n.op = FilterOp::Not;
        n.left = x;
        return node(n, 1 + depths_[x], t.column);
      }
      case Token::Type::LParen: {
        enter(take());
        const std::uint32_t x = expr();
        if (peek().type != Token::Type::RParen) {
          throw FilterError(FilterError::Kind::Syntax, peek().column, "expected ')'");
        }
        take();
        --nesting_;
        return x;
      }
      case Token::Type::Word:
        return primitive();
      case Token::Type::End:
        throw FilterError(FilterError::Kind::Syntax, t.column, "unexpected end of input, expected a primitive");
      default:
        throw FilterError(FilterError::Kind::Syntax, t.column,
                          "expected a primitive, found '" + std::string(t.text) + "'");
    }
  }

  std::uint32_t primitive() {
    const Token& first = take();
    FilterNode n;
    if (first.text == "tcp" || first.text == "udp" || first.text == "icmp" || first.text == "gre") {
      n.op = FilterOp::Proto;
      n.proto = first.text == "tcp"   ? IpProto::Tcp
                : first.text == "udp" ? IpProto::Udp
                : first.text == "icmp" ? IpProto::Icmp
                                       : IpProto::Gre;
      return node(n, 1, first.column);
    }
    const Token* kw = &first;
    if (first.text == "src" || first.text == "dst") {
      n.dir = first.text == "src" ? FilterDir::Src : FilterDir::Dst;
      kw = &take();
      if (kw->type != Token::Type::Word) {
        throw FilterError(FilterError::Kind::Syntax, kw->column, "expected 'host', 'net', 'port' or 'portrange'");
      }
    }
    const std::string_view k = kw->text;
    if (k != "host" && k != "net" && k != "port" && k != "portrange") {
      throw FilterError(FilterError::Kind::Syntax, kw->column,
                        (kw == &first ? std::string("unknown primitive '") : std::string("expected 'host', 'net', 'port' or 'portrange', found '")) +
                            std::string(k) + "'");
    }
    const Token& arg = take();
    if (arg.type != Token::Type::Word) {
      throw FilterError(FilterError::Kind::Syntax, arg.column, "expected a value after '" + std::string(k) + "'");
    }
    if (k == "host") {
      auto ip = Ipv4::parse(arg.text);
      if (!ip) throw FilterError(FilterError::Kind::Value, arg.column, "bad IPv4 address '" + std::string(arg.text) + "'");
      n.op = FilterOp::Host;
      n.net = Cidr{*ip, 32};
    } else if (k == "net") {
      auto c = Cidr::parse(arg.text);
      if (!c) throw FilterError(FilterError::Kind::Value, arg.column, "bad network '" + std::string(arg.text) + "'");
      n.op = FilterOp::Net;
      n.net = *c;
    } else if (k == "port") {
      auto v = parse_uint(arg.text);
      if (!v) throw FilterError(FilterError::Kind::Syntax, arg.column, "expected a port number");
      if (*v > 65535) throw FilterError(FilterError::Kind::Value, arg.column, "port out of range");
      n.op = FilterOp::Port;
      n.lo = n.hi = static_cast<std::uint16_t>(*v);
    } else {
      const auto dash = arg.text.find('-');
      if (dash == std::string_view::npos) {
        throw FilterError(FilterError::Kind::Syntax, arg.column, "expected a range N-M");
      }
      auto lo = parse_uint(arg.text.substr(0, dash));
      auto hi = parse_uint(arg.text.substr(dash + 1));
      if (!lo || !hi) throw FilterError(FilterError::Kind::Syntax, arg.column, "expected a range N-M");
      if (*lo > 65535 || *hi > 65535) throw FilterError(FilterError::Kind::Value, arg.column, "port out of range");
      if (*lo > *hi) throw FilterError(FilterError::Kind::Value, arg.column, "empty port range");
      n.op = FilterOp::PortRange;
      n.lo = static_cast<std::uint16_t>(*lo);
      n.hi = static_cast<std::uint16_t>(*hi);
    }
    return node(n, 1, first.column);
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::size_t nesting_ = 0;
  FilterAst ast_;
  std::vector<std::size_t> depths_;
};

std::string_view dir_prefix(FilterDir d) {
  switch (d) {
    case FilterDir::Src: return "src ";
    case FilterDir::Dst: return "dst ";
    case FilterDir::Either: return "";
  }
  return "";
}

bool match_addr(const FilterNode& n, const PacketRecord& p) {
  switch (n.dir) {
    case FilterDir::Src: return n.net.contains(p.src_ip);
    case FilterDir::Dst: return n.net.contains(p.dst_ip);
    case FilterDir::Either: return n.net.contains(p.src_ip) || n.net.contains(p.dst_ip);
  }
  return false;
}

bool match_port(const FilterNode& n, const PacketRecord& p) {
  if (!p.has_ports()) return false;
  auto in = [&](std::uint16_t port) { return port >= n.lo && port <= n.hi; };
  switch (n.dir) {
    case FilterDir::Src: return in(p.src_port);
    case FilterDir::Dst: return in(p.dst_port);
    case FilterDir::Either: return in(p.src_port) || in(p.dst_port);
  }
  return false;
}

bool eval_node(const FilterAst& ast, std::uint32_t i, const PacketRecord& p) {
  const FilterNode& n = ast.node(i);
  switch (n.op) {
    case FilterOp::And: return eval_node(ast, n.left, p) && eval_node(ast, n.right, p);
    case FilterOp::Or: return eval_node(ast, n.left, p) || eval_node(ast, n.right, p);
    case FilterOp::Not: return !eval_node(ast, n.left, p);
    case FilterOp::Proto: return p.ip_proto == n.proto;
    case FilterOp::Host:
    case FilterOp::Net: return match_addr(n, p);
    case FilterOp::Port:
    case FilterOp::PortRange: return match_port(n, p);
  }
  return false;
}

std::optional<std::set<std::uint16_t>> dst_ports(const FilterAst& ast, std::uint32_t i) {
  const FilterNode& n = ast.node(i);
  switch (n.op) {
    case FilterOp::And: {
      auto l = dst_ports(ast, n.left);
      auto r = dst_ports(ast, n.right);
      if (!l) return r;
      if (!r) return l;
      std::set<std::uint16_t> both;
      std::set_intersection(l->begin(), l->end(), r->begin(), r->end(), std::inserter(both, both.end()));
      return both;
    }
    case FilterOp::Or: {
      auto l = dst_ports(ast, n.left);
      auto r = dst_ports(ast, n.right);
      if (!l || !r) return std::nullopt;
      l->insert(r->begin(), r->end());
      return l;
    }
    case FilterOp::Port:
    case FilterOp::PortRange:
      if (n.dir != FilterDir::Dst || n.hi - n.lo > 64) return std::nullopt;
      {
        std::set<std::uint16_t> s;
        for (std::uint32_t p = n.lo; p <= n.hi; ++p) s.insert(static_cast<std::uint16_t>(p));
        return s;
      }
    default:
      return std::nullopt;
  }
}

bool equal_nodes(const FilterAst& a, std::uint32_t i, const FilterAst& b, std::uint32_t j) {
  const FilterNode& x = a.node(i);
  const FilterNode& y = b.node(j);
  if (x.op != y.op) return false;
  switch (x.op) {
    case FilterOp::And:
    case FilterOp::Or:
      return equal_nodes(a, x.left, b, y.left) && equal_nodes(a, x.right, b, y.right);
    case FilterOp::Not: return equal_nodes(a, x.left, b, y.left);
    case FilterOp::Proto: return x.proto == y.proto;
    case FilterOp::Host:
    case FilterOp::Net: return x.dir == y.dir && x.net == y.net;
    case FilterOp::Port:
    case FilterOp::PortRange: return x.dir == y.dir && x.lo == y.lo && x.hi == y.hi;
  }
  return false;
}

std::size_t depth_of(const FilterAst& ast, std::uint32_t i) {
  const FilterNode& n = ast.node(i);
  switch (n.op) {
    case FilterOp::And:
    case FilterOp::Or: return 1 + std::max(depth_of(ast, n.left), depth_of(ast, n.right));
    case FilterOp::Not: return 1 + depth_of(ast, n.left);
    default: return 1;
  }
}

}  // namespace

std::size_t FilterAst::depth() const { return nodes_.empty() ? 0 : depth_of(*this, root_); }

FilterAst parse_filter(std::string_view text) { return Parser(text).run(); }

std::string to_string(const FilterAst& ast, std::uint32_t i) {
  const FilterNode& n = ast.node(i);
  switch (n.op) {
    case FilterOp::And:
    case FilterOp::Or:
      return "(" + to_string(ast, n.left) + (n.op == FilterOp::And ? " and " : " or ") + to_string(ast, n.right) + ")";
    case FilterOp::Not: return "not " + to_string(ast, n.left);
    case FilterOp::Proto: return std::string(tiktriage::to_string(n.proto));
    case FilterOp::Host: return std::string(dir_prefix(n.dir)) + "host " + n.net.network.to_string();
    case FilterOp::Net: return std::string(dir_prefix(n.dir)) + "net " + n.net.to_string();
    case FilterOp::Port: return std::string(dir_prefix(n.dir)) + "port " + std::to_string(n.lo);
    case FilterOp::PortRange:
      return std::string(dir_prefix(n.dir)) + "portrange " + std::to_string(n.lo) + "-" + std::to_string(n.hi);
  }
  return {};
}

std::string to_string(const FilterAst& ast) { return ast.empty() ? std::string() : to_string(ast, ast.root()); }

bool eval_filter(const FilterAst& ast, const PacketRecord& pkt) {
  return !ast.empty() && eval_node(ast, ast.root(), pkt);
}

bool structurally_equal(const FilterAst& a, const FilterAst& b) {
  if (a.empty() || b.empty()) return a.empty() && b.empty();
  return equal_nodes(a, a.root(), b, b.root());
}

std::set<std::uint16_t> required_dst_ports(const FilterAst& ast) {
  if (ast.empty()) return {};
  return dst_ports(ast, ast.root()).value_or(std::set<std::uint16_t>{});
}

}  // namespace tiktriage
