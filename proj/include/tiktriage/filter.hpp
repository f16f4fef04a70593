#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tiktriage/net.hpp"
#include "tiktriage/packet.hpp"

namespace tiktriage {

enum class FilterDir : std::uint8_t { Src, Dst, Either };

enum class FilterOp : std::uint8_t { And, Or, Not, Proto, Host, Net, Port, PortRange };

inline constexpr std::size_t kMaxFilterDepth = 64;

/// Node of a filter expression tree. Children are indices into the owning
/// FilterAst's node array.
struct FilterNode {
  FilterOp op = FilterOp::Proto;
  FilterDir dir = FilterDir::Either;
  IpProto proto = IpProto::Tcp;
  Cidr net;  // Host uses prefix 32
  std::uint16_t lo = 0;
  std::uint16_t hi = 0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
};

class FilterAst {
 public:
  std::uint32_t add(const FilterNode& n) {
    nodes_.push_back(n);
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }
  std::uint32_t root() const { return root_; }
  void set_root(std::uint32_t r) { root_ = r; }
  const FilterNode& node(std::uint32_t i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  std::size_t depth() const;

  // Builders for hand-constructed trees.
  std::uint32_t make_and(std::uint32_t l, std::uint32_t r) { return add(binary(FilterOp::And, l, r)); }
  std::uint32_t make_or(std::uint32_t l, std::uint32_t r) { return add(binary(FilterOp::Or, l, r)); }
  std::uint32_t make_not(std::uint32_t x) {
    FilterNode n;
    n.op = FilterOp::Not;
    n.left = x;
    return add(n);
  }
  std::uint32_t make_proto(IpProto p) {
    FilterNode n;
    n.op = FilterOp::Proto;
    n.proto = p;
    return add(n);
  }
  std::uint32_t make_host(FilterDir d, Ipv4 ip) {
    FilterNode n;
    n.op = FilterOp::Host;
    n.dir = d;
    n.net = Cidr{ip, 32};
    return add(n);
  }
  std::uint32_t make_net(FilterDir d, Cidr c) {
    FilterNode n;
    n.op = FilterOp::Net;
    n.dir = d;
    n.net = c;
    return add(n);
  }
  std::uint32_t make_port(FilterDir d, std::uint16_t port) {
    FilterNode n;
    n.op = FilterOp::Port;
    n.dir = d;
    n.lo = n.hi = port;
    return add(n);
  }
  std::uint32_t make_portrange(FilterDir d, std::uint16_t lo, std::uint16_t hi) {
    FilterNode n;
    n.op = FilterOp::PortRange;
    n.dir = d;
    n.lo = lo;
    n.hi = hi;
    return add(n);
  }

 private:
  static FilterNode binary(FilterOp op, std::uint32_t l, std::uint32_t r) {
    FilterNode n;
    n.op = op;
    n.left = l;
    n.right = r;
    return n;
  }

  std::vector<FilterNode> nodes_;
  std::uint32_t root_ = 0;
};

class FilterError : public std::runtime_error {
 public:
  enum class Kind { Syntax, Value };

  FilterError(Kind kind, std::size_t column, const std::string& detail)
      : std::runtime_error((kind == Kind::Syntax ? "syntax error at column " : "invalid value at column ") +
                           std::to_string(column) + ": " + detail),
        kind_(kind),
        column_(column),
        detail_(detail) {}

  Kind kind() const { return kind_; }
  /// 1-based column of the offending token.
  std::size_t column() const { return column_; }
  const std::string& detail() const { return detail_; }

 private:
  Kind kind_;
  std::size_t column_;
  std::string detail_;
};

/// Parses the filter subset:
///   expr    := term (("or" | "||") term)*
///   term    := factor (("and" | "&&") factor)*
///   factor  := ("not" | "!") factor | "(" expr ")" | primitive
///   primitive := tcp | udp | icmp | gre
///              | [src|dst] host A.B.C.D | [src|dst] net A.B.C.D/len
///              | [src|dst] port N | [src|dst] portrange N-M
FilterAst parse_filter(std::string_view text);

/// Canonical text. Binary operands are always parenthesized so reparsing
/// yields the same tree shape.
std::string to_string(const FilterAst& ast);
std::string to_string(const FilterAst& ast, std::uint32_t node);

bool eval_filter(const FilterAst& ast, const PacketRecord& pkt);
bool structurally_equal(const FilterAst& a, const FilterAst& b);

/// Destination ports that every matching packet must use, when that set is
/// statically known and small; empty when unconstrained.
std::set<std::uint16_t> required_dst_ports(const FilterAst& ast);

}  // namespace tiktriage
