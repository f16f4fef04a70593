#pragma once

#include <memory>
#include <string>

#include "tiktriage/filter.hpp"
#include "tiktriage/packet.hpp"
#include "tiktriage/util.hpp"

namespace tt_test {

/// Reference filter tree, evaluated directly from the textbook semantics.
struct RefExpr {
  enum class Kind { And, Or, Not, Proto, Host, Net, Port, Range } kind = Kind::Proto;
  int dir = 2;  // 0 src, 1 dst, 2 either
  tiktriage::IpProto proto = tiktriage::IpProto::Tcp;
  std::uint32_t addr = 0;
  int prefix = 32;
  int lo = 0;
  int hi = 0;
  std::shared_ptr<RefExpr> a;
  std::shared_ptr<RefExpr> b;
};

inline bool ref_eval(const RefExpr& e, const tiktriage::PacketRecord& p) {
  using K = RefExpr::Kind;
  auto side = [&](auto&& test_src, auto&& test_dst) {
    if (e.dir == 0) return test_src();
    if (e.dir == 1) return test_dst();
    return test_src() || test_dst();
  };
  const bool ported = p.ip_proto == tiktriage::IpProto::Tcp || p.ip_proto == tiktriage::IpProto::Udp;
  const std::uint32_t mask = e.prefix == 0 ? 0u : 0xFFFFFFFFu << (32 - e.prefix);
  switch (e.kind) {
    case K::And: return ref_eval(*e.a, p) && ref_eval(*e.b, p);
    case K::Or: return ref_eval(*e.a, p) || ref_eval(*e.b, p);
    case K::Not: return !ref_eval(*e.a, p);
    case K::Proto: return p.ip_proto == e.proto;
    case K::Host:
      return side([&] { return p.src_ip.value == e.addr; }, [&] { return p.dst_ip.value == e.addr; });
    case K::Net:
      return side([&] { return (p.src_ip.value & mask) == (e.addr & mask); },
                  [&] { return (p.dst_ip.value & mask) == (e.addr & mask); });
    case K::Port:
    case K::Range:
      if (!ported) return false;
      return side([&] { return p.src_port >= e.lo && p.src_port <= e.hi; },
                  [&] { return p.dst_port >= e.lo && p.dst_port <= e.hi; });
  }
  return false;
}

/// Small value pools so random packets hit the predicates often.
inline constexpr std::uint32_t kPoolAddrs[] = {0x0A000001, 0x0A000102, 0xC0A80101, 0xC6120005, 0x08080808};
inline constexpr int kPoolPorts[] = {22, 23, 80, 443, 2323, 8291, 8728};

inline std::shared_ptr<RefExpr> random_ref(tiktriage::Rng& rng, int depth) {
  using K = RefExpr::Kind;
  auto e = std::make_shared<RefExpr>();
  const auto pick = rng.below(depth >= 4 ? 5 : 8);
  if (pick >= 5) {
    e->kind = pick == 5 ? K::And : pick == 6 ? K::Or : K::Not;
    e->a = random_ref(rng, depth + 1);
    if (e->kind != K::Not) e->b = random_ref(rng, depth + 1);
    return e;
  }
  e->kind = static_cast<K>(3 + pick);
  e->dir = static_cast<int>(rng.below(3));
  switch (e->kind) {
    case K::Proto: {
      static constexpr tiktriage::IpProto kProtos[] = {tiktriage::IpProto::Tcp, tiktriage::IpProto::Udp,
                                                       tiktriage::IpProto::Icmp, tiktriage::IpProto::Gre};
      e->proto = kProtos[rng.below(4)];
      break;
    }
    case K::Host: e->addr = kPoolAddrs[rng.below(std::size(kPoolAddrs))]; break;
    case K::Net: {
      e->prefix = static_cast<int>(rng.below(33));
      const std::uint32_t mask = e->prefix == 0 ? 0u : 0xFFFFFFFFu << (32 - e->prefix);
      e->addr = kPoolAddrs[rng.below(std::size(kPoolAddrs))] & mask;
      break;
    }
    case K::Port: e->lo = e->hi = kPoolPorts[rng.below(std::size(kPoolPorts))]; break;
    default: {
      int a = kPoolPorts[rng.below(std::size(kPoolPorts))];
      int b = kPoolPorts[rng.below(std::size(kPoolPorts))];
      if (a > b) std::swap(a, b);
      e->lo = a;
      e->hi = b;
      break;
    }
  }
  return e;
}

inline std::string dotted(std::uint32_t v) { return tiktriage::Ipv4(v).to_string(); }

/// Renders with randomized keyword spellings, spacing and redundant parentheses.
inline std::string render_ref(const RefExpr& e, tiktriage::Rng& rng) {
  using K = RefExpr::Kind;
  auto ws = [&] { return std::string(1 + rng.below(2), ' '); };
  auto wrap = [&](const RefExpr& child, bool needed) {
    const std::string inner = render_ref(child, rng);
    return needed || rng.chance(0.2) ? "(" + inner + ")" : inner;
  };
  static const char* kDir[] = {"src ", "dst ", ""};
  switch (e.kind) {
    case K::And:
      return wrap(*e.a, e.a->kind == K::Or) + ws() + (rng.chance(0.5) ? "and" : "&&") + ws() +
             wrap(*e.b, e.b->kind == K::Or || e.b->kind == K::And);
    case K::Or:
      return wrap(*e.a, false) + ws() + (rng.chance(0.5) ? "or" : "||") + ws() + wrap(*e.b, e.b->kind == K::Or);
    case K::Not: {
      const bool bin = e.a->kind == K::And || e.a->kind == K::Or;
      return std::string(rng.chance(0.5) ? "not " : "!") + wrap(*e.a, bin);
    }
    case K::Proto: return std::string(tiktriage::to_string(e.proto));
    case K::Host: return std::string(kDir[e.dir]) + "host " + dotted(e.addr);
    case K::Net: return std::string(kDir[e.dir]) + "net " + dotted(e.addr) + "/" + std::to_string(e.prefix);
    case K::Port: return std::string(kDir[e.dir]) + "port " + std::to_string(e.lo);
    case K::Range:
      return std::string(kDir[e.dir]) + "portrange " + std::to_string(e.lo) + "-" + std::to_string(e.hi);
  }
  return {};
}

inline tiktriage::PacketRecord random_filter_packet(tiktriage::Rng& rng) {
  tiktriage::PacketRecord p;
  static constexpr tiktriage::IpProto kProtos[] = {tiktriage::IpProto::Tcp, tiktriage::IpProto::Udp,
                                                   tiktriage::IpProto::Icmp, tiktriage::IpProto::Gre,
                                                   tiktriage::IpProto::Other};
  p.ip_proto = kProtos[rng.below(5)];
  p.ip_proto_code = p.ip_proto == tiktriage::IpProto::Other ? 89 : tiktriage::proto_code(p.ip_proto);
  auto addr = [&] {
    return rng.chance(0.7) ? tiktriage::Ipv4(kPoolAddrs[rng.below(std::size(kPoolAddrs))] ^
                                             static_cast<std::uint32_t>(rng.chance(0.3) ? rng.below(256) : 0))
                           : tiktriage::Ipv4(static_cast<std::uint32_t>(rng.next()));
  };
  p.src_ip = addr();
  p.dst_ip = addr();
  if (p.has_ports()) {
    auto port = [&] {
      return static_cast<std::uint16_t>(rng.chance(0.7) ? kPoolPorts[rng.below(std::size(kPoolPorts))]
                                                        : rng.below(65536));
    };
    p.src_port = port();
    p.dst_port = port();
  }
  return p;
}

/// Random tree through the library's own builders.
inline std::uint32_t random_ast(tiktriage::FilterAst& ast, tiktriage::Rng& rng, int depth) {
  const auto pick = rng.below(depth >= 5 ? 6 : 9);
  const auto dir = static_cast<tiktriage::FilterDir>(rng.below(3));
  switch (pick) {
    case 0: return ast.make_proto(rng.chance(0.5) ? tiktriage::IpProto::Tcp : tiktriage::IpProto::Gre);
    case 1: return ast.make_host(dir, tiktriage::Ipv4(static_cast<std::uint32_t>(rng.next())));
    case 2: {
      const auto prefix = static_cast<std::uint8_t>(rng.below(33));
      const auto v = static_cast<std::uint32_t>(rng.next()) & tiktriage::Cidr::mask_for(prefix);
      return ast.make_net(dir, tiktriage::Cidr{tiktriage::Ipv4(v), prefix});
    }
    case 3:
    case 4: return ast.make_port(dir, static_cast<std::uint16_t>(rng.below(65536)));
    case 5: {
      auto a = static_cast<std::uint16_t>(rng.below(65536));
      auto b = static_cast<std::uint16_t>(rng.below(65536));
      if (a > b) std::swap(a, b);
      return ast.make_portrange(dir, a, b);
    }
    case 6: {
      const auto l = random_ast(ast, rng, depth + 1);
      return ast.make_and(l, random_ast(ast, rng, depth + 1));
    }
    case 7: {
      const auto l = random_ast(ast, rng, depth + 1);
      return ast.make_or(l, random_ast(ast, rng, depth + 1));
    }
    default: return ast.make_not(random_ast(ast, rng, depth + 1));
  }
}

}  // namespace tt_test
