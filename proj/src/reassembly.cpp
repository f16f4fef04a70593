#include "tiktriage/reassembly.hpp"

#include <optional>

namespace tiktriage {

std::vector<std::pair<std::size_t, std::size_t>> StreamPayload::runs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t at = 0;
  for (auto [off, len] : gaps) {
    if (off > at) out.emplace_back(at, off);
    at = off + len;
  }
  if (at < bytes.size()) out.emplace_back(at, bytes.size());
  return out;
}

namespace {

class Builder {
 public:
  explicit Builder(std::size_t cap) : cap_(cap) {}

  void add(const PacketRecord& p) {
    std::uint32_t data_seq = p.tcp_seq;
    if (p.has(tcp_flag::kSyn)) data_seq += 1;
    if (!base_) base_ = data_seq;
    if (p.payload.empty()) return;
    // Relative offset with 32-bit wraparound; anything before the base is dropped.
    const std::uint32_t rel = data_seq - *base_;
    std::size_t skip = 0;
    std::uint64_t start = rel;
    if (rel >= 0x80000000u) {
      const std::uint32_t behind = *base_ - data_seq;
      if (behind >= p.payload.size()) return;
      skip = behind;
      start = 0;
    }
    for (std::size_t i = skip; i < p.payload.size(); ++i) {
      const std::uint64_t off = start + (i - skip);
      if (off >= cap_) {
        truncated_ = true;
        break;
      }
      if (off >= bytes_.size()) {
        bytes_.resize(off + 1, 0);
        filled_.resize(off + 1, false);
      }
      if (!filled_[off]) {
        filled_[off] = true;
        bytes_[off] = p.payload[i];
      }
    }
  }

  void finish(StreamPayload& out) {
    out.bytes = std::move(bytes_);
    out.truncated = truncated_;
    std::size_t i = 0;
    while (i < filled_.size()) {
      if (filled_[i]) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < filled_.size() && !filled_[j]) ++j;
      out.gaps.emplace_back(i, j - i);
      i = j;
    }
  }

 private:
  std::size_t cap_;
  std::optional<std::uint32_t> base_;
  std::vector<std::uint8_t> bytes_;
  std::vector<bool> filled_;
  bool truncated_ = false;
};

}  // namespace

StreamPair reassemble_stream(const FlowRecord& flow, std::span<const PacketRecord> packets, std::size_t max_bytes) {
  if (flow.ip_proto != IpProto::Tcp) throw ReassemblyError(ReassemblyError::Kind::NotTcp);
  Builder fwd(max_bytes);
  Builder rev(max_bytes);
  for (std::size_t idx : flow.packet_indices) {
    const PacketRecord& p = packets[idx];
    if (p.ip_proto != IpProto::Tcp) throw ReassemblyError(ReassemblyError::Kind::NotTcp);
    (flow.is_forward(p) ? fwd : rev).add(p);
  }
  StreamPair out;
  out.fwd.flow_id = out.rev.flow_id = flow.flow_id;
  out.fwd.direction = Direction::Fwd;
  out.rev.direction = Direction::Rev;
  fwd.finish(out.fwd);
  rev.finish(out.rev);
  return out;
}

}  // namespace tiktriage
