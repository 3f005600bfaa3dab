#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <unordered_set>
#include <vector>

#include "ncsim/catalog.hpp"
#include "ncsim/ids.hpp"

namespace ncsim {

enum class PacketKind { data, ack };

struct NativePacket {
    std::uint64_t id = 0;
    FlowId flow;
    PacketKind kind = PacketKind::data;
    std::uint32_t seq = 0;
    std::uint32_t size = 500; // bytes
    double created_at = 0.0;
    // Congestion price accumulated along the path (data) or echoed back (ack).
    double price = 0.0;
};

/// Where a coded packet stands in a butterfly code: `first` travels to the
/// common relay undecoded, `second` is the relay's broadcast leg.
enum class CodeStage { none, butterfly_first, butterfly_second };

struct CodedPacket {
    struct Entry {
        NativePacket pkt;
        NodeId next_hop;
    };
    std::vector<Entry> natives;
    NodeId origin;
    CodeStage stage = CodeStage::none;

    [[nodiscard]] bool coded() const { return natives.size() > 1; }
    [[nodiscard]] bool is_ack() const
    {
        return natives.size() == 1 && natives[0].pkt.kind == PacketKind::ack;
    }
    [[nodiscard]] std::uint32_t size() const
    {
        std::uint32_t s = 0;
        for (const auto& e : natives)
            s = std::max(s, e.pkt.size);
        return s;
    }
    [[nodiscard]] std::vector<FlowId> flows() const
    {
        std::vector<FlowId> out;
        for (const auto& e : natives)
            out.push_back(e.pkt.flow);
        std::sort(out.begin(), out.end());
        return out;
    }
    [[nodiscard]] bool carries(FlowId s) const
    {
        return std::any_of(natives.begin(), natives.end(),
                           [&](const Entry& e) { return e.pkt.flow == s; });
    }
    [[nodiscard]] std::vector<NodeId> targets() const
    {
        std::vector<NodeId> out;
        for (const auto& e : natives)
            out.push_back(e.next_hop);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

inline CodedPacket make_uncoded(const NativePacket& p, NodeId origin, NodeId next_hop)
{
    return CodedPacket{{{p, next_hop}}, origin, CodeStage::none};
}

/// Native packet ids a node can use for decoding, oldest evicted first.
class DecodingBuffer {
public:
    explicit DecodingBuffer(std::size_t capacity = 64) : capacity_(capacity) {}

    void insert(std::uint64_t id)
    {
        if (capacity_ == 0 || ids_.count(id))
            return;
        if (order_.size() == capacity_) {
            ids_.erase(order_.front());
            order_.pop_front();
        }
        order_.push_back(id);
        ids_.insert(id);
    }
    [[nodiscard]] bool contains(std::uint64_t id) const { return ids_.count(id) != 0; }
    [[nodiscard]] std::size_t size() const { return order_.size(); }
    [[nodiscard]] std::size_t capacity() const { return capacity_; }
    [[nodiscard]] const std::deque<std::uint64_t>& ids() const { return order_; }

private:
    std::size_t capacity_;
    std::deque<std::uint64_t> order_;
    std::unordered_set<std::uint64_t> ids_;
};

/// Per-flow forward and reverse routes with position lookup.
class RouteTable {
public:
    RouteTable() = default;
    explicit RouteTable(const std::vector<Flow>& flows)
    {
        for (const Flow& f : flows) {
            fwd_.push_back(f.path);
            rev_.emplace_back(f.path.rbegin(), f.path.rend());
        }
    }

    [[nodiscard]] const std::vector<NodeId>& path(FlowId s, PacketKind k) const
    {
        return k == PacketKind::data ? fwd_[s.index()] : rev_[s.index()];
    }
    [[nodiscard]] std::size_t position(const NativePacket& p, NodeId v) const
    {
        const auto& path = this->path(p.flow, p.kind);
        auto it = std::find(path.begin(), path.end(), v);
        return it == path.end() ? path.size() : static_cast<std::size_t>(it - path.begin());
    }
    /// Node `ahead` hops after v on the packet's route, or an invalid id.
    [[nodiscard]] NodeId after(const NativePacket& p, NodeId v, std::size_t ahead = 1) const
    {
        const auto& path = this->path(p.flow, p.kind);
        const std::size_t i = position(p, v);
        if (i + ahead >= path.size())
            return NodeId{};
        return path[i + ahead];
    }
    [[nodiscard]] bool is_destination(const NativePacket& p, NodeId v) const
    {
        return path(p.flow, p.kind).back() == v;
    }
    [[nodiscard]] std::size_t flow_count() const { return fwd_.size(); }

private:
    std::vector<std::vector<NodeId>> fwd_, rev_;
};

} // namespace ncsim
