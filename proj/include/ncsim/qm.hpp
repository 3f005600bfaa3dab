#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncsim/catalog.hpp"
#include "ncsim/packet.hpp"

namespace ncsim {

enum class Discipline { nonc, cope, bfly, ncaqm };
enum class DropFallback { tail, incoming };

inline Discipline parse_discipline(const std::string& s)
{
    if (s == "nonc" || s == "noNC")
        return Discipline::nonc;
    if (s == "cope" || s == "COPE")
        return Discipline::cope;
    if (s == "bfly" || s == "BFLY")
        return Discipline::bfly;
    if (s == "ncaqm" || s == "NCAQM")
        return Discipline::ncaqm;
    throw std::invalid_argument("unknown queue discipline '" + s + "'");
}

inline const char* discipline_name(Discipline d)
{
    switch (d) {
    case Discipline::nonc: return "nonc";
    case Discipline::cope: return "cope";
    case Discipline::bfly: return "bfly";
    case Discipline::ncaqm: return "ncaqm";
    }
    return "?";
}

/// Catalog depth a discipline needs; NCAQM follows the scenario.
inline CodingDepth depth_for(Discipline d, CodingDepth scenario)
{
    switch (d) {
    case Discipline::nonc: return CodingDepth::none;
    case Discipline::cope: return CodingDepth::one_hop;
    case Discipline::bfly: return CodingDepth::two_hop;
    case Discipline::ncaqm: return scenario;
    }
    return scenario;
}

struct QmConfig {
    Discipline discipline = Discipline::ncaqm;
    std::size_t buffer = 10;      // packets
    std::size_t window = 100;     // transmissions per split estimate
    double recode_interval = 0.0; // seconds; 0 recodes on every enqueue
    DropFallback fallback = DropFallback::tail;
};

/// Whether node `who` holds native packet `id`, as seen by the sender.
using Knowledge = std::function<bool(NodeId who, std::uint64_t id)>;

/// Shared read-only state the disciplines consult.
struct QmContext {
    const Network* net = nullptr;
    const RouteTable* routes = nullptr;
};

namespace detail {

inline bool knows_others(const std::vector<CodedPacket::Entry>& natives, std::size_t i, NodeId who,
                         const Knowledge& knows)
{
    for (std::size_t j = 0; j < natives.size(); ++j)
        if (j != i && !knows(who, natives[j].pkt.id))
            return false;
    return true;
}

inline bool has_ack(const CodedPacket& p)
{
    return std::any_of(p.natives.begin(), p.natives.end(),
                       [](const auto& e) { return e.pkt.kind == PacketKind::ack; });
}

} // namespace detail

/// Catalogued code a packet is sent with from node v (none for ACKs).
inline std::optional<CodeId> code_of(const CodedPacket& p, NodeId v, const QmContext& ctx)
{
    if (detail::has_ack(p))
        return std::nullopt;
    CodeKind kind = CodeKind::singleton;
    if (p.stage == CodeStage::butterfly_first)
        kind = CodeKind::butterfly_first;
    else if (p.stage == CodeStage::butterfly_second)
        kind = CodeKind::butterfly_second;
    else if (p.coded())
        kind = CodeKind::one_hop;
    return ctx.net->catalog.find(v, p.flows(), kind);
}

/// Hyperarc whose target set is the packet's next hops.
inline HyperarcId hyperarc_of(const CodedPacket& p, NodeId v, const QmContext& ctx)
{
    if (auto k = code_of(p, v, ctx))
        return ctx.net->catalog.code(*k).hyperarc;
    auto h = ctx.net->graph.find_hyperarc(v, p.targets());
    if (!h)
        throw std::logic_error("no hyperarc for packet at node " + std::to_string(v.value));
    return *h;
}

/// Sender-side eligibility of a packet leaving v: distinct flows, a catalogued
/// code, and every native decodable at its decode point.
inline bool eligible(const CodedPacket& p, NodeId v, const QmContext& ctx, const Knowledge& knows)
{
    if (!p.coded())
        return true;
    if (detail::has_ack(p))
        return false;
    auto flows = p.flows();
    if (std::adjacent_find(flows.begin(), flows.end()) != flows.end())
        return false;
    if (!code_of(p, v, ctx))
        return false;
    if (p.stage == CodeStage::butterfly_first)
        for (std::size_t i = 0; i < p.natives.size(); ++i) {
            const NodeId d = ctx.routes->after(p.natives[i].pkt, v, 2);
            if (!d.valid() || !detail::knows_others(p.natives, i, d, knows))
                return false;
        }
    else if (p.stage == CodeStage::none)
        for (std::size_t i = 0; i < p.natives.size(); ++i)
            if (!detail::knows_others(p.natives, i, p.natives[i].next_hop, knows))
                return false;
    return true;
}

/// a ⊕ b at node v if the combination is eligible. Butterfly combinations of
/// two natives sharing a next hop are admitted when `butterfly` is set.
inline std::optional<CodedPacket> try_combine(const CodedPacket& a, const CodedPacket& b, NodeId v,
                                              const QmContext& ctx, const Knowledge& knows,
                                              bool butterfly)
{
    if (a.stage != CodeStage::none || b.stage != CodeStage::none)
        return std::nullopt;
    if (detail::has_ack(a) || detail::has_ack(b))
        return std::nullopt;
    for (const auto& ea : a.natives)
        if (b.carries(ea.pkt.flow))
            return std::nullopt;
    CodedPacket c = a;
    c.natives.insert(c.natives.end(), b.natives.begin(), b.natives.end());
    if (eligible(c, v, ctx, knows))
        return c;
    if (butterfly && !a.coded() && !b.coded() &&
        a.natives[0].next_hop == b.natives[0].next_hop) {
        c.stage = CodeStage::butterfly_first;
        if (eligible(c, v, ctx, knows))
            return c;
    }
    return std::nullopt;
}

/// Single physical FIFO with per-flow native counts Q_i^s (data only).
class OutputQueue {
public:
    OutputQueue(std::size_t capacity, std::size_t flows) : capacity_(capacity), count_(flows, 0) {}

    [[nodiscard]] std::size_t size() const { return pkts_.size(); }
    [[nodiscard]] bool empty() const { return pkts_.empty(); }
    [[nodiscard]] std::size_t capacity() const { return capacity_; }
    [[nodiscard]] const CodedPacket& operator[](std::size_t i) const { return pkts_[i]; }
    [[nodiscard]] const std::vector<CodedPacket>& packets() const { return pkts_; }
    [[nodiscard]] std::size_t natives_of(FlowId s) const { return count_[s.index()]; }
    [[nodiscard]] const std::vector<std::size_t>& counts() const { return count_; }

    void push_back(CodedPacket p)
    {
        add(p, +1);
        pkts_.push_back(std::move(p));
    }
    void push_front(CodedPacket p)
    {
        add(p, +1);
        pkts_.insert(pkts_.begin(), std::move(p));
    }
    CodedPacket erase(std::size_t i)
    {
        CodedPacket p = std::move(pkts_[i]);
        pkts_.erase(pkts_.begin() + static_cast<std::ptrdiff_t>(i));
        add(p, -1);
        return p;
    }
    void replace(std::size_t i, CodedPacket p)
    {
        add(pkts_[i], -1);
        add(p, +1);
        pkts_[i] = std::move(p);
    }
    /// Recount natives from the stored packets and compare with Q_i^s.
    [[nodiscard]] bool consistent() const
    {
        std::vector<std::size_t> c(count_.size(), 0);
        for (const auto& p : pkts_)
            for (const auto& e : p.natives)
                if (e.pkt.kind == PacketKind::data)
                    ++c[e.pkt.flow.index()];
        return c == count_;
    }

private:
    void add(const CodedPacket& p, int sign)
    {
        for (const auto& e : p.natives)
            if (e.pkt.kind == PacketKind::data)
                count_[e.pkt.flow.index()] =
                    static_cast<std::size_t>(static_cast<long>(count_[e.pkt.flow.index()]) + sign);
    }

    std::size_t capacity_;
    std::vector<CodedPacket> pkts_;
    std::vector<std::size_t> count_;
};

/// Windowed estimate of α̌: the share of a flow's recent transmissions at
/// this node that used each code. Uniform over the flow's options until the
/// flow has been sent.
class SplitEstimator {
public:
    explicit SplitEstimator(std::size_t window = 100) : window_(window) {}

    /// One node transmission: the (flow, code) pairs it carried.
    void push(std::vector<std::pair<FlowId, CodeId>> used)
    {
        for (auto [s, k] : used) {
            ++uses_[{s, k}];
            ++flow_[s];
        }
        log_.push_back(std::move(used));
        if (log_.size() > window_) {
            for (auto [s, k] : log_.front()) {
                if (--uses_[{s, k}] == 0)
                    uses_.erase({s, k});
                if (--flow_[s] == 0)
                    flow_.erase(s);
            }
            log_.pop_front();
        }
    }

    /// α̌ for flow s on code k among `options` codes available to s here.
    [[nodiscard]] double alpha(FlowId s, CodeId k, std::size_t options) const
    {
        auto f = flow_.find(s);
        if (f == flow_.end())
            return options ? 1.0 / static_cast<double>(options) : 0.0;
        auto u = uses_.find({s, k});
        return u == uses_.end() ? 0.0
                                : static_cast<double>(u->second) / static_cast<double>(f->second);
    }
    [[nodiscard]] const std::deque<std::vector<std::pair<FlowId, CodeId>>>& log() const
    {
        return log_;
    }
    [[nodiscard]] std::size_t window() const { return window_; }

private:
    std::size_t window_;
    std::deque<std::vector<std::pair<FlowId, CodeId>>> log_;
    std::map<std::pair<FlowId, CodeId>, std::size_t> uses_;
    std::map<FlowId, std::size_t> flow_;
};

/// Virtual h-queue state at one node, indexed by catalog membership,
/// hyperarc and flow.
struct PhiBreakdown {
    std::map<std::size_t, double> alpha; // α̌ per membership leaving the node
    std::map<std::size_t, double> m;     // m̌ per membership
    std::map<HyperarcId, double> q_h;    // Q_h
    std::vector<double> phi;             // Φ_i^s per flow
};

/// Composes the dominance rule, h-queue sizes and per-flow Φ at node v from
/// per-flow counts Q_i^s and split estimates α̌.
inline PhiBreakdown compute_phi(const Network& net, NodeId v, const std::vector<std::size_t>& counts,
                                const std::function<double(std::size_t)>& alpha_of)
{
    const auto& cat = net.catalog;
    PhiBreakdown out;
    out.phi.assign(net.flows.size(), 0.0);
    for (CodeId k : cat.codes_at(v)) {
        const auto& es = cat.members_of_code(k);
        double best = 0.0;
        std::vector<double> val(es.size());
        for (std::size_t i = 0; i < es.size(); ++i) {
            const auto e = es[i];
            const double a = alpha_of(e);
            out.alpha[e] = a;
            val[i] = a * static_cast<double>(counts[cat.membership(e).flow.index()]);
            best = i == 0 ? val[i] : std::max(best, val[i]);
        }
        std::size_t ties = 0;
        for (double x : val)
            ties += x == best;
        for (std::size_t i = 0; i < es.size(); ++i)
            out.m[es[i]] = val[i] == best ? 1.0 / static_cast<double>(ties) : 0.0;
        out.q_h[cat.code(k).hyperarc] += best;
    }
    for (const auto& [e, a] : out.alpha) {
        const auto& mb = cat.membership(e);
        out.phi[mb.flow.index()] += out.q_h[mb.hyperarc] * a * out.m[e];
    }
    return out;
}

/// Per-node queue manager running one discipline.
class QueueManager {
public:
    struct Plan {
        CodedPacket pkt;
        HyperarcId hyperarc;
        std::vector<std::size_t> taken; // queue indices, ascending
        bool relay = false;             // forwarding data on behalf of others
        bool partner = false;           // a coding partner was queued
    };
    struct DropInfo {
        FlowId victim;
        bool dominant = false; // victim had m̌ > 0 on some code at drop time
        std::vector<double> phi;
    };

    QueueManager(NodeId v, QmConfig cfg, QmContext ctx)
        : v_(v), cfg_(cfg), ctx_(ctx), queue_(cfg.buffer, ctx.net->flows.size()),
          est_(cfg.window)
    {
        const auto& cat = ctx.net->catalog;
        for (CodeId k : cat.codes_at(v))
            for (auto e : cat.members_of_code(k))
                options_[cat.membership(e).flow]++;
        butterfly_ = (cfg.discipline == Discipline::bfly || cfg.discipline == Discipline::ncaqm) &&
                     cat.depth() == CodingDepth::two_hop;
    }

    [[nodiscard]] NodeId node() const { return v_; }
    [[nodiscard]] const OutputQueue& queue() const { return queue_; }
    [[nodiscard]] const QmConfig& config() const { return cfg_; }
    [[nodiscard]] const SplitEstimator& estimator() const { return est_; }
    [[nodiscard]] const std::vector<DropInfo>& drop_log() const { return drops_; }

    /// Appends p and applies the discipline's overflow rule. Returns the
    /// packets removed from the queue, possibly including p itself.
    std::vector<CodedPacket> enqueue(CodedPacket p, const Knowledge& knows, std::mt19937_64& rng)
    {
        std::vector<CodedPacket> dropped;
        if (cfg_.discipline != Discipline::ncaqm) {
            if (queue_.size() >= queue_.capacity())
                dropped.push_back(std::move(p));
            else
                queue_.push_back(std::move(p));
            return dropped;
        }
        const std::uint64_t incoming = p.natives.front().pkt.id;
        queue_.push_back(std::move(p));
        if (cfg_.recode_interval <= 0.0)
            recode(knows);
        while (queue_.size() > queue_.capacity())
            dropped.push_back(drop_packet(rng, incoming));
        return dropped;
    }

    /// Recoding pass over the whole queue.
    void recode(const Knowledge& knows)
    {
        for (std::size_t m = 0; m < queue_.size(); ++m)
            merge_into(m, knows);
    }

    [[nodiscard]] PhiBreakdown phi() const
    {
        return compute_phi(*ctx_.net, v_, queue_.counts(), [&](std::size_t e) {
            const auto& mb = ctx_.net->catalog.membership(e);
            return est_.alpha(mb.flow, mb.code, options_.at(mb.flow));
        });
    }

    /// Φ-based drop: one packet out of the queue.
    CodedPacket drop_packet(std::mt19937_64& rng, std::optional<std::uint64_t> incoming = {})
    {
        const PhiBreakdown pb = phi();
        std::vector<FlowId> present;
        for (std::size_t s = 0; s < pb.phi.size(); ++s)
            if (queue_.natives_of(FlowId{s}) > 0)
                present.push_back(FlowId{s});
        if (!present.empty()) {
            double best = pb.phi[present[0].index()];
            for (FlowId s : present)
                best = std::max(best, pb.phi[s.index()]);
            std::vector<FlowId> top;
            for (FlowId s : present)
                if (pb.phi[s.index()] == best)
                    top.push_back(s);
            const FlowId victim =
                top[std::uniform_int_distribution<std::size_t>(0, top.size() - 1)(rng)];
            bool dominant = false;
            for (const auto& [e, m] : pb.m)
                dominant = dominant || (ctx_.net->catalog.membership(e).flow == victim && m > 0.0);
            drops_.push_back({victim, dominant, pb.phi});
            for (std::size_t i = queue_.size(); i-- > 0;) {
                const CodedPacket& p = queue_[i];
                if (!p.coded() && p.stage == CodeStage::none && p.carries(victim) &&
                    p.natives[0].pkt.kind == PacketKind::data)
                    return queue_.erase(i);
            }
        }
        if (cfg_.fallback == DropFallback::incoming && incoming)
            for (std::size_t i = queue_.size(); i-- > 0;)
                if (!queue_[i].coded() && queue_[i].natives[0].pkt.id == *incoming)
                    return queue_.erase(i);
        return queue_.erase(queue_.size() - 1);
    }

    /// Picks the next packet to send without removing it. NCAQM first splits
    /// a stored combination that is no longer decodable (the Φ drop then restores
    /// l <= L, victims go to `dropped`) and merges into the head (the
    /// pre-transmit recoding pass).
    [[nodiscard]] std::optional<Plan> plan(const Knowledge& knows, std::mt19937_64& rng,
                                           std::vector<CodedPacket>* dropped = nullptr)
    {
        if (cfg_.discipline == Discipline::ncaqm && !queue_.empty() &&
            !eligible(queue_[0], v_, ctx_, knows)) {
            split_head();
            while (queue_.size() > queue_.capacity()) {
                auto d = drop_packet(rng);
                if (dropped)
                    dropped->push_back(std::move(d));
            }
        }
        if (queue_.empty())
            return std::nullopt;
        Plan pl;
        pl.taken = {0};
        if (cfg_.discipline == Discipline::ncaqm) {
            merge_into(0, knows);
            pl.pkt = queue_[0];
        } else {
            pl.pkt = queue_[0];
            if (cfg_.discipline != Discipline::nonc && !pl.pkt.coded() &&
                pl.pkt.stage == CodeStage::none)
                // Only the first queued packet of each flow is a candidate,
                // which keeps every flow in FIFO order.
                for (std::size_t n = 1; n < queue_.size(); ++n) {
                    if (queue_[n].coded() || queue_[n].stage != CodeStage::none ||
                        !first_of_flow(n))
                        continue;
                    if (auto c = try_combine(pl.pkt, queue_[n], v_, ctx_, knows,
                                             cfg_.discipline == Discipline::bfly && butterfly_)) {
                        pl.pkt = std::move(*c);
                        pl.taken.push_back(n);
                        if (pl.pkt.stage != CodeStage::none)
                            break;
                    }
                }
        }
        pl.pkt.origin = v_;
        pl.hyperarc = hyperarc_of(pl.pkt, v_, ctx_);
        const auto& head = pl.pkt.natives[0].pkt;
        pl.relay = head.kind == PacketKind::data &&
                   ctx_.routes->path(head.flow, head.kind).front() != v_;
        pl.partner = pl.pkt.coded() || partner_queued(pl.pkt);
        return pl;
    }

    CodedPacket commit(const Plan& pl)
    {
        for (std::size_t i = pl.taken.size(); i-- > 0;)
            queue_.erase(pl.taken[i]);
        return pl.pkt;
    }

    /// Estimator update after a transmission left this node.
    void record_transmission(const CodedPacket& p)
    {
        auto k = code_of(p, v_, ctx_);
        if (!k)
            return;
        std::vector<std::pair<FlowId, CodeId>> used;
        for (const auto& e : p.natives)
            used.emplace_back(e.pkt.flow, *k);
        est_.push(std::move(used));
    }

private:
    // A stored combination whose decode points no longer hold the other
    // natives goes back to the head as separate natives.
    void split_head()
    {
        CodedPacket p = queue_.erase(0);
        for (std::size_t i = p.natives.size(); i-- > 0;) {
            queue_.push_front(make_uncoded(p.natives[i].pkt, v_, p.natives[i].next_hop));
        }
    }

    // Folds every later packet that combines eligibly into slot m.
    void merge_into(std::size_t m, const Knowledge& knows)
    {
        for (std::size_t n = m + 1; n < queue_.size();) {
            if (auto c = try_combine(queue_[m], queue_[n], v_, ctx_, knows, butterfly_)) {
                queue_.replace(m, std::move(*c));
                queue_.erase(n);
            } else {
                ++n;
            }
        }
    }

    [[nodiscard]] bool first_of_flow(std::size_t n) const
    {
        const auto& p = queue_[n];
        for (std::size_t i = 0; i < n; ++i)
            for (const auto& e : p.natives)
                if (queue_[i].carries(e.pkt.flow) &&
                    queue_[i].natives[0].pkt.kind == e.pkt.kind)
                    return false;
        return true;
    }

    // Static check: some other queued data packet shares a catalogued code.
    [[nodiscard]] bool partner_queued(const CodedPacket& head) const
    {
        if (detail::has_ack(head) || head.stage != CodeStage::none)
            return false;
        const auto& cat = ctx_.net->catalog;
        for (std::size_t n = 1; n < queue_.size(); ++n) {
            const auto& p = queue_[n];
            if (detail::has_ack(p) || p.stage != CodeStage::none)
                continue;
            auto flows = head.flows();
            bool disjoint = true;
            for (FlowId s : p.flows())
                disjoint = disjoint && !head.carries(s);
            if (!disjoint)
                continue;
            auto more = p.flows();
            flows.insert(flows.end(), more.begin(), more.end());
            if (cat.find(v_, flows, CodeKind::one_hop) ||
                (butterfly_ && cat.find(v_, flows, CodeKind::butterfly_first)))
                return true;
        }
        return false;
    }

    NodeId v_;
    QmConfig cfg_;
    QmContext ctx_;
    OutputQueue queue_;
    SplitEstimator est_;
    std::map<FlowId, std::size_t> options_;
    bool butterfly_ = false;
    std::vector<DropInfo> drops_;
};

} // namespace ncsim
