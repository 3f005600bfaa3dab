#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ncsim/ids.hpp"

namespace ncsim {

class TopologyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Node {
    std::string name;
    double x = 0.0;
    double y = 0.0;
};

/// Directed wireless link. Capacity is in packets (or units) per second and
/// success_prob is the per-attempt delivery probability.
struct Link {
    NodeId from;
    NodeId to;
    double capacity = 1.0;
    double success_prob = 1.0;
};

enum class CodingDepth : int { none = 0, one_hop = 1, two_hop = 2 };

struct Flow {
    FlowId id;
    NodeId source;
    NodeId dest;
    std::vector<NodeId> path;
    /// Seconds; negative means drawn by the simulator.
    double start_time = -1.0;
};

/// Protocol-model "in range" relation: an explicit symmetric adjacency when
/// given, otherwise Euclidean distance against range_m.
struct Interference {
    double range_m = 250.0;
    std::vector<std::vector<bool>> adjacency;
};

struct Scenario {
    std::string name;
    std::vector<Node> nodes;
    std::vector<Link> links;
    std::vector<Flow> flows;
    CodingDepth depth = CodingDepth::one_hop;
    Interference interference;
};

class RangeRelation {
public:
    RangeRelation() = default;

    RangeRelation(const std::vector<Node>& nodes, const Interference& itf) : n_(nodes.size())
    {
        bits_.assign(n_ * n_, false);
        if (!itf.adjacency.empty()) {
            if (itf.adjacency.size() != n_)
                throw TopologyError("interference adjacency has wrong dimension");
            for (std::size_t a = 0; a < n_; ++a) {
                if (itf.adjacency[a].size() != n_)
                    throw TopologyError("interference adjacency has wrong dimension");
                for (std::size_t b = 0; b < n_; ++b)
                    if (a != b && (itf.adjacency[a][b] || itf.adjacency[b][a]))
                        set(a, b);
            }
            return;
        }
        for (std::size_t a = 0; a < n_; ++a)
            for (std::size_t b = a + 1; b < n_; ++b) {
                const double d = std::hypot(nodes[a].x - nodes[b].x, nodes[a].y - nodes[b].y);
                if (d <= itf.range_m)
                    set(a, b);
            }
    }

    [[nodiscard]] bool operator()(NodeId a, NodeId b) const
    {
        return a != b && bits_[a.index() * n_ + b.index()];
    }
    [[nodiscard]] std::size_t size() const { return n_; }

private:
    void set(std::size_t a, std::size_t b)
    {
        bits_[a * n_ + b] = true;
        bits_[b * n_ + a] = true;
    }

    std::size_t n_ = 0;
    std::vector<bool> bits_;
};

/// Broadcast opportunity (origin, targets). Targets are kept sorted.
struct Hyperarc {
    HyperarcId id;
    NodeId origin;
    std::vector<NodeId> targets;
    std::vector<LinkId> member_links;
    double rate = 0.0;

    [[nodiscard]] std::vector<NodeId> endpoints() const
    {
        std::vector<NodeId> e{origin};
        e.insert(e.end(), targets.begin(), targets.end());
        return e;
    }
};

/// Maximal cliques of an undirected graph given as an adjacency matrix
/// (Bron-Kerbosch with pivoting over 64-bit word bitsets). Each clique is
/// returned sorted; the list is sorted lexicographically.
inline std::vector<std::vector<std::size_t>>
enumerate_cliques(const std::vector<std::vector<bool>>& adj)
{
    const std::size_t n = adj.size();
    const std::size_t words = (n + 63) / 64;
    using Bits = std::vector<std::uint64_t>;
    std::vector<Bits> nb(n, Bits(words, 0));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (a != b && adj[a][b])
                nb[a][b / 64] |= (std::uint64_t{1} << (b % 64));

    auto count = [&](const Bits& s) {
        std::size_t c = 0;
        for (auto w : s)
            c += static_cast<std::size_t>(std::popcount(w));
        return c;
    };
    auto empty = [](const Bits& s) {
        return std::all_of(s.begin(), s.end(), [](auto w) { return w == 0; });
    };

    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> r;

    auto rec = [&](auto&& self, Bits p, Bits x) -> void {
        if (empty(p) && empty(x)) {
            auto c = r;
            std::sort(c.begin(), c.end());
            out.push_back(std::move(c));
            return;
        }
        // pivot: vertex of P u X with most neighbours in P
        std::size_t pivot = n;
        std::size_t best = 0;
        for (std::size_t w = 0; w < words; ++w) {
            std::uint64_t cand = p[w] | x[w];
            while (cand) {
                const std::size_t v = w * 64 + static_cast<std::size_t>(std::countr_zero(cand));
                cand &= cand - 1;
                Bits inter(words);
                for (std::size_t k = 0; k < words; ++k)
                    inter[k] = p[k] & nb[v][k];
                const std::size_t c = count(inter);
                if (pivot == n || c > best) {
                    pivot = v;
                    best = c;
                }
            }
        }
        Bits todo(words);
        for (std::size_t k = 0; k < words; ++k)
            todo[k] = p[k] & ~nb[pivot][k];
        for (std::size_t w = 0; w < words; ++w) {
            std::uint64_t bits = todo[w];
            while (bits) {
                const std::size_t v = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
                bits &= bits - 1;
                Bits p2(words), x2(words);
                for (std::size_t k = 0; k < words; ++k) {
                    p2[k] = p[k] & nb[v][k];
                    x2[k] = x[k] & nb[v][k];
                }
                r.push_back(v);
                self(self, std::move(p2), std::move(x2));
                r.pop_back();
                p[v / 64] &= ~(std::uint64_t{1} << (v % 64));
                x[v / 64] |= (std::uint64_t{1} << (v % 64));
            }
        }
    };

    if (n == 0)
        return out;
    Bits all(words, 0);
    for (std::size_t v = 0; v < n; ++v)
        all[v / 64] |= (std::uint64_t{1} << (v % 64));
    rec(rec, all, Bits(words, 0));
    std::sort(out.begin(), out.end());
    return out;
}

struct ConflictGraph {
    std::vector<std::vector<bool>> adjacency;
    std::vector<std::vector<HyperarcId>> cliques;

    [[nodiscard]] bool conflicts(HyperarcId a, HyperarcId b) const
    {
        return adjacency[a.index()][b.index()];
    }
};

/// Target set request for a non-singleton hyperarc.
struct HyperarcRequest {
    NodeId origin;
    std::vector<NodeId> targets;
};

/// Nodes, lossy links, hyperarcs and their conflict graph. Immutable once built.
class Hypergraph {
public:
    [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }
    [[nodiscard]] const std::vector<Link>& links() const { return links_; }
    [[nodiscard]] const std::vector<Hyperarc>& hyperarcs() const { return hyperarcs_; }
    [[nodiscard]] const Hyperarc& hyperarc(HyperarcId h) const { return hyperarcs_[h.index()]; }
    [[nodiscard]] const Link& link(LinkId l) const { return links_[l.index()]; }
    [[nodiscard]] const RangeRelation& in_range() const { return range_; }
    [[nodiscard]] const ConflictGraph& conflict() const { return conflict_; }
    [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }

    [[nodiscard]] std::optional<LinkId> find_link(NodeId from, NodeId to) const
    {
        auto it = link_index_.find({from, to});
        if (it == link_index_.end())
            return std::nullopt;
        return it->second;
    }

    [[nodiscard]] std::optional<HyperarcId> find_hyperarc(NodeId origin,
                                                          std::vector<NodeId> targets) const
    {
        std::sort(targets.begin(), targets.end());
        auto it = hyperarc_index_.find({origin, targets});
        if (it == hyperarc_index_.end())
            return std::nullopt;
        return it->second;
    }

    [[nodiscard]] HyperarcId singleton(NodeId from, NodeId to) const
    {
        auto h = find_hyperarc(from, {to});
        if (!h)
            throw TopologyError("no link between consecutive nodes");
        return *h;
    }

    /// Any endpoint of one within range of any endpoint of the other, or a shared node.
    [[nodiscard]] bool hyperarcs_conflict(const std::vector<NodeId>& a,
                                          const std::vector<NodeId>& b) const
    {
        for (NodeId u : a)
            for (NodeId v : b)
                if (u == v || range_(u, v))
                    return true;
        return false;
    }

    /// Pairs in range with no routed link either way: the overhearing opportunities.
    [[nodiscard]] bool has_overhearing_links() const
    {
        for (std::size_t a = 0; a < nodes_.size(); ++a)
            for (std::size_t b = a + 1; b < nodes_.size(); ++b) {
                NodeId u{a}, v{b};
                if (range_(u, v) && !find_link(u, v) && !find_link(v, u))
                    return true;
            }
        return false;
    }

    friend Hypergraph build_hypergraph(std::vector<Node>, std::vector<Link>, const Interference&,
                                       const std::vector<HyperarcRequest>&);

private:
    std::vector<Node> nodes_;
    std::vector<Link> links_;
    std::vector<Hyperarc> hyperarcs_;
    RangeRelation range_;
    ConflictGraph conflict_;
    std::map<std::pair<NodeId, NodeId>, LinkId> link_index_;
    std::map<std::pair<NodeId, std::vector<NodeId>>, HyperarcId> hyperarc_index_;
};

/// Singleton hyperarcs for every link plus the requested multi-target ones,
/// with the protocol-model conflict graph and its maximal cliques.
inline Hypergraph build_hypergraph(std::vector<Node> nodes, std::vector<Link> links,
                                   const Interference& interference,
                                   const std::vector<HyperarcRequest>& extra = {})
{
    Hypergraph g;
    const std::size_t n = nodes.size();
    for (const Link& l : links) {
        if (l.from.index() >= n || l.to.index() >= n)
            throw TopologyError("link references unknown node");
        if (l.from == l.to)
            throw TopologyError("self-link at node " + std::to_string(l.from.value));
        if (!(l.capacity > 0.0))
            throw TopologyError("zero-capacity link " + std::to_string(l.from.value) + "->" +
                                std::to_string(l.to.value));
        if (!(l.success_prob > 0.0 && l.success_prob <= 1.0))
            throw TopologyError("link success probability outside (0, 1]");
    }
    g.nodes_ = std::move(nodes);
    g.links_ = std::move(links);
    g.range_ = RangeRelation(g.nodes_, interference);

    for (std::size_t i = 0; i < g.links_.size(); ++i) {
        const Link& l = g.links_[i];
        if (!g.link_index_.emplace(std::pair{l.from, l.to}, LinkId{i}).second)
            throw TopologyError("duplicate link");
    }

    auto add = [&](NodeId origin, std::vector<NodeId> targets) {
        std::sort(targets.begin(), targets.end());
        targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
        if (targets.empty())
            throw TopologyError("hyperarc with no targets");
        auto key = std::pair{origin, targets};
        if (auto it = g.hyperarc_index_.find(key); it != g.hyperarc_index_.end())
            return it->second;
        Hyperarc h;
        h.id = HyperarcId{g.hyperarcs_.size()};
        h.origin = origin;
        h.targets = targets;
        h.rate = std::numeric_limits<double>::infinity();
        for (NodeId t : targets) {
            auto lid = g.find_link(origin, t);
            if (!lid)
                throw TopologyError("hyperarc target not reachable by a link");
            h.member_links.push_back(*lid);
            const Link& l = g.links_[lid->index()];
            h.rate = std::min(h.rate, l.capacity * l.success_prob);
        }
        g.hyperarc_index_.emplace(std::move(key), h.id);
        g.hyperarcs_.push_back(std::move(h));
        return g.hyperarcs_.back().id;
    };

    for (const Link& l : g.links_)
        add(l.from, {l.to});
    for (const auto& r : extra)
        add(r.origin, r.targets);

    const std::size_t m = g.hyperarcs_.size();
    g.conflict_.adjacency.assign(m, std::vector<bool>(m, false));
    std::vector<std::vector<NodeId>> ends(m);
    for (std::size_t i = 0; i < m; ++i)
        ends[i] = g.hyperarcs_[i].endpoints();
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b)
            if (g.hyperarcs_conflict(ends[a], ends[b]))
                g.conflict_.adjacency[a][b] = g.conflict_.adjacency[b][a] = true;
    for (auto& c : enumerate_cliques(g.conflict_.adjacency)) {
        std::vector<HyperarcId> q;
        for (auto v : c)
            q.push_back(HyperarcId{v});
        g.conflict_.cliques.push_back(std::move(q));
    }
    return g;
}

inline void validate_flows(const std::vector<Flow>& flows, const Hypergraph& g)
{
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const Flow& f = flows[i];
        const std::string tag = "flow " + std::to_string(i);
        if (f.id.index() != i)
            throw TopologyError(tag + ": ids must be dense from 0");
        if (f.path.size() < 2)
            throw TopologyError(tag + ": path needs at least two nodes");
        if (f.path.front() != f.source || f.path.back() != f.dest)
            throw TopologyError(tag + ": path must run from source to dest");
        std::set<NodeId> seen;
        for (NodeId v : f.path) {
            if (v.index() >= g.node_count())
                throw TopologyError(tag + ": unknown node on path");
            if (!seen.insert(v).second)
                throw TopologyError(tag + ": path repeats a node");
        }
        for (std::size_t p = 0; p + 1 < f.path.size(); ++p)
            if (!g.find_link(f.path[p], f.path[p + 1]))
                throw TopologyError(tag + ": disconnected flow path at hop " + std::to_string(p));
    }
}

} // namespace ncsim
