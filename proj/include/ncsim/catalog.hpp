#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ncsim/ids.hpp"
#include "ncsim/topology.hpp"

namespace ncsim {

enum class CodeKind {
    singleton,        // plain unicast of one flow
    one_hop,          // XOR decoded at the next hop (COPE)
    butterfly_first,  // XOR sent to a common next hop, decoded two hops later
    butterfly_second, // forwarding leg of a butterfly code
};

/// Network code k over hyperarc h: the set of flows whose packets are XOR-ed.
struct Code {
    CodeId id;
    NodeId node;
    HyperarcId hyperarc;
    CodeKind kind = CodeKind::singleton;
    std::vector<FlowId> flows; // sorted
};

/// One indicator H_h^{s,k} = 1: flow `flow` uses code `code` over `hyperarc`
/// when leaving the node at position `hop` of its path.
struct Membership {
    FlowId flow;
    CodeId code;
    HyperarcId hyperarc;
    std::size_t hop = 0;
};

/// A partition of a flow over one network coding path: the memberships it
/// uses, one per hop of the path, in path order.
struct Partition {
    std::vector<std::size_t> memberships;
};

/// Segment of a flow's route coded at most once. Covers hops
/// [first_hop, first_hop + hops) of the path.
struct NcPath {
    std::size_t first_hop = 0;
    std::size_t hops = 1;
    std::vector<NodeId> nodes;
    std::vector<Partition> partitions;
};

class CodeCatalog {
public:
    [[nodiscard]] const std::vector<Code>& codes() const { return codes_; }
    [[nodiscard]] const Code& code(CodeId k) const { return codes_[k.index()]; }
    [[nodiscard]] const std::vector<Membership>& memberships() const { return members_; }
    [[nodiscard]] const Membership& membership(std::size_t e) const { return members_[e]; }
    [[nodiscard]] CodingDepth depth() const { return depth_; }
    [[nodiscard]] std::size_t flow_count() const { return nc_paths_.size(); }

    [[nodiscard]] const std::vector<NcPath>& nc_paths(FlowId s) const
    {
        return nc_paths_[s.index()];
    }
    /// Memberships of a code (one per flow in S_k).
    [[nodiscard]] const std::vector<std::size_t>& members_of_code(CodeId k) const
    {
        return by_code_[k.index()];
    }
    [[nodiscard]] const std::vector<std::size_t>& members_of_flow(FlowId s) const
    {
        return by_flow_[s.index()];
    }
    /// Options of flow s when leaving the node at position hop of its path.
    [[nodiscard]] std::vector<std::size_t> members_at(FlowId s, std::size_t hop) const
    {
        std::vector<std::size_t> out;
        for (auto e : by_flow_[s.index()])
            if (members_[e].hop == hop)
                out.push_back(e);
        return out;
    }
    [[nodiscard]] std::vector<CodeId> codes_over(HyperarcId h) const
    {
        std::vector<CodeId> out;
        for (const Code& c : codes_)
            if (c.hyperarc == h)
                out.push_back(c.id);
        return out;
    }
    [[nodiscard]] std::vector<CodeId> codes_at(NodeId v) const
    {
        std::vector<CodeId> out;
        for (const Code& c : codes_)
            if (c.node == v)
                out.push_back(c.id);
        return out;
    }
    [[nodiscard]] bool indicator(HyperarcId h, FlowId s, CodeId k) const
    {
        for (auto e : by_code_[k.index()])
            if (members_[e].flow == s && members_[e].hyperarc == h)
                return true;
        return false;
    }
    /// Code at `node` with exactly this flow set and kind, if catalogued.
    [[nodiscard]] std::optional<CodeId> find(NodeId node, std::vector<FlowId> flows,
                                             CodeKind kind) const
    {
        std::sort(flows.begin(), flows.end());
        auto it = index_.find({node.value, static_cast<int>(kind), flows});
        if (it == index_.end())
            return std::nullopt;
        return it->second;
    }
    /// Membership of flow s in code k, if any.
    [[nodiscard]] std::optional<std::size_t> membership_of(FlowId s, CodeId k) const
    {
        for (auto e : by_code_[k.index()])
            if (members_[e].flow == s)
                return e;
        return std::nullopt;
    }

private:
    friend class CatalogBuilder;

    CodingDepth depth_ = CodingDepth::none;
    std::vector<Code> codes_;
    std::vector<Membership> members_;
    std::vector<std::vector<NcPath>> nc_paths_;
    std::vector<std::vector<std::size_t>> by_code_;
    std::vector<std::vector<std::size_t>> by_flow_;
    std::map<std::tuple<std::uint32_t, int, std::vector<FlowId>>, CodeId> index_;
};

/// Static scenario: hypergraph with every hyperarc a code needs, the flows,
/// and the code catalog. Immutable; share read-only.
struct Network {
    std::string name;
    Hypergraph graph;
    std::vector<Flow> flows;
    CodeCatalog catalog;
};

namespace detail {

/// Whether node j can hold packets of flow f while they sit at path position p:
/// j is upstream on the path, or overhears an upstream transmitter.
inline bool static_knowledge(const Hypergraph& g, const Flow& f, std::size_t p, NodeId j)
{
    for (std::size_t q = 0; q < p; ++q) {
        if (f.path[q] == j)
            return true;
        if (g.in_range()(f.path[q], j))
            return true;
    }
    return false;
}

inline std::optional<std::size_t> position(const Flow& f, NodeId v)
{
    for (std::size_t p = 0; p < f.path.size(); ++p)
        if (f.path[p] == v)
            return p;
    return std::nullopt;
}

} // namespace detail

class CatalogBuilder {
public:
    CatalogBuilder(const std::vector<Flow>& flows, const Hypergraph& base, CodingDepth depth)
        : flows_(flows), g_(base), depth_(depth)
    {}

    Network build(std::string name, const Interference& itf)
    {
        if (depth_ != CodingDepth::none && !flows_.empty() && !g_.has_overhearing_links())
            throw TopologyError("coding requested but no overhearing links declared");
        validate_flows(flows_, g_);

        struct Proto {
            NodeId node;
            std::vector<NodeId> targets;
            CodeKind kind;
            std::vector<FlowId> flows;
            // per flow: hop position of the coding node on that flow's path
            std::map<FlowId, std::size_t> hop;
        };
        std::vector<Proto> protos;

        // singleton code for every flow/hop
        for (const Flow& f : flows_)
            for (std::size_t p = 0; p + 1 < f.path.size(); ++p)
                protos.push_back({f.path[p], {f.path[p + 1]}, CodeKind::singleton, {f.id},
                                  {{f.id, p}}});

        if (depth_ != CodingDepth::none) {
            for (std::size_t v = 0; v < g_.node_count(); ++v) {
                const NodeId node{v};
                // (flow, hop) pairs leaving this node
                std::vector<std::pair<FlowId, std::size_t>> here;
                for (const Flow& f : flows_)
                    if (auto p = detail::position(f, node); p && *p + 1 < f.path.size())
                        here.emplace_back(f.id, *p);
                if (here.size() < 2)
                    continue;
                if (here.size() > 20)
                    throw TopologyError("too many flows through one node for code enumeration");
                enumerate_one_hop(node, here, protos);
                if (depth_ == CodingDepth::two_hop)
                    enumerate_butterfly(node, here, protos);
            }
        }

        std::vector<HyperarcRequest> requests;
        for (const auto& pr : protos)
            if (pr.targets.size() > 1)
                requests.push_back({pr.node, pr.targets});
        Network net;
        net.name = std::move(name);
        net.graph = build_hypergraph(g_.nodes(), g_.links(), itf, requests);
        net.flows = flows_;

        CodeCatalog& cat = net.catalog;
        cat.depth_ = depth_;
        cat.nc_paths_.resize(flows_.size());
        cat.by_flow_.resize(flows_.size());
        for (const auto& pr : protos) {
            const auto key = std::tuple{pr.node.value, static_cast<int>(pr.kind), pr.flows};
            if (cat.index_.count(key))
                continue;
            Code c;
            c.id = CodeId{cat.codes_.size()};
            c.node = pr.node;
            c.hyperarc = *net.graph.find_hyperarc(pr.node, pr.targets);
            c.kind = pr.kind;
            c.flows = pr.flows;
            cat.index_.emplace(key, c.id);
            cat.by_code_.emplace_back();
            for (FlowId s : pr.flows) {
                Membership m{s, c.id, c.hyperarc, pr.hop.at(s)};
                cat.by_code_.back().push_back(cat.members_.size());
                cat.by_flow_[s.index()].push_back(cat.members_.size());
                cat.members_.push_back(m);
            }
            cat.codes_.push_back(std::move(c));
        }
        build_nc_paths(net);
        return net;
    }

private:
    template <class Protos>
    void enumerate_one_hop(NodeId node, const std::vector<std::pair<FlowId, std::size_t>>& here,
                           Protos& protos) const
    {
        const std::size_t n = here.size();
        for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
            if (std::popcount(mask) < 2)
                continue;
            std::vector<std::size_t> sel;
            for (std::size_t i = 0; i < n; ++i)
                if (mask & (1u << i))
                    sel.push_back(i);
            std::set<NodeId> next_hops;
            bool ok = true;
            for (auto i : sel) {
                const Flow& f = flows_[here[i].first.index()];
                if (!next_hops.insert(f.path[here[i].second + 1]).second)
                    ok = false;
            }
            for (auto i : sel) {
                if (!ok)
                    break;
                const Flow& f = flows_[here[i].first.index()];
                const NodeId nh = f.path[here[i].second + 1];
                for (auto j : sel) {
                    if (i == j)
                        continue;
                    const Flow& o = flows_[here[j].first.index()];
                    if (!detail::static_knowledge(g_, o, here[j].second, nh)) {
                        ok = false;
                        break;
                    }
                }
            }
            if (!ok)
                continue;
            typename Protos::value_type pr;
            pr.node = node;
            pr.kind = CodeKind::one_hop;
            for (auto i : sel) {
                const Flow& f = flows_[here[i].first.index()];
                pr.targets.push_back(f.path[here[i].second + 1]);
                pr.flows.push_back(f.id);
                pr.hop[f.id] = here[i].second;
            }
            std::sort(pr.flows.begin(), pr.flows.end());
            protos.push_back(std::move(pr));
        }
    }

    template <class Protos>
    void enumerate_butterfly(NodeId node, const std::vector<std::pair<FlowId, std::size_t>>& here,
                             Protos& protos) const
    {
        // group by common next hop, keeping flows that continue past it
        std::map<NodeId, std::vector<std::size_t>> by_next;
        for (std::size_t i = 0; i < here.size(); ++i) {
            const Flow& f = flows_[here[i].first.index()];
            if (here[i].second + 2 < f.path.size())
                by_next[f.path[here[i].second + 1]].push_back(i);
        }
        for (const auto& [relay, idx] : by_next) {
            const std::size_t n = idx.size();
            if (n < 2)
                continue;
            for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
                if (std::popcount(mask) < 2)
                    continue;
                std::vector<std::size_t> sel;
                for (std::size_t b = 0; b < n; ++b)
                    if (mask & (1u << b))
                        sel.push_back(idx[b]);
                std::set<NodeId> finals;
                bool ok = true;
                for (auto i : sel) {
                    const Flow& f = flows_[here[i].first.index()];
                    if (!finals.insert(f.path[here[i].second + 2]).second)
                        ok = false;
                }
                for (auto i : sel) {
                    if (!ok)
                        break;
                    const Flow& f = flows_[here[i].first.index()];
                    const NodeId dec = f.path[here[i].second + 2];
                    for (auto j : sel) {
                        if (i == j)
                            continue;
                        const Flow& o = flows_[here[j].first.index()];
                        if (!detail::static_knowledge(g_, o, here[j].second, dec)) {
                            ok = false;
                            break;
                        }
                    }
                }
                if (!ok)
                    continue;
                typename Protos::value_type first, second;
                first.node = node;
                first.kind = CodeKind::butterfly_first;
                first.targets = {relay};
                second.node = relay;
                second.kind = CodeKind::butterfly_second;
                for (auto i : sel) {
                    const Flow& f = flows_[here[i].first.index()];
                    first.flows.push_back(f.id);
                    first.hop[f.id] = here[i].second;
                    second.flows.push_back(f.id);
                    second.hop[f.id] = here[i].second + 1;
                    second.targets.push_back(f.path[here[i].second + 2]);
                }
                std::sort(first.flows.begin(), first.flows.end());
                std::sort(second.flows.begin(), second.flows.end());
                protos.push_back(std::move(first));
                protos.push_back(std::move(second));
            }
        }
    }

    void build_nc_paths(Network& net) const
    {
        CodeCatalog& cat = net.catalog;
        for (const Flow& f : flows_) {
            auto& paths = cat.nc_paths_[f.id.index()];
            const std::size_t hops = f.path.size() - 1;
            std::size_t p = 0;
            while (p < hops) {
                NcPath seg;
                seg.first_hop = p;
                std::vector<std::size_t> bfly_first;
                for (auto e : cat.by_flow_[f.id.index()]) {
                    const auto& m = cat.members_[e];
                    if (m.hop == p && cat.codes_[m.code.index()].kind == CodeKind::butterfly_first)
                        bfly_first.push_back(e);
                }
                std::vector<std::size_t> here = cat.members_at(f.id, p);
                if (!bfly_first.empty() && p + 1 < hops) {
                    seg.hops = 2;
                    std::vector<std::size_t> next = cat.members_at(f.id, p + 1);
                    auto singleton_at = [&](const std::vector<std::size_t>& es) {
                        for (auto e : es)
                            if (cat.codes_[cat.members_[e].code.index()].kind == CodeKind::singleton)
                                return e;
                        throw TopologyError("missing singleton code");
                    };
                    seg.partitions.push_back({{singleton_at(here), singleton_at(next)}});
                    for (auto e : bfly_first) {
                        const auto& first = cat.codes_[cat.members_[e].code.index()];
                        const NodeId relay = f.path[p + 1];
                        auto second = cat.find(relay, first.flows, CodeKind::butterfly_second);
                        auto e2 = second ? cat.membership_of(f.id, *second) : std::nullopt;
                        if (!e2)
                            throw TopologyError("butterfly code without a forwarding leg");
                        seg.partitions.push_back({{e, *e2}});
                    }
                } else {
                    for (auto e : here) {
                        const auto kind = cat.codes_[cat.members_[e].code.index()].kind;
                        if (kind == CodeKind::singleton || kind == CodeKind::one_hop)
                            seg.partitions.push_back({{e}});
                    }
                }
                for (std::size_t q = p; q <= p + seg.hops; ++q)
                    seg.nodes.push_back(f.path[q]);
                p += seg.hops;
                paths.push_back(std::move(seg));
            }
        }
    }

    const std::vector<Flow>& flows_;
    const Hypergraph& g_;
    CodingDepth depth_;
};

/// Validate a scenario and build its hypergraph and code catalog.
inline Network build_network(const Scenario& sc)
{
    Hypergraph base = build_hypergraph(sc.nodes, sc.links, sc.interference);
    return CatalogBuilder(sc.flows, base, sc.depth).build(sc.name, sc.interference);
}

/// Same scenario at a different coding depth.
inline Network build_network(Scenario sc, CodingDepth depth)
{
    sc.depth = depth;
    return build_network(sc);
}

} // namespace ncsim
