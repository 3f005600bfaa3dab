#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "ncsim/topology.hpp"

namespace ncsim {

namespace detail {

inline NodeId add_node(Scenario& sc, std::string name, double x, double y)
{
    sc.nodes.push_back({std::move(name), x, y});
    return NodeId{sc.nodes.size() - 1};
}

/// Both directions, same capacity; reverse links carry TCP ACKs.
inline void add_duplex(Scenario& sc, NodeId a, NodeId b, double cap, double success)
{
    sc.links.push_back({a, b, cap, success});
    sc.links.push_back({b, a, cap, success});
}

inline void add_flow(Scenario& sc, std::vector<NodeId> path)
{
    Flow f;
    f.id = FlowId{sc.flows.size()};
    f.source = path.front();
    f.dest = path.back();
    f.path = std::move(path);
    sc.flows.push_back(std::move(f));
}

inline double cap_at(const std::vector<double>& caps, std::size_t i)
{
    if (caps.empty())
        return 1.0;
    if (i >= caps.size())
        throw TopologyError("too few capacities for topology");
    return caps[i];
}

constexpr double kRelayX = 100.0;
constexpr double kRelayY = 100.0;
constexpr double kRadius = 90.0;

inline NodeId add_on_circle(Scenario& sc, std::string name, double deg)
{
    const double rad = deg * std::numbers::pi / 180.0;
    return add_node(sc, std::move(name), kRelayX + kRadius * std::cos(rad),
                    kRelayY + kRadius * std::sin(rad));
}

} // namespace detail

/// Relay I at the centre of a 90 m circle, n outer nodes evenly spaced on it.
/// Flow i runs from outer node i to the node across the wheel through I.
/// caps[i] is the capacity of the duplex link between outer node i and I.
inline Scenario make_wheel(std::size_t n, const std::vector<double>& caps = {},
                           double success = 1.0)
{
    if (n < 2)
        throw TopologyError("wheel needs at least two flows");
    Scenario sc;
    sc.name = "wheel" + std::to_string(n);
    const NodeId relay = detail::add_node(sc, "I", detail::kRelayX, detail::kRelayY);
    std::vector<NodeId> outer;
    for (std::size_t i = 0; i < n; ++i)
        outer.push_back(detail::add_on_circle(sc, "O" + std::to_string(i),
                                              180.0 + 360.0 * static_cast<double>(i) /
                                                          static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i)
        detail::add_duplex(sc, outer[i], relay, detail::cap_at(caps, i), success);
    for (std::size_t i = 0; i < n; ++i)
        detail::add_flow(sc, {outer[i], relay, outer[(i + n / 2) % n]});
    return sc;
}

/// A1 <-> I <-> A2 with one flow each way. caps = {C1 (A1-I), C2 (A2-I)}.
inline Scenario make_alice_bob(const std::vector<double>& caps = {}, double success = 1.0)
{
    Scenario sc = make_wheel(2, caps, success);
    sc.name = "alice-bob";
    sc.nodes[1].name = "A1";
    sc.nodes[2].name = "A2";
    return sc;
}

/// Two crossing flows A1 -> I -> A2 and B1 -> I -> B2.
/// caps = {C1 (I-A2), C2 (A1-I), C3 (B1-I), C4 (I-B2)}.
inline Scenario make_x(const std::vector<double>& caps = {}, double success = 1.0)
{
    Scenario sc;
    sc.name = "x";
    const NodeId relay = detail::add_node(sc, "I", detail::kRelayX, detail::kRelayY);
    const NodeId a1 = detail::add_on_circle(sc, "A1", 135.0);
    const NodeId b1 = detail::add_on_circle(sc, "B1", 45.0);
    const NodeId a2 = detail::add_on_circle(sc, "A2", 315.0);
    const NodeId b2 = detail::add_on_circle(sc, "B2", 225.0);
    detail::add_duplex(sc, relay, a2, detail::cap_at(caps, 0), success);
    detail::add_duplex(sc, a1, relay, detail::cap_at(caps, 1), success);
    detail::add_duplex(sc, b1, relay, detail::cap_at(caps, 2), success);
    detail::add_duplex(sc, relay, b2, detail::cap_at(caps, 3), success);
    detail::add_flow(sc, {a1, relay, a2});
    detail::add_flow(sc, {b1, relay, b2});
    return sc;
}

/// Four flows between opposite corners through I (the four-flow wheel).
inline Scenario make_cross(const std::vector<double>& caps = {}, double success = 1.0)
{
    Scenario sc = make_wheel(4, caps, success);
    sc.name = "cross";
    return sc;
}

/// Flows A1 -> I1 -> I2 -> A2 and B1 -> I1 -> I2 -> B2 on a 300 m x 300 m
/// field; A2 overhears B1 and B2 overhears A1.
/// caps = {C1 (A1-I1), C2 (B1-I1), C3 (I1-I2), C4 (I2-A2), C5 (I2-B2)}.
inline Scenario make_butterfly(const std::vector<double>& caps = {}, double success = 1.0)
{
    Scenario sc;
    sc.name = "butterfly";
    sc.interference.range_m = 160.0;
    constexpr double y0 = 90.0;
    const NodeId a1 = detail::add_node(sc, "A1", 0.0, y0 + 120.0);
    const NodeId b1 = detail::add_node(sc, "B1", 300.0, y0 + 120.0);
    const NodeId i1 = detail::add_node(sc, "I1", 150.0, y0 + 120.0);
    const NodeId i2 = detail::add_node(sc, "I2", 150.0, y0 + 40.0);
    const NodeId b2 = detail::add_node(sc, "B2", 0.0, y0);
    const NodeId a2 = detail::add_node(sc, "A2", 300.0, y0);
    detail::add_duplex(sc, a1, i1, detail::cap_at(caps, 0), success);
    detail::add_duplex(sc, b1, i1, detail::cap_at(caps, 1), success);
    detail::add_duplex(sc, i1, i2, detail::cap_at(caps, 2), success);
    detail::add_duplex(sc, i2, a2, detail::cap_at(caps, 3), success);
    detail::add_duplex(sc, i2, b2, detail::cap_at(caps, 4), success);
    detail::add_flow(sc, {a1, i1, i2, a2});
    detail::add_flow(sc, {b1, i1, i2, b2});
    sc.depth = CodingDepth::two_hop;
    return sc;
}

struct GridOptions {
    double arrivals_per_s = 6.0 / 30.0;
    double duration_s = 60.0;
    double capacity = 1.0;
    double success = 1.0;
};

/// 15 nodes over 300 m x 300 m in 3 x 3 cells of one or two nodes. Nodes in
/// the same or neighbouring cells hear each other; links exist for the hops
/// flows use. Flows arrive
/// as a Poisson process with random endpoints; non-adjacent pairs are relayed
/// through a random node in a cell neighbouring both.
inline Scenario make_grid(std::uint64_t seed, const GridOptions& opt = {})
{
    std::mt19937_64 rng(seed);
    Scenario sc;
    sc.name = "grid" + std::to_string(seed);
    constexpr int side = 3;
    constexpr double cell = 100.0;

    std::vector<int> per_cell(side * side, 1);
    std::vector<int> cells(side * side);
    for (int c = 0; c < side * side; ++c)
        cells[static_cast<std::size_t>(c)] = c;
    std::shuffle(cells.begin(), cells.end(), rng);
    for (int i = 0; i < 6; ++i)
        per_cell[static_cast<std::size_t>(cells[static_cast<std::size_t>(i)])] = 2;

    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<int> cell_of;
    std::vector<std::vector<NodeId>> members(side * side);
    for (int c = 0; c < side * side; ++c)
        for (int k = 0; k < per_cell[static_cast<std::size_t>(c)]; ++k) {
            const double x = (c % side + u01(rng)) * cell;
            const double y = (c / side + u01(rng)) * cell;
            const NodeId v =
                detail::add_node(sc, "N" + std::to_string(sc.nodes.size()), x, y);
            cell_of.push_back(c);
            members[static_cast<std::size_t>(c)].push_back(v);
        }

    auto adjacent_cells = [&](int a, int b) {
        return std::abs(a % side - b % side) <= 1 && std::abs(a / side - b / side) <= 1;
    };
    const std::size_t n = sc.nodes.size();
    sc.interference.adjacency.assign(n, std::vector<bool>(n, false));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (adjacent_cells(cell_of[a], cell_of[b]))
                sc.interference.adjacency[a][b] = sc.interference.adjacency[b][a] = true;

    std::exponential_distribution<double> gap(opt.arrivals_per_s);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::set<std::pair<NodeId, NodeId>> linked;
    double t = gap(rng);
    while (t < opt.duration_s) {
        std::size_t s = pick(rng);
        std::size_t d = pick(rng);
        while (s == d) {
            s = pick(rng);
            d = pick(rng);
        }
        std::vector<NodeId> path{NodeId{s}};
        const int cs = cell_of[s];
        const int cd = cell_of[d];
        if (!adjacent_cells(cs, cd)) {
            std::vector<int> relays;
            for (int c = 0; c < side * side; ++c)
                if (adjacent_cells(c, cs) && adjacent_cells(c, cd) && c != cs && c != cd)
                    relays.push_back(c);
            std::uniform_int_distribution<std::size_t> pr(0, relays.size() - 1);
            const auto& pool = members[static_cast<std::size_t>(relays[pr(rng)])];
            std::uniform_int_distribution<std::size_t> pm(0, pool.size() - 1);
            path.push_back(pool[pm(rng)]);
        }
        path.push_back(NodeId{d});
        for (std::size_t p = 0; p + 1 < path.size(); ++p) {
            const auto key = std::minmax(path[p], path[p + 1]);
            if (linked.insert(key).second)
                detail::add_duplex(sc, key.first, key.second, opt.capacity, opt.success);
        }
        detail::add_flow(sc, std::move(path));
        sc.flows.back().start_time = t;
        t += gap(rng);
    }
    return sc;
}

/// Built-in topology by name: alice-bob, x, cross, wheel<n>, grid<seed>, butterfly.
inline Scenario make_topology(const std::string& name, const std::vector<double>& caps = {},
                              double success = 1.0)
{
    if (name == "alice-bob")
        return make_alice_bob(caps, success);
    if (name == "x")
        return make_x(caps, success);
    if (name == "cross")
        return make_cross(caps, success);
    if (name == "butterfly")
        return make_butterfly(caps, success);
    auto numeric_suffix = [&](const std::string& prefix) -> std::optional<std::uint64_t> {
        if (name.rfind(prefix, 0) != 0)
            return std::nullopt;
        std::string rest = name.substr(prefix.size());
        if (!rest.empty() && rest.front() == '(' && rest.back() == ')')
            rest = rest.substr(1, rest.size() - 2);
        if (rest.empty() || rest.find_first_not_of("0123456789") != std::string::npos)
            throw TopologyError("bad topology parameter in '" + name + "'");
        return std::stoull(rest);
    };
    if (auto n = numeric_suffix("wheel"))
        return make_wheel(*n, caps, success);
    if (auto s = numeric_suffix("grid")) {
        GridOptions opt;
        opt.success = success;
        if (!caps.empty())
            opt.capacity = caps.front();
        return make_grid(*s, opt);
    }
    throw TopologyError("unknown topology '" + name + "'");
}

} // namespace ncsim
