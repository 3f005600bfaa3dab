#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ncsim/topology.hpp"

namespace ncsim {

inline CodingDepth parse_depth(const std::string& s)
{
    if (s == "0" || s == "0-hop" || s == "none")
        return CodingDepth::none;
    if (s == "1" || s == "1-hop")
        return CodingDepth::one_hop;
    if (s == "2" || s == "2-hop")
        return CodingDepth::two_hop;
    throw TopologyError("unknown coding depth '" + s + "'");
}

inline std::string depth_name(CodingDepth d)
{
    return std::to_string(static_cast<int>(d)) + "-hop";
}

/// Scenario from JSON. Nodes are referenced by index or by name.
///
///   {"name": "...", "coding_depth": "1-hop",
///    "nodes": [{"name": "A", "x": 0, "y": 0}, ...],
///    "links": [{"from": "A", "to": "B", "capacity": 1, "success_prob": 1}, ...],
///    "flows": [{"path": ["A", "B", "C"], "start_time": 0.5}, ...],
///    "interference": {"range_m": 250} | {"adjacency": [[0, 1], [1, 0]]}}
inline Scenario scenario_from_json(const nlohmann::json& j)
{
    Scenario sc;
    sc.name = j.value("name", "scenario");
    if (j.contains("coding_depth")) {
        const auto& d = j.at("coding_depth");
        sc.depth = parse_depth(d.is_string() ? d.get<std::string>() : std::to_string(d.get<int>()));
    }
    std::map<std::string, NodeId> by_name;
    for (const auto& n : j.at("nodes")) {
        Node node;
        node.name = n.value("name", std::to_string(sc.nodes.size()));
        node.x = n.value("x", 0.0);
        node.y = n.value("y", 0.0);
        if (!by_name.emplace(node.name, NodeId{sc.nodes.size()}).second)
            throw TopologyError("duplicate node name '" + node.name + "'");
        sc.nodes.push_back(std::move(node));
    }
    auto ref = [&](const nlohmann::json& v) {
        if (v.is_number_integer()) {
            const auto i = v.get<long long>();
            if (i < 0 || static_cast<std::size_t>(i) >= sc.nodes.size())
                throw TopologyError("node index out of range");
            return NodeId{static_cast<std::size_t>(i)};
        }
        auto it = by_name.find(v.get<std::string>());
        if (it == by_name.end())
            throw TopologyError("unknown node '" + v.get<std::string>() + "'");
        return it->second;
    };
    for (const auto& l : j.value("links", nlohmann::json::array())) {
        Link link;
        link.from = ref(l.at("from"));
        link.to = ref(l.at("to"));
        link.capacity = l.value("capacity", 1.0);
        link.success_prob = l.value("success_prob", 1.0);
        sc.links.push_back(link);
        if (l.value("duplex", false))
            sc.links.push_back({link.to, link.from, link.capacity, link.success_prob});
    }
    for (const auto& f : j.value("flows", nlohmann::json::array())) {
        Flow flow;
        flow.id = FlowId{sc.flows.size()};
        for (const auto& v : f.at("path"))
            flow.path.push_back(ref(v));
        if (flow.path.empty())
            throw TopologyError("flow with empty path");
        flow.source = flow.path.front();
        flow.dest = flow.path.back();
        flow.start_time = f.value("start_time", -1.0);
        sc.flows.push_back(std::move(flow));
    }
    if (j.contains("interference")) {
        const auto& itf = j.at("interference");
        sc.interference.range_m = itf.value("range_m", sc.interference.range_m);
        if (itf.contains("adjacency"))
            for (const auto& row : itf.at("adjacency")) {
                std::vector<bool> r;
                for (const auto& v : row)
                    r.push_back(v.is_boolean() ? v.get<bool>() : v.get<int>() != 0);
                sc.interference.adjacency.push_back(std::move(r));
            }
    }
    return sc;
}

inline nlohmann::json scenario_to_json(const Scenario& sc)
{
    nlohmann::json j;
    j["name"] = sc.name;
    j["coding_depth"] = depth_name(sc.depth);
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : sc.nodes)
        j["nodes"].push_back({{"name", n.name}, {"x", n.x}, {"y", n.y}});
    j["links"] = nlohmann::json::array();
    for (const auto& l : sc.links)
        j["links"].push_back({{"from", l.from.value},
                              {"to", l.to.value},
                              {"capacity", l.capacity},
                              {"success_prob", l.success_prob}});
    j["flows"] = nlohmann::json::array();
    for (const auto& f : sc.flows) {
        nlohmann::json path = nlohmann::json::array();
        for (NodeId v : f.path)
            path.push_back(v.value);
        nlohmann::json fj{{"path", path}};
        if (f.start_time >= 0.0)
            fj["start_time"] = f.start_time;
        j["flows"].push_back(std::move(fj));
    }
    nlohmann::json itf{{"range_m", sc.interference.range_m}};
    if (!sc.interference.adjacency.empty()) {
        nlohmann::json adj = nlohmann::json::array();
        for (const auto& row : sc.interference.adjacency) {
            nlohmann::json r = nlohmann::json::array();
            for (bool b : row)
                r.push_back(b ? 1 : 0);
            adj.push_back(std::move(r));
        }
        itf["adjacency"] = std::move(adj);
    }
    j["interference"] = std::move(itf);
    return j;
}

inline Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw TopologyError("cannot open scenario file '" + path + "'");
    try {
        return scenario_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw TopologyError("malformed scenario file '" + path + "': " + e.what());
    }
}

} // namespace ncsim
