#pragma once

// Small synthetic feeders built in memory.

#include <json.hpp>
#include <string>

#include "p2pgrid/scenario.hpp"

namespace p2pgrid::testing {

using json = nlohmann::json;

// base_kv = sqrt(3) makes the impedance base exactly 1 ohm at 1000 kVA
inline json feeder_json(int substation = 1) {
    return json{{"name", "synthetic"},  {"base_kva", 1000.0}, {"base_kv", 1.7320508075688772},
                {"v_min", 0.9},         {"v_max", 1.1},       {"substation", substation},
                {"nodes", json::array()}, {"lines", json::array()}};
}

inline void add_node(json& f, int id, json loads = json::object()) {
    json n{{"id", id}};
    if (!loads.empty()) n["loads"] = loads;
    f["nodes"].push_back(n);
}

// diagonal impedance r + jx ohm on each listed phase
inline void add_line(json& f, int from, int to, double r, double x, const std::string& phases = "abc",
                     double s_limit_kva = 5000.0) {
    json R = json::array(), X = json::array();
    for (int i = 0; i < 3; ++i) {
        json rr = json::array(), xr = json::array();
        for (int j = 0; j < 3; ++j) {
            bool on = i == j && phases.find(kPhaseNames[i]) != std::string::npos;
            rr.push_back(on ? r : 0.0);
            xr.push_back(on ? x : 0.0);
        }
        R.push_back(rr);
        X.push_back(xr);
    }
    f["lines"].push_back({{"id", std::to_string(from) + "-" + std::to_string(to)},
                          {"from", from},
                          {"to", to},
                          {"R", R},
                          {"X", X},
                          {"phases", phases},
                          {"s_limit", s_limit_kva}});
}

inline json prosumer(const std::string& id, int node, const std::string& phases, double p_max_kw, double offer,
                     double s_kva = 0.0) {
    if (s_kva == 0.0) s_kva = p_max_kw;
    return json{{"id", id},           {"node", node},           {"phases", phases},
                {"p_max_kw", p_max_kw}, {"q_min_kvar", -s_kva}, {"q_max_kvar", s_kva},
                {"s_inv_kva", s_kva},   {"offer_usd_per_mwh", offer}};
}

inline json explicit_consumer(const std::string& id, int node, char phase, double p_kw, double q_kvar = 0.0) {
    json d = json::object();
    d[std::string(1, phase)] = {{"p", p_kw}, {"q", q_kvar}};
    return json{{"id", id}, {"node", node}, {"demand_source", "explicit"}, {"demand", d}};
}

inline ScenarioSpec make_spec(const json& feeder, const json& agents, double v_sub = 1.0) {
    ScenarioSpec s;
    s.name = "synthetic";
    s.network = parse_feeder(feeder.dump());
    s.agents = parse_agents(agents.dump(), s.network);
    s.v_substation = v_sub;
    return s;
}

// Zero-impedance radial feeder 1-2-3 on phase a: a prosumer at node 2, a
// consumer at node 3.
inline ScenarioSpec copper_plate(double offer = 20.0, double demand_kw = 100.0) {
    json f = feeder_json();
    add_node(f, 1);
    add_node(f, 2);
    add_node(f, 3);
    add_line(f, 1, 2, 0.0, 0.0, "a");
    add_line(f, 2, 3, 0.0, 0.0, "a");
    json a{{"prosumers", {prosumer("P", 2, "a", 500.0, offer)}},
           {"consumers", {explicit_consumer("C", 3, 'a', demand_kw)}}};
    return make_spec(f, a);
}

}  // namespace p2pgrid::testing
