#pragma once

#include <string>
#include <vector>

#include "p2pgrid/conic.hpp"
#include "p2pgrid/feeder.hpp"

namespace p2pgrid {

struct Prosumer {
    std::string id;
    int node = 0;  // node index
    PhaseSet phases{false, false, false};
    // per phase, pu
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
    double s_inv = 0.0;
    double offer = 0.0;  // $/MWh
};

struct Consumer {
    std::string id;
    int node = 0;
    PhaseSet phases{false, false, false};
    Vec3 demand{};    // reported active demand, pu
    Vec3 demand_q{};  // reactive demand at the same power factor, pu
    Vec3 true_demand{};
    Vec3 demand_min{};
    Vec3 demand_max{};
    double utility = 0.0;  // $/MWh
    bool from_feeder = false;

    bool inelastic(int k) const { return demand_min[k] == demand_max[k]; }
};

struct Agents {
    std::vector<Prosumer> prosumers;
    std::vector<Consumer> consumers;
    std::vector<std::string> warnings;

    int prosumer_index(const std::string& id) const;  // -1 if absent
    int consumer_index(const std::string& id) const;
};

Agents load_agents(const std::string& path, const Network& net);
Agents parse_agents(const std::string& json_text, const Network& net);
void validate(const Agents& agents, const Network& net, std::vector<std::string>* warnings = nullptr);

// S_inv - sqrt(P^2 + Q^2); non-negative iff (P, Q) is inside the rating
double inverter_cone(double P, double Q, double s_inv);

struct Trade {
    int prosumer;
    int consumer;
    int phase;
    int t;
    int var;
};

struct MarketIndex {
    int horizon = 0;
    // [agent][t][phase], -1 where the agent has no such phase
    std::vector<std::vector<Vec3i>> P, Q;
    std::vector<std::vector<Vec3i>> dem;
    std::vector<std::vector<Vec3i>> prosumer_row;  // P - sum x = 0
    std::vector<std::vector<Vec3i>> consumer_row;  // sum x - dem (+ shed) = 0
    std::vector<std::vector<Vec3i>> demand_row;    // dem = reported demand, inelastic phases only
    std::vector<Trade> trades;
};

struct MarketOptions {
    int horizon = 1;
    double step_hours = 1.0;
    std::vector<double> load_profile;  // per step multiplier, empty = 1
};

double profile_at(const MarketOptions& o, int t);

// Variables, clearing rows, capability bounds, inverter cones and the
// P2P objective. Demand is scaled by the load profile.
MarketIndex assemble_market(conic::ConicProblem& prob, const Agents& agents, const Network& net,
                            const MarketOptions& opts);

}  // namespace p2pgrid
