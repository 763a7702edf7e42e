#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "p2pgrid/feeder.hpp"
#include "p2pgrid/market.hpp"
#include "p2pgrid/powerflow.hpp"

namespace p2pgrid {

enum class AttackKind { price_tamper, demand_inflation, line_outage };

const char* to_string(AttackKind k);

struct AttackSpec {
    AttackKind kind = AttackKind::price_tamper;
    std::string target;  // agent id or line id
    double param = 0.0;  // new price ($/MWh) or inflation factor; unused for outages
};

struct AttackError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScenarioSpec {
    std::string name;
    std::string feeder_path;
    std::string agents_path;
    Network network;
    Agents agents;
    int horizon = 1;
    double step_hours = 1.0;
    std::vector<double> load_profile;
    double voll = 2000.0;
    double substation_price = 50.0;
    double v_substation = 1.0;
    LossModel loss = LossModel::full;
    bool shedding = true;
    std::vector<AttackSpec> attacks;
    bool attacks_applied = false;

    GridOptions grid_options() const;
};

// Paths inside the scenario file are relative to the file itself.
ScenarioSpec load_scenario(const std::string& path);

ScenarioSpec apply_price_tamper(const ScenarioSpec& s, const std::string& prosumer_id, double new_price);
ScenarioSpec apply_demand_inflation(const ScenarioSpec& s, const std::string& consumer_id, double factor);
ScenarioSpec apply_line_outage(const ScenarioSpec& s, const std::string& line_id);

// Applies the attack list in order; rejects duplicate targets.
ScenarioSpec apply_attacks(const ScenarioSpec& s);

}  // namespace p2pgrid
