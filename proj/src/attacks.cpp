#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "p2pgrid/scenario.hpp"

namespace p2pgrid {

using json = nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(AttackKind k) {
    switch (k) {
        case AttackKind::price_tamper: return "price_tamper";
        case AttackKind::demand_inflation: return "demand_inflation";
        case AttackKind::line_outage: return "line_outage";
    }
    return "?";
}

GridOptions ScenarioSpec::grid_options() const {
    GridOptions g;
    g.time.horizon = horizon;
    g.time.step_hours = step_hours;
    g.time.load_profile = load_profile;
    g.voll = voll;
    g.substation_price = substation_price;
    g.v_substation = v_substation;
    g.loss = loss;
    g.shedding = shedding;
    return g;
}

static AttackKind parse_kind(const std::string& s) {
    if (s == "price_tamper") return AttackKind::price_tamper;
    if (s == "demand_inflation") return AttackKind::demand_inflation;
    if (s == "line_outage") return AttackKind::line_outage;
    throw AttackError("unknown attack kind " + s);
}

ScenarioSpec load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FeederError("cannot open scenario file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FeederError("scenario " + path + ": " + e.what());
    }
    fs::path dir = fs::path(path).parent_path();
    ScenarioSpec s;
    try {
        s.name = j.value("name", fs::path(path).stem().string());
        s.feeder_path = (dir / j.at("feeder").get<std::string>()).lexically_normal().string();
        s.agents_path = (dir / j.at("agents").get<std::string>()).lexically_normal().string();
        s.voll = j.value("voll_usd_per_mwh", 2000.0);
        s.substation_price = j.value("substation_usd_per_mwh", 50.0);
        s.v_substation = j.value("v_substation_pu", 1.0);
        s.horizon = j.value("horizon", 1);
        s.step_hours = j.value("step_hours", 1.0);
        if (j.contains("load_profile")) s.load_profile = j["load_profile"].get<std::vector<double>>();
        std::string lm = j.value("loss_model", "full");
        if (lm == "full") s.loss = LossModel::full;
        else if (lm == "diagonal") s.loss = LossModel::diagonal;
        else throw FeederError("scenario " + path + ": unknown loss_model " + lm);
        s.shedding = j.value("shedding", true);
        for (const auto& ja : j.value("attacks", json::array())) {
            AttackSpec a;
            a.kind = parse_kind(ja.at("kind").get<std::string>());
            a.target = ja.at("target").is_string() ? ja["target"].get<std::string>() : ja["target"].dump();
            a.param = ja.value("param", 0.0);
            s.attacks.push_back(a);
        }
    } catch (const json::exception& e) {
        throw FeederError("scenario " + path + ": " + e.what());
    }
    if (s.horizon <= 0) throw FeederError("scenario " + path + ": horizon must be positive");
    if (!s.load_profile.empty() && static_cast<int>(s.load_profile.size()) != s.horizon)
        throw FeederError("scenario " + path + ": load_profile length differs from horizon");
    if (!(s.step_hours > 0)) throw FeederError("scenario " + path + ": step_hours must be positive");
    s.network = load_feeder(s.feeder_path);
    s.agents = load_agents(s.agents_path, s.network);
    return s;
}

ScenarioSpec apply_price_tamper(const ScenarioSpec& s, const std::string& id, double price) {
    if (!(price > 0)) throw AttackError("price_tamper on " + id + ": price must be positive");
    int i = s.agents.prosumer_index(id);
    if (i < 0) throw AttackError("price_tamper: unknown prosumer " + id);
    ScenarioSpec out = s;
    out.agents.prosumers[i].offer = price;
    return out;
}

ScenarioSpec apply_demand_inflation(const ScenarioSpec& s, const std::string& id, double factor) {
    if (!(factor > 0)) throw AttackError("demand_inflation on " + id + ": factor must be positive");
    int j = s.agents.consumer_index(id);
    if (j < 0) throw AttackError("demand_inflation: unknown consumer " + id);
    ScenarioSpec out = s;
    Consumer& c = out.agents.consumers[j];
    for (int k = 0; k < 3; ++k) {
        c.demand[k] *= factor;
        c.demand_q[k] *= factor;
        c.demand_min[k] *= factor;
        c.demand_max[k] *= factor;
    }
    // true_demand is left alone: the report keeps both
    for (int k = 0; k < 3; ++k) {
        if (!c.phases[k]) continue;
        double cap = 0.0;
        for (const auto& l : out.network.lines)
            if (l.to == c.node) cap = l.s_limit;
        if (cap > 0 && c.demand[k] > cap)
            out.agents.warnings.push_back("consumer " + id + ": inflated demand exceeds the feeding line limit");
    }
    return out;
}

ScenarioSpec apply_line_outage(const ScenarioSpec& s, const std::string& id) {
    int l;
    try {
        l = s.network.line_index(id);
    } catch (const FeederError&) {
        throw AttackError("line_outage: unknown line " + id);
    }
    if (!s.network.lines[l].in_service) throw AttackError("line_outage: line " + id + " is already out of service");
    ScenarioSpec out = s;
    out.network.lines[l].in_service = false;
    // still a forest; islands are served by local resources and shedding
    Topology t = downstream_sets(out.network);
    for (size_t n = 0; n < out.network.nodes.size(); ++n)
        if (t.island[n] < 0) throw AttackError("line_outage: topology check failed at node " + std::to_string(n));
    for (const auto& p : out.agents.prosumers)
        if (t.island[p.node] != 0)
            out.agents.warnings.push_back("prosumer " + p.id + " is on an island after outage of " + id);
    for (const auto& c : out.agents.consumers)
        if (t.island[c.node] != 0)
            out.agents.warnings.push_back("consumer " + c.id + " is on an island after outage of " + id);
    return out;
}

ScenarioSpec apply_attacks(const ScenarioSpec& s) {
    if (s.attacks_applied) return s;
    std::set<std::string> targets;
    for (const auto& a : s.attacks)
        if (!targets.insert(a.target).second) throw AttackError("attack list targets " + a.target + " twice");
    ScenarioSpec out = s;
    for (const auto& a : s.attacks) {
        switch (a.kind) {
            case AttackKind::price_tamper: out = apply_price_tamper(out, a.target, a.param); break;
            case AttackKind::demand_inflation: out = apply_demand_inflation(out, a.target, a.param); break;
            case AttackKind::line_outage: out = apply_line_outage(out, a.target); break;
        }
    }
    out.attacks_applied = true;
    return out;
}

}  // namespace p2pgrid
