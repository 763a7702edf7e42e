#include "p2pgrid/market.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace p2pgrid {

using json = nlohmann::json;
using conic::kInf;

int Agents::prosumer_index(const std::string& id) const {
    for (size_t i = 0; i < prosumers.size(); ++i)
        if (prosumers[i].id == id) return static_cast<int>(i);
    return -1;
}

int Agents::consumer_index(const std::string& id) const {
    for (size_t i = 0; i < consumers.size(); ++i)
        if (consumers[i].id == id) return static_cast<int>(i);
    return -1;
}

double inverter_cone(double P, double Q, double s_inv) { return s_inv - std::hypot(P, Q); }

Agents parse_agents(const std::string& text, const Network& net) {
    Agents ag;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FeederError(std::string("agents parse error: ") + e.what());
    }
    const Bases& b = net.bases;
    try {
        for (const auto& jp : j.value("prosumers", json::array())) {
            Prosumer p;
            p.id = jp.at("id").get<std::string>();
            p.node = net.node_index(jp.at("node").get<int>());
            p.phases = jp.contains("phases") ? parse_phases(jp["phases"].get<std::string>()) : net.nodes[p.node].phases;
            p.p_min = power_to_pu(jp.value("p_min_kw", 0.0), b);
            p.p_max = power_to_pu(jp.at("p_max_kw").get<double>(), b);
            p.q_min = power_to_pu(jp.value("q_min_kvar", 0.0), b);
            p.q_max = power_to_pu(jp.value("q_max_kvar", 0.0), b);
            p.s_inv = power_to_pu(jp.at("s_inv_kva").get<double>(), b);
            p.offer = jp.at("offer_usd_per_mwh").get<double>();
            ag.prosumers.push_back(p);
        }
        for (const auto& jc : j.value("consumers", json::array())) {
            Consumer c;
            c.id = jc.at("id").get<std::string>();
            c.node = net.node_index(jc.at("node").get<int>());
            c.utility = jc.value("utility_usd_per_mwh", 0.0);
            std::string src = jc.value("demand_source", "feeder");
            const NodeLoad& ld = net.loads[c.node];
            if (src == "feeder") {
                c.from_feeder = true;
                if (jc.contains("phases")) {
                    c.phases = parse_phases(jc["phases"].get<std::string>());
                } else {
                    for (int k = 0; k < 3; ++k) c.phases[k] = ld.P[k] > 0;
                }
                for (int k = 0; k < 3; ++k)
                    if (c.phases[k]) {
                        c.demand[k] = ld.P[k];
                        c.demand_q[k] = ld.Q[k];
                    }
            } else if (src == "explicit") {
                const auto& jd = jc.at("demand");
                for (auto it = jd.begin(); it != jd.end(); ++it) {
                    int k = phase_index(it.key().at(0));
                    c.phases[k] = true;
                    c.demand[k] = power_to_pu(it.value().value("p", 0.0), b);
                    c.demand_q[k] = power_to_pu(it.value().value("q", 0.0), b);
                }
            } else {
                throw FeederError("consumer " + c.id + ": unknown demand_source " + src);
            }
            double lo = jc.value("demand_min_frac", 1.0), hi = jc.value("demand_max_frac", 1.0);
            for (int k = 0; k < 3; ++k) {
                c.demand_min[k] = lo * c.demand[k];
                c.demand_max[k] = hi * c.demand[k];
            }
            c.true_demand = c.demand;
            ag.consumers.push_back(c);
        }
    } catch (const json::exception& e) {
        throw FeederError(std::string("agents schema error: ") + e.what());
    }
    validate(ag, net, &ag.warnings);
    return ag;
}

Agents load_agents(const std::string& path, const Network& net) {
    std::ifstream in(path);
    if (!in) throw FeederError("cannot open agents file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_agents(ss.str(), net);
}

void validate(const Agents& ag, const Network& net, std::vector<std::string>* warnings) {
    std::set<std::string> ids;
    auto check_phases = [&](const std::string& id, int node, const PhaseSet& ph) {
        if (node < 0 || node >= static_cast<int>(net.nodes.size()))
            throw FeederError("agent " + id + " sits on an unknown node");
        if (!(ph[0] || ph[1] || ph[2])) throw FeederError("agent " + id + " has no phases");
        for (int k = 0; k < 3; ++k)
            if (ph[k] && !net.nodes[node].phases[k])
                throw FeederError("agent " + id + " uses phase " + kPhaseNames[k] + " absent at node " +
                                  std::to_string(net.nodes[node].id));
        if (!ids.insert(id).second) throw FeederError("duplicate agent id " + id);
    };
    for (const auto& p : ag.prosumers) {
        check_phases(p.id, p.node, p.phases);
        if (p.p_min > p.p_max) throw FeederError("prosumer " + p.id + ": p_min > p_max");
        if (p.q_min > p.q_max) throw FeederError("prosumer " + p.id + ": q_min > q_max");
        if (!(p.s_inv > 0)) throw FeederError("prosumer " + p.id + ": s_inv must be positive");
        if (warnings && std::max(std::abs(p.p_max), std::abs(p.p_min)) > p.s_inv)
            warnings->push_back("prosumer " + p.id + ": active limits exceed the inverter rating");
    }
    std::set<std::pair<int, int>> feeder_bound;
    for (const auto& c : ag.consumers) {
        check_phases(c.id, c.node, c.phases);
        for (int k = 0; k < 3; ++k) {
            if (!c.phases[k]) continue;
            if (c.demand_min[k] > c.demand[k] || c.demand[k] > c.demand_max[k] || c.demand_min[k] < 0)
                throw FeederError("consumer " + c.id + ": demand outside its bounds on phase " + kPhaseNames[k]);
            if (c.from_feeder && !feeder_bound.insert({c.node, k}).second)
                throw FeederError("consumer " + c.id + ": feeder load at node " + std::to_string(net.nodes[c.node].id) +
                                  " phase " + kPhaseNames[k] + " already bound to another consumer");
            if (warnings)
                for (const auto& p : ag.prosumers)
                    if (p.node == c.node && p.phases[k])
                        warnings->push_back("prosumer " + p.id + " and consumer " + c.id + " share node " +
                                            std::to_string(net.nodes[c.node].id) + " phase " + kPhaseNames[k]);
        }
    }
}

double profile_at(const MarketOptions& o, int t) {
    if (o.load_profile.empty()) return 1.0;
    return o.load_profile.at(t);
}

namespace {
std::string key(const std::string& kind, const std::string& id, int k, int t) {
    return kind + ":" + id + ":" + kPhaseNames[k] + ":" + std::to_string(t);
}
}  // namespace

MarketIndex assemble_market(conic::ConicProblem& prob, const Agents& ag, const Network& net, const MarketOptions& o) {
    if (o.horizon <= 0) throw FeederError("horizon must be positive");
    MarketIndex mi;
    mi.horizon = o.horizon;
    const int T = o.horizon;
    const double to_usd = net.bases.kva / 1000.0 * o.step_hours;  // $/MWh -> $/pu per step
    const Vec3i none{-1, -1, -1};
    auto alloc = [&](size_t n) { return std::vector<std::vector<Vec3i>>(n, std::vector<Vec3i>(T, none)); };
    mi.P = alloc(ag.prosumers.size());
    mi.Q = alloc(ag.prosumers.size());
    mi.prosumer_row = alloc(ag.prosumers.size());
    mi.dem = alloc(ag.consumers.size());
    mi.consumer_row = alloc(ag.consumers.size());
    mi.demand_row = alloc(ag.consumers.size());

    for (int t = 0; t < T; ++t) {
        for (size_t i = 0; i < ag.prosumers.size(); ++i) {
            const Prosumer& p = ag.prosumers[i];
            for (int k = 0; k < 3; ++k) {
                if (!p.phases[k]) continue;
                int vp = prob.add_var(key("P", p.id, k, t), p.p_min, p.p_max, p.offer * to_usd);
                int vq = prob.add_var(key("Q", p.id, k, t), p.q_min, p.q_max);
                mi.P[i][t][k] = vp;
                mi.Q[i][t][k] = vq;
                prob.add_cone(key("inv", p.id, k, t), {conic::Affine{{}, p.s_inv}, conic::Affine{{{vp, 1.0}}, 0.0},
                                                        conic::Affine{{{vq, 1.0}}, 0.0}});
            }
        }
        double prof = profile_at(o, t);
        for (size_t j = 0; j < ag.consumers.size(); ++j) {
            const Consumer& c = ag.consumers[j];
            for (int k = 0; k < 3; ++k) {
                if (!c.phases[k]) continue;
                double lo = c.demand_min[k] * prof, hi = c.demand_max[k] * prof;
                int vd = c.inelastic(k) ? prob.add_var(key("dem", c.id, k, t), -kInf, kInf, -c.utility * to_usd)
                                        : prob.add_var(key("dem", c.id, k, t), lo, hi, -c.utility * to_usd);
                mi.dem[j][t][k] = vd;
                if (c.inelastic(k)) mi.demand_row[j][t][k] = prob.add_eq(key("demand", c.id, k, t), {{vd, 1.0}}, hi);
            }
        }
        // one trade per (prosumer, consumer, shared phase)
        for (size_t i = 0; i < ag.prosumers.size(); ++i)
            for (size_t j = 0; j < ag.consumers.size(); ++j)
                for (int k = 0; k < 3; ++k) {
                    if (!ag.prosumers[i].phases[k] || !ag.consumers[j].phases[k]) continue;
                    std::string nm = "x:" + ag.prosumers[i].id + ":" + ag.consumers[j].id + ":" + kPhaseNames[k] + ":" +
                                     std::to_string(t);
                    int v = prob.add_var(nm, 0.0, kInf);
                    mi.trades.push_back({static_cast<int>(i), static_cast<int>(j), k, t, v});
                }
        for (size_t i = 0; i < ag.prosumers.size(); ++i)
            for (int k = 0; k < 3; ++k) {
                if (!ag.prosumers[i].phases[k]) continue;
                std::vector<conic::Term> terms{{mi.P[i][t][k], 1.0}};
                for (const auto& tr : mi.trades)
                    if (tr.t == t && tr.prosumer == static_cast<int>(i) && tr.phase == k) terms.push_back({tr.var, -1.0});
                mi.prosumer_row[i][t][k] = prob.add_eq(key("sell", ag.prosumers[i].id, k, t), terms, 0.0);
            }
        for (size_t j = 0; j < ag.consumers.size(); ++j)
            for (int k = 0; k < 3; ++k) {
                if (!ag.consumers[j].phases[k]) continue;
                std::vector<conic::Term> terms;
                for (const auto& tr : mi.trades)
                    if (tr.t == t && tr.consumer == static_cast<int>(j) && tr.phase == k) terms.push_back({tr.var, 1.0});
                terms.push_back({mi.dem[j][t][k], -1.0});
                mi.consumer_row[j][t][k] = prob.add_eq(key("buy", ag.consumers[j].id, k, t), terms, 0.0);
            }
    }
    return mi;
}

}  // namespace p2pgrid
