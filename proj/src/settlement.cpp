#include "p2pgrid/settlement.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

namespace p2pgrid {

using json = nlohmann::json;

namespace {

// fixed notation without a stray "-0.000"
std::string fmt(double v, int prec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    std::string s = buf;
    if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string phase_name(int k) { return std::string(1, kPhaseNames[k]); }

}  // namespace

SettlementReport compute_settlement(const Model& m, const conic::Solution& sol, const DLMPSurface& dlmp) {
    if (sol.status != conic::Status::optimal)
        throw SettlementError(std::string("cannot settle a ") + conic::to_string(sol.status) + " solution");
    const ScenarioSpec& sc = m.scenario;
    const Network& net = sc.network;
    const Agents& ag = sc.agents;
    const GridIndex& gi = m.grid;
    const MarketIndex& mi = m.market;
    const int T = gi.horizon;
    const double mw = net.bases.kva / 1000.0;
    const double h = sc.step_hours;
    const auto& x = sol.x;

    SettlementReport r;
    r.scenario = sc.name;
    r.status = sol.status;
    r.objective = sol.objective;
    r.dlmp = dlmp;
    r.stats = sol.stats;
    r.soc = check_soc_tightness(x, gi, net);

    for (size_t j = 0; j < ag.consumers.size(); ++j) {
        const Consumer& c = ag.consumers[j];
        ConsumerLine cl;
        cl.id = c.id;
        cl.node = c.node;
        cl.node_id = net.nodes[c.node].id;
        for (int t = 0; t < T; ++t) {
            double prof = profile_at(sc.grid_options().time, t);
            for (int k = 0; k < 3; ++k) {
                if (!c.phases[k]) continue;
                double d = x[mi.dem[j][t][k]];
                int s = gi.shd_consumer[j][t][k];
                double shd = s >= 0 ? x[s] : 0.0;
                cl.reported_mwh += d * mw * h;
                cl.true_mwh += c.true_demand[k] * prof * mw * h;
                cl.curtailed_mwh += shd * mw * h;
                cl.cleared_mwh += (d - shd) * mw * h;
                cl.bill += dlmp.at(c.node, k, t) * (d - shd) * mw * h;
                r.p2p_cost -= c.utility * d * mw * h;
            }
        }
        r.total_bills += cl.bill;
        r.consumers.push_back(cl);
    }
    for (size_t i = 0; i < ag.prosumers.size(); ++i) {
        const Prosumer& p = ag.prosumers[i];
        ProsumerLine pl;
        pl.id = p.id;
        pl.node = p.node;
        pl.node_id = net.nodes[p.node].id;
        pl.offer = p.offer;
        for (int t = 0; t < T; ++t)
            for (int k = 0; k < 3; ++k) {
                if (!p.phases[k]) continue;
                double P = x[mi.P[i][t][k]];
                pl.sold_mwh += P * mw * h;
                pl.revenue += dlmp.at(p.node, k, t) * P * mw * h;
                r.p2p_cost += p.offer * P * mw * h;
            }
        r.total_revenue += pl.revenue;
        r.prosumers.push_back(pl);
    }
    for (const auto& tr : mi.trades) {
        double q = x[tr.var] * mw * h;
        r.trades.push_back({ag.prosumers[tr.prosumer].id, ag.consumers[tr.consumer].id, tr.phase, tr.t, q});
    }

    double shed_total = 0.0;
    for (int t = 0; t < T; ++t) {
        for (int k = 0; k < 3; ++k)
            if (gi.pug[t][k] >= 0) r.substation_mwh += x[gi.pug[t][k]] * mw * h;
        for (size_t n = 0; n < net.nodes.size(); ++n)
            for (int k = 0; k < 3; ++k) {
                if (!net.nodes[n].phases[k]) continue;
                int iv = gi.v[t][n][k];
                r.voltage.push_back({static_cast<int>(n), k, t, std::sqrt(std::max(0.0, x[iv]))});
                double shd = 0.0;
                if (int s = gi.shd_base[t][n][k]; s >= 0) shd += x[s];
                for (size_t j = 0; j < ag.consumers.size(); ++j)
                    if (ag.consumers[j].node == static_cast<int>(n))
                        if (int s = gi.shd_consumer[j][t][k]; s >= 0) shd += x[s];
                r.curtailment.push_back({static_cast<int>(n), k, t, shd * mw});
                shed_total += shd * mw;
            }
    }
    r.curtailment_mw = shed_total / T;
    r.substation_payment = sc.substation_price * r.substation_mwh;
    r.lost_load_cost = sc.voll * shed_total * h;
    r.grid_cost = r.substation_payment + r.lost_load_cost;
    r.total_cost = r.p2p_cost + r.grid_cost;
    r.surplus = r.total_bills - r.total_revenue - r.substation_payment;
    return r;
}

CompareReport compare(const SettlementReport& pre, const SettlementReport& post, const Network& net) {
    std::set<std::string> a, b;
    for (const auto& c : pre.consumers) a.insert("c:" + c.id);
    for (const auto& p : pre.prosumers) a.insert("p:" + p.id);
    for (const auto& c : post.consumers) b.insert("c:" + c.id);
    for (const auto& p : post.prosumers) b.insert("p:" + p.id);
    if (a != b) {
        std::string diff;
        for (const auto& s : a)
            if (!b.count(s)) diff += " " + s.substr(2) + " (pre only)";
        for (const auto& s : b)
            if (!a.count(s)) diff += " " + s.substr(2) + " (post only)";
        throw SettlementError("agent sets differ:" + diff);
    }
    CompareReport c;
    c.pre_name = pre.scenario;
    c.post_name = post.scenario;
    c.pre_cost = pre.total_cost;
    c.post_cost = post.total_cost;
    c.cost_ratio = pre.total_cost != 0 ? post.total_cost / pre.total_cost : 0.0;
    c.delta_curtailment_mw = post.curtailment_mw - pre.curtailment_mw;
    for (const auto& x : pre.consumers)
        for (const auto& y : post.consumers)
            if (x.id == y.id) c.agents.push_back({x.id, "consumer", x.bill, y.bill, y.bill - x.bill});
    for (const auto& x : pre.prosumers)
        for (const auto& y : post.prosumers)
            if (x.id == y.id) c.agents.push_back({x.id, "prosumer", x.revenue, y.revenue, y.revenue - x.revenue});

    auto pair_up = [&](const std::vector<NodePhaseValue>& p, const std::vector<NodePhaseValue>& q) {
        std::map<std::tuple<int, int, int>, double> qm;
        for (const auto& e : q) qm[{e.node, e.phase, e.t}] = e.value;
        std::vector<NodePhaseDelta> out;
        for (const auto& e : p) {
            auto it = qm.find({e.node, e.phase, e.t});
            if (it == qm.end()) continue;
            out.push_back({net.nodes[e.node].id, e.phase, e.t, e.value, it->second, it->second - e.value});
        }
        return out;
    };
    auto prices = [](const DLMPSurface& s) {
        std::vector<NodePhaseValue> v;
        for (const auto& e : s.entries) v.push_back({e.node, e.phase, e.t, e.price});
        return v;
    };
    c.dlmp = pair_up(prices(pre.dlmp), prices(post.dlmp));
    c.voltage = pair_up(pre.voltage, post.voltage);
    c.curtailment = pair_up(pre.curtailment, post.curtailment);
    return c;
}

void write_bills_csv(std::ostream& os, const SettlementReport& r) {
    os << "agent,kind,node,energy_mwh,true_mwh,cleared_mwh,curtailed_mwh,amount_usd\n";
    for (const auto& c : r.consumers)
        os << c.id << ",consumer," << c.node_id << "," << fmt(c.reported_mwh, 6) << "," << fmt(c.true_mwh, 6) << ","
           << fmt(c.cleared_mwh, 6) << "," << fmt(c.curtailed_mwh, 6) << "," << fmt(c.bill, 6) << "\n";
    for (const auto& p : r.prosumers)
        os << p.id << ",prosumer," << p.node_id << "," << fmt(p.sold_mwh, 6) << ",,,," << fmt(p.revenue, 6) << "\n";
}

void write_dlmp_csv(std::ostream& os, const SettlementReport& r, const Network& net) {
    os << "node,phase,t,dlmp_usd_per_mwh,dlmp_pf_usd_per_mwh,lambda_p,lambda_q,source\n";
    for (const auto& e : r.dlmp.entries)
        os << net.nodes[e.node].id << "," << phase_name(e.phase) << "," << e.t << "," << fmt(e.price, 6) << ","
           << fmt(e.price_pf, 6) << "," << fmt(e.lambda_p, 6) << "," << fmt(e.lambda_q, 6) << "," << to_string(e.source)
           << "\n";
}

void write_voltage_csv(std::ostream& os, const SettlementReport& r, const Network& net) {
    os << "node,phase,t,v_pu,curtailment_mw\n";
    for (size_t i = 0; i < r.voltage.size(); ++i) {
        const auto& v = r.voltage[i];
        os << net.nodes[v.node].id << "," << phase_name(v.phase) << "," << v.t << "," << fmt(v.value, 8) << ","
           << fmt(r.curtailment[i].value, 6) << "\n";
    }
}

void write_trades_csv(std::ostream& os, const SettlementReport& r) {
    os << "prosumer,consumer,phase,t,energy_mwh\n";
    for (const auto& t : r.trades)
        os << t.prosumer << "," << t.consumer << "," << phase_name(t.phase) << "," << t.t << "," << fmt(t.mwh, 6)
           << "\n";
}

void write_compare_agents_csv(std::ostream& os, const CompareReport& c) {
    os << "agent,kind,pre_usd,post_usd,delta_usd\n";
    for (const auto& a : c.agents)
        os << a.id << "," << a.kind << "," << fmt(a.pre, 6) << "," << fmt(a.post, 6) << "," << fmt(a.delta, 6) << "\n";
}

void write_compare_nodes_csv(std::ostream& os, const CompareReport& c) {
    os << "quantity,node,phase,t,pre,post,delta\n";
    auto emit = [&](const char* q, const std::vector<NodePhaseDelta>& v, int prec) {
        for (const auto& d : v)
            os << q << "," << d.node_id << "," << phase_name(d.phase) << "," << d.t << "," << fmt(d.pre, prec) << ","
               << fmt(d.post, prec) << "," << fmt(d.delta, prec) << "\n";
    };
    emit("dlmp_usd_per_mwh", c.dlmp, 6);
    emit("v_pu", c.voltage, 8);
    emit("curtailment_mw", c.curtailment, 6);
}

std::string report_json(const SettlementReport& r, const Network& net, const std::string& generated_at) {
    json j;
    j["metadata"] = {{"scenario", r.scenario}, {"generated_at", generated_at}};
    j["status"] = conic::to_string(r.status);
    j["objective_usd"] = r.objective;
    j["cost"] = {{"p2p_usd", r.p2p_cost},
                 {"grid_usd", r.grid_cost},
                 {"total_usd", r.total_cost},
                 {"substation_mwh", r.substation_mwh},
                 {"substation_payment_usd", r.substation_payment},
                 {"lost_load_usd", r.lost_load_cost}};
    j["settlement"] = {{"total_bills_usd", r.total_bills},
                       {"total_revenue_usd", r.total_revenue},
                       {"surplus_usd", r.surplus},
                       {"curtailment_mw", r.curtailment_mw}};
    j["dlmp_range_usd_per_mwh"] = {r.dlmp.min_price(), r.dlmp.max_price()};
    j["soc_gap"] = {{"max", r.soc.max_gap}, {"mean", r.soc.mean_gap}, {"flagged", r.soc.flagged.size()}};
    for (const auto& f : r.soc.flagged)
        j["soc_gap"]["flagged_lines"].push_back(
            {{"line", net.lines[f.line].id}, {"phase", phase_name(f.phase)}, {"t", f.t}, {"gap", f.gap}});
    j["solver"] = {{"iterations", r.stats.iterations},
                   {"primal_residual", r.stats.primal_residual},
                   {"dual_residual", r.stats.dual_residual},
                   {"relative_gap", r.stats.relative_gap},
                   {"reduced_accuracy", r.stats.reduced_accuracy}};
    for (const auto& c : r.consumers)
        j["consumers"].push_back({{"id", c.id},
                                  {"node", net.nodes[c.node].id},
                                  {"reported_mwh", c.reported_mwh},
                                  {"true_mwh", c.true_mwh},
                                  {"cleared_mwh", c.cleared_mwh},
                                  {"curtailed_mwh", c.curtailed_mwh},
                                  {"bill_usd", c.bill}});
    for (const auto& p : r.prosumers)
        j["prosumers"].push_back({{"id", p.id},
                                  {"node", net.nodes[p.node].id},
                                  {"offer_usd_per_mwh", p.offer},
                                  {"sold_mwh", p.sold_mwh},
                                  {"revenue_usd", p.revenue}});
    return j.dump(2) + "\n";
}

std::string compare_json(const CompareReport& c, const std::string& generated_at) {
    json j;
    j["metadata"] = {{"pre", c.pre_name}, {"post", c.post_name}, {"generated_at", generated_at}};
    j["pre_cost_usd"] = c.pre_cost;
    j["post_cost_usd"] = c.post_cost;
    j["cost_ratio"] = c.cost_ratio;
    j["delta_curtailment_mw"] = c.delta_curtailment_mw;
    for (const auto& a : c.agents)
        j["agents"].push_back({{"id", a.id}, {"kind", a.kind}, {"pre_usd", a.pre}, {"post_usd", a.post}, {"delta_usd", a.delta}});
    double lo = 0, hi = 0;
    for (size_t i = 0; i < c.dlmp.size(); ++i) {
        lo = i ? std::min(lo, c.dlmp[i].delta) : c.dlmp[i].delta;
        hi = i ? std::max(hi, c.dlmp[i].delta) : c.dlmp[i].delta;
    }
    j["delta_dlmp_range_usd_per_mwh"] = {lo, hi};
    return j.dump(2) + "\n";
}

namespace {
void write_file(const std::filesystem::path& p, const std::string& body) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw SettlementError("cannot write " + p.string());
    f << body;
}

template <class F>
std::string render(F f) {
    std::ostringstream os;
    f(os);
    return os.str();
}
}  // namespace

void write_report(const std::string& dir, const SettlementReport& r, const Network& net,
                  const std::string& generated_at) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_file(fs::path(dir) / "report.json", report_json(r, net, generated_at));
    write_file(fs::path(dir) / "bills.csv", render([&](std::ostream& o) { write_bills_csv(o, r); }));
    write_file(fs::path(dir) / "dlmp.csv", render([&](std::ostream& o) { write_dlmp_csv(o, r, net); }));
    write_file(fs::path(dir) / "voltage.csv", render([&](std::ostream& o) { write_voltage_csv(o, r, net); }));
    write_file(fs::path(dir) / "trades.csv", render([&](std::ostream& o) { write_trades_csv(o, r); }));
}

void write_compare(const std::string& dir, const CompareReport& c, const std::string& generated_at) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_file(fs::path(dir) / "compare.json", compare_json(c, generated_at));
    write_file(fs::path(dir) / "compare_agents.csv", render([&](std::ostream& o) { write_compare_agents_csv(o, c); }));
    write_file(fs::path(dir) / "compare_nodes.csv", render([&](std::ostream& o) { write_compare_nodes_csv(o, c); }));
}

}  // namespace p2pgrid
