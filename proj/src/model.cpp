#include "p2pgrid/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace p2pgrid {

Model assemble(const ScenarioSpec& scenario) {
    Model m;
    m.scenario = apply_attacks(scenario);
    GridOptions go = m.scenario.grid_options();
    m.market = assemble_market(m.problem, m.scenario.agents, m.scenario.network, go.time);
    m.grid = assemble_grid(m.problem, m.scenario.network, m.scenario.agents, m.market, go);
    m.problem.validate();
    return m;
}

std::string infeasibility_hint(const Model& m) {
    const ScenarioSpec& s = m.scenario;
    std::ostringstream os;
    if (!s.shedding) {
        os << "load shedding is disabled; loads that must be served at:";
        std::vector<NodeLoad> base = base_loads(s.network, s.agents);
        for (size_t n = 0; n < s.network.nodes.size(); ++n) {
            bool has = false;
            for (int k = 0; k < 3; ++k) has = has || base[n].P[k] > 0;
            for (const auto& c : s.agents.consumers) has = has || static_cast<size_t>(c.node) == n;
            if (has) os << " " << s.network.nodes[n].id;
        }
        os << "; check line limits on the paths to these nodes or enable shedding";
    } else {
        os << "problem is infeasible even with load shedding; check voltage bounds, the substation voltage and "
              "minimum current limits";
    }
    return os.str();
}

const char* to_string(PriceSource s) {
    switch (s) {
        case PriceSource::consumer: return "consumer";
        case PriceSource::market: return "market";
        case PriceSource::grid: return "grid";
    }
    return "?";
}

const DlmpEntry* DLMPSurface::find(int node, int phase, int t) const {
    for (const auto& e : entries)
        if (e.node == node && e.phase == phase && e.t == t) return &e;
    return nullptr;
}

double DLMPSurface::at(int node, int phase, int t) const {
    const DlmpEntry* e = find(node, phase, t);
    if (!e) throw std::out_of_range("no DLMP at node index " + std::to_string(node) + " phase " + kPhaseNames[phase]);
    return e->price;
}

double DLMPSurface::min_price() const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) v = std::min(v, e.price);
    return v;
}

double DLMPSurface::max_price() const {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& e : entries) v = std::max(v, e.price);
    return v;
}

namespace {

struct Column {
    std::vector<std::pair<int, double>> eq, le;
};

// Marginal cost of serving one more unit of a consumer's demand, i.e. the
// demand row dual with the consumer's own utility removed. Works for elastic
// phases too, where there is no demand row.
double supply_marginal(const conic::Solution& sol, const Column& col, int demand_row) {
    double s = 0.0;
    for (auto [r, c] : col.eq)
        if (r != demand_row) s -= c * sol.eq_dual[r];
    for (auto [r, c] : col.le) s += c * sol.le_dual[r];
    return s;
}

}  // namespace

DLMPSurface extract_dlmp(const conic::Solution& sol, const Model& m) {
    const Network& net = m.scenario.network;
    const Agents& ag = m.scenario.agents;
    const GridIndex& gi = m.grid;
    const MarketIndex& mi = m.market;
    const int N = static_cast<int>(net.nodes.size());
    const double to_usd = net.bases.kva / 1000.0 * m.scenario.step_hours;
    const double voll_pu = m.scenario.voll * to_usd;

    std::vector<Column> cols(m.problem.vars().size());
    for (size_t r = 0; r < m.problem.eqs().size(); ++r)
        for (const auto& tm : m.problem.eqs()[r].terms) cols[tm.var].eq.push_back({static_cast<int>(r), tm.coef});
    for (size_t r = 0; r < m.problem.les().size(); ++r)
        for (const auto& tm : m.problem.les()[r].terms) cols[tm.var].le.push_back({static_cast<int>(r), tm.coef});

    Topology topo = downstream_sets(net);
    DLMPSurface out;
    for (int t = 0; t < gi.horizon; ++t) {
        std::vector<Vec3> lp(N, Vec3{}), lq(N, Vec3{});
        std::vector<std::array<bool, 3>> have(N, {false, false, false});
        // parents come before children in topo.order
        for (int n : topo.order)
            for (int k = 0; k < 3; ++k) {
                if (!net.nodes[n].phases[k]) continue;
                int rp = gi.pbal[t][n][k], rq = gi.qbal[t][n][k];
                if (rp >= 0) {
                    lp[n][k] = sol.eq_dual[rp];
                    lq[n][k] = rq >= 0 ? sol.eq_dual[rq] : 0.0;
                    have[n][k] = true;
                    continue;
                }
                int pl = topo.parent_line[n];
                if (pl >= 0 && have[net.lines[pl].from][k]) {
                    lp[n][k] = lp[net.lines[pl].from][k];
                    lq[n][k] = lq[net.lines[pl].from][k];
                    have[n][k] = true;
                }
            }

        for (int n = 0; n < N; ++n)
            for (int k = 0; k < 3; ++k) {
                if (!net.nodes[n].phases[k]) continue;
                DlmpEntry e;
                e.node = n;
                e.phase = k;
                e.t = t;
                e.lambda_p = lp[n][k];
                e.lambda_q = lq[n][k];
                double price = lp[n][k], price_pf = lp[n][k] + lq[n][k] * gi.base_ratio[n][k];

                int cj = -1;
                for (size_t j = 0; j < ag.consumers.size() && cj < 0; ++j) {
                    const Consumer& c = ag.consumers[j];
                    if (c.node == n && c.phases[k] && c.demand[k] > 0) cj = static_cast<int>(j);
                }
                bool has_base = gi.base_p[t][n][k] > 0;
                if (cj >= 0) {
                    int d = mi.dem[cj][t][k];
                    double kappa = supply_marginal(sol, cols[d], mi.demand_row[cj][t][k]);
                    double r = gi.consumer_ratio[cj][k];
                    double D = sol.x[d];
                    int s = gi.shd_consumer[cj][t][k];
                    double shd = s >= 0 ? sol.x[s] : 0.0;
                    // raising P with Q held fixed changes the power factor of
                    // whatever gets curtailed
                    price = kappa + (D > 0 ? lq[n][k] * r * (shd / D - 1.0) : -lq[n][k] * r);
                    price_pf = kappa;
                    e.source = PriceSource::consumer;
                } else if (!has_base) {
                    // a new consumer here buys from the cheapest seller on
                    // this phase, or sheds
                    double best = std::numeric_limits<double>::infinity();
                    for (size_t i = 0; i < ag.prosumers.size(); ++i)
                        if (int r = mi.prosumer_row[i][t][k]; r >= 0) best = std::min(best, sol.eq_dual[r]);
                    if (std::isfinite(best)) {
                        double g = lp[n][k] + best;
                        if (m.scenario.shedding) g = std::min(g, voll_pu);
                        price = price_pf = g;
                        e.source = PriceSource::market;
                    }
                }
                e.price = price / to_usd;
                e.price_pf = price_pf / to_usd;
                e.lambda_p /= to_usd;
                e.lambda_q /= to_usd;
                out.entries.push_back(e);
            }
    }
    return out;
}

}  // namespace p2pgrid
