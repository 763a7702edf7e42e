#include "support.hpp"

#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace p2pgrid::testing {

std::string source_path(const std::string& rel) { return std::string(P2PGRID_SOURCE_DIR) + "/" + rel; }

Solved solve_spec(const ScenarioSpec& spec, const conic::SolverOptions& opts) {
    Solved s;
    s.model = assemble(spec);
    s.sol = conic::solve(s.model.problem, opts);
    if (s.sol.status == conic::Status::optimal) s.dlmp = extract_dlmp(s.sol, s.model);
    return s;
}

Solved solve_file(const std::string& rel) { return solve_spec(load_scenario(source_path(rel))); }

TwoBusFlow newton_two_bus(double v1, double r, double x, double p_load, double q_load) {
    const std::complex<double> y = 1.0 / std::complex<double>(r, x);
    const double g = y.real(), b = y.imag();
    double th = 0.0, V = v1;
    TwoBusFlow out;
    for (int it = 0; it < 50; ++it) {
        double c = std::cos(th), s = std::sin(th);
        // injections at bus 2 must equal minus the load
        double P = V * V * g - V * v1 * (g * c + b * s);
        double Q = -V * V * b - V * v1 * (g * s - b * c);
        double f1 = P + p_load, f2 = Q + q_load;
        out.iterations = it;
        if (std::max(std::abs(f1), std::abs(f2)) < 1e-14) break;
        double dPdt = V * v1 * (g * s - b * c);
        double dPdV = 2 * V * g - v1 * (g * c + b * s);
        double dQdt = -V * v1 * (g * c + b * s);
        double dQdV = -2 * V * b - v1 * (g * s - b * c);
        double det = dPdt * dQdV - dPdV * dQdt;
        th -= (f1 * dQdV - f2 * dPdV) / det;
        V -= (dPdt * f2 - dQdt * f1) / det;
    }
    out.v2 = std::polar(V, th);
    std::complex<double> I = y * (std::complex<double>(v1, 0.0) - out.v2);
    std::complex<double> S = v1 * std::conj(I);
    out.p_send = S.real();
    out.q_send = S.imag();
    out.i_sq = std::norm(I);
    return out;
}

namespace {

template <class F>
double golden(F f, double lo, double hi, double* fmin) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 120 && b - a > 1e-13; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    double xm = 0.5 * (a + b);
    // the ends are candidates too: the optimum can sit on a bound
    double best = xm, fb = f(xm);
    for (double e : {lo, hi}) {
        double fe = f(e);
        if (fe < fb) best = e, fb = fe;
    }
    if (fmin) *fmin = fb;
    return best;
}

}  // namespace

TwoNodeDispatch two_node_oracle(const ScenarioSpec& spec) {
    const Network& net = spec.network;
    if (net.lines.size() != 1 || spec.agents.prosumers.size() != 2 || spec.agents.consumers.size() != 1)
        throw std::invalid_argument("two_node_oracle expects one line, two prosumers, one consumer");
    const Line& ln = net.lines[0];
    const int k = 0;
    const double r = ln.R[k][k], x = ln.X[k][k];
    const double v1 = spec.v_substation;
    const Consumer& c = spec.agents.consumers[0];
    const double D = c.demand[k], QD = c.demand_q[k];
    const Prosumer* local = nullptr;
    const Prosumer* remote = nullptr;
    for (const auto& p : spec.agents.prosumers) (p.node == net.substation ? local : remote) = &p;
    if (!local || !remote) throw std::invalid_argument("two_node_oracle expects one prosumer at each end");
    const double to_usd = net.bases.kva / 1000.0 * spec.step_hours;

    auto cost = [&](double P, double Q) {
        TwoBusFlow f = newton_two_bus(v1, r, x, D - P, QD - Q);
        double p_local = D - P;  // trades clear the whole demand
        double pug = f.p_send - p_local;
        return (local->offer * p_local + remote->offer * P + spec.substation_price * pug) * to_usd;
    };
    auto q_range = [&](double P) {
        double cap = std::sqrt(std::max(0.0, remote->s_inv * remote->s_inv - P * P));
        return std::pair{std::max(remote->q_min, -cap), std::min(remote->q_max, cap)};
    };
    auto best_q = [&](double P, double* f) {
        auto [lo, hi] = q_range(P);
        return golden([&](double Q) { return cost(P, Q); }, lo, hi, f);
    };
    double fbest = 0.0;
    double P = golden(
        [&](double p) {
            double f;
            best_q(p, &f);
            return f;
        },
        std::max(0.0, remote->p_min), std::min(remote->p_max, remote->s_inv), &fbest);
    double Q = best_q(P, &fbest);

    TwoNodeDispatch d;
    TwoBusFlow f = newton_two_bus(v1, r, x, D - P, QD - Q);
    d.p_remote = P;
    d.q_remote = Q;
    d.p_local = D - P;
    d.pug = f.p_send - d.p_local;
    d.fp = f.p_send;
    d.fq = f.q_send;
    d.a = f.i_sq;
    d.v2 = std::norm(f.v2);
    d.objective = fbest;
    return d;
}

TwoNodeDispatch two_node_from_model(const Solved& s) {
    const auto& x = s.sol.x;
    const auto& mi = s.model.market;
    const auto& gi = s.model.grid;
    const auto& ag = s.model.scenario.agents;
    const int sub = s.model.scenario.network.substation;
    TwoNodeDispatch d;
    for (size_t i = 0; i < ag.prosumers.size(); ++i) {
        if (ag.prosumers[i].node == sub) {
            d.p_local = x[mi.P[i][0][0]];
        } else {
            d.p_remote = x[mi.P[i][0][0]];
            d.q_remote = x[mi.Q[i][0][0]];
        }
    }
    d.pug = x[gi.pug[0][0]];
    d.fp = x[gi.fp[0][0][0]];
    d.fq = x[gi.fq[0][0][0]];
    d.a = x[gi.a[0][0][0]];
    d.v2 = x[gi.v[0][1 - sub][0]];
    d.objective = s.sol.objective;
    return d;
}

double fd_dlmp(const ScenarioSpec& attacked, int node, int phase, double delta) {
    auto objective = [](const ScenarioSpec& s) {
        Solved r = solve_spec(s);
        if (r.sol.status != conic::Status::optimal) throw std::runtime_error("finite-difference solve not optimal");
        return r.sol.objective;
    };
    const double to_usd = attacked.network.bases.kva / 1000.0 * attacked.step_hours;
    int cj = -1;
    for (size_t j = 0; j < attacked.agents.consumers.size() && cj < 0; ++j) {
        const Consumer& c = attacked.agents.consumers[j];
        if (c.node == node && c.phases[phase] && c.demand[phase] > 0) cj = static_cast<int>(j);
    }
    auto shift = [&](double d) {
        ScenarioSpec s = attacked;
        if (cj >= 0) {
            Consumer& c = s.agents.consumers[cj];
            c.demand[phase] += d;  // demand_q untouched
            c.demand_min[phase] += d;
            c.demand_max[phase] += d;
        } else if (attacked.network.loads[node].P[phase] > 0) {
            s.network.loads[node].P[phase] += d;
        } else {
            Consumer c;
            c.id = "fd-probe";
            c.node = node;
            c.phases[phase] = true;
            c.demand[phase] = c.demand_min[phase] = c.demand_max[phase] = c.true_demand[phase] = d;
            s.agents.consumers.push_back(c);
        }
        return s;
    };
    double up = objective(shift(delta));
    if (cj >= 0 || attacked.network.loads[node].P[phase] > 0) {
        double down = objective(shift(-delta));
        return (up - down) / (2 * delta) / to_usd;
    }
    return (up - objective(attacked)) / delta / to_usd;
}

std::vector<int> bfs_parent_nodes(const Network& net) {
    const int N = static_cast<int>(net.nodes.size());
    std::vector<std::vector<int>> adj(N);
    for (const auto& l : net.lines) {
        if (!l.in_service) continue;
        adj[l.from].push_back(l.to);
        adj[l.to].push_back(l.from);
    }
    std::vector<int> parent(N, -2);
    parent[net.substation] = -1;
    std::queue<int> q;
    q.push(net.substation);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int v : adj[u])
            if (parent[v] == -2) {
                parent[v] = u;
                q.push(v);
            }
    }
    return parent;
}

Invariants check_invariants(const Solved& s) {
    Invariants inv;
    const auto& p = s.model.problem;
    const auto& x = s.sol.x;
    auto starts = [](const std::string& a, const char* b) { return a.rfind(b, 0) == 0; };
    for (const auto& row : p.eqs()) {
        double r = std::abs(conic::eval(row.terms, x) - row.rhs);
        if (starts(row.label, "pbal:") || starts(row.label, "qbal:")) inv.balance = std::max(inv.balance, r);
        if (starts(row.label, "vdrop:")) inv.vdrop = std::max(inv.vdrop, r);
        if (starts(row.label, "sell:") || starts(row.label, "buy:")) inv.trade = std::max(inv.trade, r);
    }
    for (size_t i = 0; i < p.vars().size(); ++i) {
        const auto& v = p.vars()[i];
        if (!starts(v.name, "v:")) continue;
        inv.voltage = std::max({inv.voltage, v.lb - x[i], x[i] - v.ub});
    }
    for (const auto& c : p.cones()) {
        double head = conic::eval(c.entries[0], x), tail = 0.0;
        for (size_t e = 1; e < c.entries.size(); ++e) tail += std::pow(conic::eval(c.entries[e], x), 2);
        double viol = std::max(0.0, std::sqrt(tail) - head);
        inv.cones = std::max(inv.cones, viol);
        if (starts(c.label, "inv:")) {
            double P = conic::eval(c.entries[1], x), Q = conic::eval(c.entries[2], x);
            inv.inverter = std::max(inv.inverter, -inverter_cone(P, Q, c.entries[0].constant));
        }
    }
    inv.soc_max_gap = check_soc_tightness(x, s.model.grid, s.model.scenario.network).max_gap;
    return inv;
}

std::string render_tables(const Solved& s) {
    SettlementReport r = compute_settlement(s.model, s.sol, s.dlmp);
    const Network& net = s.model.scenario.network;
    std::ostringstream os;
    write_bills_csv(os, r);
    write_dlmp_csv(os, r, net);
    write_voltage_csv(os, r, net);
    write_trades_csv(os, r);
    return os.str();
}

}  // namespace p2pgrid::testing
