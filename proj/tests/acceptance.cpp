// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria (capped at 100), so ctest reports red if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <string>

#include "support.hpp"

using namespace p2pgrid;
using namespace p2pgrid::testing;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
    std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

struct Timed {
    Solved s;
    double seconds = 0.0;
};

Timed timed(const std::string& rel) {
    auto t0 = std::chrono::steady_clock::now();
    Timed t{solve_file(rel), 0.0};
    t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return t;
}

bool optimal(const Solved& s) { return s.sol.status == conic::Status::optimal; }

double total_cost(const Solved& s) { return compute_settlement(s.model, s.sol, s.dlmp).total_cost; }

void criterion1(const Timed& pre) {
    if (!optimal(pre.s)) return report(1, false, "pre-attack DLMP band", "solve not optimal");
    double lo = pre.s.dlmp.min_price(), hi = pre.s.dlmp.max_price();
    bool ok = lo >= 34.0 && hi <= 39.0 && pre.seconds < 10.0;
    report(1, ok, "pre-attack DLMP band", fmt("[%.4f, %.4f] within [34, 39], %.3f s", lo, hi, pre.seconds));
}

void criterion2(const Timed& pre, const Timed& post) {
    if (!optimal(pre.s) || !optimal(post.s)) return report(2, false, "post-attack DLMP shift", "solve not optimal");
    double lo = post.s.dlmp.min_price(), hi = post.s.dlmp.max_price();
    auto a = compute_settlement(pre.s.model, pre.s.sol, pre.s.dlmp);
    auto b = compute_settlement(post.s.model, post.s.sol, post.s.dlmp);
    int bills_up = 0;
    for (size_t j = 0; j < a.consumers.size(); ++j)
        if (b.consumers[j].bill > a.consumers[j].bill) ++bills_up;
    double rev_pre = 0, rev_post = 0;
    for (size_t i = 0; i < a.prosumers.size(); ++i)
        if (a.prosumers[i].id == "P13") rev_pre = a.prosumers[i].revenue, rev_post = b.prosumers[i].revenue;
    bool ok = lo >= 44.0 && hi <= 52.0 && bills_up == static_cast<int>(a.consumers.size()) && rev_post > rev_pre &&
              post.seconds < 10.0;
    report(2, ok, "post-attack DLMP shift",
           fmt("[%.4f, %.4f] within [44, 52]; %d/%zu bills up; P13 revenue %.2f -> %.2f; %.3f s", lo, hi, bills_up,
               a.consumers.size(), rev_pre, rev_post, post.seconds));
}

void criterion3(const Timed& pre, const Timed& post) {
    if (!optimal(pre.s) || !optimal(post.s)) return report(3, false, "total-cost ordering", "solve not optimal");
    double c0 = total_cost(pre.s), c1 = total_cost(post.s);
    report(3, c1 >= 1.4 * c0, "total-cost ordering", fmt("%.4f -> %.4f, ratio %.4f >= 1.4", c0, c1, c1 / c0));
}

void criterion4(const Timed& out) {
    if (!optimal(out.s)) return report(4, false, "line-outage curtailment", "solve not optimal");
    const Network& net = out.s.model.scenario.network;
    auto island = islanded_nodes(net);
    std::set<int> in_island(island.begin(), island.end());
    auto r = compute_settlement(out.s.model, out.s.sol, out.s.dlmp);
    const double voll = out.s.model.scenario.voll;
    double shed = 0.0, worst = 0.0;
    int shed_points = 0, off = 0;
    std::string offenders;
    for (const auto& c : r.curtailment) {
        if (in_island.count(c.node)) shed += std::max(0.0, c.value);
        // shed below a watt is solver noise, not curtailment
        if (c.value <= 1e-6) continue;
        ++shed_points;
        double p = out.s.dlmp.at(c.node, c.phase, c.t);
        double rel = std::abs(p - voll) / voll;
        worst = std::max(worst, rel);
        if (rel > 1e-3) {
            ++off;
            offenders += fmt(" %d%c=%.1f", net.nodes[c.node].id, kPhaseNames[c.phase], p);
        }
    }
    bool ok = shed >= 1.0 && shed <= 2.5 && off == 0;
    report(4, ok, "line-outage curtailment",
           fmt("island shed %.4f MW within [1.0, 2.5]; %d/%d shed points at VOLL within 0.1%% (worst %.2f%%)%s", shed,
               shed_points - off, shed_points, 100 * worst, offenders.c_str()));
}

void criterion5() {
    Solved s = solve_file("scenarios/two_node.json");
    if (!optimal(s)) return report(5, false, "two-node oracle", "solve not optimal");
    TwoNodeDispatch m = two_node_from_model(s), o = two_node_oracle(s.model.scenario);
    double dx = std::max({std::abs(m.p_remote - o.p_remote), std::abs(m.q_remote - o.q_remote),
                          std::abs(m.p_local - o.p_local), std::abs(m.pug - o.pug), std::abs(m.fp - o.fp),
                          std::abs(m.fq - o.fq), std::abs(m.a - o.a), std::abs(m.v2 - o.v2)});
    double dobj = std::abs(m.objective - o.objective) / std::abs(o.objective);
    report(5, dx <= 1e-5 && dobj <= 1e-6, "two-node oracle",
           fmt("max dispatch/flow/voltage diff %.2e pu <= 1e-5; objective %.8f vs %.8f, rel %.2e <= 1e-6", dx,
               m.objective, o.objective, dobj));
}

void criterion6(const std::vector<std::pair<std::string, const Timed*>>& cases) {
    bool ok = true;
    std::string detail;
    std::mt19937 rng(20240613);
    for (const auto& [name, t] : cases) {
        const Solved& s = t->s;
        if (!optimal(s)) {
            ok = false;
            detail += name + " not optimal; ";
            continue;
        }
        // only node-phases that carry a balance row are priced by the grid
        std::vector<const DlmpEntry*> pool;
        for (const auto& e : s.dlmp.entries)
            if (s.model.grid.pbal[e.t][e.node][e.phase] >= 0) pool.push_back(&e);
        std::vector<int> idx(pool.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        std::shuffle(idx.begin(), idx.end(), rng);
        detail += name + ":";
        for (int i = 0; i < 3 && i < static_cast<int>(idx.size()); ++i) {
            const DlmpEntry& e = *pool[idx[i]];
            double fd = fd_dlmp(s.model.scenario, e.node, e.phase, 1e-4);
            double rel = std::abs(fd - e.price) / std::max(std::abs(fd), 1e-12);
            if (rel > 0.01) ok = false;
            detail += fmt(" %d%c %.4f/%.4f (%.2f%%)", s.model.scenario.network.nodes[e.node].id, kPhaseNames[e.phase],
                          e.price, fd, 100 * rel);
        }
        detail += "; ";
    }
    report(6, ok, "DLMP-sensitivity identity", detail + "dual/FD within 1%");
}

void criterion7(const std::vector<std::pair<std::string, const Timed*>>& cases) {
    bool ok = true;
    std::string detail;
    for (const auto& [name, t] : cases) {
        if (!optimal(t->s)) {
            ok = false;
            detail += name + " not optimal; ";
            continue;
        }
        Invariants inv = check_invariants(t->s);
        bool base = name == "pre";
        bool good = inv.balance <= 1e-6 && inv.vdrop <= 1e-8 && inv.voltage <= 1e-9 && inv.inverter <= 1e-9 &&
                    inv.trade <= 1e-9 && (!base || inv.soc_max_gap <= 1e-4);
        ok = ok && good;
        detail += fmt("%s bal %.1e vdrop %.1e v %.1e inv %.1e trade %.1e soc %.1e%s; ", name.c_str(), inv.balance,
                      inv.vdrop, std::max(0.0, inv.voltage), inv.inverter, inv.trade, inv.soc_max_gap,
                      base ? "" : " (reported)");
    }
    report(7, ok, "physics invariants", detail);
}

void criterion8() {
    const CMat3 al = alpha_matrix();
    const double h = std::sqrt(3.0) / 2.0;
    const std::complex<double> am(-0.5, -h), ap(-0.5, h), one(1.0, 0.0);
    const std::complex<double> want[3][3] = {{one, am, ap}, {ap, one, am}, {am, ap, one}};
    double e_alpha = 0.0, e_z = 0.0, e_diag = 0.0, e_prod = 0.0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) e_alpha = std::max(e_alpha, std::abs(al[r][c] - want[r][c]));
    Network net = load_feeder(source_path("data/ieee13_mod.json"));
    for (const auto& ln : net.lines) {
        TildeImpedance t = compute_tilde(ln);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                std::complex<double> z(ln.R[r][c], ln.X[r][c]);
                e_z = std::max(e_z, std::abs(t.Z[r][c] - std::norm(z)));
                std::complex<double> zt = want[r][c] * z;
                e_prod = std::max(e_prod, std::abs(std::complex<double>(t.R[r][c], t.X[r][c]) - zt));
            }
        for (int k = 0; k < 3; ++k)
            e_diag = std::max({e_diag, std::abs(t.R[k][k] - ln.R[k][k]), std::abs(t.X[k][k] - ln.X[k][k])});
    }
    bool ok = e_alpha <= 1e-12 && e_z <= 1e-12 && e_diag <= 1e-12 && e_prod <= 1e-12;
    report(8, ok, "tilde impedance",
           fmt("alpha %.1e, |Z|^2 %.1e, diagonal %.1e, alpha*Z %.1e, all <= 1e-12 over %zu lines", e_alpha, e_z,
               e_diag, e_prod, net.lines.size()));
}

void criterion9() {
    const char* files[] = {"ieee13_pre", "ieee13_coord_attack", "ieee13_lineout",
                           "two_node",   "empty_agents",        "infeasible_noshed"};
    bool ok = true;
    std::string detail;
    for (const char* f : files) {
        std::string rel = std::string("scenarios/") + f + ".json";
        Solved a = solve_file(rel), b = solve_file(rel);
        bool same = a.sol.status == b.sol.status;
        double dobj = std::abs(a.sol.objective - b.sol.objective);
        if (optimal(a) && optimal(b)) same = same && dobj <= 1e-9 && render_tables(a) == render_tables(b);
        ok = ok && same;
        detail += fmt("%s %s (%s); ", f, same ? "same" : "DIFFERENT", conic::to_string(a.sol.status));
    }
    report(9, ok, "determinism", detail);
}

}  // namespace

int main() {
    Timed pre = timed("scenarios/ieee13_pre.json");
    Timed post = timed("scenarios/ieee13_coord_attack.json");
    Timed out = timed("scenarios/ieee13_lineout.json");
    std::vector<std::pair<std::string, const Timed*>> cases = {{"pre", &pre}, {"post", &post}, {"lineout", &out}};

    criterion1(pre);
    criterion2(pre, post);
    criterion3(pre, post);
    criterion4(out);
    criterion5();
    criterion6(cases);
    criterion7(cases);
    criterion8();
    criterion9();

    std::printf("%d of 9 criteria failed\n", failures);
    return std::min(failures, 100);
}
