#include "p2pgrid/powerflow.hpp"

#include <cmath>
#include <numbers>

namespace p2pgrid {

using conic::Affine;
using conic::kInf;
using conic::Term;

CMat3 alpha_matrix() {
    const double th = 2.0 * std::numbers::pi / 3.0;
    const std::complex<double> one(1.0, 0.0);
    const std::complex<double> am = std::polar(1.0, -th);
    const std::complex<double> ap = std::polar(1.0, th);
    return {{{one, am, ap}, {ap, one, am}, {am, ap, one}}};
}

TildeImpedance compute_tilde(const Line& l) {
    const CMat3 al = alpha_matrix();
    TildeImpedance t;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            std::complex<double> aR = al[r][c] * l.R[r][c];
            std::complex<double> aX = al[r][c] * l.X[r][c];
            t.R[r][c] = aR.real() - aX.imag();
            t.X[r][c] = aX.real() + aR.imag();
            t.Z[r][c] = l.R[r][c] * l.R[r][c] + l.X[r][c] * l.X[r][c];
        }
    // the diagonal of alpha is exactly one
    for (int k = 0; k < 3; ++k) {
        t.R[k][k] = l.R[k][k];
        t.X[k][k] = l.X[k][k];
    }
    return t;
}

std::vector<NodeLoad> base_loads(const Network& net, const Agents& ag) {
    std::vector<NodeLoad> base = net.loads;
    for (const auto& c : ag.consumers) {
        if (!c.from_feeder) continue;
        for (int k = 0; k < 3; ++k)
            if (c.phases[k]) {
                base[c.node].P[k] = 0.0;
                base[c.node].Q[k] = 0.0;
            }
    }
    return base;
}

namespace {
std::string tag(const std::string& kind, const std::string& who, int k, int t) {
    return kind + ":" + who + ":" + kPhaseNames[k] + ":" + std::to_string(t);
}
}  // namespace

GridIndex assemble_grid(conic::ConicProblem& prob, const Network& net, const Agents& ag, const MarketIndex& mi,
                        const GridOptions& o) {
    const int T = o.time.horizon;
    const int N = static_cast<int>(net.nodes.size());
    const int L = static_cast<int>(net.lines.size());
    const double to_usd = net.bases.kva / 1000.0 * o.time.step_hours;
    const Vec3i none{-1, -1, -1};
    const double vmin2 = net.vbounds.v_min * net.vbounds.v_min;
    const double vmax2 = net.vbounds.v_max * net.vbounds.v_max;

    Topology topo = downstream_sets(net);
    std::vector<NodeLoad> base = base_loads(net, ag);

    GridIndex gi;
    gi.horizon = T;
    auto per_t = [&](int n) { return std::vector<std::vector<Vec3i>>(T, std::vector<Vec3i>(n, none)); };
    gi.v = per_t(N);
    gi.pbal = per_t(N);
    gi.qbal = per_t(N);
    gi.shd_base = per_t(N);
    gi.fp = per_t(L);
    gi.fq = per_t(L);
    gi.a = per_t(L);
    gi.vdrop = per_t(L);
    gi.relax_cone = per_t(L);
    gi.pug.assign(T, none);
    gi.qug.assign(T, none);
    gi.shd_consumer.assign(ag.consumers.size(), std::vector<Vec3i>(T, none));
    gi.base_p.assign(T, std::vector<Vec3>(N, Vec3{}));
    gi.base_q.assign(T, std::vector<Vec3>(N, Vec3{}));
    gi.consumer_ratio.assign(ag.consumers.size(), Vec3{});
    gi.base_ratio.assign(N, Vec3{});

    for (size_t j = 0; j < ag.consumers.size(); ++j)
        for (int k = 0; k < 3; ++k) {
            const Consumer& c = ag.consumers[j];
            if (c.phases[k] && c.demand[k] > 0) gi.consumer_ratio[j][k] = c.demand_q[k] / c.demand[k];
        }
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < 3; ++k)
            if (base[n].P[k] > 0) gi.base_ratio[n][k] = base[n].Q[k] / base[n].P[k];

    // A line phase feeding no load, injection or shunt carries no current in
    // the exact model; leaving it in lets the relaxation invent phantom
    // current to exploit mutual coupling, so it is dropped.
    std::vector<std::array<bool, 3>> active(N, {false, false, false});
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < 3; ++k)
            active[n][k] = base[n].P[k] != 0 || base[n].Q[k] != 0 || net.shunt_q[n][k] != 0;
    for (const auto& c : ag.consumers)
        for (int k = 0; k < 3; ++k) active[c.node][k] = active[c.node][k] || c.phases[k];
    for (const auto& p : ag.prosumers)
        for (int k = 0; k < 3; ++k) active[p.node][k] = active[p.node][k] || p.phases[k];
    for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
        int pl = topo.parent_line[*it];
        if (pl < 0) continue;
        for (int k = 0; k < 3; ++k) active[net.lines[pl].from][k] = active[net.lines[pl].from][k] || active[*it][k];
    }
    gi.live.assign(L, {false, false, false});
    for (int l = 0; l < L; ++l)
        for (int k = 0; k < 3; ++k)
            gi.live[l][k] = net.lines[l].in_service && net.lines[l].phases[k] && active[net.lines[l].to][k];

    std::vector<TildeImpedance> tilde(L);
    for (int l = 0; l < L; ++l) tilde[l] = compute_tilde(net.lines[l]);
    auto loss = [&](const Mat3& M, int r, int c) {
        if (o.loss == LossModel::diagonal && r != c) return 0.0;
        return M[r][c];
    };

    for (int t = 0; t < T; ++t) {
        double prof = profile_at(o.time, t);
        // variables
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < 3; ++k) {
                if (!net.nodes[n].phases[k]) continue;
                std::string id = std::to_string(net.nodes[n].id);
                gi.v[t][n][k] = n == net.substation ? prob.add_var(tag("v", id, k, t))
                                                    : prob.add_var(tag("v", id, k, t), vmin2, vmax2);
            }
        for (int l = 0; l < L; ++l) {
            const Line& ln = net.lines[l];
            if (!ln.in_service) continue;
            for (int k = 0; k < 3; ++k) {
                if (!gi.live[l][k]) continue;
                gi.fp[t][l][k] = prob.add_var(tag("fp", ln.id, k, t));
                gi.fq[t][l][k] = prob.add_var(tag("fq", ln.id, k, t));
                gi.a[t][l][k] = prob.add_var(tag("a", ln.id, k, t), ln.i_min * ln.i_min, ln.i_max * ln.i_max);
            }
        }
        for (int k = 0; k < 3; ++k) {
            if (!net.nodes[net.substation].phases[k]) continue;
            gi.pug[t][k] = prob.add_var(tag("Pug", "sub", k, t), -kInf, kInf, o.substation_price * to_usd);
            gi.qug[t][k] = prob.add_var(tag("Qug", "sub", k, t));
        }
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < 3; ++k) {
                gi.base_p[t][n][k] = base[n].P[k] * prof;
                gi.base_q[t][n][k] = base[n].Q[k] * prof;
                if (o.shedding && base[n].P[k] > 0)
                    gi.shd_base[t][n][k] = prob.add_var(tag("shd", "n" + std::to_string(net.nodes[n].id), k, t), 0.0,
                                                        gi.base_p[t][n][k], o.voll * to_usd);
            }
        if (o.shedding)
            for (size_t j = 0; j < ag.consumers.size(); ++j)
                for (int k = 0; k < 3; ++k) {
                    const Consumer& c = ag.consumers[j];
                    if (!c.phases[k]) continue;
                    int s = prob.add_var(tag("shd", c.id, k, t), 0.0, kInf, o.voll * to_usd);
                    gi.shd_consumer[j][t][k] = s;
                    int d = mi.dem[j][t][k];
                    prob.add_le(tag("shedcap", c.id, k, t), {{s, 1.0}, {d, -1.0}}, 0.0);
                    // curtailed energy is not cleared by the market
                    prob.eq(mi.consumer_row[j][t][k]).terms.push_back({s, 1.0});
                }

        // nodal balances
        for (int n = 0; n < N; ++n) {
            std::string id = std::to_string(net.nodes[n].id);
            for (int k = 0; k < 3; ++k) {
                if (!net.nodes[n].phases[k]) continue;
                std::vector<Term> tp, tq;
                int pl = topo.parent_line[n];
                if (pl >= 0 && gi.live[pl][k]) {
                    const Line& ln = net.lines[pl];
                    tp.push_back({gi.fp[t][pl][k], 1.0});
                    tq.push_back({gi.fq[t][pl][k], 1.0});
                    for (int m = 0; m < 3; ++m) {
                        if (!gi.live[pl][m]) continue;
                        double r = loss(ln.R, k, m), x = loss(ln.X, k, m);
                        if (r != 0) tp.push_back({gi.a[t][pl][m], -r});
                        if (x != 0) tq.push_back({gi.a[t][pl][m], -x});
                    }
                }
                for (int cl : topo.child_lines[n])
                    if (gi.live[cl][k]) {
                        tp.push_back({gi.fp[t][cl][k], -1.0});
                        tq.push_back({gi.fq[t][cl][k], -1.0});
                    }
                if (n == net.substation) {
                    tp.push_back({gi.pug[t][k], 1.0});
                    tq.push_back({gi.qug[t][k], 1.0});
                }
                for (size_t i = 0; i < ag.prosumers.size(); ++i)
                    if (ag.prosumers[i].node == n && ag.prosumers[i].phases[k]) {
                        tp.push_back({mi.P[i][t][k], 1.0});
                        tq.push_back({mi.Q[i][t][k], 1.0});
                    }
                double rhs_p = gi.base_p[t][n][k];
                double rhs_q = gi.base_q[t][n][k] - net.shunt_q[n][k];
                for (size_t j = 0; j < ag.consumers.size(); ++j) {
                    const Consumer& c = ag.consumers[j];
                    if (c.node != n || !c.phases[k]) continue;
                    double r = gi.consumer_ratio[j][k];
                    tp.push_back({mi.dem[j][t][k], -1.0});
                    if (r != 0) tq.push_back({mi.dem[j][t][k], -r});
                    else if (c.demand[k] == 0) rhs_q += c.demand_q[k] * prof;
                    int s = gi.shd_consumer[j][t][k];
                    if (s >= 0) {
                        tp.push_back({s, 1.0});
                        if (r != 0) tq.push_back({s, r});
                    }
                }
                if (int s = gi.shd_base[t][n][k]; s >= 0) {
                    tp.push_back({s, 1.0});
                    if (gi.base_ratio[n][k] != 0) tq.push_back({s, gi.base_ratio[n][k]});
                }
                // a dead node phase has nothing to balance
                if (!tp.empty() || rhs_p != 0) gi.pbal[t][n][k] = prob.add_eq(tag("pbal", id, k, t), tp, rhs_p);
                if (!tq.empty() || rhs_q != 0) gi.qbal[t][n][k] = prob.add_eq(tag("qbal", id, k, t), tq, rhs_q);
            }
        }
        for (int k = 0; k < 3; ++k)
            if (gi.v[t][net.substation][k] >= 0)
                prob.add_eq(tag("vsub", "sub", k, t), {{gi.v[t][net.substation][k], 1.0}},
                            o.v_substation * o.v_substation);

        // lines
        for (int l = 0; l < L; ++l) {
            const Line& ln = net.lines[l];
            if (!ln.in_service) continue;
            const TildeImpedance& td = tilde[l];
            for (int k = 0; k < 3; ++k) {
                if (!ln.phases[k]) continue;
                int vi = gi.v[t][ln.to][k], vj = gi.v[t][ln.from][k];
                int fp = gi.fp[t][l][k], fq = gi.fq[t][l][k], a = gi.a[t][l][k];
                std::vector<Term> vd{{vi, 1.0}, {vj, -1.0}};
                for (int m = 0; m < 3; ++m) {
                    if (!gi.live[l][m]) continue;
                    if (td.R[k][m] != 0) vd.push_back({gi.fp[t][l][m], 2.0 * td.R[k][m]});
                    if (td.X[k][m] != 0) vd.push_back({gi.fq[t][l][m], 2.0 * td.X[k][m]});
                    if (td.Z[k][m] != 0) vd.push_back({gi.a[t][l][m], -td.Z[k][m]});
                }
                gi.vdrop[t][l][k] = prob.add_eq(tag("vdrop", ln.id, k, t), vd, 0.0);
                if (!gi.live[l][k]) continue;

                gi.relax_cone[t][l][k] = prob.add_cone(
                    tag("relax", ln.id, k, t),
                    {Affine{{{a, 1.0}, {vj, 1.0}}, 0.0}, Affine{{{fp, 2.0}}, 0.0}, Affine{{{fq, 2.0}}, 0.0},
                     Affine{{{a, 1.0}, {vj, -1.0}}, 0.0}});
                prob.add_cone(tag("send", ln.id, k, t),
                              {Affine{{}, ln.s_limit}, Affine{{{fp, 1.0}}, 0.0}, Affine{{{fq, 1.0}}, 0.0}});
                Affine rp{{{fp, 1.0}}, 0.0}, rq{{{fq, 1.0}}, 0.0};
                for (int m = 0; m < 3; ++m) {
                    if (!gi.live[l][m]) continue;
                    double r = loss(ln.R, k, m), x = loss(ln.X, k, m);
                    if (r != 0) rp.terms.push_back({gi.a[t][l][m], -r});
                    if (x != 0) rq.terms.push_back({gi.a[t][l][m], -x});
                }
                prob.add_cone(tag("recv", ln.id, k, t), {Affine{{}, ln.s_limit}, rp, rq});
            }
        }
    }
    return gi;
}

SocReport check_soc_tightness(const std::vector<double>& x, const GridIndex& gi, const Network& net, double eps,
                              double threshold) {
    SocReport rep;
    double sum = 0.0;
    for (int t = 0; t < gi.horizon; ++t)
        for (size_t l = 0; l < net.lines.size(); ++l) {
            const Line& ln = net.lines[l];
            if (!ln.in_service) continue;
            for (int k = 0; k < 3; ++k) {
                if (gi.a[t][l][k] < 0) continue;
                double a = x[gi.a[t][l][k]];
                double v = x[gi.v[t][ln.from][k]];
                double fp = x[gi.fp[t][l][k]], fq = x[gi.fq[t][l][k]];
                double av = a * v;
                double g = (av - (fp * fp + fq * fq)) / std::max(av, eps);
                SocGap e{static_cast<int>(l), k, t, g};
                rep.gaps.push_back(e);
                sum += g;
                rep.max_gap = std::max(rep.max_gap, g);
                if (g > threshold) rep.flagged.push_back(e);
            }
        }
    if (!rep.gaps.empty()) rep.mean_gap = sum / rep.gaps.size();
    return rep;
}

}  // namespace p2pgrid
