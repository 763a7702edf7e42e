// Homogeneous self-dual primal-dual interior point method for
//   min c'x  s.t.  Ax = b,  Gx + s = h,  s in K
// with K a product of a nonnegative orthant and second-order cones.
// Nesterov-Todd scaling, Mehrotra predictor-corrector, sparse LDL' on the
// regularized full KKT system.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "p2pgrid/conic.hpp"

namespace p2pgrid::conic {
namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Dims {
    int l = 0;
    std::vector<int> q;
    std::vector<int> qoff;
    int m = 0;
    int degree() const { return l + static_cast<int>(q.size()); }
};

// cone algebra ---------------------------------------------------------

double soc_det(const double* u, int k) {
    double n1 = 0.0;
    for (int i = 1; i < k; ++i) n1 += u[i] * u[i];
    n1 = std::sqrt(n1);
    return (u[0] - n1) * (u[0] + n1);
}

Vec jprod(const Dims& d, const Vec& u, const Vec& v) {
    Vec r(d.m);
    for (int i = 0; i < d.l; ++i) r[i] = u[i] * v[i];
    for (size_t b = 0; b < d.q.size(); ++b) {
        int o = d.qoff[b], k = d.q[b];
        r[o] = u.segment(o, k).dot(v.segment(o, k));
        for (int i = 1; i < k; ++i) r[o + i] = u[o] * v[o + i] + v[o] * u[o + i];
    }
    return r;
}

// w with lam o w = r
Vec jdiv(const Dims& d, const Vec& lam, const Vec& r) {
    Vec w(d.m);
    for (int i = 0; i < d.l; ++i) w[i] = r[i] / lam[i];
    for (size_t b = 0; b < d.q.size(); ++b) {
        int o = d.qoff[b], k = d.q[b];
        double det = soc_det(lam.data() + o, k);
        double l1r1 = lam.segment(o + 1, k - 1).dot(r.segment(o + 1, k - 1));
        double w0 = (lam[o] * r[o] - l1r1) / det;
        w[o] = w0;
        for (int i = 1; i < k; ++i) w[o + i] = (r[o + i] - w0 * lam[o + i]) / lam[o];
    }
    return w;
}

Vec identity(const Dims& d) {
    Vec e = Vec::Zero(d.m);
    for (int i = 0; i < d.l; ++i) e[i] = 1.0;
    for (int o : d.qoff) e[o] = 1.0;
    return e;
}

// smallest t with u + t*e in K (negative when u is interior)
double violation(const Dims& d, const Vec& u) {
    double t = -kInf;
    for (int i = 0; i < d.l; ++i) t = std::max(t, -u[i]);
    for (size_t b = 0; b < d.q.size(); ++b) {
        int o = d.qoff[b], k = d.q[b];
        t = std::max(t, u.segment(o + 1, k - 1).norm() - u[o]);
    }
    return t;
}

// largest alpha with u + alpha*du in K, u interior
double max_step(const Dims& d, const Vec& u, const Vec& du) {
    double a = kInf;
    for (int i = 0; i < d.l; ++i)
        if (du[i] < 0) a = std::min(a, -u[i] / du[i]);
    for (size_t b = 0; b < d.q.size(); ++b) {
        int o = d.qoff[b], k = d.q[b];
        // f(t) = qa t^2 + 2 qb t + qc, qc > 0
        double qa = du[o] * du[o] - du.segment(o + 1, k - 1).squaredNorm();
        double qb = u[o] * du[o] - u.segment(o + 1, k - 1).dot(du.segment(o + 1, k - 1));
        double qc = soc_det(u.data() + o, k);
        double t = kInf;
        if (std::abs(qa) < 1e-300) {
            if (qb < 0) t = -qc / (2 * qb);
        } else {
            double disc = qb * qb - qa * qc;
            if (disc >= 0) {
                double sq = std::sqrt(disc);
                // stable roots of qa t^2 + 2 qb t + qc
                double qq = -(qb + std::copysign(sq, qb));
                double r1 = qq / qa;
                double r2 = (qq != 0.0) ? qc / qq : kInf;
                for (double r : {r1, r2})
                    if (r > 0) t = std::min(t, r);
            }
        }
        // the linear part: u0 + t du0 must stay positive
        if (du[o] < 0) t = std::min(t, -u[o] / du[o]);
        a = std::min(a, t);
    }
    return a;
}

// Nesterov-Todd scaling -------------------------------------------------

struct Scaling {
    Vec d;  // LP part: W = diag(d)
    std::vector<double> eta;
    std::vector<Vec> w;
};

Scaling nt_scaling(const Dims& dm, const Vec& s, const Vec& z) {
    Scaling W;
    W.d.resize(dm.l);
    for (int i = 0; i < dm.l; ++i) W.d[i] = std::sqrt(s[i] / z[i]);
    for (size_t b = 0; b < dm.q.size(); ++b) {
        int o = dm.qoff[b], k = dm.q[b];
        double sd = std::sqrt(soc_det(s.data() + o, k));
        double zd = std::sqrt(soc_det(z.data() + o, k));
        Vec sb = s.segment(o, k) / sd;
        Vec zb = z.segment(o, k) / zd;
        double gamma = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
        Vec w(k);
        w[0] = (sb[0] + zb[0]) / (2 * gamma);
        for (int i = 1; i < k; ++i) w[i] = (sb[i] - zb[i]) / (2 * gamma);
        // hyperbolic Householder vector: W = eta (2 v v' - J)
        Vec v = w;
        v[0] += 1.0;
        v /= std::sqrt(2.0 * (w[0] + 1.0));
        W.eta.push_back(std::sqrt(sd / zd));
        W.w.push_back(v);
    }
    return W;
}

// in-place v <- W v or W^{-1} v on one segment
void apply_block(const Scaling& W, const Dims& dm, Vec& v, bool inverse) {
    for (int i = 0; i < dm.l; ++i) v[i] = inverse ? v[i] / W.d[i] : v[i] * W.d[i];
    for (size_t b = 0; b < dm.q.size(); ++b) {
        int o = dm.qoff[b], k = dm.q[b];
        const Vec& w = W.w[b];
        double eta = W.eta[b];
        Vec seg = v.segment(o, k);
        if (!inverse) {
            // eta (2 w w' - J) v
            double wv = w.dot(seg);
            Vec r = 2 * wv * w;
            r[0] -= seg[0];
            for (int i = 1; i < k; ++i) r[i] += seg[i];
            v.segment(o, k) = eta * r;
        } else {
            // (1/eta) (2 J w w' J - J) v
            Vec Jw = w;
            for (int i = 1; i < k; ++i) Jw[i] = -w[i];
            double c = Jw.dot(seg);
            Vec r = 2 * c * Jw;
            r[0] -= seg[0];
            for (int i = 1; i < k; ++i) r[i] += seg[i];
            v.segment(o, k) = r / eta;
        }
    }
}

Vec W_apply(const Scaling& W, const Dims& dm, Vec v, bool inverse, int times = 1) {
    for (int t = 0; t < times; ++t) apply_block(W, dm, v, inverse);
    return v;
}

// KKT system -----------------------------------------------------------
//   [0  A'  G'  ] [dx]   [t1]
//   [A  0   0   ] [dy] = [t2]
//   [G  0  -W'W ] [dz]   [t3]

// Solved as one sparse quasi-definite system: a small static shift makes
// every pivot sign known in advance, so LDL' is stable under any fill-reducing
// order; refinement against the unshifted system removes the shift.
class Kkt {
public:
    Kkt(const SpMat& A, const SpMat& G, const Dims& dm) : A_(A), G_(G), dm_(dm) {
        n_ = static_cast<int>(G.cols());
        p_ = static_cast<int>(A.rows());
        At_ = A.transpose();
        Gt_ = G.transpose();
        int N = n_ + p_ + dm.m;
        // the constant part: identity shift plus A and G in the lower triangle
        for (int r = 0; r < p_; ++r)
            for (SpMat::InnerIterator it(A, r); it; ++it) fixed_.emplace_back(n_ + r, static_cast<int>(it.col()), it.value());
        for (int r = 0; r < dm.m; ++r)
            for (SpMat::InnerIterator it(G, r); it; ++it)
                fixed_.emplace_back(n_ + p_ + r, static_cast<int>(it.col()), it.value());
        K_.resize(N, N);
        assemble(nullptr);
        ldl_.analyzePattern(K_);
    }

    // a pivot can still cancel to zero late in the run; a larger shift is
    // then tried, refinement absorbing the difference
    bool factor(const Scaling& W) {
        W_ = &W;
        for (double reg : {1e-9, 1e-7, 1e-5}) {
            reg_ = reg;
            assemble(&W);
            ldl_.factorize(K_);
            if (ldl_.info() == Eigen::Success) return true;
        }
        return false;
    }

    void solve(const Vec& t1, const Vec& t2, const Vec& t3, Vec& dx, Vec& dy, Vec& dz, int refine = 10) const {
        solve_once(t1, t2, t3, dx, dy, dz);
        double prev = kInf;
        for (int it = 0; it < refine; ++it) {
            Vec r1 = t1 - At_ * dy - Gt_ * dz;
            Vec r2 = t2 - A_ * dx;
            Vec r3 = t3 - (G_ * dx - W_apply(*W_, dm_, dz, false, 2));
            double rn = std::max({r1.lpNorm<Eigen::Infinity>(), r2.size() ? r2.lpNorm<Eigen::Infinity>() : 0.0,
                                  r3.size() ? r3.lpNorm<Eigen::Infinity>() : 0.0});
            // stop once refinement no longer pays
            if (rn < 1e-15 || rn > 0.5 * prev) break;
            prev = rn;
            Vec ex, ey, ez;
            solve_once(r1, r2, r3, ex, ey, ez);
            dx += ex;
            dy += ey;
            dz += ez;
        }
    }

private:
    using SpCol = Eigen::SparseMatrix<double>;

    // lower triangle only; W == nullptr gives the sparsity pattern
    void assemble(const Scaling* W) {
        std::vector<Eigen::Triplet<double>> t = fixed_;
        for (int i = 0; i < n_; ++i) t.emplace_back(i, i, reg_);
        for (int i = 0; i < p_; ++i) t.emplace_back(n_ + i, n_ + i, -reg_);
        const int o0 = n_ + p_;
        for (int i = 0; i < dm_.l; ++i) {
            double d = W ? W->d[i] : 1.0;
            t.emplace_back(o0 + i, o0 + i, -(d * d) - reg_);
        }
        for (size_t b = 0; b < dm_.q.size(); ++b) {
            int o = dm_.qoff[b], k = dm_.q[b];
            for (int c = 0; c < k; ++c) {
                Vec col = Vec::Zero(k);
                col[c] = 1.0;
                if (W) {
                    Dims one;
                    one.q = {k};
                    one.qoff = {0};
                    one.m = k;
                    Scaling Wb;
                    Wb.eta = {W->eta[b]};
                    Wb.w = {W->w[b]};
                    col = W_apply(Wb, one, col, false, 2);
                }
                for (int r = c; r < k; ++r)
                    t.emplace_back(o0 + o + r, o0 + o + c, -col[r] - (r == c ? reg_ : 0.0));
            }
        }
        K_.setFromTriplets(t.begin(), t.end());
    }

    void solve_once(const Vec& t1, const Vec& t2, const Vec& t3, Vec& dx, Vec& dy, Vec& dz) const {
        Vec rhs(n_ + p_ + dm_.m);
        rhs << t1, t2, t3;
        Vec sol = ldl_.solve(rhs);
        dx = sol.head(n_);
        dy = sol.segment(n_, p_);
        dz = sol.tail(dm_.m);
    }

    const SpMat& A_;
    const SpMat& G_;
    SpMat At_, Gt_;
    const Dims& dm_;
    int n_ = 0, p_ = 0;
    const Scaling* W_ = nullptr;
    double reg_ = 1e-9;
    std::vector<Eigen::Triplet<double>> fixed_;
    SpCol K_;
    Eigen::SimplicialLDLT<SpCol, Eigen::Lower, Eigen::AMDOrdering<int>> ldl_;
};

// standard form ----------------------------------------------------------

struct Standard {
    SpMat A, G;
    Vec b, h, c;
    Dims dims;
    // G row bookkeeping for dual recovery
    int n_le = 0;
    std::vector<int> ub_var, lb_var;
};

Standard to_standard(const ConicProblem& p) {
    Standard st;
    int n = p.num_vars();
    st.c.resize(n);
    for (int i = 0; i < n; ++i) st.c[i] = p.vars()[i].cost;

    std::vector<Eigen::Triplet<double>> ta;
    st.b.resize(static_cast<int>(p.eqs().size()));
    for (size_t r = 0; r < p.eqs().size(); ++r) {
        for (const auto& t : p.eqs()[r].terms) ta.emplace_back(static_cast<int>(r), t.var, t.coef);
        st.b[r] = p.eqs()[r].rhs;
    }
    st.A.resize(static_cast<int>(p.eqs().size()), n);
    st.A.setFromTriplets(ta.begin(), ta.end());

    std::vector<Eigen::Triplet<double>> tg;
    std::vector<double> h;
    int row = 0;
    for (const auto& r : p.les()) {
        for (const auto& t : r.terms) tg.emplace_back(row, t.var, t.coef);
        h.push_back(r.rhs);
        ++row;
    }
    st.n_le = row;
    for (int i = 0; i < n; ++i)
        if (std::isfinite(p.vars()[i].ub)) {
            tg.emplace_back(row++, i, 1.0);
            h.push_back(p.vars()[i].ub);
            st.ub_var.push_back(i);
        }
    for (int i = 0; i < n; ++i)
        if (std::isfinite(p.vars()[i].lb)) {
            tg.emplace_back(row++, i, -1.0);
            h.push_back(-p.vars()[i].lb);
            st.lb_var.push_back(i);
        }
    st.dims.l = row;
    for (const auto& cone : p.cones()) {
        st.dims.qoff.push_back(row);
        st.dims.q.push_back(static_cast<int>(cone.entries.size()));
        for (const auto& e : cone.entries) {
            // s = e(x) = a'x + k  =>  G row = -a, h = k
            for (const auto& t : e.terms) tg.emplace_back(row, t.var, -t.coef);
            h.push_back(e.constant);
            ++row;
        }
    }
    st.dims.m = row;
    st.G.resize(row, n);
    st.G.setFromTriplets(tg.begin(), tg.end());
    st.h = Eigen::Map<Vec>(h.data(), static_cast<int>(h.size()));
    return st;
}

}  // namespace

Solution solve(const ConicProblem& problem, const SolverOptions& opts) {
    problem.validate();
    Standard st = to_standard(problem);
    const SpMat& A = st.A;
    const SpMat& G = st.G;
    const Vec& b = st.b;
    const Vec& h = st.h;
    const Vec& c = st.c;
    const Dims& dm = st.dims;
    const int n = static_cast<int>(c.size());
    const int p = static_cast<int>(b.size());
    const int m = dm.m;

    Solution sol;
    sol.x.assign(n, 0.0);

    Kkt kkt(A, G, dm);
    const Vec e = identity(dm);

    // initial point from the W = I system
    Scaling I;
    I.d = Vec::Ones(dm.l);
    for (int k : dm.q) {
        Vec w = Vec::Zero(k);
        w[0] = 1.0;
        I.eta.push_back(1.0);
        I.w.push_back(w);
    }
    kkt.factor(I);
    Vec x, y, z, s;
    {
        Vec dz;
        kkt.solve(Vec::Zero(n), b, h, x, y, dz);
        s = -dz;
        Vec dx;
        kkt.solve(-c, Vec::Zero(p), Vec::Zero(m), dx, y, z);
    }
    {
        double nrm = s.norm();
        double ts = violation(dm, s);
        if (ts >= -1e-8 * std::max(nrm, 1.0)) s += (1 + ts) * e;
        nrm = z.norm();
        double tz = violation(dm, z);
        if (tz >= -1e-8 * std::max(nrm, 1.0)) z += (1 + tz) * e;
    }
    double tau = 1.0, kappa = 1.0;

    const double resx0 = std::max(1.0, c.norm());
    const double resy0 = std::max(1.0, b.norm());
    const double resz0 = std::max(1.0, h.norm());
    const int degree = dm.degree();

    const bool tracing = std::getenv("P2PGRID_IPM_TRACE") != nullptr;
    auto trace = [&](const char* why) {
        if (tracing) std::fprintf(stderr, "stop: %s\n", why);
    };
    Status status = Status::numerical_failure;
    int iter = 0;
    double pres = kInf, dres = kInf, gap = kInf, relgap = kInf;
    bool stalled = false;  // iterate untouched by the failed step
    for (; iter <= opts.max_iter; ++iter) {
        Vec hrx = -(A.transpose() * y) - G.transpose() * z;
        Vec rx = hrx - c * tau;
        Vec hry = A * x;
        Vec ry = hry - b * tau;
        Vec hrz = s + G * x;
        Vec rz = hrz - h * tau;
        double cx = c.dot(x), by = b.dot(y), hz = h.dot(z);
        double rt = kappa + cx + by + hz;

        pres = std::max(ry.norm() / tau / resy0, rz.norm() / tau / resz0);
        dres = rx.norm() / tau / resx0;
        double pcost = cx / tau, dcost = -(by + hz) / tau;
        gap = s.dot(z) / (tau * tau);
        relgap = kInf;
        if (pcost < 0) relgap = gap / -pcost;
        else if (dcost > 0) relgap = gap / dcost;
        else if (std::abs(pcost) < 1e-300) relgap = gap;

        sol.stats = {iter, pres, dres, gap, relgap};
        if (tracing)
            std::fprintf(stderr, "%3d pcost %.9e dcost %.9e gap %.2e pres %.2e dres %.2e tau %.2e kappa %.2e\n", iter,
                         pcost, dcost, gap, pres, dres, tau, kappa);

        if (pres <= opts.feastol && dres <= opts.feastol && (gap <= opts.abstol || relgap <= opts.reltol)) {
            status = Status::optimal;
            break;
        }
        if (hz + by < 0) {
            double pinf = hrx.norm() / resx0 / -(hz + by);
            if (pinf <= opts.feastol) {
                status = Status::infeasible;
                break;
            }
        }
        if (cx < 0) {
            double dinf = std::max(hry.norm() / resy0, hrz.norm() / resz0) / -cx;
            if (dinf <= opts.feastol) {
                status = Status::unbounded;
                break;
            }
        }
        if (iter == opts.max_iter) break;

        double mu = (s.dot(z) + tau * kappa) / (degree + 1);
        Scaling W = nt_scaling(dm, s, z);
        Vec lam = W_apply(W, dm, z, false);
        if (!kkt.factor(W)) {
            trace("factorization failed");
            stalled = true;
            break;
        }

        Vec x1, y1, z1;
        kkt.solve(-c, b, h, x1, y1, z1);
        double denom1_base = -c.dot(x1) - b.dot(y1) - h.dot(z1);

        auto direction = [&](double eta, const Vec& rc, double r5, Vec& dx, Vec& dy, Vec& dz, Vec& ds,
                             double& dtau, double& dkappa) {
            Vec t1 = eta * rx;
            Vec t2 = -eta * ry;
            Vec lr = jdiv(dm, lam, rc);
            Vec Wlr = W_apply(W, dm, lr, false);
            Vec t3 = -eta * rz - Wlr;
            Vec x2, y2, z2;
            kkt.solve(t1, t2, t3, x2, y2, z2);
            dtau = (eta * rt + c.dot(x2) + b.dot(y2) + h.dot(z2) + r5 / tau) / (kappa / tau + denom1_base);
            dx = x2 + dtau * x1;
            dy = y2 + dtau * y1;
            dz = z2 + dtau * z1;
            dkappa = (r5 - kappa * dtau) / tau;
            ds = Wlr - W_apply(W, dm, dz, false, 2);
        };

        auto step_len = [&](const Vec& ds, const Vec& dz, double dtau, double dkappa) {
            double a = std::min(max_step(dm, s, ds), max_step(dm, z, dz));
            if (dtau < 0) a = std::min(a, -tau / dtau);
            if (dkappa < 0) a = std::min(a, -kappa / dkappa);
            return a;
        };

        // predictor
        Vec dxa, dya, dza, dsa;
        double dta, dka;
        Vec rc_a = -jprod(dm, lam, lam);
        direction(1.0, rc_a, -tau * kappa, dxa, dya, dza, dsa, dta, dka);
        double aa = std::min(1.0, step_len(dsa, dza, dta, dka));
        double sigma = std::pow(1.0 - aa, 3);

        // corrector
        Vec sa_t = W_apply(W, dm, dsa, true);
        Vec za_t = W_apply(W, dm, dza, false);
        Vec rc = rc_a - jprod(dm, sa_t, za_t) + sigma * mu * e;
        double r5 = -tau * kappa - dta * dka + sigma * mu;
        Vec dx, dy, dz, ds;
        double dt, dk;
        direction(1.0 - sigma, rc, r5, dx, dy, dz, ds, dt, dk);
        double alpha = std::min(1.0, 0.99 * step_len(ds, dz, dt, dk));
        if (!(alpha > 1e-14) || !std::isfinite(alpha)) {
            trace("step length collapsed");
            stalled = true;
            break;
        }

        x += alpha * dx;
        y += alpha * dy;
        z += alpha * dz;
        s += alpha * ds;
        tau += alpha * dt;
        kappa += alpha * dk;
        if (!x.allFinite() || !z.allFinite() || !(tau > 0)) {
            trace("iterate left the domain");
            break;
        }
    }

    // near the optimum the KKT system can turn singular before the last digit
    // is reached; accept the current point at reduced accuracy
    const double f = opts.reduced_factor;
    if (status == Status::numerical_failure && stalled && pres <= f * opts.feastol && dres <= f * opts.feastol &&
        (gap <= f * opts.abstol || relgap <= f * opts.reltol)) {
        trace("accepted at reduced accuracy");
        status = Status::optimal;
        sol.stats.reduced_accuracy = true;
    }
    sol.status = status;
    sol.stats.iterations = iter;
    if (status == Status::optimal) {
        x /= tau;
        y /= tau;
        z /= tau;
    }
    for (int i = 0; i < n; ++i) sol.x[i] = x[i];
    sol.eq_dual.resize(p);
    for (int r = 0; r < p; ++r) sol.eq_dual[r] = -y[r];
    sol.le_dual.resize(st.n_le);
    for (int r = 0; r < st.n_le; ++r) sol.le_dual[r] = z[r];
    sol.ub_dual.assign(n, 0.0);
    sol.lb_dual.assign(n, 0.0);
    int row = st.n_le;
    for (int v : st.ub_var) sol.ub_dual[v] = z[row++];
    for (int v : st.lb_var) sol.lb_dual[v] = z[row++];
    for (size_t k = 0; k < dm.q.size(); ++k) {
        int o = dm.qoff[k];
        std::vector<double> zk(z.data() + o, z.data() + o + dm.q[k]);
        sol.cone_dual.push_back(std::move(zk));
    }
    sol.objective = c.dot(x);
    return sol;
}

}  // namespace p2pgrid::conic
