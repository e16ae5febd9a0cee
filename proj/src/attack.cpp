#include "ppop/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ppop {

using solver::kInf;
using solver::Model;
using solver::Term;
using solver::VarKind;

namespace {

constexpr double kStrict = 1e-6;
constexpr double kTripGuard = 1e-7;
constexpr double kDualBound = 1e3;

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::vector<std::vector<int>> closed_neighborhoods(const GridModel& g) {
    auto nb = g.neighbors();
    for (int u = 0; u < g.n(); ++u) {
        nb[u].push_back(u);
        std::sort(nb[u].begin(), nb[u].end());
    }
    return nb;
}

/// Affine expression: sum of terms plus a constant.
struct Expr {
    std::vector<Term> t;
    double c = 0.0;
    Expr& add(int var, double coef) {
        if (coef != 0.0) t.push_back({var, coef});
        return *this;
    }
    Expr& add(const Expr& o, double s = 1.0) {
        for (auto [j, v] : o.t) t.push_back({j, v * s});
        c += o.c * s;
        return *this;
    }
};

void row(Model& md, const Expr& e, double lo, double hi, const std::string& name = {}) {
    md.add_row(e.t, lo - e.c, hi - e.c, name);
}

// sparse rows of the intact admittance matrix
std::vector<std::vector<std::pair<int, double>>> sparse_rows(const Eigen::MatrixXd& b) {
    std::vector<std::vector<std::pair<int, double>>> r(b.rows());
    for (int u = 0; u < b.rows(); ++u)
        for (int v = 0; v < b.cols(); ++v)
            if (b(u, v) != 0.0) r[u].push_back({v, b(u, v)});
    return r;
}

} // namespace

const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Attack: return "attack";
    case Verdict::NoAttack: return "no-attack";
    case Verdict::Timeout: return "timeout";
    case Verdict::Error: return "error";
    }
    return "error";
}

std::vector<int> Placement::buses() const {
    std::vector<int> out;
    for (size_t u = 0; u < beta.size(); ++u)
        if (beta[u]) out.push_back(static_cast<int>(u));
    return out;
}

int Placement::count() const { return static_cast<int>(std::count(beta.begin(), beta.end(), 1)); }

Placement make_placement(const GridModel& g, const std::vector<int>& bus_indices) {
    Placement pl;
    pl.beta.assign(g.n(), 0);
    for (int u : bus_indices) {
        if (u < 0 || u >= g.n()) throw std::out_of_range("bus index out of range");
        pl.beta[u] = 1;
    }
    pl.xN.assign(g.n(), 0);
    pl.xL.assign(g.m(), 0);
    for (int u = 0; u < g.n(); ++u)
        if (pl.beta[u]) pl.xN[u] = 1;
    for (int e = 0; e < g.m(); ++e) {
        const auto& l = g.lines[e];
        if (pl.beta[l.from] || pl.beta[l.to]) {
            pl.xL[e] = 1;
            pl.xN[l.from] = 1;
            pl.xN[l.to] = 1;
        }
    }
    return pl;
}

Placement empty_placement(const GridModel& g) { return make_placement(g, {}); }

Placement placement_from_ids(const GridModel& g, const std::vector<int>& bus_ids) {
    std::vector<int> idx;
    for (int id : bus_ids) idx.push_back(g.index_of(id));
    return make_placement(g, idx);
}

AttackerModel build_attacker_model(const GridModel& g, const AttackParams& p, const Placement& pl, const BigMBundle& bm,
                                   const BuildOptions& opt) {
    validate(p);
    if (p.sced == ScedMode::Kkt && g.gen_buses().empty()) throw std::invalid_argument("KKT SCED needs generator buses");
    const int n = g.n(), m = g.m();
    const int u0 = g.slack;
    AttackerModel am;
    Model& md = am.model;
    AttackerVars& v = am.v;
    const Eigen::MatrixXd bt = admittance(g);
    const auto brow = sparse_rows(bt);
    const bool load_mode = !p.load_range.empty();

    auto vec = [&](int k, double lb, double ub, VarKind kind, const std::string& nm) {
        std::vector<int> out(k);
        for (int i = 0; i < k; ++i) out[i] = md.add_var(lb, ub, kind, 0.0, nm + std::to_string(i));
        return out;
    };
    v.tt2 = vec(n, -kInf, kInf, VarKind::Continuous, "tt2_");
    v.tt3 = vec(n, -kInf, kInf, VarKind::Continuous, "tt3_");
    v.t2 = vec(n, -kInf, kInf, VarKind::Continuous, "t2_");
    v.t3 = vec(n, -kInf, kInf, VarKind::Continuous, "t3_");
    for (int u = 0; u < n; ++u) {
        md.set_bounds(v.tt2[u], -bm.mtheta2_tilde[u], bm.mtheta2_tilde[u]);
        md.set_bounds(v.tt3[u], -bm.mtheta2_tilde[u], bm.mtheta2_tilde[u]);
        md.set_bounds(v.t2[u], -bm.mtheta2[u], bm.mtheta2[u]);
        md.set_bounds(v.t3[u], -bm.mtheta3[u], bm.mtheta3[u]);
    }
    for (const auto* blk : {&v.tt2, &v.tt3, &v.t2, &v.t3}) md.set_bounds((*blk)[u0], 0.0, 0.0);
    v.f2 = vec(m, -kInf, kInf, VarKind::Continuous, "f2_");
    v.f3 = vec(m, -kInf, kInf, VarKind::Continuous, "f3_");
    v.fc = vec(m, -kInf, kInf, VarKind::Continuous, "fc_");
    v.ap = vec(m, 0, 1, VarKind::Binary, "ap_");
    v.pp = vec(m, 0, 1, VarKind::Binary, "pp_");
    v.pn = vec(m, 0, 1, VarKind::Binary, "pn_");
    if (p.xi_c) {
        MeterLayout ml = opt.meters_set ? opt.meters : MeterLayout::full(g);
        v.wf.assign(m, -1);
        v.wp.assign(n, -1);
        for (int e : ml.line_meters) v.wf[e] = md.add_binary(0.0, "wf_" + std::to_string(e));
        for (int u : ml.node_meters) v.wp[u] = md.add_binary(0.0, "wp_" + std::to_string(u));
    }
    if (opt.placement_vars) {
        v.beta = vec(n, 0, 1, VarKind::Binary, "beta_");
        v.xN = vec(n, 0, 1, VarKind::Binary, "xN_");
        v.xL = vec(m, 0, 1, VarKind::Binary, "xL_");
    }

    // base injection: constant, or a variable over the union of load boxes
    std::vector<Expr> p0(n);
    std::vector<double> sgn(n, 0.0);
    for (int u = 0; u < n; ++u) sgn[u] = g.p0[u] > 0 ? 1.0 : (g.p0[u] < 0 ? -1.0 : 0.0);
    if (load_mode) {
        v.p0 = vec(n, -kInf, kInf, VarKind::Continuous, "p0_");
        v.box = vec(static_cast<int>(p.load_range.size()), 0, 1, VarKind::Binary, "box_");
        double span = 0.0;
        for (const auto& b : p.load_range)
            for (double x : b.p_ref) span = std::max(span, std::abs(x) * std::max(std::abs(b.kappa_lo), std::abs(b.kappa_hi)));
        const double mbox = 2.0 * span + 1.0;
        for (int u = 0; u < n; ++u) {
            p0[u].add(v.p0[u], 1.0);
            double lo_all = kInf, hi_all = -kInf;
            for (size_t i = 0; i < p.load_range.size(); ++i) {
                const auto& b = p.load_range[i];
                if (static_cast<int>(b.p_ref.size()) != n) throw std::invalid_argument("load box has wrong size");
                double a = b.kappa_lo * b.p_ref[u], c = b.kappa_hi * b.p_ref[u];
                double lo = std::min(a, c), hi = std::max(a, c);
                if ((lo < 0 && hi > 0)) throw std::invalid_argument("load box changes injection sign");
                if (sgn[u] == 0.0) sgn[u] = hi > 0 ? 1.0 : (lo < 0 ? -1.0 : 0.0);
                md.add_row({{v.p0[u], 1.0}, {v.box[i], -mbox}}, lo - mbox, kInf);
                md.add_row({{v.p0[u], 1.0}, {v.box[i], mbox}}, -kInf, hi + mbox);
                lo_all = std::min(lo_all, lo);
                hi_all = std::max(hi_all, hi);
            }
            md.set_bounds(v.p0[u], lo_all, hi_all);
        }
        std::vector<Term> sel, bal;
        for (int i : v.box) sel.push_back({i, 1.0});
        md.add_row(sel, 1.0, 1.0, "one_box");
        for (int u = 0; u < n; ++u) bal.push_back({v.p0[u], 1.0});
        md.add_row(bal, 0.0, 0.0, "balance");
    } else {
        for (int u = 0; u < n; ++u) p0[u].c = g.p0[u];
    }

    auto bexpr = [&](const std::vector<int>& th, int u) {
        Expr e;
        for (auto [w, val] : brow[u]) e.add(th[w], val);
        return e;
    };
    auto flow = [&](const std::vector<int>& th, int e) {
        const auto& l = g.lines[e];
        Expr x;
        x.add(th[l.from], 1.0 / l.r).add(th[l.to], -1.0 / l.r);
        return x;
    };

    for (int e = 0; e < m; ++e) {
        const auto& l = g.lines[e];
        const std::string s = std::to_string(e);
        md.add_row({{v.f2[e], 1.0}, {v.ap[e], bm.m2a[e]}}, -kInf, bm.m2a[e], "f2ub_" + s);
        md.add_row({{v.f2[e], -1.0}, {v.ap[e], bm.m2a[e]}}, -kInf, bm.m2a[e], "f2lb_" + s);
        Expr d2 = flow(v.t2, e);
        d2.add(v.f2[e], -1.0);
        Expr a = d2, b = d2;
        row(md, a.add(v.ap[e], -bm.m2f_line[e]), -kInf, 0.0, "ohm2u_" + s);
        row(md, b.add(v.ap[e], bm.m2f_line[e]), 0.0, kInf, "ohm2l_" + s);
        row(md, flow(v.tt2, e), -l.fmax, l.fmax, "ft2_" + s);
        row(md, flow(v.tt3, e), -l.fmax, l.fmax, "ft3_" + s);
        md.add_row({{v.f3[e], 1.0}, {v.ap[e], bm.m3a_line[e]}}, -kInf, bm.m3a_line[e], "f3ub_" + s);
        md.add_row({{v.f3[e], -1.0}, {v.ap[e], bm.m3a_line[e]}}, -kInf, bm.m3a_line[e], "f3lb_" + s);
        Expr d3 = flow(v.t3, e);
        d3.add(v.f3[e], -1.0);
        Expr a3 = d3, b3 = d3;
        row(md, a3.add(v.ap[e], -bm.m3f_line[e]), -kInf, 0.0, "ohm3u_" + s);
        row(md, b3.add(v.ap[e], bm.m3f_line[e]), 0.0, kInf, "ohm3l_" + s);
        md.add_row({{v.fc[e], 1.0}, {v.ap[e], static_cast<double>(n)}}, -kInf, n, "fcu_" + s);
        md.add_row({{v.fc[e], -1.0}, {v.ap[e], static_cast<double>(n)}}, -kInf, n, "fcl_" + s);
        // pi = 1 iff |f3|/fmax exceeds gamma (strictly, by kStrict)
        const double mp = bm.mpi[e], gm = l.gamma;
        md.add_row({{v.f3[e], 1.0 / l.fmax}, {v.pp[e], -mp}}, -kInf, gm, "piu_" + s);
        md.add_row({{v.f3[e], 1.0 / l.fmax}, {v.pp[e], -mp}}, gm + kStrict - mp, kInf, "pil_" + s);
        md.add_row({{v.f3[e], -1.0 / l.fmax}, {v.pn[e], -mp}}, -kInf, gm, "niu_" + s);
        md.add_row({{v.f3[e], -1.0 / l.fmax}, {v.pn[e], -mp}}, gm + kStrict - mp, kInf, "nil_" + s);
        if (p.xi_c && v.wf[e] >= 0) {
            Expr c = flow(v.tt2, e);
            c.add(v.f2[e], -1.0);
            Expr c1 = c, c2 = c;
            row(md, c1.add(v.wf[e], -bm.mcf), -kInf, 0.0, "acf_u" + s);
            row(md, c2.add(v.wf[e], bm.mcf), 0.0, kInf, "acf_l" + s);
        }
    }

    for (int u = 0; u < n; ++u) {
        const std::string s = std::to_string(u);
        Expr kcl2, kcl3, con;
        for (int e = 0; e < m; ++e) {
            const auto& l = g.lines[e];
            double d = l.from == u ? 1.0 : (l.to == u ? -1.0 : 0.0);
            if (d == 0.0) continue;
            kcl2.add(v.f2[e], d);
            kcl3.add(v.f3[e], d);
            con.add(v.fc[e], d);
        }
        Expr k2 = kcl2;
        k2.add(p0[u], -1.0);
        row(md, k2, 0.0, 0.0, "kcl2_" + s);
        Expr inj2 = bexpr(v.tt2, u);
        Expr dev = inj2;
        dev.add(p0[u], -1.0);
        if (g.is_gen[u]) {
            row(md, dev, 0.0, 0.0, "gen2_" + s);
            Expr inj3 = bexpr(v.tt3, u);
            row(md, inj3, g.pg_min[u], g.pg_max[u], "gen3_" + s);
            Expr k3 = kcl3;
            k3.add(inj3, -1.0);
            row(md, k3, 0.0, 0.0, "kcl3g_" + s);
        } else {
            // |B~ tt2 - p0| <= alpha |p0|
            Expr up = dev, lo = dev;
            if (load_mode) {
                up.add(v.p0[u], -p.alpha * sgn[u]);
                lo.add(v.p0[u], p.alpha * sgn[u]);
                row(md, up, -kInf, 0.0, "fdiu_" + s);
                row(md, lo, 0.0, kInf, "fdil_" + s);
            } else {
                double a = p.alpha * std::abs(g.p0[u]);
                row(md, dev, -a, a, "fdi_" + s);
            }
            Expr same = bexpr(v.tt3, u);
            same.add(inj2, -1.0);
            row(md, same, 0.0, 0.0, "sced_load_" + s);
            Expr k3 = kcl3;
            k3.add(p0[u], -1.0);
            row(md, k3, 0.0, 0.0, "kcl3d_" + s);
            if (p.xi_c && v.wp[u] >= 0) {
                Expr c1 = dev, c2 = dev;
                row(md, c1.add(v.wp[u], -bm.mcp), -kInf, 0.0, "acp_u" + s);
                row(md, c2.add(v.wp[u], bm.mcp), 0.0, kInf, "acp_l" + s);
            }
        }
        double rhs = u == u0 ? n - 1.0 : -1.0;
        row(md, con, rhs, rhs, "pseudo_" + s);
    }

    // PMU protection
    if (opt.placement_vars) {
        auto cn = closed_neighborhoods(g);
        for (int u = 0; u < n; ++u) {
            std::vector<Term> cover{{v.xN[u], 1.0}};
            for (int w : cn[u]) {
                md.add_row({{v.xN[u], 1.0}, {v.beta[w], -1.0}}, 0.0, kInf);
                cover.push_back({v.beta[w], -1.0});
            }
            md.add_row(cover, -kInf, 0.0);
            md.add_row({{v.tt2[u], 1.0}, {v.t2[u], -1.0}, {v.xN[u], bm.m2theta}}, -kInf, bm.m2theta);
            md.add_row({{v.tt2[u], -1.0}, {v.t2[u], 1.0}, {v.xN[u], bm.m2theta}}, -kInf, bm.m2theta);
            md.set_bounds(v.beta[u], pl.beta[u] ? 1.0 : 0.0, 1.0);
        }
        for (int e = 0; e < m; ++e) {
            const auto& l = g.lines[e];
            md.add_row({{v.xL[e], 1.0}, {v.beta[l.from], -1.0}}, 0.0, kInf);
            md.add_row({{v.xL[e], 1.0}, {v.beta[l.to], -1.0}}, 0.0, kInf);
            md.add_row({{v.xL[e], 1.0}, {v.beta[l.from], -1.0}, {v.beta[l.to], -1.0}}, -kInf, 0.0);
            md.add_row({{v.ap[e], 1.0}, {v.xL[e], 1.0}}, -kInf, 1.0);
        }
        if (!p.placement_mask.empty()) {
            std::vector<char> allowed(n, 0);
            for (int u : p.placement_mask) allowed[u] = 1;
            for (int u = 0; u < n; ++u)
                if (!allowed[u] && !pl.beta[u]) md.set_bounds(v.beta[u], 0.0, 0.0);
        }
    } else {
        for (int u = 0; u < n; ++u)
            if (pl.xN[u]) md.add_row({{v.tt2[u], 1.0}, {v.t2[u], -1.0}}, 0.0, 0.0, "pmu_" + std::to_string(u));
        for (int e = 0; e < m; ++e)
            if (pl.xL[e]) md.set_bounds(v.ap[e], 0.0, 0.0);
    }

    std::vector<Term> budget;
    for (int e = 0; e < m; ++e) budget.push_back({v.ap[e], 1.0});
    md.add_row(budget, -kInf, p.xi_p, "xi_p");
    if (p.xi_c) {
        std::vector<Term> t;
        for (int j : v.wf)
            if (j >= 0) t.push_back({j, 1.0});
        for (int j : v.wp)
            if (j >= 0) t.push_back({j, 1.0});
        md.add_row(t, -kInf, *p.xi_c, "xi_c");
    }
    if (opt.fixed_ap) {
        for (int e = 0; e < m; ++e) md.set_bounds(v.ap[e], 0.0, 0.0);
        for (int e : *opt.fixed_ap) md.set_bounds(v.ap[e], 1.0, 1.0);
    }

    if (p.sced == ScedMode::Kkt) {
        // stationarity and complementarity of the SCED LP over tt3
        double cmax = 0.0;
        for (int u : g.gen_buses()) cmax = std::max(cmax, std::abs(g.cost[u]));
        if (cmax == 0.0) cmax = 1.0;
        std::vector<int> mub(n, -1), mugu(n, -1), mugl(n, -1), mufu(m), mufl(m);
        int muref = md.add_var(-kInf, kInf, VarKind::Continuous, 0.0, "mu_ref");
        for (int u = 0; u < n; ++u) {
            if (g.is_gen[u]) {
                mugu[u] = md.add_var(0.0, kDualBound, VarKind::Continuous, 0.0, "mu_gu" + std::to_string(u));
                mugl[u] = md.add_var(0.0, kDualBound, VarKind::Continuous, 0.0, "mu_gl" + std::to_string(u));
            } else {
                mub[u] = md.add_var(-kDualBound, kDualBound, VarKind::Continuous, 0.0, "mu_b" + std::to_string(u));
            }
        }
        for (int e = 0; e < m; ++e) {
            mufu[e] = md.add_var(0.0, kDualBound, VarKind::Continuous, 0.0, "mu_fu" + std::to_string(e));
            mufl[e] = md.add_var(0.0, kDualBound, VarKind::Continuous, 0.0, "mu_fl" + std::to_string(e));
        }
        for (int w = 0; w < n; ++w) {
            Expr st;
            for (int u = 0; u < n; ++u) {
                double b = bt(u, w);
                if (b == 0.0) continue;
                if (g.is_gen[u]) {
                    st.c += g.cost[u] / cmax * b;
                    st.add(mugu[u], b).add(mugl[u], -b);
                } else {
                    st.add(mub[u], b);
                }
            }
            for (int e = 0; e < m; ++e) {
                const auto& l = g.lines[e];
                double d = l.from == w ? 1.0 : (l.to == w ? -1.0 : 0.0);
                if (d == 0.0) continue;
                st.add(mufu[e], d / l.r).add(mufl[e], -d / l.r);
            }
            if (w == u0) st.add(muref, 1.0);
            row(md, st, 0.0, 0.0, "kkt_st" + std::to_string(w));
        }
        for (int e = 0; e < m; ++e) {
            const auto& l = g.lines[e];
            int ru = md.add_binary(0.0, "r_fu" + std::to_string(e));
            int rl = md.add_binary(0.0, "r_fl" + std::to_string(e));
            md.add_row({{mufu[e], 1.0}, {ru, -kDualBound}}, -kInf, 0.0);
            md.add_row({{mufl[e], 1.0}, {rl, -kDualBound}}, -kInf, 0.0);
            Expr f = flow(v.tt3, e);
            Expr su = f, sl = f;
            // fmax - f <= 2 fmax (1 - r)
            su.add(ru, -2.0 * l.fmax);
            row(md, su, -l.fmax, kInf);
            sl.add(rl, 2.0 * l.fmax);
            row(md, sl, -kInf, l.fmax);
        }
        for (int u : g.gen_buses()) {
            double span = std::max(g.pg_max[u] - g.pg_min[u], 1e-9);
            int ru = md.add_binary(0.0, "r_gu" + std::to_string(u));
            int rl = md.add_binary(0.0, "r_gl" + std::to_string(u));
            md.add_row({{mugu[u], 1.0}, {ru, -kDualBound}}, -kInf, 0.0);
            md.add_row({{mugl[u], 1.0}, {rl, -kDualBound}}, -kInf, 0.0);
            Expr inj = bexpr(v.tt3, u);
            Expr su = inj, sl = inj;
            su.add(ru, -span);
            row(md, su, g.pg_max[u] - span, kInf);
            sl.add(rl, span);
            row(md, sl, -kInf, g.pg_min[u] + span);
        }
    }

    // objective
    std::vector<Term> trip;
    for (int e = 0; e < m; ++e) {
        trip.push_back({v.pp[e], 1.0});
        trip.push_back({v.pn[e], 1.0});
    }
    if (opt.target) {
        const auto& t = *opt.target;
        md.set_bounds(t.dir >= 0 ? v.pp[t.line] : v.pn[t.line], 1.0, 1.0);
    }
    if (opt.require_trip) md.add_row(trip, 1.0, kInf, "trip");
    if (opt.placement_vars) {
        md.set_maximize(true);
        for (int u = 0; u < n; ++u) md.set_obj(v.beta[u], 1.0);
    } else if (!opt.target && !opt.require_trip) {
        md.set_maximize(true);
        for (auto [j, c] : trip) md.set_obj(j, c);
    }
    return am;
}

AttackOutcome extract_outcome(const GridModel& g, const AttackParams& p, const AttackerModel& am,
                              const std::vector<double>& x) {
    const int n = g.n(), m = g.m();
    AttackOutcome o;
    auto get = [&](const std::vector<int>& idx) {
        std::vector<double> out(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) out[i] = x[idx[i]];
        return out;
    };
    o.theta2 = get(am.v.t2);
    o.theta2_tilde = get(am.v.tt2);
    o.theta3 = get(am.v.t3);
    o.theta3_tilde = get(am.v.tt3);
    o.f2 = get(am.v.f2);
    o.f3 = get(am.v.f3);
    o.f2_tilde.resize(m);
    for (int e = 0; e < m; ++e) {
        const auto& l = g.lines[e];
        o.f2_tilde[e] = (o.theta2_tilde[l.from] - o.theta2_tilde[l.to]) / l.r;
        if (x[am.v.ap[e]] > 0.5) o.ap.push_back(e);
    }
    for (int e = 0; e < m; ++e) {
        const auto& l = g.lines[e];
        double ratio = o.f3[e] / l.fmax;
        if (ratio - l.gamma > kTripGuard) o.targets.push_back({e, 1});
        if (-ratio - l.gamma > kTripGuard) o.targets.push_back({e, -1});
    }
    o.objective = static_cast<int>(o.targets.size());
    if (!am.v.p0.empty())
        o.load_profile = get(am.v.p0);
    else
        o.load_profile = g.p0;
    int touched = 0;
    if (p.xi_c) {
        for (int j : am.v.wf)
            if (j >= 0 && x[j] > 0.5) ++touched;
        for (int j : am.v.wp)
            if (j >= 0 && x[j] > 0.5) ++touched;
    } else {
        Eigen::MatrixXd bt = admittance(g);
        Eigen::Map<const Eigen::VectorXd> tt2(o.theta2_tilde.data(), n);
        Eigen::VectorXd inj = bt * tt2;
        for (int u = 0; u < n; ++u)
            if (std::abs(inj(u) - o.load_profile[u]) > 1e-7) ++touched;
        for (int e = 0; e < m; ++e)
            if (std::abs(o.f2_tilde[e] - o.f2[e]) > 1e-7) ++touched;
    }
    o.meters_touched = touched;
    return o;
}

bool ap_within_guard(const GridModel& g, const BigMBundle& bm, const LineSet& ap, const std::vector<double>& f2) {
    std::vector<char> out(g.m(), 0);
    for (int e : ap) out[e] = 1;
    for (int e = 0; e < g.m(); ++e)
        if (!out[e] && std::abs(f2[e]) > bm.m2a[e]) return false;
    return true;
}

std::vector<FlowRange> post_attack_flow_range(const GridModel& g, const LineSet& ap) {
    const int n = g.n(), m = g.m(), u0 = g.slack;
    Eigen::MatrixXd b = admittance(g, ap);
    std::vector<int> keep;
    for (int u = 0; u < n; ++u)
        if (u != u0) keep.push_back(u);
    Eigen::MatrixXd br(n - 1, n - 1);
    for (int i = 0; i < n - 1; ++i)
        for (int j = 0; j < n - 1; ++j) br(i, j) = b(keep[i], keep[j]);
    Eigen::MatrixXd xr = br.ldlt().solve(Eigen::MatrixXd::Identity(n - 1, n - 1));
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n - 1; ++i)
        for (int j = 0; j < n - 1; ++j) x(keep[i], keep[j]) = xr(i, j);

    std::vector<int> gens = g.gen_buses();
    double demand = 0.0, base = 0.0;
    for (int u = 0; u < n; ++u) {
        if (!g.is_gen[u]) demand -= g.p0[u];
    }
    for (int u : gens) base += g.pg_min[u];
    std::vector<char> out(m, 0);
    for (int e : ap) out[e] = 1;
    std::vector<FlowRange> res(m);
    std::vector<std::pair<double, int>> coef(gens.size());
    for (int e = 0; e < m; ++e) {
        if (out[e]) continue;
        const auto& l = g.lines[e];
        auto ptdf = [&](int u) { return (x(l.from, u) - x(l.to, u)) / l.r; };
        double fixed = 0.0;
        for (int u = 0; u < n; ++u)
            if (!g.is_gen[u]) fixed += ptdf(u) * g.p0[u];
        for (size_t i = 0; i < gens.size(); ++i) coef[i] = {ptdf(gens[i]), gens[i]};
        std::sort(coef.begin(), coef.end());
        // fractional knapsack: start at pg_min, hand the remaining demand to the best coefficients
        auto extreme = [&](bool maximise) {
            double left = demand - base, val = fixed;
            for (int u : gens) val += ptdf(u) * g.pg_min[u];
            for (size_t k = 0; k < coef.size() && left > 0; ++k) {
                auto [c, u] = maximise ? coef[coef.size() - 1 - k] : coef[k];
                double take = std::min(left, g.pg_max[u] - g.pg_min[u]);
                val += c * take;
                left -= take;
            }
            return val;
        };
        res[e] = {extreme(false), extreme(true)};
    }
    return res;
}

std::vector<Target> trippable_targets(const GridModel& g, const LineSet& ap) {
    auto r = post_attack_flow_range(g, ap);
    std::vector<char> out(g.m(), 0);
    for (int e : ap) out[e] = 1;
    std::vector<Target> t;
    for (int e = 0; e < g.m(); ++e) {
        if (out[e]) continue;
        double thr = g.lines[e].gamma * g.lines[e].fmax;
        if (r[e].hi > thr) t.push_back({e, 1});
        if (r[e].lo < -thr) t.push_back({e, -1});
    }
    return t;
}

std::vector<LineSet> enumerate_physical_attacks(const GridModel& g, const AttackParams& p, const Placement& pl) {
    std::vector<int> free_lines;
    for (int e = 0; e < g.m(); ++e)
        if (!pl.xL[e]) free_lines.push_back(e);
    std::vector<LineSet> out;
    LineSet cur;
    std::function<void(size_t, int)> rec = [&](size_t from, int left) {
        if (connected_without(g, cur)) out.push_back(cur);
        else return; // supersets of a disconnecting set also disconnect
        if (left == 0) return;
        for (size_t i = from; i < free_lines.size(); ++i) {
            cur.push_back(free_lines[i]);
            rec(i + 1, left - 1);
            cur.pop_back();
        }
    };
    rec(0, p.xi_p);
    std::stable_sort(out.begin(), out.end(), [](const LineSet& a, const LineSet& b) { return a.size() < b.size(); });
    return out;
}

void enumerate_attack_pairs(const GridModel& g, const AttackParams& p, const Placement& pl,
                            const std::function<bool(const LineSet&, int)>& fn) {
    for (const auto& ap : enumerate_physical_attacks(g, p, pl)) {
        std::vector<char> in(g.m(), 0);
        for (int e : ap) in[e] = 1;
        for (int e = 0; e < g.m(); ++e) {
            if (in[e]) continue;
            if (!fn(ap, e)) return;
        }
    }
}

long long raw_pair_count(int lines, int xi_p) {
    long long c = 1;
    for (int i = 0; i < xi_p; ++i) c = c * (lines - i) / (i + 1);
    return static_cast<long long>(lines) * c;
}

PairCheck check_attack_pair(const GridModel& g, const AttackParams& p, const Placement& pl, const BigMBundle& bm,
                            const LineSet& ap, int line, int dir) {
    if (!p.lp_reducible()) throw PreconditionViolated("fixed-pair LP needs relaxed SCED, unbounded xi_c, fixed load");
    PairCheck res;
    res.target = {line, dir == 0 ? 1 : dir};
    for (int e : ap) {
        if (pl.xL[e] || e == line) return res;
    }
    if (static_cast<int>(ap.size()) > p.xi_p || !connected_without(g, ap)) return res;
    DcState s2 = dc_flow(g, g.p0, ap);
    std::vector<double> f2(s2.flows.data(), s2.flows.data() + g.m());
    if (!ap_within_guard(g, bm, ap, f2)) return res;
    {
        auto tt = trippable_targets(g, ap);
        bool any = false;
        for (const auto& t : tt)
            if (t.line == line && (dir == 0 || t.dir == dir)) any = true;
        if (!any) return res;
    }
    const int n = g.n(), m = g.m(), u0 = g.slack;
    const auto bt = sparse_rows(admittance(g));
    const auto bp = sparse_rows(admittance(g, ap));
    for (int d : {1, -1}) {
        if (dir != 0 && d != dir) continue;
        Model md;
        std::vector<int> tt2(n), tt3(n), t3(n);
        for (int u = 0; u < n; ++u) {
            tt2[u] = md.add_var(-kInf, kInf);
            tt3[u] = md.add_var(-kInf, kInf);
            t3[u] = md.add_var(-kInf, kInf);
        }
        md.set_bounds(tt2[u0], 0, 0);
        md.set_bounds(tt3[u0], 0, 0);
        md.set_bounds(t3[u0], 0, 0);
        auto inj = [](const std::vector<std::vector<std::pair<int, double>>>& b, const std::vector<int>& th, int u) {
            std::vector<Term> t;
            for (auto [w, val] : b[u]) t.push_back({th[w], val});
            return t;
        };
        for (int u = 0; u < n; ++u) {
            auto i2 = inj(bt, tt2, u);
            auto i3 = inj(bt, tt3, u);
            auto ip = inj(bp, t3, u);
            if (g.is_gen[u]) {
                md.add_row(i2, g.p0[u], g.p0[u]);
                md.add_row(i3, g.pg_min[u], g.pg_max[u]);
                auto t = ip;
                for (auto [j, c] : i3) t.push_back({j, -c});
                md.add_row(t, 0, 0);
            } else {
                double a = p.alpha * std::abs(g.p0[u]);
                md.add_row(i2, g.p0[u] - a, g.p0[u] + a);
                auto t = i3;
                for (auto [j, c] : i2) t.push_back({j, -c});
                md.add_row(t, 0, 0);
                md.add_row(ip, g.p0[u], g.p0[u]);
            }
            if (pl.xN[u]) md.set_bounds(tt2[u], s2.theta(u), s2.theta(u));
        }
        for (int e = 0; e < m; ++e) {
            const auto& l = g.lines[e];
            double y = 1.0 / l.r;
            md.add_row({{tt2[l.from], y}, {tt2[l.to], -y}}, -l.fmax, l.fmax);
            md.add_row({{tt3[l.from], y}, {tt3[l.to], -y}}, -l.fmax, l.fmax);
        }
        const auto& lt = g.lines[line];
        double y = d / lt.r;
        md.add_row({{t3[lt.from], y}, {t3[lt.to], -y}}, (lt.gamma + kStrict) * lt.fmax, kInf);
        auto r = solver::solve(md);
        if (r.status == solver::Status::Optimal) {
            res.feasible = true;
            res.target = {line, d};
            res.theta2.assign(s2.theta.data(), s2.theta.data() + n);
            res.theta2_tilde.resize(n);
            res.theta3_tilde.resize(n);
            res.theta3.resize(n);
            for (int u = 0; u < n; ++u) {
                res.theta2_tilde[u] = r.x[tt2[u]];
                res.theta3_tilde[u] = r.x[tt3[u]];
                res.theta3[u] = r.x[t3[u]];
            }
            return res;
        }
        if (r.status != solver::Status::Infeasible)
            throw std::runtime_error(std::string("pair LP failed: ") + solver::to_string(r.status) + " " + r.message);
    }
    return res;
}

AttackOutcome outcome_from_pair(const GridModel& g, const PairCheck& pc, const LineSet& ap) {
    AttackOutcome o;
    const int m = g.m();
    o.ap = ap;
    o.theta2 = pc.theta2;
    o.theta2_tilde = pc.theta2_tilde;
    o.theta3 = pc.theta3;
    o.theta3_tilde = pc.theta3_tilde;
    std::vector<char> out(m, 0);
    for (int e : ap) out[e] = 1;
    o.f2.assign(m, 0.0);
    o.f3.assign(m, 0.0);
    o.f2_tilde.assign(m, 0.0);
    for (int e = 0; e < m; ++e) {
        const auto& l = g.lines[e];
        o.f2_tilde[e] = (o.theta2_tilde[l.from] - o.theta2_tilde[l.to]) / l.r;
        if (out[e]) continue;
        o.f2[e] = (o.theta2[l.from] - o.theta2[l.to]) / l.r;
        o.f3[e] = (o.theta3[l.from] - o.theta3[l.to]) / l.r;
        double ratio = o.f3[e] / l.fmax;
        if (ratio - l.gamma > kTripGuard) o.targets.push_back({e, 1});
        if (-ratio - l.gamma > kTripGuard) o.targets.push_back({e, -1});
    }
    o.objective = static_cast<int>(o.targets.size());
    o.load_profile = g.p0;
    int touched = 0;
    for (int e = 0; e < m; ++e)
        if (std::abs(o.f2_tilde[e] - o.f2[e]) > 1e-7) ++touched;
    Eigen::Map<const Eigen::VectorXd> tt2(o.theta2_tilde.data(), g.n());
    Eigen::VectorXd inj = admittance(g) * tt2;
    for (int u = 0; u < g.n(); ++u)
        if (std::abs(inj(u) - g.p0[u]) > 1e-7) ++touched;
    o.meters_touched = touched;
    return o;
}

PairScreen::PairScreen(const GridModel& g, const AttackParams& p, const BigMBundle& bm) {
    if (!p.load_range.empty()) throw PreconditionViolated("pair screen needs a fixed load profile");
    const double t0 = now_s();
    AttackParams rp = p;
    rp.sced = ScedMode::Relaxed;
    rp.xi_c.reset();
    const Placement pl = empty_placement(g);
    for (const auto& ap : enumerate_physical_attacks(g, rp, pl)) {
        examined_ += g.m() - static_cast<long long>(ap.size());
        for (const auto& t : trippable_targets(g, ap)) {
            if (check_attack_pair(g, rp, pl, bm, ap, t.line, t.dir).feasible) entries_.push_back({ap, t});
        }
    }
    build_s_ = now_s() - t0;
}

std::vector<PairScreen::Entry> PairScreen::candidates(const Placement& pl) const {
    std::vector<Entry> out;
    for (const auto& en : entries_) {
        bool ok = true;
        for (int e : en.ap)
            if (pl.xL[e]) ok = false;
        if (ok) out.push_back(en);
    }
    return out;
}

namespace {

AttackResult solve_monolithic(const GridModel& g, const AttackParams& p, const Placement& pl, const BigMBundle& bm,
                              const AttackerOptions& opt) {
    AttackResult res;
    BuildOptions bo;
    bo.require_trip = opt.first_attack;
    auto am = build_attacker_model(g, p, pl, bm, bo);
    solver::Options so;
    so.time_limit = opt.time_limit;
    so.seed = opt.seed;
    so.first_solution = opt.first_attack;
    auto r = solver::solve(am.model, so);
    res.solves = 1;
    res.wall_s = r.wall_s;
    switch (r.status) {
    case solver::Status::Optimal:
    case solver::Status::FeasibleIncumbent: {
        auto o = extract_outcome(g, p, am, r.x);
        if (o.objective >= 1) {
            res.verdict = Verdict::Attack;
            res.outcome = std::move(o);
        } else {
            res.verdict = r.status == solver::Status::Optimal ? Verdict::NoAttack : Verdict::Timeout;
        }
        break;
    }
    case solver::Status::Infeasible: res.verdict = Verdict::NoAttack; break;
    case solver::Status::TimeoutNoIncumbent: res.verdict = Verdict::Timeout; break;
    default:
        res.verdict = Verdict::Error;
        res.message = r.message;
    }
    return res;
}

AttackResult solve_per_ap(const GridModel& g, const AttackParams& p, const Placement& pl, const BigMBundle& bm,
                          const AttackerOptions& opt, const std::vector<LineSet>* only = nullptr) {
    AttackResult res;
    const double t0 = now_s();
    auto aps = only ? *only : enumerate_physical_attacks(g, p, pl);
    int best = 0;
    for (const auto& ap : aps) {
        double left = opt.time_limit - (now_s() - t0);
        if (left <= 0) {
            res.verdict = best > 0 ? Verdict::Attack : Verdict::Timeout;
            res.message = "time budget exhausted";
            res.wall_s = now_s() - t0;
            return res;
        }
        if (p.load_range.empty()) {
            DcState s2 = dc_flow(g, g.p0, ap);
            std::vector<double> f2(s2.flows.data(), s2.flows.data() + g.m());
            if (!ap_within_guard(g, bm, ap, f2)) continue;
            if (trippable_targets(g, ap).empty()) continue;
        }
        BuildOptions bo;
        bo.fixed_ap = ap;
        bo.require_trip = true;
        auto am = build_attacker_model(g, p, pl, bm, bo);
        solver::Options so;
        so.time_limit = left;
        so.seed = opt.seed;
        so.first_solution = true;
        auto r = solver::solve(am.model, so);
        ++res.solves;
        if (r.status == solver::Status::Infeasible) continue;
        if (r.status == solver::Status::TimeoutNoIncumbent) {
            res.verdict = Verdict::Timeout;
            res.wall_s = now_s() - t0;
            return res;
        }
        if (!r.has_values()) {
            res.verdict = Verdict::Error;
            res.message = r.message;
            res.wall_s = now_s() - t0;
            return res;
        }
        if (!opt.first_attack) {
            // this ap attacks; maximise the trip count for it
            BuildOptions bm2;
            bm2.fixed_ap = ap;
            auto am2 = build_attacker_model(g, p, pl, bm, bm2);
            am2.model.start = r.x;
            so.first_solution = false;
            so.time_limit = std::max(0.01, opt.time_limit - (now_s() - t0));
            auto r2 = solver::solve(am2.model, so);
            ++res.solves;
            if (r2.has_values()) {
                am = std::move(am2);
                r = std::move(r2);
            }
        }
        auto o = extract_outcome(g, p, am, r.x);
        if (o.objective > best) {
            best = o.objective;
            res.outcome = std::move(o);
            res.verdict = Verdict::Attack;
        }
        if (opt.first_attack) break;
    }
    if (best == 0) res.verdict = Verdict::NoAttack;
    res.wall_s = now_s() - t0;
    return res;
}

} // namespace

AttackResult solve_attacker(const GridModel& g, const AttackParams& p, const Placement& pl, const BigMBundle& bm,
                            const AttackerOptions& opt) {
    validate(p);
    AttackerStrategy st = opt.strategy;
    if (st == AttackerStrategy::Auto) st = AttackerStrategy::PerAp;
    try {
        if (opt.screen && p.load_range.empty() && st == AttackerStrategy::PerAp) {
            auto cand = opt.screen->candidates(pl);
            if (opt.first_attack && p.lp_reducible()) {
                AttackResult res;
                const double t0 = now_s();
                res.verdict = Verdict::NoAttack;
                for (const auto& en : cand) {
                    if (now_s() - t0 > opt.time_limit) {
                        res.verdict = Verdict::Timeout;
                        break;
                    }
                    ++res.solves;
                    auto pc = check_attack_pair(g, p, pl, bm, en.ap, en.target.line, en.target.dir);
                    if (pc.feasible) {
                        res.verdict = Verdict::Attack;
                        res.outcome = outcome_from_pair(g, pc, en.ap);
                        break;
                    }
                }
                res.wall_s = now_s() - t0;
                return res;
            }
            std::vector<LineSet> aps;
            for (const auto& en : cand)
                if (aps.empty() || aps.back() != en.ap) aps.push_back(en.ap);
            return solve_per_ap(g, p, pl, bm, opt, &aps);
        }
        return st == AttackerStrategy::Monolithic ? solve_monolithic(g, p, pl, bm, opt) : solve_per_ap(g, p, pl, bm, opt);
    } catch (const std::exception& ex) {
        AttackResult r;
        r.verdict = Verdict::Error;
        r.message = ex.what();
        return r;
    }
}

std::vector<double> construct_cyber_vector(const GridModel& g, const MeterLayout& meters, const std::vector<double>& theta0,
                                           const std::vector<double>& theta2_tilde, const DcState& state2) {
    (void)theta0;
    const int n = g.n();
    Eigen::Map<const Eigen::VectorXd> tt2(theta2_tilde.data(), n);
    Eigen::VectorXd inj_fake = admittance(g) * tt2;
    // true phase-2 injections are unchanged by line removal
    Eigen::VectorXd inj_true = admittance(g, state2.outages) * state2.theta;
    std::vector<double> ac;
    for (int u : meters.node_meters) ac.push_back(inj_fake(u) - inj_true(u));
    for (int e : meters.line_meters) {
        const auto& l = g.lines[e];
        double fake = (theta2_tilde[l.from] - theta2_tilde[l.to]) / l.r;
        ac.push_back(fake - state2.flows(e));
    }
    return ac;
}

int meters_touched(const std::vector<double>& ac, double tol) {
    return static_cast<int>(std::count_if(ac.begin(), ac.end(), [tol](double x) { return std::abs(x) > tol; }));
}

Placement maximal_infeasible(const GridModel& g, const AttackParams& p, const Placement& start, const BigMBundle& bm,
                             const AttackOutcome& witness, const MaximalInfeasibleOptions& opt) {
    const int n = g.n();
    if (witness.targets.empty()) throw std::invalid_argument("maximal_infeasible needs an attack witness");
    std::vector<char> allowed(n, 1);
    if (!p.placement_mask.empty()) {
        allowed.assign(n, 0);
        for (int u : p.placement_mask) allowed[u] = 1;
    }
    const Target tgt = witness.targets.front();
    auto still_attacked = [&](const Placement& pl) {
        for (int e : witness.ap)
            if (pl.xL[e]) return false;
        if (p.lp_reducible()) return check_attack_pair(g, p, pl, bm, witness.ap, tgt.line, tgt.dir).feasible;
        BuildOptions bo;
        bo.fixed_ap = witness.ap;
        bo.target = tgt;
        auto am = build_attacker_model(g, p, pl, bm, bo);
        solver::Options so;
        so.first_solution = true;
        so.time_limit = 60.0;
        return solver::solve(am.model, so).has_values();
    };
    // greedy growth keeping the witness pair alive
    std::vector<int> cur = start.buses();
    for (int u = 0; u < n; ++u) {
        if (start.beta[u] || !allowed[u]) continue;
        auto trial = cur;
        trial.push_back(u);
        if (still_attacked(make_placement(g, trial))) cur = trial;
    }
    Placement best = make_placement(g, cur);
    if (opt.time_limit <= 0) return best;

    // exact improvement over all attacks, warm-started from the greedy set
    const double t0 = now_s();
    BuildOptions bo;
    bo.placement_vars = true;
    bo.require_trip = true;
    auto seed_model = build_attacker_model(g, p, best, bm, bo);
    for (int u = 0; u < n; ++u) seed_model.model.set_bounds(seed_model.v.beta[u], best.beta[u], best.beta[u]);
    solver::Options so;
    so.seed = opt.seed;
    so.first_solution = true;
    so.time_limit = opt.time_limit;
    auto seed = solver::solve(seed_model.model, so);
    auto am = build_attacker_model(g, p, start, bm, bo);
    if (seed.has_values()) am.model.start = seed.x;
    so.first_solution = false;
    so.time_limit = std::max(0.01, opt.time_limit - (now_s() - t0));
    auto r = solver::solve(am.model, so);
    if (r.has_values()) {
        std::vector<int> buses;
        for (int u = 0; u < n; ++u)
            if (r.x[am.v.beta[u]] > 0.5) buses.push_back(u);
        if (static_cast<int>(buses.size()) > best.count()) best = make_placement(g, buses);
    }
    return best;
}

} // namespace ppop
