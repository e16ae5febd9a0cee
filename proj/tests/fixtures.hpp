#pragma once

#include "ppop/placement.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fx {

using namespace ppop;

/// 3-bus triangle: bus 1 slack generator, bus 3 load, x = 1 on every line.
inline std::string triangle_case(double rate_mw = 100.0, double pg_mw = 100.0, double pmax_mw = 200.0) {
    std::ostringstream os;
    os << "function mpc = tri\n"
       << "mpc.baseMVA = 100;\n"
       << "mpc.bus = [\n"
       << " 1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n"
       << " 2 1 0 0 0 0 1 1 0 230 1 1.1 0.9;\n"
       << " 3 1 " << pg_mw << " 0 0 0 1 1 0 230 1 1.1 0.9;\n"
       << "];\n"
       << "mpc.gen = [\n"
       << " 1 " << pg_mw << " 0 300 -300 1 100 1 " << pmax_mw << " 0;\n"
       << "];\n"
       << "mpc.branch = [\n"
       << " 1 2 0 1 0 " << rate_mw << " 0 0 0 0 1 -360 360;\n"
       << " 1 3 0 1 0 " << rate_mw << " 0 0 0 0 1 -360 360;\n"
       << " 2 3 0 1 0 " << rate_mw << " 0 0 0 0 1 -360 360;\n"
       << "];\n"
       << "mpc.gencost = [ 2 0 0 2 10 0; ];\n";
    return os.str();
}

inline GridModel triangle(double fmax = 1.0, double gamma = 1.2) {
    LoadOptions lo;
    lo.gamma = gamma;
    return parse_matpower(triangle_case(fmax * 100.0), lo, "triangle");
}

/// Connected random grid with n buses, a few generators and tight-ish limits.
inline GridModel random_grid(int n, unsigned seed, int extra_lines = 2, double margin = 0.5, int gens = 2) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    GridModel g;
    g.name = "rand" + std::to_string(n) + "_" + std::to_string(seed);
    for (int u = 0; u < n; ++u) g.bus_ids.push_back(u + 1);
    auto has = [&](int a, int b) {
        for (const auto& l : g.lines)
            if ((l.from == a && l.to == b) || (l.from == b && l.to == a)) return true;
        return false;
    };
    for (int u = 1; u < n; ++u) {
        int v = static_cast<int>(rng() % u);
        g.lines.push_back({v, u, 0.5 + U(rng), 1.0, 1.2});
    }
    for (int k = 0, tries = 0; k < extra_lines && tries < 100; ++tries) {
        int a = static_cast<int>(rng() % n), b = static_cast<int>(rng() % n);
        if (a == b || has(a, b)) continue;
        g.lines.push_back({a, b, 0.5 + U(rng), 1.0, 1.2});
        ++k;
    }
    g.is_gen.assign(n, 0);
    g.is_gen[0] = 1;
    for (int k = 1; k < gens; ++k) g.is_gen[1 + rng() % (n - 1)] = 1;
    g.p0.assign(n, 0.0);
    g.pg_min.assign(n, 0.0);
    g.pg_max.assign(n, 0.0);
    g.cost.assign(n, 0.0);
    double load = 0.0;
    for (int u = 0; u < n; ++u)
        if (!g.is_gen[u]) {
            g.p0[u] = -(0.2 + 0.4 * U(rng));
            load -= g.p0[u];
        }
    int ng = 0;
    for (int u = 0; u < n; ++u) ng += g.is_gen[u];
    for (int u = 0; u < n; ++u)
        if (g.is_gen[u]) {
            g.p0[u] = load / ng;
            g.pg_max[u] = load;
            g.cost[u] = 1.0 + u;
        }
    g.slack = 0;
    auto st = dc_flow(g, g.p0);
    for (int e = 0; e < g.m(); ++e) g.lines[e].fmax = std::max(0.15, std::abs(st.flows(e)) * (1.05 + margin * U(rng)));
    validate(g);
    return g;
}

inline GridModel star(int leaves) {
    GridModel g;
    g.name = "star";
    const int n = leaves + 1;
    for (int u = 0; u < n; ++u) g.bus_ids.push_back(u + 1);
    for (int u = 1; u < n; ++u) g.lines.push_back({0, u, 1.0, 1.0, 1.2});
    g.is_gen.assign(n, 0);
    g.is_gen[0] = 1;
    g.p0.assign(n, -0.5);
    g.p0[0] = 0.5 * leaves;
    g.pg_min.assign(n, 0.0);
    g.pg_max.assign(n, 0.0);
    g.pg_max[0] = leaves;
    g.cost.assign(n, 0.0);
    g.slack = 0;
    validate(g);
    return g;
}

/// Independent breadth-first connectivity check.
inline bool bfs_connected(const GridModel& g, const LineSet& removed) {
    std::vector<char> out(g.m(), 0);
    for (int e : removed) out[e] = 1;
    std::vector<std::vector<int>> adj(g.n());
    for (int e = 0; e < g.m(); ++e)
        if (!out[e]) {
            adj[g.lines[e].from].push_back(g.lines[e].to);
            adj[g.lines[e].to].push_back(g.lines[e].from);
        }
    std::vector<char> seen(g.n(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int cnt = 1;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (int v : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                ++cnt;
                q.push(v);
            }
    }
    return cnt == g.n();
}

/// Admittance built straight from the line list.
inline Eigen::MatrixXd admittance_oracle(const GridModel& g, const LineSet& removed = {}) {
    std::vector<char> out(g.m(), 0);
    for (int e : removed) out[e] = 1;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(g.n(), g.n());
    for (int e = 0; e < g.m(); ++e) {
        if (out[e]) continue;
        const auto& l = g.lines[e];
        b(l.from, l.from) += 1.0 / l.r;
        b(l.to, l.to) += 1.0 / l.r;
        b(l.from, l.to) -= 1.0 / l.r;
        b(l.to, l.from) -= 1.0 / l.r;
    }
    return b;
}

inline Eigen::VectorXd angles_oracle(const GridModel& g, const std::vector<double>& p, const LineSet& removed = {}) {
    const int n = g.n();
    Eigen::MatrixXd b = admittance_oracle(g, removed);
    Eigen::MatrixXd red(n - 1, n - 1);
    Eigen::VectorXd rhs(n - 1);
    std::vector<int> keep;
    for (int u = 0; u < n; ++u)
        if (u != g.slack) keep.push_back(u);
    for (int i = 0; i < n - 1; ++i) {
        rhs(i) = p[keep[i]];
        for (int j = 0; j < n - 1; ++j) red(i, j) = b(keep[i], keep[j]);
    }
    Eigen::VectorXd x = red.fullPivLu().solve(rhs);
    Eigen::VectorXd th = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n - 1; ++i) th(keep[i]) = x(i);
    return th;
}

/// Direct pair LP written from the model equations. line < 0 drops the
/// target row, leaving the attacker's whole feasible region for ap.
struct PairLp {
    solver::Model md;
    std::vector<int> tt2, tt3, t3;
    Eigen::VectorXd theta2;
    bool excluded = false;
};

inline PairLp build_pair_lp(const GridModel& g, const AttackParams& p, const Placement& pl, const LineSet& ap, int line,
                            int dir, const BigMBundle& bm) {
    using solver::kInf;
    PairLp lp;
    const int n = g.n(), m = g.m();
    for (int e : ap)
        if (pl.xL[e] || e == line) lp.excluded = true;
    if (!bfs_connected(g, ap) || static_cast<int>(ap.size()) > p.xi_p) lp.excluded = true;
    if (lp.excluded) return lp;
    lp.theta2 = angles_oracle(g, g.p0, ap);
    std::vector<char> out(m, 0);
    for (int e : ap) out[e] = 1;
    for (int e = 0; e < m; ++e) {
        if (out[e]) continue;
        const auto& l = g.lines[e];
        double f2 = (lp.theta2(l.from) - lp.theta2(l.to)) / l.r;
        if (std::abs(f2) > bm.m2a[e]) lp.excluded = true;
    }
    if (lp.excluded) return lp;
    auto& md = lp.md;
    for (int u = 0; u < n; ++u) {
        lp.tt2.push_back(md.add_var(-kInf, kInf));
        lp.tt3.push_back(md.add_var(-kInf, kInf));
        lp.t3.push_back(md.add_var(-kInf, kInf));
    }
    md.set_bounds(lp.tt2[g.slack], 0, 0);
    md.set_bounds(lp.tt3[g.slack], 0, 0);
    md.set_bounds(lp.t3[g.slack], 0, 0);
    Eigen::MatrixXd bf = admittance_oracle(g), bp = admittance_oracle(g, ap);
    auto inj = [&](const Eigen::MatrixXd& b, const std::vector<int>& th, int u, double s) {
        std::vector<solver::Term> t;
        for (int v = 0; v < n; ++v)
            if (b(u, v) != 0.0) t.push_back({th[v], s * b(u, v)});
        return t;
    };
    for (int u = 0; u < n; ++u) {
        auto fake2 = inj(bf, lp.tt2, u, 1.0);
        auto fake3 = inj(bf, lp.tt3, u, 1.0);
        auto real3 = inj(bp, lp.t3, u, 1.0);
        if (g.is_gen[u]) {
            md.add_row(fake2, g.p0[u], g.p0[u]);
            md.add_row(fake3, g.pg_min[u], g.pg_max[u]);
            auto d = real3;
            for (auto t : inj(bf, lp.tt3, u, -1.0)) d.push_back(t);
            md.add_row(d, 0, 0);
        } else {
            double a = p.alpha * std::abs(g.p0[u]);
            md.add_row(fake2, g.p0[u] - a, g.p0[u] + a);
            auto d = fake3;
            for (auto t : inj(bf, lp.tt2, u, -1.0)) d.push_back(t);
            md.add_row(d, 0, 0);
            md.add_row(real3, g.p0[u], g.p0[u]);
        }
        if (pl.xN[u]) md.set_bounds(lp.tt2[u], lp.theta2(u), lp.theta2(u));
    }
    for (int e = 0; e < m; ++e) {
        const auto& l = g.lines[e];
        md.add_row({{lp.tt2[l.from], 1 / l.r}, {lp.tt2[l.to], -1 / l.r}}, -l.fmax, l.fmax);
        md.add_row({{lp.tt3[l.from], 1 / l.r}, {lp.tt3[l.to], -1 / l.r}}, -l.fmax, l.fmax);
    }
    if (line < 0) return lp;
    const auto& lt = g.lines[line];
    md.add_row({{lp.t3[lt.from], dir / lt.r}, {lp.t3[lt.to], -dir / lt.r}}, (lt.gamma + 1e-6) * lt.fmax, kInf);
    return lp;
}

inline bool pair_feasible_oracle(const GridModel& g, const AttackParams& p, const Placement& pl, const LineSet& ap,
                                 int line, int dir, const BigMBundle& bm) {
    auto lp = build_pair_lp(g, p, pl, ap, line, dir, bm);
    if (lp.excluded) return false;
    return solver::solve(lp.md).status == solver::Status::Optimal;
}

/// All physical attacks up to size k (ap = {} included), connectivity not checked.
inline std::vector<LineSet> subsets_up_to(int m, int k) {
    std::vector<LineSet> out{{}};
    if (k >= 1)
        for (int a = 0; a < m; ++a) out.push_back({a});
    if (k >= 2)
        for (int a = 0; a < m; ++a)
            for (int b = a + 1; b < m; ++b) out.push_back({a, b});
    return out;
}

/// psi(beta) >= 1 by exhaustive pair enumeration over the direct LP.
inline bool attacked_oracle(const GridModel& g, const AttackParams& p, const Placement& pl, const BigMBundle& bm) {
    for (const auto& ap : subsets_up_to(g.m(), p.xi_p))
        for (int e = 0; e < g.m(); ++e)
            for (int d : {1, -1})
                if (pair_feasible_oracle(g, p, pl, ap, e, d, bm)) return true;
    return false;
}

/// Smallest dominating set size by enumeration.
inline int min_dominating_set(const GridModel& g) {
    const int n = g.n();
    auto nb = g.neighbors();
    int best = n;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        int c = __builtin_popcount(mask);
        if (c >= best) continue;
        bool ok = true;
        for (int u = 0; u < n && ok; ++u) {
            bool dom = (mask >> u) & 1u;
            for (int v : nb[u]) dom = dom || ((mask >> v) & 1u);
            ok = dom;
        }
        if (ok) best = c;
    }
    return best;
}

} // namespace fx
