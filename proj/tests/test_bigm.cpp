#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace ppop;

TEST(BigM, PathBoundTriangle) {
    auto g = fx::triangle();
    std::vector<double> ones(3, 1.0);
    EXPECT_NEAR(path_angle_bound(g, 2, ones, 2), 2.0, 1e-12);
    EXPECT_NEAR(path_angle_bound(g, 2, ones, 1), 1.0, 1e-12);
    EXPECT_NEAR(path_angle_bound(g, 0, ones, 2), 0.0, 1e-12);
}

TEST(BigM, PathBoundChain) {
    GridModel g;
    g.bus_ids = {1, 2, 3};
    g.lines = {{0, 1, 2.0, 1.0, 1.2}, {1, 2, 3.0, 1.0, 1.2}};
    g.is_gen = {1, 0, 0};
    g.p0 = {0.2, -0.1, -0.1};
    g.pg_min = {0, 0, 0};
    g.pg_max = {1, 0, 0};
    g.cost = {1, 0, 0};
    EXPECT_NEAR(path_angle_bound(g, 2, {1.0, 1.0}, 1), 5.0, 1e-12);
    EXPECT_NEAR(path_angle_bound(g, 2, {1.0, 1.0}, 3), 5.0, 1e-12);
}

TEST(BigM, PathBoundMatchesEnumeration) {
    // max over connected removals of size < k of the weighted shortest path
    for (unsigned s = 0; s < 8; ++s) {
        auto g = fx::random_grid(7, s, 3);
        std::vector<double> bound(g.m(), 1.0);
        auto got = path_angle_bounds(g, bound, 2);
        for (int u = 0; u < g.n(); ++u) {
            double best = 0.0;
            for (const auto& ap : fx::subsets_up_to(g.m(), 1)) {
                if (!fx::bfs_connected(g, ap)) continue;
                // Bellman-Ford on the remaining graph
                std::vector<double> d(g.n(), 1e300);
                d[g.slack] = 0.0;
                for (int it = 0; it < g.n(); ++it)
                    for (int e = 0; e < g.m(); ++e) {
                        if (!ap.empty() && ap[0] == e) continue;
                        const auto& l = g.lines[e];
                        d[l.to] = std::min(d[l.to], d[l.from] + l.r);
                        d[l.from] = std::min(d[l.from], d[l.to] + l.r);
                    }
                best = std::max(best, d[u]);
            }
            EXPECT_NEAR(got[u], best, 1e-9) << "bus " << u;
        }
    }
}

TEST(BigM, FormulaValues) {
    auto g = fx::triangle();
    AttackParams p;
    p.alpha = 0.25;
    auto b = compute_bigm(g, p);
    for (double v : b.m2a) EXPECT_NEAR(v, 3.6, 1e-12);
    EXPECT_NEAR(b.mcp, 0.25, 1e-12);
    EXPECT_LT(b.mf_lower, 0.0);
    EXPECT_GT(b.mq, 0.0);
    auto e = b;
    escalate(e);
    EXPECT_NEAR(e.mf_lower, 2 * b.mf_lower, 1e-12);
    EXPECT_NEAR(e.mq, 2 * b.mq, 1e-12);
}

TEST(BigM, LineGuardDominatesAngles) {
    auto g = fx::triangle();
    AttackParams p;
    p.xi_p = 1;
    auto b = compute_bigm(g, p);
    for (int e = 0; e < g.m(); ++e) {
        const auto& l = g.lines[e];
        EXPECT_TRUE(std::isfinite(b.m2f_line[e]));
        EXPECT_GE(b.m2f_line[e] + 1e-12, (b.mtheta2[l.from] + b.mtheta2[l.to]) / l.r);
    }
}

TEST(BigM, ScalesWithLimits) {
    auto a = fx::triangle(1.0);
    auto c = fx::triangle(2.0);
    AttackParams p;
    auto ba = compute_bigm(a, p), bc = compute_bigm(c, p);
    for (int e = 0; e < a.m(); ++e) EXPECT_GE(bc.m2a[e], ba.m2a[e]);
    for (int u = 0; u < a.n(); ++u) {
        EXPECT_GE(bc.mtheta2[u], ba.mtheta2[u]);
        EXPECT_GE(bc.mtheta2_tilde[u], ba.mtheta2_tilde[u]);
    }
    EXPECT_GE(bc.m2theta, ba.m2theta);
}

namespace {

double lp_extreme(fx::PairLp& lp, int var, double sign) {
    lp.md.set_maximize(true);
    for (int j = 0; j < lp.md.num_vars(); ++j) lp.md.set_obj(j, 0.0);
    lp.md.set_obj(var, sign);
    auto r = solver::solve(lp.md);
    if (r.status == solver::Status::Unbounded) return solver::kInf;
    if (r.status != solver::Status::Optimal) return 0.0;
    return r.objective;
}

} // namespace

TEST(BigM, SoundOnExhaustiveSmallAttacks) {
    for (unsigned s = 0; s < 6; ++s) {
        auto g = s == 0 ? fx::triangle(0.8) : fx::random_grid(6, s, 2);
        AttackParams p;
        p.xi_p = 2;
        p.alpha = 0.25;
        auto bm = compute_bigm(g, p);
        auto pl = empty_placement(g);
        for (const auto& ap : fx::subsets_up_to(g.m(), 2)) {
            if (!fx::bfs_connected(g, ap)) continue;
            auto st = dc_flow(g, g.p0, ap);
            std::vector<double> f2(st.flows.data(), st.flows.data() + g.m());
            if (!ap_within_guard(g, bm, ap, f2)) continue;
            for (int u = 0; u < g.n(); ++u) EXPECT_LE(std::abs(st.theta(u)), bm.mtheta2[u] + 1e-9);
            for (int e = 0; e < g.m(); ++e) {
                const auto& l = g.lines[e];
                EXPECT_LE(std::abs(st.theta(l.from) - st.theta(l.to)) / l.r, bm.m2f_line[e] + 1e-9);
            }
            auto lp = fx::build_pair_lp(g, p, pl, ap, -1, 1, bm);
            if (lp.excluded) continue;
            for (int u = 0; u < g.n(); ++u) {
                for (double sg : {1.0, -1.0}) {
                    EXPECT_LE(lp_extreme(lp, lp.tt2[u], sg), bm.mtheta2_tilde[u] + 1e-7);
                    EXPECT_LE(lp_extreme(lp, lp.t3[u], sg), bm.mtheta3[u] + 1e-7);
                }
                EXPECT_LE(lp_extreme(lp, lp.tt2[u], 1.0) - st.theta(u), bm.m2theta + 1e-7);
                EXPECT_LE(st.theta(u) - lp_extreme(lp, lp.tt2[u], -1.0) * -1.0, bm.m2theta + 1e-7);
            }
            // post-attack flows never exceed the line cap used by the overload block
            for (int e = 0; e < g.m(); ++e) {
                if (std::count(ap.begin(), ap.end(), e)) continue;
                const auto& l = g.lines[e];
                fx::PairLp q = lp;
                int fvar = q.md.add_var(-solver::kInf, solver::kInf);
                q.md.add_row({{fvar, 1.0}, {q.t3[l.from], -1.0 / l.r}, {q.t3[l.to], 1.0 / l.r}}, 0, 0);
                EXPECT_LE(lp_extreme(q, fvar, 1.0), bm.m3a_line[e] + 1e-7);
                EXPECT_LE(lp_extreme(q, fvar, -1.0), bm.m3a_line[e] + 1e-7);
            }
        }
    }
}
