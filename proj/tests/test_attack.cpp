#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace ppop;

namespace {

AttackParams small_params(int xi_p = 1, double alpha = 0.25) {
    AttackParams p;
    p.alpha = alpha;
    p.xi_p = xi_p;
    return p;
}

std::vector<GridModel> corpus() {
    std::vector<GridModel> out{fx::triangle(0.8), fx::triangle(1.0)};
    for (unsigned s = 1; s <= 8; ++s) out.push_back(fx::random_grid(5 + s % 3, s, 2));
    return out;
}

bool verdict_attack(const AttackResult& r) {
    EXPECT_TRUE(r.verdict == Verdict::Attack || r.verdict == Verdict::NoAttack) << r.message;
    return r.verdict == Verdict::Attack;
}

} // namespace

TEST(Attack, PairCounts) {
    EXPECT_EQ(raw_pair_count(41, 2), 33620);
    EXPECT_EQ(raw_pair_count(41, 0), 41);
    auto g = fx::triangle();
    auto pl = empty_placement(g);
    int nonempty = 0, empty = 0;
    enumerate_attack_pairs(g, small_params(1), pl, [&](const LineSet& ap, int e) {
        EXPECT_EQ(std::count(ap.begin(), ap.end(), e), 0);
        (ap.empty() ? empty : nonempty)++;
        return true;
    });
    EXPECT_EQ(nonempty, 6);
    EXPECT_EQ(empty, 3);
    int zero = 0;
    enumerate_attack_pairs(g, small_params(0), pl, [&](const LineSet&, int) {
        ++zero;
        return true;
    });
    EXPECT_EQ(zero, g.m());
}

TEST(Attack, PhysicalAttacksSkipCoveredAndIslanding) {
    for (unsigned s = 0; s < 6; ++s) {
        auto g = fx::random_grid(7, s, 2);
        auto pl = make_placement(g, {static_cast<int>(s % 7)});
        auto aps = enumerate_physical_attacks(g, small_params(2), pl);
        std::set<LineSet> got(aps.begin(), aps.end());
        std::set<LineSet> want;
        for (const auto& ap : fx::subsets_up_to(g.m(), 2)) {
            bool ok = fx::bfs_connected(g, ap);
            for (int e : ap) ok = ok && !pl.xL[e];
            if (ok) want.insert(ap);
        }
        EXPECT_EQ(got, want);
    }
}

TEST(Attack, PlacementCoverage) {
    auto g = fx::triangle();
    auto pl = placement_from_ids(g, {2});
    EXPECT_EQ(pl.count(), 1);
    for (int u = 0; u < 3; ++u) EXPECT_TRUE(pl.xN[u]);
    EXPECT_TRUE(pl.xL[g.line_index(1, 2)]);
    EXPECT_TRUE(pl.xL[g.line_index(2, 3)]);
    EXPECT_FALSE(pl.xL[g.line_index(1, 3)]);
    EXPECT_EQ(pl.buses(), std::vector<int>{1});
}

TEST(Attack, PairLpMatchesOracle) {
    for (const auto& g : corpus()) {
        auto p = small_params(1);
        auto bm = compute_bigm(g, p);
        for (int u = -1; u < g.n(); ++u) {
            auto pl = u < 0 ? empty_placement(g) : make_placement(g, {u});
            for (const auto& ap : fx::subsets_up_to(g.m(), 1))
                for (int e = 0; e < g.m(); ++e)
                    for (int d : {1, -1}) {
                        bool want = fx::pair_feasible_oracle(g, p, pl, ap, e, d, bm);
                        bool got = check_attack_pair(g, p, pl, bm, ap, e, d).feasible;
                        EXPECT_EQ(got, want) << g.name << " u=" << u << " e=" << e << " d=" << d;
                    }
        }
    }
}

TEST(Attack, PairLpRejectsCoveredAp) {
    auto g = fx::triangle(0.8);
    auto p = small_params(1);
    auto bm = compute_bigm(g, p);
    int e13 = g.line_index(1, 3);
    auto pl = make_placement(g, {0});
    for (int e = 0; e < g.m(); ++e) EXPECT_FALSE(check_attack_pair(g, p, pl, bm, {e13}, e).feasible);
}

TEST(Attack, PairLpNeedsReducibleMode) {
    auto g = fx::triangle();
    auto p = small_params(1);
    p.xi_c = 3;
    auto bm = compute_bigm(g, p);
    EXPECT_THROW(check_attack_pair(g, p, empty_placement(g), bm, {}, 0), PreconditionViolated);
}

TEST(Attack, MilpAgreesWithEnumeration) {
    for (const auto& g : corpus()) {
        for (int xi : {0, 1}) {
            auto p = small_params(xi);
            auto bm = compute_bigm(g, p);
            for (int u = -1; u < g.n(); ++u) {
                auto pl = u < 0 ? empty_placement(g) : make_placement(g, {u});
                bool want = fx::attacked_oracle(g, p, pl, bm);
                for (auto strat : {AttackerStrategy::Monolithic, AttackerStrategy::PerAp}) {
                    AttackerOptions ao;
                    ao.strategy = strat;
                    ao.first_attack = true;
                    auto r = solve_attacker(g, p, pl, bm, ao);
                    EXPECT_EQ(verdict_attack(r), want) << g.name << " xi=" << xi << " u=" << u;
                    if (r.outcome) {
                        // witness pair must be feasible on its own
                        ASSERT_FALSE(r.outcome->targets.empty());
                        auto t = r.outcome->targets.front();
                        EXPECT_TRUE(fx::pair_feasible_oracle(g, p, pl, r.outcome->ap, t.line, t.dir, bm));
                    }
                }
            }
        }
    }
}

TEST(Attack, TriangleExampleMatchesDcFlow) {
    // alpha = 0: the attack reduces to one removal plus an unchanged load
    auto g = fx::triangle(0.8);
    auto p = small_params(1, 0.0);
    auto bm = compute_bigm(g, p);
    bool any = false;
    for (int e = 0; e < g.m(); ++e) {
        auto st = dc_flow(g, g.p0, {e});
        for (int k = 0; k < g.m(); ++k)
            if (k != e && std::abs(st.flows(k)) > g.lines[k].gamma * g.lines[k].fmax) any = true;
    }
    auto r = solve_attacker(g, p, empty_placement(g), bm);
    EXPECT_EQ(verdict_attack(r), any);
    EXPECT_TRUE(any);
    ASSERT_TRUE(r.outcome);
    EXPECT_EQ(r.outcome->objective, 2);
}

TEST(Attack, FullProtectionBlocksEverything) {
    for (const auto& g : corpus()) {
        auto p = small_params(2);
        auto bm = compute_bigm(g, p);
        std::vector<int> all(g.n());
        for (int u = 0; u < g.n(); ++u) all[u] = u;
        auto r = solve_attacker(g, p, make_placement(g, all), bm);
        EXPECT_EQ(r.verdict, Verdict::NoAttack) << g.name;
    }
}

TEST(Attack, MonotoneInPlacement) {
    // adding a PMU never creates a successful pair
    for (unsigned s = 1; s <= 6; ++s) {
        auto g = fx::random_grid(6, s, 2);
        auto p = small_params(1);
        auto bm = compute_bigm(g, p);
        for (int a = -1; a < g.n(); ++a)
            for (int b = 0; b < g.n(); ++b) {
                std::vector<int> small;
                if (a >= 0) small.push_back(a);
                auto big = small;
                big.push_back(b);
                auto ps = make_placement(g, small), pb = make_placement(g, big);
                for (const auto& ap : fx::subsets_up_to(g.m(), 1))
                    for (int e = 0; e < g.m(); ++e)
                        if (check_attack_pair(g, p, pb, bm, ap, e).feasible)
                            EXPECT_TRUE(check_attack_pair(g, p, ps, bm, ap, e).feasible);
            }
    }
}

TEST(Attack, ScreenIsSuperset) {
    for (unsigned s = 1; s <= 5; ++s) {
        auto g = fx::random_grid(7, s, 3);
        auto p = small_params(1);
        auto bm = compute_bigm(g, p);
        PairScreen sc(g, p, bm);
        std::set<std::pair<LineSet, Target>> in;
        for (const auto& en : sc.entries()) in.insert({en.ap, en.target});
        for (int u = -1; u < g.n(); ++u) {
            auto pl = u < 0 ? empty_placement(g) : make_placement(g, {u});
            for (const auto& ap : fx::subsets_up_to(g.m(), 1))
                for (int e = 0; e < g.m(); ++e)
                    for (int d : {1, -1})
                        if (fx::pair_feasible_oracle(g, p, pl, ap, e, d, bm)) EXPECT_TRUE(in.count({ap, Target{e, d}}));
        }
    }
}

TEST(Attack, PseudoFlowMatchesConnectivity) {
    for (unsigned s = 1; s <= 6; ++s) {
        auto g = fx::random_grid(6, s, 2);
        auto p = small_params(2);
        auto bm = compute_bigm(g, p);
        auto pl = empty_placement(g);
        for (const auto& ap : fx::subsets_up_to(g.m(), 2)) {
            bool conn = fx::bfs_connected(g, ap);
            if (conn) {
                auto st = dc_flow(g, g.p0, ap);
                std::vector<double> f2(st.flows.data(), st.flows.data() + g.m());
                if (!ap_within_guard(g, bm, ap, f2)) continue;
            }
            BuildOptions bo;
            bo.fixed_ap = ap;
            auto am = build_attacker_model(g, p, pl, bm, bo);
            auto r = solver::solve(am.model);
            EXPECT_EQ(r.has_values(), conn) << g.name << " ap size " << ap.size();
        }
    }
}

TEST(Attack, OverloadBinariesMatchDirectPredicate) {
    for (const auto& g : corpus()) {
        auto p = small_params(1);
        auto bm = compute_bigm(g, p);
        auto am = build_attacker_model(g, p, empty_placement(g), bm);
        auto r = solver::solve(am.model);
        ASSERT_TRUE(r.has_values());
        for (int e = 0; e < g.m(); ++e) {
            const auto& l = g.lines[e];
            bool cut = r.x[am.v.ap[e]] > 0.5;
            double f3 = cut ? 0.0 : (r.x[am.v.t3[l.from]] - r.x[am.v.t3[l.to]]) / l.r;
            bool pp = r.x[am.v.pp[e]] > 0.5, pn = r.x[am.v.pn[e]] > 0.5;
            if (std::abs(std::abs(f3) - l.gamma * l.fmax) < 1e-5) continue;
            EXPECT_EQ(pp, f3 > l.gamma * l.fmax) << g.name << " line " << e;
            EXPECT_EQ(pn, f3 < -l.gamma * l.fmax) << g.name << " line " << e;
        }
        auto o = extract_outcome(g, p, am, r.x);
        EXPECT_NEAR(o.objective, r.objective, 1e-6);
    }
}

TEST(Attack, CyberVectorIdentity) {
    auto g = fx::triangle();
    auto meters = MeterLayout::full(g);
    auto s0 = dc_flow(g, g.p0);
    std::vector<double> th0(s0.theta.data(), s0.theta.data() + 3);
    auto ac = construct_cyber_vector(g, meters, th0, th0, s0);
    EXPECT_EQ(meters_touched(ac), 0);
}

TEST(Attack, CyberVectorMasksOutage) {
    auto g = fx::triangle();
    auto meters = MeterLayout::full(g);
    int e13 = g.line_index(1, 3);
    auto s0 = dc_flow(g, g.p0);
    auto s2 = dc_flow(g, g.p0, {e13});
    std::vector<double> th0(s0.theta.data(), s0.theta.data() + 3);
    std::vector<double> th2(s2.theta.data(), s2.theta.data() + 3);
    auto ac = construct_cyber_vector(g, meters, th0, th2, s2);
    ASSERT_EQ(ac.size(), meters.node_meters.size() + meters.line_meters.size());
    for (size_t k = 0; k < meters.node_meters.size(); ++k) {
        int u = meters.node_meters[k];
        bool incident = u == g.lines[e13].from || u == g.lines[e13].to;
        EXPECT_EQ(std::abs(ac[k]) > 1e-9, incident) << "bus " << u;
    }
    for (size_t k = 0; k < meters.line_meters.size(); ++k) {
        int e = meters.line_meters[k];
        EXPECT_EQ(std::abs(ac[meters.node_meters.size() + k]) > 1e-9, e == e13) << "line " << e;
    }
}

TEST(Attack, CyberVectorResidualVanishes) {
    for (unsigned s = 1; s <= 8; ++s) {
        auto g = fx::random_grid(7, s, 3);
        auto meters = MeterLayout::full(g);
        std::mt19937 rng(s);
        std::uniform_real_distribution<double> U(-0.3, 0.3);
        for (int e = 0; e < g.m(); ++e) {
            if (!fx::bfs_connected(g, {e})) continue;
            auto s2 = dc_flow(g, g.p0, {e});
            std::vector<double> tt2(g.n());
            for (int u = 0; u < g.n(); ++u) tt2[u] = u == g.slack ? 0.0 : U(rng);
            auto ac = construct_cyber_vector(g, meters, tt2, tt2, s2);
            // true measurements plus injected data equal the fake full-topology measurements
            Eigen::MatrixXd bf = fx::admittance_oracle(g), bp = fx::admittance_oracle(g, {e});
            Eigen::Map<const Eigen::VectorXd> th(tt2.data(), g.n());
            Eigen::VectorXd zfake = bf * th, ztrue = bp * s2.theta;
            double worst = 0.0;
            for (size_t k = 0; k < meters.node_meters.size(); ++k) {
                int u = meters.node_meters[k];
                worst = std::max(worst, std::abs(ztrue(u) + ac[k] - zfake(u)));
            }
            for (size_t k = 0; k < meters.line_meters.size(); ++k) {
                int j = meters.line_meters[k];
                const auto& l = g.lines[j];
                double ftrue = j == e ? 0.0 : (s2.theta(l.from) - s2.theta(l.to)) / l.r;
                double ffake = (tt2[l.from] - tt2[l.to]) / l.r;
                worst = std::max(worst, std::abs(ftrue + ac[meters.node_meters.size() + k] - ffake));
            }
            EXPECT_LE(worst, 1e-9);
        }
    }
}

TEST(Attack, MaximalInfeasibleIsMaximal) {
    for (unsigned s = 1; s <= 6; ++s) {
        auto g = s == 1 ? fx::triangle(0.8) : fx::random_grid(6, s, 2);
        auto p = small_params(1);
        auto bm = compute_bigm(g, p);
        auto start = empty_placement(g);
        AttackerOptions ao;
        ao.first_attack = true;
        auto r = solve_attacker(g, p, start, bm, ao);
        if (r.verdict != Verdict::Attack) continue;
        auto grown = maximal_infeasible(g, p, start, bm, *r.outcome, {30.0, 0});
        EXPECT_GE(grown.count(), start.count());
        EXPECT_TRUE(fx::attacked_oracle(g, p, grown, bm));
        for (int u = 0; u < g.n(); ++u) {
            if (grown.beta[u]) continue;
            auto more = grown.buses();
            more.push_back(u);
            EXPECT_FALSE(fx::attacked_oracle(g, p, make_placement(g, more), bm)) << g.name << " bus " << u;
        }
        auto again = maximal_infeasible(g, p, grown, bm, *r.outcome, {30.0, 0});
        EXPECT_EQ(again.beta, grown.beta);
    }
}
