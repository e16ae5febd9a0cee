// Acceptance runner: one PASS/FAIL line per criterion.
//
// PPOP_ACCEPT_TIER selects how much runs: fast (30-bus rows), full (adds
// 57-bus rows, the default) or long (adds 118/300-bus rows). Rows outside
// the selected tier print SKIP. Soft rows print their result but never fail
// the run.
#include "fixtures.hpp"
#include "ppop/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace ppop;

namespace {

struct Criterion {
    int id;
    std::string title;
    std::vector<std::string> prefixes;
    const char* min_tier;
};

int tier_rank(const std::string& t) { return t == "fast" ? 0 : t == "full" ? 1 : 2; }

// Property checks with independent oracles, kept small enough for every run.
struct PropertyLog {
    int checks = 0;
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        ++checks;
        if (!ok && failures.size() < 20) failures.push_back(what);
    }
};

AttackParams small(int xi_p, double alpha = 0.25) {
    AttackParams p;
    p.xi_p = xi_p;
    p.alpha = alpha;
    return p;
}

int oracle_optimum(const GridModel& g, const AttackParams& p, const BigMBundle& bm) {
    const int n = g.n();
    for (int k = 0; k <= n; ++k) {
        std::vector<char> sel(n, 0);
        std::fill(sel.begin(), sel.begin() + k, 1);
        do {
            std::vector<int> b;
            for (int u = 0; u < n; ++u)
                if (sel[u]) b.push_back(u);
            if (!fx::attacked_oracle(g, p, make_placement(g, b), bm)) return k;
        } while (std::prev_permutation(sel.begin(), sel.end()));
    }
    return -1;
}

void brute_force_equivalence(PropertyLog& log) {
    std::vector<std::pair<GridModel, double>> grids{{fx::triangle(0.8), 0.25}};
    for (unsigned s = 1; s <= 4; ++s) grids.push_back({fx::random_grid(5 + s % 4, s, 1 + s % 3), 0.25});
    grids.push_back({fx::random_grid(7, 22, 2, 0.1, 3), 0.25});
    grids.push_back({fx::random_grid(8, 15, 3), 0.25});
    grids.push_back({fx::random_grid(8, 5, 3, 0.02, 4), 1.0});
    EngineOptions eo;
    eo.budget_s = 300;
    eo.nogood_cap_s = 10;
    for (const auto& [g, alpha] : grids) {
        auto p = small(1, alpha);
        auto bm = compute_bigm(g, p);
        int want = oracle_optimum(g, p, bm);
        PlacementContext c1(g, p, bm), c2(g, p, bm);
        auto a = aong(c1, eo);
        auto d = aodc(c2, eo);
        log.expect(a.status == PlacementStatus::Optimal && a.placement.count() == want, "aong optimum on " + g.name);
        log.expect(d.status == PlacementStatus::Optimal && d.placement.count() == want, "aodc optimum on " + g.name);
        log.expect(d.gale_violations == 0, "gale certificate disagreement on " + g.name);
        // pooled attack-denial blocks agree with the primal pair LP under the final placement
        for (const auto& pr : d.pool.pairs) {
            bool ap_covered = false;
            for (int a : pr.ap) ap_covered = ap_covered || d.placement.xL[a];
            if (ap_covered) continue;
            bool blk = block_feasible(c2.block(pr), d.placement.xN);
            bool lp = fx::pair_feasible_oracle(g, p, d.placement, pr.ap, pr.target.line, pr.target.dir, bm);
            log.expect(blk == lp, "gale block vs pair LP on " + g.name);
        }
        log.expect(d.pool.diagnostics["mccormick_violations"] == 0, "mccormick gap on " + g.name);
    }
}

void monotonicity(PropertyLog& log) {
    for (unsigned s = 1; s <= 3; ++s) {
        auto g = fx::random_grid(6, s, 2);
        auto p = small(1);
        auto bm = compute_bigm(g, p);
        for (int a = -1; a < g.n(); ++a)
            for (int b = 0; b < g.n(); ++b) {
                std::vector<int> lo;
                if (a >= 0) lo.push_back(a);
                auto hi = lo;
                hi.push_back(b);
                auto pl = make_placement(g, lo), ph = make_placement(g, hi);
                for (const auto& ap : fx::subsets_up_to(g.m(), 1))
                    for (int e = 0; e < g.m(); ++e)
                        if (check_attack_pair(g, p, ph, bm, ap, e).feasible)
                            log.expect(check_attack_pair(g, p, pl, bm, ap, e).feasible,
                                       "monotonicity on " + g.name);
            }
    }
}

void pseudo_flow(PropertyLog& log) {
    for (unsigned s = 1; s <= 3; ++s) {
        auto g = fx::random_grid(6, s, 2);
        auto p = small(2);
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
            log.expect(solver::solve(am.model).has_values() == conn, "pseudo-flow connectivity on " + g.name);
        }
    }
}

void cyber_residual(PropertyLog& log) {
    for (unsigned s = 1; s <= 4; ++s) {
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
            log.expect(worst <= 1e-9, "cyber residual on " + g.name);
        }
    }
}

void overload_predicate(PropertyLog& log) {
    std::vector<GridModel> grids{fx::triangle(0.8), fx::triangle(1.0)};
    for (unsigned s = 1; s <= 4; ++s) grids.push_back(fx::random_grid(5 + s % 3, s, 2));
    for (const auto& g : grids) {
        auto p = small(1);
        auto bm = compute_bigm(g, p);
        auto am = build_attacker_model(g, p, empty_placement(g), bm);
        auto r = solver::solve(am.model);
        log.expect(r.has_values(), "attacker model solvable on " + g.name);
        if (!r.has_values()) continue;
        for (int e = 0; e < g.m(); ++e) {
            const auto& l = g.lines[e];
            bool cut = r.x[am.v.ap[e]] > 0.5;
            double f3 = cut ? 0.0 : (r.x[am.v.t3[l.from]] - r.x[am.v.t3[l.to]]) / l.r;
            if (std::abs(std::abs(f3) - l.gamma * l.fmax) < 1e-5) continue;
            log.expect((r.x[am.v.pp[e]] > 0.5) == (f3 > l.gamma * l.fmax), "overload binary on " + g.name);
            log.expect((r.x[am.v.pn[e]] > 0.5) == (f3 < -l.gamma * l.fmax), "overload binary on " + g.name);
        }
    }
}

void bigm_soundness(PropertyLog& log) {
    for (unsigned s = 0; s < 4; ++s) {
        auto g = s == 0 ? fx::triangle(0.8) : fx::random_grid(6, s, 2);
        auto p = small(2);
        auto bm = compute_bigm(g, p);
        for (const auto& ap : fx::subsets_up_to(g.m(), 2)) {
            if (!fx::bfs_connected(g, ap)) continue;
            auto st = dc_flow(g, g.p0, ap);
            std::vector<double> f2(st.flows.data(), st.flows.data() + g.m());
            if (!ap_within_guard(g, bm, ap, f2)) continue;
            for (int u = 0; u < g.n(); ++u)
                log.expect(std::abs(st.theta(u)) <= bm.mtheta2[u] + 1e-9, "angle bound on " + g.name);
            for (int e = 0; e < g.m(); ++e) {
                const auto& l = g.lines[e];
                log.expect(std::abs(st.theta(l.from) - st.theta(l.to)) / l.r <= bm.m2f_line[e] + 1e-9,
                           "line flow bound on " + g.name);
            }
        }
    }
}

bool run_properties(std::string& detail) {
    PropertyLog log;
    brute_force_equivalence(log);
    monotonicity(log);
    pseudo_flow(log);
    cyber_residual(log);
    overload_predicate(log);
    bigm_soundness(log);
    std::ostringstream os;
    os << log.checks << " checks, " << log.failures.size() << " failed";
    for (const auto& f : log.failures) os << "; " << f;
    detail = os.str();
    return log.failures.empty();
}

} // namespace

int main() {
    const char* env = std::getenv("PPOP_ACCEPT_TIER");
    std::string tier = env && *env ? env : "full";
    if (tier != "fast" && tier != "full" && tier != "long") {
        std::cerr << "PPOP_ACCEPT_TIER must be fast, full or long\n";
        return 2;
    }
    std::cout << "tier " << tier << ", solver " << solver::backend_name() << "\n" << std::flush;

    bool failed = false;

    // criterion 7 first: it is cheap and catches regressions early
    std::string prop_detail;
    bool prop_ok = false;
    try {
        prop_ok = run_properties(prop_detail);
    } catch (const std::exception& ex) {
        prop_detail = std::string("error: ") + ex.what();
    }

    cli::RunConfig base;
    base.budget_s = 1800;
    auto rows = cli::run_bench(tier, base);
    for (const auto& r : rows)
        std::cout << "  " << (r.pass ? "ok  " : r.hard ? "FAIL" : "soft") << " " << r.name << " expected " << r.expected
                  << " observed " << r.observed << " (" << r.wall_s << " s)\n";

    const std::vector<Criterion> crit{
        {1, "AONG/AODC optima 2 (30-bus) and 3 (57-bus)", {"table2/aong/", "table2/aodc/"}, "fast"},
        {2, "golden placements verify and every 30-bus single is attacked", {"table9/", "singles/"}, "fast"},
        {3, "alpha sweep 1,1,2,3 on 30-bus", {"table4/"}, "fast"},
        {4, "heuristic 2/3 and <= 12 on 118-bus", {"table2/heuristic/"}, "full"},
        {5, "full observability 10/17/32 and GreedyDegree 3/3/14", {"table2/fullobs/", "table2/greedy/"}, "fast"},
        {6, "300-bus full observability 95 pinned and 87 unpinned", {"table3/"}, "long"},
    };
    for (const auto& c : crit) {
        std::vector<const cli::BenchRow*> mine;
        for (const auto& r : rows)
            for (const auto& pre : c.prefixes)
                if (r.name.rfind(pre, 0) == 0) mine.push_back(&r);
        std::string label = "criterion " + std::to_string(c.id) + ": " + c.title;
        if (mine.empty() || tier_rank(tier) < tier_rank(c.min_tier)) {
            std::cout << "[SKIP] " << label << " (needs tier " << c.min_tier << ")\n";
            continue;
        }
        bool hard_ok = true, soft_ok = true;
        int n_pass = 0;
        for (const auto* r : mine) {
            if (r->pass) ++n_pass;
            else if (r->hard) hard_ok = false;
            else soft_ok = false;
        }
        std::string tag = !hard_ok ? "[FAIL]" : soft_ok ? "[PASS]" : "[SOFT]";
        std::cout << tag << " " << label << " (" << n_pass << "/" << mine.size() << " rows)";
        if (tier != "long" && (c.id == 4 || c.id == 5)) std::cout << " [118-bus rows need tier long]";
        if (tier == "fast" && c.id < 4) std::cout << " [57-bus rows need tier full]";
        std::cout << "\n";
        if (!hard_ok) failed = true;
    }

    std::cout << (prop_ok ? "[PASS]" : "[FAIL]") << " criterion 7: property suite (" << prop_detail << ")\n";
    if (!prop_ok) failed = true;
    return failed ? 1 : 0;
}
