#include "ppop/placement.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ppop {

using solver::kInf;
using solver::Model;
using solver::Term;
using solver::VarKind;

namespace {

constexpr double kStrict = 1e-6;
constexpr int kMaxEscalations = 8;

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

struct Clock {
    double t0 = now_s();
    double budget = kInf;
    double elapsed() const { return now_s() - t0; }
    double left() const { return budget - elapsed(); }
    bool expired() const { return left() <= 0.0; }
};

std::vector<std::vector<int>> closed_neighborhoods(const GridModel& g) {
    auto nb = g.neighbors();
    for (int u = 0; u < g.n(); ++u) {
        nb[u].push_back(u);
        std::sort(nb[u].begin(), nb[u].end());
    }
    return nb;
}

std::vector<char> allowed_mask(const GridModel& g, const AttackParams& p) {
    std::vector<char> a(g.n(), 1);
    if (!p.placement_mask.empty()) {
        a.assign(g.n(), 0);
        for (int u : p.placement_mask) a.at(u) = 1;
    }
    return a;
}

std::vector<int> ids_of(const GridModel& g, const std::vector<int>& buses) {
    std::vector<int> ids;
    for (int u : buses) ids.push_back(g.bus_ids[u]);
    return ids;
}

std::vector<char> beta_of(int n, const std::vector<int>& buses) {
    std::vector<char> b(n, 0);
    for (int u : buses) b[u] = 1;
    return b;
}

std::vector<PoolPair> pairs_of(const AttackOutcome& o) {
    std::vector<PoolPair> out;
    for (const auto& t : o.targets) out.push_back({o.ap, t});
    return out;
}

// Equality rows F1^T q1 + F2^T q2 = 0 for the dual certificate of one block.
struct Certificate {
    std::vector<int> q1, q2;
};

Certificate add_certificate(Model& md, const AttackDenialBlock& blk) {
    Certificate c;
    for (int i = 0; i < blk.F1.rows(); ++i) c.q1.push_back(md.add_var(-kInf, kInf));
    for (int i = 0; i < blk.F2.rows(); ++i) c.q2.push_back(md.add_var(0.0, kInf));
    const int cols = static_cast<int>(blk.F1.cols());
    for (int j = 0; j < cols; ++j) {
        std::vector<Term> t;
        for (Eigen::SparseMatrix<double>::InnerIterator it(blk.F1, j); it; ++it)
            t.push_back({c.q1[it.row()], it.value()});
        for (Eigen::SparseMatrix<double>::InnerIterator it(blk.F2, j); it; ++it)
            t.push_back({c.q2[it.row()], it.value()});
        if (!t.empty()) md.add_row(t, 0.0, 0.0);
    }
    return c;
}

// s1^T q1 + (s2 + shift)^T q2 as a term list
std::vector<Term> certificate_value(const AttackDenialBlock& blk, const Certificate& c, bool full_coverage_shift) {
    std::vector<Term> t;
    for (int i = 0; i < blk.s1.size(); ++i)
        if (blk.s1(i) != 0.0) t.push_back({c.q1[i], blk.s1(i)});
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(blk.F2.rows());
    if (full_coverage_shift) {
        for (int k = 0; k < blk.F3.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(blk.F3, k); it; ++it) shift(it.row()) += it.value();
    }
    for (int i = 0; i < blk.s2.size(); ++i) {
        double v = blk.s2(i) + shift(i);
        if (v != 0.0) t.push_back({c.q2[i], v});
    }
    return t;
}

bool same_placement(const std::vector<char>& a, const std::vector<char>& b) { return a == b; }

} // namespace

const char* to_string(PlacementStatus s) {
    switch (s) {
    case PlacementStatus::Optimal: return "optimal";
    case PlacementStatus::Feasible: return "feasible";
    case PlacementStatus::Unverified: return "unverified";
    case PlacementStatus::Error: return "error";
    }
    return "?";
}

bool ConstraintPool::add_nogood(const std::vector<char>& beta) {
    for (const auto& b : nogood)
        if (same_placement(b, beta)) return false;
    nogood.push_back(beta);
    return true;
}

bool ConstraintPool::add_pair(const PoolPair& pr) {
    if (std::find(pairs.begin(), pairs.end(), pr) != pairs.end()) return false;
    pairs.push_back(pr);
    return true;
}

AttackDenialBlock build_attack_denial(const GridModel& g, const AttackParams& p, const BigMBundle& bm, const LineSet& ap,
                                      const Target& target) {
    if (!p.lp_reducible()) throw PreconditionViolated("attack-denial blocks need relaxed SCED, unbounded xi_c, fixed load");
    if (target.line < 0 || target.line >= g.m() || (target.dir != 1 && target.dir != -1))
        throw std::invalid_argument("bad attack target");
    if (std::find(ap.begin(), ap.end(), target.line) != ap.end())
        throw std::invalid_argument("target line is removed by the physical attack");
    const int n = g.n(), m = g.m(), u0 = g.slack;
    const auto gens = g.gen_buses();
    const auto loads = g.load_buses();
    const Eigen::MatrixXd bt = admittance(g);
    const Eigen::MatrixXd bp = admittance(g, ap);
    DcState s2 = dc_flow(g, g.p0, ap);

    AttackDenialBlock blk;
    blk.ap = ap;
    blk.target = target;
    blk.theta2.assign(s2.theta.data(), s2.theta.data() + n);
    blk.m_theta = bm.m2theta;
    // column offsets
    const int c2 = 0, c3 = n, cp = 2 * n;

    using Trip = Eigen::Triplet<double>;
    std::vector<Trip> f1;
    std::vector<double> s1;
    auto b_row = [&](std::vector<Trip>& out, int r, const Eigen::MatrixXd& b, int u, int off, double s) {
        for (int v = 0; v < n; ++v)
            if (b(u, v) != 0.0) out.push_back({r, off + v, s * b(u, v)});
    };
    int r = 0;
    for (int u : gens) { // true injection at generators is unchanged in phase 2
        b_row(f1, r++, bt, u, c2, 1.0);
        s1.push_back(g.p0[u]);
    }
    for (int u : loads) { // post-attack grid serves the true load
        b_row(f1, r++, bp, u, cp, 1.0);
        s1.push_back(g.p0[u]);
    }
    for (int u : gens) { // generators follow the dispatch computed on fake angles
        b_row(f1, r, bp, u, cp, 1.0);
        b_row(f1, r++, bt, u, c3, -1.0);
        s1.push_back(0.0);
    }
    for (int u : loads) { // loads seen by SCED equal the falsified loads
        b_row(f1, r, bt, u, c3, 1.0);
        b_row(f1, r++, bt, u, c2, -1.0);
        s1.push_back(0.0);
    }
    for (int off : {c2, c3, cp}) {
        f1.push_back({r++, off + u0, 1.0});
        s1.push_back(0.0);
    }
    blk.F1.resize(r, 3 * n);
    blk.F1.setFromTriplets(f1.begin(), f1.end());
    blk.s1 = Eigen::Map<Eigen::VectorXd>(s1.data(), r);

    std::vector<Trip> f2, f3;
    std::vector<double> rhs;
    r = 0;
    for (int u : loads) {
        b_row(f2, r++, bt, u, c2, 1.0);
        rhs.push_back(g.p0[u] + p.alpha * std::abs(g.p0[u]));
    }
    for (int u : loads) {
        b_row(f2, r++, bt, u, c2, -1.0);
        rhs.push_back(-g.p0[u] + p.alpha * std::abs(g.p0[u]));
    }
    const double M = bm.m2theta;
    blk.pin_pos_row = r;
    for (int u = 0; u < n; ++u) {
        f2.push_back({r, c2 + u, 1.0});
        f3.push_back({r++, u, -M});
        rhs.push_back(blk.theta2[u] + M);
    }
    blk.pin_neg_row = r;
    for (int u = 0; u < n; ++u) {
        f2.push_back({r, c2 + u, -1.0});
        f3.push_back({r++, u, -M});
        rhs.push_back(-blk.theta2[u] + M);
    }
    {
        const auto& l = g.lines[target.line];
        double y = target.dir / l.r;
        f2.push_back({r, cp + l.from, -y});
        f2.push_back({r++, cp + l.to, y});
        rhs.push_back(-(l.gamma + kStrict) * l.fmax);
    }
    auto flow_rows = [&](int off) {
        for (double s : {1.0, -1.0}) {
            for (int e = 0; e < m; ++e) {
                const auto& l = g.lines[e];
                f2.push_back({r, off + l.from, s / l.r});
                f2.push_back({r++, off + l.to, -s / l.r});
                rhs.push_back(l.fmax);
            }
        }
    };
    flow_rows(c3);
    for (int u : gens) {
        b_row(f2, r++, bt, u, c3, 1.0);
        rhs.push_back(g.pg_max[u]);
    }
    for (int u : gens) {
        b_row(f2, r++, bt, u, c3, -1.0);
        rhs.push_back(-g.pg_min[u]);
    }
    flow_rows(c2);
    blk.F2.resize(r, 3 * n);
    blk.F2.setFromTriplets(f2.begin(), f2.end());
    blk.F3.resize(r, n);
    blk.F3.setFromTriplets(f3.begin(), f3.end());
    blk.s2 = Eigen::Map<Eigen::VectorXd>(rhs.data(), r);
    return blk;
}

bool block_feasible(const AttackDenialBlock& blk, const std::vector<char>& xN) {
    const int cols = static_cast<int>(blk.F1.cols());
    if (static_cast<int>(xN.size()) != blk.F3.cols()) throw std::invalid_argument("xN size mismatch");
    Model md;
    for (int j = 0; j < cols; ++j) md.add_var(-kInf, kInf);
    Eigen::SparseMatrix<double, Eigen::RowMajor> a1 = blk.F1, a2 = blk.F2;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(blk.F3.cols());
    for (std::size_t u = 0; u < xN.size(); ++u) x(u) = xN[u] ? 1.0 : 0.0;
    Eigen::VectorXd hi = blk.s2 + blk.F3 * x;
    for (int i = 0; i < a1.rows(); ++i) {
        std::vector<Term> t;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a1, i); it; ++it)
            t.push_back({static_cast<int>(it.col()), it.value()});
        md.add_row(t, blk.s1(i), blk.s1(i));
    }
    for (int i = 0; i < a2.rows(); ++i) {
        std::vector<Term> t;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a2, i); it; ++it)
            t.push_back({static_cast<int>(it.col()), it.value()});
        md.add_row(t, -kInf, hi(i));
    }
    auto r = solver::solve(md);
    if (r.status == solver::Status::Optimal) return true;
    if (r.status == solver::Status::Infeasible) return false;
    throw std::runtime_error(std::string("block LP failed: ") + solver::to_string(r.status));
}

PlacementContext::PlacementContext(const GridModel& g, const AttackParams& p, const BigMBundle& bm)
    : g_(g), p_(p), bm_(bm) {
    validate(p_);
    if (p_.load_range.empty()) screen_.emplace(g_, p_, bm_);
}

AttackResult PlacementContext::attack(const Placement& pl, double time_limit, bool first_attack) const {
    AttackerOptions o;
    o.time_limit = time_limit;
    o.first_attack = first_attack;
    o.screen = screen();
    return solve_attacker(g_, p_, pl, bm_, o);
}

bool PlacementContext::pair_attacks(const Placement& pl, const PoolPair& pr) const {
    auto key = std::make_pair(pl.beta, pr);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    bool res = false;
    if (p_.lp_reducible()) {
        res = check_attack_pair(g_, p_, pl, bm_, pr.ap, pr.target.line, pr.target.dir).feasible;
    } else {
        bool covered = false;
        for (int e : pr.ap)
            if (pl.xL[e]) covered = true;
        if (!covered) {
            BuildOptions bo;
            bo.fixed_ap = pr.ap;
            bo.target = pr.target;
            auto am = build_attacker_model(g_, p_, pl, bm_, bo);
            solver::Options so;
            so.first_solution = true;
            res = solver::solve(am.model, so).has_values();
        }
    }
    memo_.emplace(std::move(key), res);
    return res;
}

const AttackDenialBlock& PlacementContext::block(const PoolPair& pr) {
    auto it = blocks_.find(pr);
    if (it == blocks_.end()) it = blocks_.emplace(pr, build_attack_denial(g_, p_, bm_, pr.ap, pr.target)).first;
    return it->second;
}

bool PlacementContext::survives_full_coverage(const PoolPair& pr) {
    auto it = survives_.find(pr);
    if (it != survives_.end()) return it->second;
    std::vector<char> ones(g_.n(), 1);
    bool s = block_feasible(block(pr), ones);
    survives_.emplace(pr, s);
    return s;
}

namespace {

PlacementResult finish(PlacementResult res, const GridModel& g, const std::vector<int>& buses, const Clock& clk) {
    res.placement = make_placement(g, buses);
    res.bus_ids = ids_of(g, buses);
    res.wall_s = clk.elapsed();
    return res;
}

void trace(PlacementResult& res, const GridModel& g, int it, const std::vector<int>& buses, const std::string& event,
           const std::string& status, const Clock& clk, std::optional<PoolPair> pr = std::nullopt) {
    TraceEntry t;
    t.iteration = it;
    t.placement = ids_of(g, buses);
    t.event = event;
    t.pair = std::move(pr);
    t.status = status;
    t.wall_s = clk.elapsed();
    res.trace.push_back(std::move(t));
}

// Base master over beta: cardinality plus a tiny lexicographic tie-break.
struct Master {
    Model md;
    std::vector<int> beta;
};

Master base_master(const GridModel& g, const std::vector<char>& allowed) {
    Master ms;
    const int n = g.n();
    const double eps = 1.0 / (static_cast<double>(n) * (n + 1) + 1.0);
    for (int u = 0; u < n; ++u) {
        int v = ms.md.add_binary(1.0 + eps * (u + 1));
        if (!allowed[u]) ms.md.set_bounds(v, 0, 0);
        ms.beta.push_back(v);
    }
    return ms;
}

void add_nogood_rows(Master& ms, const std::vector<std::vector<char>>& nogood) {
    for (const auto& ng : nogood) {
        std::vector<Term> t;
        for (std::size_t u = 0; u < ng.size(); ++u)
            if (!ng[u]) t.push_back({ms.beta[u], 1.0});
        ms.md.add_row(t, 1.0, kInf);
    }
}

std::vector<int> read_beta(const Master& ms, const std::vector<double>& x) {
    std::vector<int> b;
    for (std::size_t u = 0; u < ms.beta.size(); ++u)
        if (x[ms.beta[u]] > 0.5) b.push_back(static_cast<int>(u));
    return b;
}

} // namespace

PlacementResult aong(PlacementContext& ctx, const EngineOptions& opt) {
    const GridModel& g = ctx.grid();
    const AttackParams& p = ctx.params();
    PlacementResult res;
    Clock clk;
    clk.budget = opt.budget_s;
    const auto allowed = allowed_mask(g, p);
    std::vector<int> cur; // first master solution is the empty placement
    bool all_optimal = true;
    for (int it = 1;; ++it) {
        res.iterations = it;
        if (it > 1) {
            Master ms = base_master(g, allowed);
            add_nogood_rows(ms, res.pool.nogood);
            solver::Options so;
            so.time_limit = std::max(0.01, clk.left());
            so.seed = opt.seed;
            auto r = solver::solve(ms.md, so);
            if (r.status == solver::Status::Infeasible) {
                res.status = PlacementStatus::Error;
                res.message = "no placement defends every attack";
                return finish(res, g, cur, clk);
            }
            if (!r.has_values()) {
                res.status = r.status == solver::Status::TimeoutNoIncumbent ? PlacementStatus::Unverified
                                                                              : PlacementStatus::Error;
                res.message = std::string("master: ") + solver::to_string(r.status);
                return finish(res, g, cur, clk);
            }
            if (r.status != solver::Status::Optimal) all_optimal = false;
            cur = read_beta(ms, r.x);
        }
        Placement pl = make_placement(g, cur);
        auto ar = ctx.attack(pl, std::max(0.01, clk.left()), true);
        ++res.attacker_calls;
        if (ar.verdict == Verdict::NoAttack) {
            trace(res, g, it, cur, "verified", "no-attack", clk);
            res.status = all_optimal ? PlacementStatus::Optimal : PlacementStatus::Feasible;
            return finish(res, g, cur, clk);
        }
        if (ar.verdict != Verdict::Attack) {
            trace(res, g, it, cur, "attacker", to_string(ar.verdict), clk);
            res.status = ar.verdict == Verdict::Timeout ? PlacementStatus::Unverified : PlacementStatus::Error;
            res.message = "attacker: " + std::string(to_string(ar.verdict)) + " " + ar.message;
            return finish(res, g, cur, clk);
        }
        const auto& w = *ar.outcome;
        trace(res, g, it, cur, "attack", "attack", clk, PoolPair{w.ap, w.targets.front()});
        MaximalInfeasibleOptions mo;
        mo.seed = opt.seed;
        mo.time_limit = std::max(0.0, std::min(opt.nogood_cap_s, clk.left() / 4));
        Placement big = maximal_infeasible(g, p, pl, ctx.bigm(), w, mo);
        long long excluded = 1LL << std::min(40, big.count() - static_cast<int>(cur.size()));
        if (res.pool.add_nogood(big.beta)) res.pool.diagnostics["nogood_excluded_subsets"] += excluded;
        res.pool.diagnostics["nogood_cuts"] = static_cast<long long>(res.pool.nogood.size());
        trace(res, g, it, big.buses(), "nogood", "cut", clk);
        if (clk.expired()) {
            res.status = PlacementStatus::Unverified;
            res.message = "budget exhausted";
            return finish(res, g, cur, clk);
        }
    }
}

PlacementResult aodc(PlacementContext& ctx, const EngineOptions& opt) {
    const GridModel& g = ctx.grid();
    const AttackParams& p = ctx.params();
    if (!p.lp_reducible()) throw PreconditionViolated("aodc needs relaxed SCED, unbounded xi_c, fixed load");
    PlacementResult res;
    Clock clk;
    clk.budget = opt.budget_s;
    const int n = g.n(), m = g.m();
    const auto allowed = allowed_mask(g, p);
    const auto nb = closed_neighborhoods(g);
    std::vector<int> cur;
    bool all_optimal = true;
    auto add_pairs = [&](const AttackOutcome& o) {
        for (const auto& pr : pairs_of(o)) {
            if (!res.pool.add_pair(pr)) continue;
            // with every bus pinned a deniable pair must admit a bounded certificate
            while (!ctx.survives_full_coverage(pr) && res.bigm_escalations < kMaxEscalations) {
                const auto& blk = ctx.block(pr);
                Model md;
                auto c = add_certificate(md, blk);
                md.add_row(certificate_value(blk, c, true), -kInf, -1.0);
                const double L = ctx.bigm().mf_lower;
                for (int u = 0; u < n; ++u)
                    md.add_row({{c.q2[blk.pin_pos_row + u], blk.m_theta}, {c.q2[blk.pin_neg_row + u], blk.m_theta}},
                               -kInf, -L);
                if (solver::solve(md).status == solver::Status::Optimal) break;
                escalate(ctx.bigm());
                ++res.bigm_escalations;
            }
        }
    };
    // Bounded certificates can cut off a placement that does block every
    // pooled pair. Look for a cheaper such placement with exact pair LPs; any
    // hit means the McCormick bounds were too tight.
    enum class Audit { Confirmed, CutTooTight, Incomplete };
    auto audit_pool = [&](std::size_t k) {
        if (k == 0) return Audit::Confirmed;
        for (;;) {
            if (clk.expired()) return Audit::Incomplete;
            Master ms = base_master(g, allowed);
            add_nogood_rows(ms, res.pool.nogood);
            std::vector<Term> card;
            for (int v : ms.beta) card.push_back({v, 1.0});
            ms.md.add_row(card, -kInf, static_cast<double>(k) - 1.0);
            solver::Options so;
            so.time_limit = std::max(0.01, clk.left());
            so.seed = opt.seed;
            so.first_solution = true;
            auto r = solver::solve(ms.md, so);
            if (r.status == solver::Status::Infeasible) return Audit::Confirmed;
            if (!r.has_values()) return Audit::Incomplete;
            auto cand = read_beta(ms, r.x);
            const PoolPair* hit = nullptr;
            for (const auto& pr : res.pool.pairs)
                if (ctx.pair_attacks(make_placement(g, cand), pr)) {
                    hit = &pr;
                    break;
                }
            ++res.pool.diagnostics["audit_checks"];
            if (!hit) return res.bigm_escalations < kMaxEscalations ? Audit::CutTooTight : Audit::Incomplete;
            // grow while the same pair still gets through, then exclude all subsets
            std::vector<char> in(n, 0);
            for (int u : cand) in[u] = 1;
            for (int u = 0; u < n; ++u) {
                if (in[u] || !allowed[u]) continue;
                auto trial = cand;
                trial.push_back(u);
                std::sort(trial.begin(), trial.end());
                if (ctx.pair_attacks(make_placement(g, trial), *hit)) {
                    cand = trial;
                    in[u] = 1;
                }
            }
            res.pool.add_nogood(in);
            res.pool.diagnostics["nogood_cuts"] = static_cast<long long>(res.pool.nogood.size());
        }
    };
    for (int it = 1;; ++it) {
        res.iterations = it;
        std::vector<int> wvar;
        std::vector<std::vector<int>> yvar;
        std::vector<std::vector<std::pair<int, int>>> zvar; // pin dual pair per bus
        std::vector<int> xNv;
        if (it > 1) {
            Master ms = base_master(g, allowed);
            add_nogood_rows(ms, res.pool.nogood);
            auto& md = ms.md;
            for (int u = 0; u < n; ++u) xNv.push_back(md.add_binary());
            std::vector<int> xLv;
            for (int e = 0; e < m; ++e) xLv.push_back(md.add_binary());
            for (int u = 0; u < n; ++u) {
                std::vector<Term> sum{{xNv[u], -1.0}};
                for (int v : nb[u]) {
                    md.add_row({{xNv[u], 1.0}, {ms.beta[v], -1.0}}, 0.0, kInf);
                    sum.push_back({ms.beta[v], 1.0});
                }
                md.add_row(sum, 0.0, kInf);
            }
            for (int e = 0; e < m; ++e) {
                const auto& l = g.lines[e];
                md.add_row({{xLv[e], 1.0}, {ms.beta[l.from], -1.0}}, 0.0, kInf);
                md.add_row({{xLv[e], 1.0}, {ms.beta[l.to], -1.0}}, 0.0, kInf);
                md.add_row({{xLv[e], -1.0}, {ms.beta[l.from], 1.0}, {ms.beta[l.to], 1.0}}, 0.0, kInf);
            }
            const double L = ctx.bigm().mf_lower;
            for (const auto& pr : res.pool.pairs) {
                const auto& blk = ctx.block(pr);
                auto c = add_certificate(md, blk);
                int w = md.add_binary();
                wvar.push_back(w);
                auto val = certificate_value(blk, c, false);
                std::vector<int> ys;
                std::vector<std::pair<int, int>> zs;
                for (int u = 0; u < n; ++u) {
                    int y = md.add_var(std::min(L, 0.0), 0.0);
                    ys.push_back(y);
                    int a = c.q2[blk.pin_pos_row + u], b = c.q2[blk.pin_neg_row + u];
                    zs.push_back({a, b});
                    const double Mt = blk.m_theta;
                    // z = -Mt (a + b) in [L, 0]
                    md.add_row({{a, -Mt}, {b, -Mt}}, L, 0.0);
                    md.add_row({{y, 1.0}, {xNv[u], -L}}, 0.0, kInf);               // y >= L x
                    md.add_row({{y, 1.0}, {a, Mt}, {b, Mt}}, 0.0, kInf);            // y >= z
                    md.add_row({{y, 1.0}, {a, Mt}, {b, Mt}, {xNv[u], -L}}, -kInf, -L); // y <= z - L(1-x)
                    val.push_back({y, 1.0});
                }
                val.push_back({w, -1.0});
                md.add_row(val, -kInf, -1.0);
                std::vector<Term> cov{{w, -1.0}};
                for (int e : pr.ap) cov.push_back({xLv[e], 1.0});
                md.add_row(cov, 0.0, kInf);
                yvar.push_back(std::move(ys));
                zvar.push_back(std::move(zs));
            }
            solver::Options so;
            so.time_limit = std::max(0.01, clk.left());
            so.seed = opt.seed;
            auto r = solver::solve(md, so);
            if (r.status == solver::Status::Infeasible && res.bigm_escalations < kMaxEscalations) {
                escalate(ctx.bigm());
                ++res.bigm_escalations;
                trace(res, g, it, cur, "escalate", "bigm", clk);
                continue;
            }
            if (r.status == solver::Status::Infeasible) {
                res.status = PlacementStatus::Error;
                res.message = "master infeasible after big-M escalation";
                return finish(res, g, cur, clk);
            }
            if (!r.has_values()) {
                res.status = r.status == solver::Status::TimeoutNoIncumbent ? PlacementStatus::Unverified
                                                                              : PlacementStatus::Error;
                res.message = std::string("master: ") + solver::to_string(r.status);
                return finish(res, g, cur, clk);
            }
            if (r.status != solver::Status::Optimal) all_optimal = false;
            cur = read_beta(ms, r.x);
            Placement mpl = make_placement(g, cur);
            for (std::size_t k = 0; k < res.pool.pairs.size(); ++k) {
                const auto& blk = ctx.block(res.pool.pairs[k]);
                for (int u = 0; u < n; ++u) {
                    auto [a, b] = zvar[k][u];
                    double z = -blk.m_theta * (r.x[a] + r.x[b]);
                    double expect = r.x[xNv[u]] > 0.5 ? z : 0.0;
                    if (std::abs(r.x[yvar[k][u]] - expect) > 1e-6) ++res.pool.diagnostics["mccormick_violations"];
                }
                if (r.x[wvar[k]] > 0.5) continue;
                ++res.gale_checks;
                if (ctx.pair_attacks(mpl, res.pool.pairs[k])) {
                    ++res.gale_violations;
                    trace(res, g, it, cur, "gale-violation", "violation", clk, res.pool.pairs[k]);
                }
            }
        }
        Placement pl = make_placement(g, cur);
        auto ar = ctx.attack(pl, std::max(0.01, clk.left()), true);
        ++res.attacker_calls;
        if (ar.verdict == Verdict::NoAttack) {
            trace(res, g, it, cur, "verified", "no-attack", clk);
            Audit a = audit_pool(cur.size());
            if (a == Audit::CutTooTight) {
                escalate(ctx.bigm());
                ++res.bigm_escalations;
                trace(res, g, it, cur, "escalate", "bigm", clk);
                continue;
            }
            if (a == Audit::Incomplete) all_optimal = false;
            res.status = all_optimal && res.gale_violations == 0 ? PlacementStatus::Optimal : PlacementStatus::Feasible;
            return finish(res, g, cur, clk);
        }
        if (ar.verdict != Verdict::Attack) {
            trace(res, g, it, cur, "attacker", to_string(ar.verdict), clk);
            res.status = ar.verdict == Verdict::Timeout ? PlacementStatus::Unverified : PlacementStatus::Error;
            res.message = "attacker: " + std::string(to_string(ar.verdict)) + " " + ar.message;
            return finish(res, g, cur, clk);
        }
        trace(res, g, it, cur, "attack", "attack", clk, PoolPair{ar.outcome->ap, ar.outcome->targets.front()});
        add_pairs(*ar.outcome);
        res.pool.add_nogood(pl.beta);
        res.pool.diagnostics["pairs"] = static_cast<long long>(res.pool.pairs.size());
        if (clk.expired()) {
            res.status = PlacementStatus::Unverified;
            res.message = "budget exhausted";
            return finish(res, g, cur, clk);
        }
    }
}

LpRelaxResult lp_relax_master(PlacementContext& ctx, const std::vector<PoolPair>& pairs,
                              const std::vector<std::vector<char>>& nogood, const std::vector<int>& pins) {
    const GridModel& g = ctx.grid();
    if (!ctx.params().lp_reducible()) throw PreconditionViolated("LP relaxation needs relaxed SCED, unbounded xi_c");
    const int n = g.n();
    const auto allowed = allowed_mask(g, ctx.params());
    const auto nb = closed_neighborhoods(g);
    LpRelaxResult out;
    for (;;) {
        Model md;
        std::vector<int> beta;
        for (int u = 0; u < n; ++u) beta.push_back(md.add_var(0.0, allowed[u] ? 1.0 : 0.0, VarKind::Continuous, 1.0));
        for (int u : pins) md.set_bounds(beta.at(u), 1.0, 1.0);
        for (const auto& ng : nogood) {
            std::vector<Term> t;
            for (int u = 0; u < n; ++u)
                if (!ng[u]) t.push_back({beta[u], 1.0});
            md.add_row(t, 1.0, kInf);
        }
        const double mq = ctx.bigm().mq;
        for (const auto& pr : pairs) {
            if (ctx.survives_full_coverage(pr)) {
                // only covering a removed line can stop this pair
                std::vector<Term> t;
                for (int e : pr.ap) {
                    t.push_back({beta[g.lines[e].from], 1.0});
                    t.push_back({beta[g.lines[e].to], 1.0});
                }
                md.add_row(t, 1.0, kInf);
                continue;
            }
            const auto& blk = ctx.block(pr);
            auto c = add_certificate(md, blk);
            md.add_row(certificate_value(blk, c, true), -kInf, -1.0);
            for (int u = 0; u < n; ++u) {
                std::vector<Term> t{{c.q2[blk.pin_pos_row + u], 1.0}, {c.q2[blk.pin_neg_row + u], 1.0}};
                for (int v : nb[u]) t.push_back({beta[v], -mq});
                md.add_row(t, -kInf, 0.0);
            }
        }
        auto r = solver::solve(md);
        if (r.status == solver::Status::Optimal) {
            out.feasible = true;
            for (int u = 0; u < n; ++u) out.beta.push_back(std::clamp(r.x[beta[u]], 0.0, 1.0));
            return out;
        }
        if (r.status != solver::Status::Infeasible || out.escalations >= kMaxEscalations) return out;
        escalate(ctx.bigm());
        ++out.escalations;
    }
}

namespace {

// top k entries of score among buses not in excl, ties by index
std::vector<int> top_k(const std::vector<double>& score, const std::vector<char>& excl, int k, double min_score) {
    std::vector<int> idx;
    for (std::size_t u = 0; u < score.size(); ++u)
        if (!excl[u] && score[u] > min_score) idx.push_back(static_cast<int>(u));
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return score[a] > score[b]; });
    if (static_cast<int>(idx.size()) > k) idx.resize(k);
    return idx;
}

std::vector<int> sorted_union(std::vector<int> s, int u) {
    if (std::find(s.begin(), s.end(), u) == s.end()) s.push_back(u);
    std::sort(s.begin(), s.end());
    return s;
}

} // namespace

std::vector<std::vector<int>> update_candidate(PlacementContext& ctx, std::vector<std::vector<int>> candidates,
                                               const std::vector<PoolPair>& attacks,
                                               std::vector<std::vector<char>>& nogood, const EngineOptions& opt,
                                               int* lp_calls) {
    const GridModel& g = ctx.grid();
    const int n = g.n();
    const auto allowed = allowed_mask(g, ctx.params());
    for (auto& c : candidates) std::sort(c.begin(), c.end());
    auto open_pairs = [&](const std::vector<int>& cand) {
        std::vector<int> out;
        Placement pl = make_placement(g, cand);
        for (std::size_t k = 0; k < attacks.size(); ++k)
            if (ctx.pair_attacks(pl, attacks[k])) out.push_back(static_cast<int>(k));
        return out;
    };
    std::vector<std::vector<int>> open;
    for (const auto& c : candidates) open.push_back(open_pairs(c));
    for (int round = 0; round < n; ++round) {
        bool any = false;
        for (const auto& a : open) any = any || !a.empty();
        if (!any) break;
        std::vector<std::vector<int>> q;
        auto push = [&](std::vector<int> c) {
            if (std::find(q.begin(), q.end(), c) == q.end()) q.push_back(std::move(c));
        };
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const auto& om = candidates[i];
            if (open[i].empty()) {
                push(om);
                continue;
            }
            auto b = beta_of(n, om);
            if (std::find(nogood.begin(), nogood.end(), b) == nogood.end()) nogood.push_back(b);
            std::vector<char> excl(n, 0);
            for (int u = 0; u < n; ++u) excl[u] = b[u] || !allowed[u];
            // coverage greedy: buses whose PMU covers a removed line of the most open pairs
            std::vector<double> hits(n, 0.0);
            for (int k : open[i]) {
                std::set<int> ends;
                for (int e : attacks[k].ap) {
                    ends.insert(g.lines[e].from);
                    ends.insert(g.lines[e].to);
                }
                for (int v : ends) hits[v] += 1.0;
            }
            for (int v : top_k(hits, excl, opt.kl, 0.0)) push(sorted_union(om, v));
            auto lp = lp_relax_master(ctx, attacks, nogood, om);
            if (lp_calls) ++*lp_calls;
            if (lp.feasible) {
                for (int v : top_k(lp.beta, excl, opt.ka, -1.0)) push(sorted_union(om, v));
            }
        }
        std::vector<int> score;
        for (const auto& c : q) {
            Placement pl = make_placement(g, c);
            int s = 0;
            for (const auto& pr : attacks)
                if (!ctx.pair_attacks(pl, pr)) ++s;
            score.push_back(s);
        }
        std::vector<int> order(q.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (score[a] != score[b]) return score[a] > score[b];
            if (q[a].size() != q[b].size()) return q[a].size() < q[b].size();
            return q[a] < q[b];
        });
        std::vector<std::vector<int>> next;
        for (int k : order) {
            if (static_cast<int>(next.size()) >= opt.kc) break;
            next.push_back(q[k]);
        }
        candidates = std::move(next);
        open.clear();
        for (const auto& c : candidates) open.push_back(open_pairs(c));
    }
    return candidates;
}

PlacementResult heuristic_place(PlacementContext& ctx, const EngineOptions& opt) {
    const GridModel& g = ctx.grid();
    const AttackParams& p = ctx.params();
    if (!p.lp_reducible()) throw PreconditionViolated("heuristic needs relaxed SCED, unbounded xi_c, fixed load");
    PlacementResult res;
    Clock clk;
    clk.budget = opt.budget_s;
    const int n = g.n();
    std::vector<int> pins = opt.pins;
    std::sort(pins.begin(), pins.end());
    pins.erase(std::unique(pins.begin(), pins.end()), pins.end());
    std::vector<PoolPair> a0;
    std::vector<std::vector<char>> nogood;
    std::vector<double> frac(n, 0.0);
    std::vector<int> cur = pins;
    std::optional<std::vector<int>> incumbent;
    int it = 0;
    auto out_of_time = [&](const std::vector<int>& last) {
        res.status = incumbent ? PlacementStatus::Feasible : PlacementStatus::Unverified;
        res.message = "budget exhausted";
        return finish(res, g, incumbent ? *incumbent : last, clk);
    };
    // phase 1
    for (;;) {
        res.iterations = ++it;
        auto ar = ctx.attack(make_placement(g, cur), std::max(0.01, clk.left()), true);
        ++res.attacker_calls;
        if (ar.verdict == Verdict::NoAttack) {
            incumbent = cur;
            trace(res, g, it, cur, "phase1-verified", "no-attack", clk);
            break;
        }
        if (ar.verdict == Verdict::Timeout) return out_of_time(cur);
        if (ar.verdict != Verdict::Attack) {
            res.status = PlacementStatus::Error;
            res.message = "attacker: " + ar.message;
            return finish(res, g, cur, clk);
        }
        for (const auto& pr : pairs_of(*ar.outcome)) {
            if (std::find(a0.begin(), a0.end(), pr) == a0.end()) a0.push_back(pr);
            res.pool.add_pair(pr);
        }
        trace(res, g, it, cur, "phase1-attack", "attack", clk, PoolPair{ar.outcome->ap, ar.outcome->targets.front()});
        auto b = beta_of(n, cur);
        if (std::find(nogood.begin(), nogood.end(), b) == nogood.end()) nogood.push_back(b);
        auto lp = lp_relax_master(ctx, a0, nogood, pins);
        ++res.lp_calls;
        res.bigm_escalations += lp.escalations;
        if (!lp.feasible) {
            res.status = PlacementStatus::Error;
            res.message = "LP relaxation infeasible after big-M escalation";
            return finish(res, g, cur, clk);
        }
        frac = lp.beta;
        std::vector<int> next;
        for (int u = 0; u < n; ++u)
            if (frac[u] > 1e-9) next.push_back(u);
        if (next == cur) {
            res.status = PlacementStatus::Error;
            res.message = "phase-1 rounding did not progress";
            return finish(res, g, cur, clk);
        }
        cur = next;
        if (clk.expired()) return out_of_time(cur);
    }
    // phase 2
    std::vector<char> excl(n, 0);
    for (int u : pins) excl[u] = 1;
    std::vector<std::vector<int>> cands;
    for (int u : top_k(frac, excl, opt.kc, -1.0)) cands.push_back(sorted_union(pins, u));
    if (cands.empty()) cands.push_back(pins);
    cands = update_candidate(ctx, cands, a0, nogood, opt, &res.lp_calls);
    trace(res, g, it, cands.front(), "phase2-candidates", std::to_string(cands.size()), clk);
    // phase 3
    for (;;) {
        res.iterations = ++it;
        std::vector<PoolPair> fresh;
        std::optional<std::vector<int>> best_ok;
        std::size_t min_bad = SIZE_MAX;
        for (const auto& c : cands) {
            if (clk.expired()) return out_of_time(c);
            auto ar = ctx.attack(make_placement(g, c), std::max(0.01, clk.left()), true);
            ++res.attacker_calls;
            if (ar.verdict == Verdict::NoAttack) {
                if (!best_ok || c.size() < best_ok->size() || (c.size() == best_ok->size() && c < *best_ok)) best_ok = c;
            } else if (ar.verdict == Verdict::Attack) {
                min_bad = std::min(min_bad, c.size());
                for (const auto& pr : pairs_of(*ar.outcome)) {
                    if (std::find(fresh.begin(), fresh.end(), pr) == fresh.end()) fresh.push_back(pr);
                    res.pool.add_pair(pr);
                }
            } else if (ar.verdict == Verdict::Timeout) {
                return out_of_time(c);
            } else {
                res.status = PlacementStatus::Error;
                res.message = "attacker: " + ar.message;
                return finish(res, g, c, clk);
            }
        }
        if (best_ok) {
            if (!incumbent || best_ok->size() < incumbent->size()) incumbent = best_ok;
            if (fresh.empty() || best_ok->size() <= 1 + min_bad) {
                trace(res, g, it, *best_ok, "phase3-return", "no-attack", clk);
                res.status = PlacementStatus::Feasible;
                res.pool.nogood = nogood;
                return finish(res, g, *best_ok, clk);
            }
        }
        if (fresh.empty()) {
            res.status = PlacementStatus::Error;
            res.message = "no candidates left";
            return finish(res, g, incumbent ? *incumbent : cur, clk);
        }
        trace(res, g, it, cands.front(), "phase3-update", std::to_string(fresh.size()) + " pairs", clk);
        cands = update_candidate(ctx, cands, fresh, nogood, opt, &res.lp_calls);
    }
}

PlacementResult full_observability(const GridModel& g, const std::vector<int>& pins, const EngineOptions& opt) {
    PlacementResult res;
    Clock clk;
    clk.budget = opt.budget_s;
    const int n = g.n();
    const auto nb = closed_neighborhoods(g);
    Master ms = base_master(g, std::vector<char>(n, 1));
    for (int u : pins) ms.md.set_bounds(ms.beta.at(u), 1.0, 1.0);
    for (int u = 0; u < n; ++u) {
        std::vector<Term> t;
        for (int v : nb[u]) t.push_back({ms.beta[v], 1.0});
        ms.md.add_row(t, 1.0, kInf);
    }
    solver::Options so;
    so.time_limit = std::max(0.01, clk.left());
    so.seed = opt.seed;
    auto r = solver::solve(ms.md, so);
    res.iterations = 1;
    if (!r.has_values()) {
        res.status = r.status == solver::Status::TimeoutNoIncumbent ? PlacementStatus::Unverified : PlacementStatus::Error;
        res.message = solver::to_string(r.status);
        return finish(res, g, pins, clk);
    }
    res.status = r.status == solver::Status::Optimal ? PlacementStatus::Optimal : PlacementStatus::Feasible;
    return finish(res, g, read_beta(ms, r.x), clk);
}

PlacementResult greedy_degree(PlacementContext& ctx, const EngineOptions& opt) {
    const GridModel& g = ctx.grid();
    PlacementResult res;
    Clock clk;
    clk.budget = opt.budget_s;
    const auto allowed = allowed_mask(g, ctx.params());
    const auto deg = g.degree();
    std::vector<int> order;
    for (int u = 0; u < g.n(); ++u)
        if (allowed[u]) order.push_back(u);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (deg[a] != deg[b]) return deg[a] > deg[b];
        return g.bus_ids[a] < g.bus_ids[b];
    });
    std::vector<int> cur;
    for (std::size_t k = 0; k <= order.size(); ++k) {
        if (k > 0) cur.push_back(order[k - 1]);
        res.iterations = static_cast<int>(k) + 1;
        auto ar = ctx.attack(make_placement(g, cur), std::max(0.01, clk.left()), true);
        ++res.attacker_calls;
        if (ar.verdict == Verdict::NoAttack) {
            trace(res, g, res.iterations, cur, "verified", "no-attack", clk);
            res.status = PlacementStatus::Feasible;
            std::vector<int> sorted = cur;
            std::sort(sorted.begin(), sorted.end());
            return finish(res, g, sorted, clk);
        }
        if (ar.verdict != Verdict::Attack) {
            res.status = ar.verdict == Verdict::Timeout ? PlacementStatus::Unverified : PlacementStatus::Error;
            res.message = "attacker: " + std::string(to_string(ar.verdict));
            return finish(res, g, cur, clk);
        }
        if (clk.expired()) {
            res.status = PlacementStatus::Unverified;
            res.message = "budget exhausted";
            return finish(res, g, cur, clk);
        }
    }
    res.status = PlacementStatus::Error;
    res.message = "no placement defends every attack";
    return finish(res, g, cur, clk);
}

std::optional<std::vector<int>> brute_force_optimum(const GridModel& g, const AttackParams& p, const BigMBundle& bm) {
    const int n = g.n();
    if (n > 20) throw std::invalid_argument("brute force is limited to 20 buses");
    const auto allowed = allowed_mask(g, p);
    std::vector<std::pair<LineSet, int>> all_pairs;
    enumerate_attack_pairs(g, p, empty_placement(g), [&](const LineSet& ap, int line) {
        all_pairs.push_back({ap, line});
        return true;
    });
    auto defended = [&](const Placement& pl) {
        for (const auto& [ap, line] : all_pairs) {
            bool covered = false;
            for (int e : ap)
                if (pl.xL[e]) covered = true;
            if (covered) continue;
            if (check_attack_pair(g, p, pl, bm, ap, line, 0).feasible) return false;
        }
        return true;
    };
    for (int k = 0; k <= n; ++k) {
        // prev_permutation walks the size-k subsets in lexicographic order of indices
        std::vector<char> sel(n, 0);
        std::fill(sel.begin(), sel.begin() + k, 1);
        do {
            std::vector<int> s;
            bool ok = true;
            for (int u = 0; u < n; ++u)
                if (sel[u]) {
                    s.push_back(u);
                    if (!allowed[u]) ok = false;
                }
            if (ok && defended(make_placement(g, s))) return s;
        } while (std::prev_permutation(sel.begin(), sel.end()));
    }
    return std::nullopt;
}

} // namespace ppop
