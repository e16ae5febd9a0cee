#pragma once

#include "ppop/attack.hpp"

#include <Eigen/SparseCore>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ppop {

/// Matrices of the fixed-pair linear system over y = (tt2, tt3, t3):
///   F1 y = s1,  F2 y <= s2 + F3 xN.
struct AttackDenialBlock {
    Eigen::SparseMatrix<double> F1;
    Eigen::SparseMatrix<double> F2;
    Eigen::SparseMatrix<double> F3;
    Eigen::VectorXd s1;
    Eigen::VectorXd s2;
    LineSet ap;
    Target target;
    std::vector<double> theta2;
    /// Row offsets of the two angle-pin blocks inside F2 (each n rows).
    int pin_pos_row = 0;
    int pin_neg_row = 0;
    double m_theta = 0.0;
};

AttackDenialBlock build_attack_denial(const GridModel& g, const AttackParams& p, const BigMBundle& bm, const LineSet& ap,
                                      const Target& target);

/// Feasibility of the block system for a given node coverage (LP).
bool block_feasible(const AttackDenialBlock& blk, const std::vector<char>& xN);

struct PoolPair {
    LineSet ap;
    Target target;
    bool operator==(const PoolPair&) const = default;
    auto operator<=>(const PoolPair&) const = default;
};

struct ConstraintPool {
    std::vector<std::vector<char>> nogood;
    std::vector<PoolPair> pairs;
    std::map<std::string, long long> diagnostics;

    /// Returns false when the placement is already pooled.
    bool add_nogood(const std::vector<char>& beta);
    bool add_pair(const PoolPair& pr);
};

struct TraceEntry {
    int iteration = 0;
    std::vector<int> placement; // bus ids
    std::string event;
    std::optional<PoolPair> pair;
    std::string status;
    double wall_s = 0.0;
};

enum class PlacementStatus { Optimal, Feasible, Unverified, Error };
const char* to_string(PlacementStatus s);

struct PlacementResult {
    PlacementStatus status = PlacementStatus::Unverified;
    Placement placement;
    std::vector<int> bus_ids;
    int iterations = 0;
    int attacker_calls = 0;
    int lp_calls = 0;
    int bigm_escalations = 0;
    long long gale_checks = 0;
    long long gale_violations = 0;
    double wall_s = 0.0;
    std::string message;
    std::vector<TraceEntry> trace;
    ConstraintPool pool;
};

struct EngineOptions {
    double budget_s = 1800.0;
    int seed = 0;
    /// Cap on each maximal-infeasible augmentation MILP.
    double nogood_cap_s = 1200.0;
    int kc = 10;
    int ka = 10;
    int kl = 10;
    /// Forced placements (pins) for the heuristic and full observability.
    std::vector<int> pins;
};

/// Shared per-run state: grid, parameters, big-M constants and the pair screen.
class PlacementContext {
public:
    PlacementContext(const GridModel& g, const AttackParams& p, const BigMBundle& bm);

    const GridModel& grid() const { return g_; }
    const AttackParams& params() const { return p_; }
    BigMBundle& bigm() { return bm_; }
    const BigMBundle& bigm() const { return bm_; }
    const PairScreen* screen() const { return screen_ ? &*screen_ : nullptr; }

    AttackResult attack(const Placement& pl, double time_limit, bool first_attack = true) const;
    /// Pair feasibility under a placement, memoised.
    bool pair_attacks(const Placement& pl, const PoolPair& pr) const;
    const AttackDenialBlock& block(const PoolPair& pr);
    /// True when node coverage alone (every bus pinned) cannot stop the pair.
    bool survives_full_coverage(const PoolPair& pr);

private:
    const GridModel& g_;
    AttackParams p_;
    BigMBundle bm_;
    std::optional<PairScreen> screen_;
    mutable std::map<std::pair<std::vector<char>, PoolPair>, bool> memo_;
    std::map<PoolPair, AttackDenialBlock> blocks_;
    std::map<PoolPair, bool> survives_;
};

PlacementResult aong(PlacementContext& ctx, const EngineOptions& opt = {});
PlacementResult aodc(PlacementContext& ctx, const EngineOptions& opt = {});

struct LpRelaxResult {
    bool feasible = false;
    std::vector<double> beta;
    int escalations = 0;
};

/// Lemma-2 style LP over pooled pairs and relaxed no-good cuts; pins force beta = 1.
LpRelaxResult lp_relax_master(PlacementContext& ctx, const std::vector<PoolPair>& pairs,
                              const std::vector<std::vector<char>>& nogood, const std::vector<int>& pins);

PlacementResult heuristic_place(PlacementContext& ctx, const EngineOptions& opt = {});

/// One UpdateCandidate round set: extends candidates until each defends every pair in attacks.
std::vector<std::vector<int>> update_candidate(PlacementContext& ctx, std::vector<std::vector<int>> candidates,
                                               const std::vector<PoolPair>& attacks,
                                               std::vector<std::vector<char>>& nogood, const EngineOptions& opt,
                                               int* lp_calls = nullptr);

/// Minimum dominating set containing pins (bus indices).
PlacementResult full_observability(const GridModel& g, const std::vector<int>& pins, const EngineOptions& opt = {});

PlacementResult greedy_degree(PlacementContext& ctx, const EngineOptions& opt = {});

/// Every placement over all 2^n subsets; smallest defending set (small grids only).
std::optional<std::vector<int>> brute_force_optimum(const GridModel& g, const AttackParams& p, const BigMBundle& bm);

} // namespace ppop
