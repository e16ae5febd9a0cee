#pragma once

#include "ppop/bigm.hpp"
#include "ppop/grid.hpp"
#include "ppop/params.hpp"
#include "ppop/solver.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ppop {

struct Placement {
    std::vector<char> beta;
    std::vector<char> xN;
    std::vector<char> xL;

    std::vector<int> buses() const;
    int count() const;
};

/// Builds beta/xN/xL from bus indices (closed-neighborhood node coverage,
/// endpoint line coverage).
Placement make_placement(const GridModel& g, const std::vector<int>& bus_indices);
Placement empty_placement(const GridModel& g);
Placement placement_from_ids(const GridModel& g, const std::vector<int>& bus_ids);

/// A line with a flow direction: dir = +1 means f > gamma*fmax, -1 means f < -gamma*fmax.
struct Target {
    int line = -1;
    int dir = 1;
    bool operator==(const Target&) const = default;
    auto operator<=>(const Target&) const = default;
};

struct AttackOutcome {
    LineSet ap;
    std::vector<Target> targets;
    std::vector<double> theta2, theta2_tilde, f2, f2_tilde, theta3, theta3_tilde, f3;
    int objective = 0;
    int meters_touched = 0;
    std::vector<double> load_profile;
};

enum class Verdict { Attack, NoAttack, Timeout, Error };
const char* to_string(Verdict v);

struct AttackResult {
    Verdict verdict = Verdict::Error;
    std::optional<AttackOutcome> outcome;
    double wall_s = 0.0;
    int solves = 0;
    std::string message;
};

/// Index map of the attacker model's columns; -1 where a block is absent.
struct AttackerVars {
    std::vector<int> tt2, tt3, t2, t3, f2, f3, fc, ap, pp, pn, wf, wp, beta, xN, xL, p0, box;
};

struct AttackerModel {
    solver::Model model;
    AttackerVars v;
};

struct BuildOptions {
    std::optional<Target> target;
    /// Fix the physical attack instead of leaving it to the solver.
    std::optional<LineSet> fixed_ap;
    /// Feasibility probe: require at least one tripped line, constant objective.
    bool require_trip = false;
    /// beta/xN/xL become variables (maximal infeasible placement model).
    bool placement_vars = false;
    MeterLayout meters;
    bool meters_set = false;
};

AttackerModel build_attacker_model(const GridModel& g, const AttackParams& p, const Placement& pl, const BigMBundle& bm,
                                   const BuildOptions& opt = {});

/// Reads a witness back from a solved attacker model and recomputes the
/// tripped set directly from f3.
AttackOutcome extract_outcome(const GridModel& g, const AttackParams& p, const AttackerModel& am,
                              const std::vector<double>& x);

enum class AttackerStrategy { Auto, Monolithic, PerAp };

/// Directional attack pairs that succeed against the empty placement under
/// relaxed SCED and unbounded xi_c. Every mode except load ranges only
/// shrinks this set, and adding PMUs shrinks it further, so it screens the
/// candidates for any later attacker solve on the same grid.
class PairScreen {
public:
    struct Entry {
        LineSet ap;
        Target target;
    };

    PairScreen(const GridModel& g, const AttackParams& p, const BigMBundle& bm);

    const std::vector<Entry>& entries() const { return entries_; }
    /// Entries whose physical attack avoids every PMU-covered line.
    std::vector<Entry> candidates(const Placement& pl) const;
    long long pairs_examined() const { return examined_; }
    double build_s() const { return build_s_; }

private:
    std::vector<Entry> entries_;
    long long examined_ = 0;
    double build_s_ = 0.0;
};

struct AttackerOptions {
    double time_limit = solver::kInf;
    int seed = 0;
    /// Stop at the first successful attack (verification only needs psi >= 1).
    bool first_attack = false;
    AttackerStrategy strategy = AttackerStrategy::Auto;
    /// Optional candidate screen built for the same grid and alpha/xi_p.
    const PairScreen* screen = nullptr;
};

AttackResult solve_attacker(const GridModel& g, const AttackParams& p, const Placement& pl, const BigMBundle& bm,
                            const AttackerOptions& opt = {});

struct PairCheck {
    bool feasible = false;
    Target target;
    std::vector<double> theta2_tilde, theta3_tilde, theta3;
    std::vector<double> theta2;
};

struct PreconditionViolated : std::logic_error {
    using std::logic_error::logic_error;
};

/// Fixed-pair LP feasibility (relaxed SCED, unbounded xi_c only). Tries the
/// given direction, or both when dir == 0.
PairCheck check_attack_pair(const GridModel& g, const AttackParams& p, const Placement& pl, const BigMBundle& bm,
                            const LineSet& ap, int line, int dir = 0);

/// Outcome assembled from a feasible pair check (targets recomputed from f3).
AttackOutcome outcome_from_pair(const GridModel& g, const PairCheck& pc, const LineSet& ap);

/// True when the physical attack keeps every surviving line within its M2a guard.
bool ap_within_guard(const GridModel& g, const BigMBundle& bm, const LineSet& ap, const std::vector<double>& f2);

struct FlowRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Range of each post-attack flow when generator buses may take any net
/// injection within their bounds and loads stay at p0. Relaxes every SCED
/// mode, so a line whose range stays within gamma*fmax cannot be tripped by ap.
std::vector<FlowRange> post_attack_flow_range(const GridModel& g, const LineSet& ap);

/// Lines that could still be tripped by ap under the range relaxation.
std::vector<Target> trippable_targets(const GridModel& g, const LineSet& ap);

/// All physical attacks with |ap| <= xi_p that keep the grid connected and
/// avoid PMU-covered lines (ap = {} included).
std::vector<LineSet> enumerate_physical_attacks(const GridModel& g, const AttackParams& p, const Placement& pl);

/// Streams (ap, target line) pairs; the callback returns false to stop.
void enumerate_attack_pairs(const GridModel& g, const AttackParams& p, const Placement& pl,
                            const std::function<bool(const LineSet&, int)>& fn);

/// Raw pair count |E| * C(|E|, xi_p) as the published totals count them.
long long raw_pair_count(int lines, int xi_p);

/// Cyber vector over the meter layout: [node meters..., line meters...].
std::vector<double> construct_cyber_vector(const GridModel& g, const MeterLayout& meters, const std::vector<double>& theta0,
                                           const std::vector<double>& theta2_tilde, const DcState& state2);
int meters_touched(const std::vector<double>& ac, double tol = 1e-7);

struct MaximalInfeasibleOptions {
    double time_limit = 1200.0;
    int seed = 0;
};

/// Grows an attackable placement to a maximal attackable superset.
Placement maximal_infeasible(const GridModel& g, const AttackParams& p, const Placement& start, const BigMBundle& bm,
                             const AttackOutcome& witness, const MaximalInfeasibleOptions& opt = {});

} // namespace ppop
