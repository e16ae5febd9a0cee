#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace ppop::solver {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind { Continuous, Binary, Integer };

struct Variable {
    double lb = 0.0;
    double ub = kInf;
    VarKind kind = VarKind::Continuous;
    double obj = 0.0;
    std::string name;
};

/// Ranged row lo <= sum(val[k] * x[idx[k]]) <= hi.
struct Row {
    std::vector<int> idx;
    std::vector<double> val;
    double lo = -kInf;
    double hi = kInf;
    std::string name;
};

struct Options {
    double time_limit = kInf;
    int seed = 0;
    int threads = 1;
    double mip_gap = 0.0;
    bool verbose = false;
    /// Stop a MILP at the first feasible point (feasibility probes).
    bool first_solution = false;
};

using Term = std::pair<int, double>;

class Model {
public:
    int add_var(double lb, double ub, VarKind kind = VarKind::Continuous, double obj = 0.0,
                std::string name = {});
    int add_binary(double obj = 0.0, std::string name = {});
    int add_row(const std::vector<Term>& terms, double lo, double hi, std::string name = {});

    void set_obj(int var, double coef) { vars_[var].obj = coef; }
    void set_bounds(int var, double lb, double ub);
    void set_maximize(bool m) { maximize_ = m; }
    void set_obj_offset(double c) { offset_ = c; }

    bool maximize() const { return maximize_; }
    double obj_offset() const { return offset_; }
    int num_vars() const { return static_cast<int>(vars_.size()); }
    int num_rows() const { return static_cast<int>(rows_.size()); }
    int num_integer() const;
    const std::vector<Variable>& vars() const { return vars_; }
    const std::vector<Row>& rows() const { return rows_; }
    Variable& var(int j) { return vars_[j]; }
    const Variable& var(int j) const { return vars_[j]; }

    /// Throws std::invalid_argument if a coefficient or bound is NaN, a
    /// coefficient is infinite, or a binary has bounds outside [0,1].
    void validate() const;

    /// Warm start hint for MILP solves (may be partial; empty = none).
    std::vector<double> start;

private:
    std::vector<Variable> vars_;
    std::vector<Row> rows_;
    bool maximize_ = false;
    double offset_ = 0.0;
};

enum class Status { Optimal, FeasibleIncumbent, Infeasible, Unbounded, TimeoutNoIncumbent, Error };

const char* to_string(Status s);

struct SolveResult {
    Status status = Status::Error;
    double objective = 0.0;
    std::vector<double> x;
    /// Row duals for pure LPs solved to optimality (empty otherwise).
    std::vector<double> row_dual;
    double wall_s = 0.0;
    double gap = 0.0;
    std::string message;

    bool has_values() const { return status == Status::Optimal || status == Status::FeasibleIncumbent; }
};

/// Largest absolute violation of rows, bounds and integrality at x.
double max_violation(const Model& m, const std::vector<double>& x);

/// Solves with the backend selected by PPOP_SOLVER (default "highs").
/// Values are re-checked row by row before returning.
SolveResult solve(const Model& m, const Options& opt = {});

Model relax_to_lp(const Model& m);

/// CPLEX LP text format.
std::string to_lp_format(const Model& m);

/// Name of the backend picked by PPOP_SOLVER; throws std::runtime_error if unavailable.
std::string backend_name();

} // namespace ppop::solver
