#include "ppop/solver.hpp"

#include <Highs.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace ppop::solver {

int Model::add_var(double lb, double ub, VarKind kind, double obj, std::string name) {
    if (kind == VarKind::Binary) {
        lb = std::max(lb, 0.0);
        ub = std::min(ub, 1.0);
    }
    vars_.push_back({lb, ub, kind, obj, std::move(name)});
    return static_cast<int>(vars_.size()) - 1;
}

int Model::add_binary(double obj, std::string name) {
    return add_var(0.0, 1.0, VarKind::Binary, obj, std::move(name));
}

int Model::add_row(const std::vector<Term>& terms, double lo, double hi, std::string name) {
    Row r;
    r.lo = lo;
    r.hi = hi;
    r.name = std::move(name);
    // merge duplicate indices so the backend sees a clean sparse row
    std::vector<Term> t = terms;
    std::sort(t.begin(), t.end(), [](const Term& a, const Term& b) { return a.first < b.first; });
    for (const auto& [j, v] : t) {
        if (!r.idx.empty() && r.idx.back() == j)
            r.val.back() += v;
        else {
            r.idx.push_back(j);
            r.val.push_back(v);
        }
    }
    for (size_t k = r.idx.size(); k-- > 0;) {
        if (r.val[k] == 0.0) {
            r.idx.erase(r.idx.begin() + static_cast<long>(k));
            r.val.erase(r.val.begin() + static_cast<long>(k));
        }
    }
    rows_.push_back(std::move(r));
    return static_cast<int>(rows_.size()) - 1;
}

void Model::set_bounds(int var, double lb, double ub) {
    vars_[var].lb = lb;
    vars_[var].ub = ub;
}

int Model::num_integer() const {
    return static_cast<int>(std::count_if(vars_.begin(), vars_.end(),
                                          [](const Variable& v) { return v.kind != VarKind::Continuous; }));
}

void Model::validate() const {
    const int n = num_vars();
    for (const auto& v : vars_) {
        if (std::isnan(v.lb) || std::isnan(v.ub) || !std::isfinite(v.obj))
            throw std::invalid_argument("bad bound or objective on variable " + v.name);
        if (v.kind == VarKind::Binary && (v.lb < 0.0 || v.ub > 1.0))
            throw std::invalid_argument("binary outside [0,1]: " + v.name);
    }
    for (const auto& r : rows_) {
        if (std::isnan(r.lo) || std::isnan(r.hi))
            throw std::invalid_argument("NaN row bound: " + r.name);
        for (size_t k = 0; k < r.idx.size(); ++k) {
            if (r.idx[k] < 0 || r.idx[k] >= n)
                throw std::invalid_argument("row references unknown variable: " + r.name);
            if (!std::isfinite(r.val[k]))
                throw std::invalid_argument("non-finite coefficient in row " + r.name);
        }
    }
}

const char* to_string(Status s) {
    switch (s) {
    case Status::Optimal: return "optimal";
    case Status::FeasibleIncumbent: return "feasible-incumbent";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::TimeoutNoIncumbent: return "timeout-no-incumbent";
    case Status::Error: return "error";
    }
    return "error";
}

double max_violation(const Model& m, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != m.num_vars()) return kInf;
    double worst = 0.0;
    for (int j = 0; j < m.num_vars(); ++j) {
        const auto& v = m.var(j);
        worst = std::max({worst, v.lb - x[j], x[j] - v.ub});
        if (v.kind != VarKind::Continuous) worst = std::max(worst, std::abs(x[j] - std::round(x[j])));
    }
    for (const auto& r : m.rows()) {
        double a = 0.0;
        for (size_t k = 0; k < r.idx.size(); ++k) a += r.val[k] * x[r.idx[k]];
        worst = std::max({worst, r.lo - a, a - r.hi});
    }
    return worst;
}

namespace {

constexpr double kRowCheckTol = 1e-6;

// Scale-aware row check: absolute 1e-6 on rows whose data are O(1), relative
// to the largest |coef*x| term otherwise, so big-M rows are not rejected for
// round-off the backend cannot avoid.
bool rows_ok(const Model& m, const std::vector<double>& x, std::string& why) {
    for (int j = 0; j < m.num_vars(); ++j) {
        const auto& v = m.var(j);
        double scale = std::max(1.0, std::abs(x[j]));
        if (x[j] < v.lb - kRowCheckTol * scale || x[j] > v.ub + kRowCheckTol * scale) {
            why = "bound violated on " + (v.name.empty() ? std::to_string(j) : v.name);
            return false;
        }
        if (v.kind != VarKind::Continuous && std::abs(x[j] - std::round(x[j])) > kRowCheckTol) {
            why = "integrality violated on " + (v.name.empty() ? std::to_string(j) : v.name);
            return false;
        }
    }
    for (size_t i = 0; i < m.rows().size(); ++i) {
        const auto& r = m.rows()[i];
        double a = 0.0, scale = 1.0;
        for (size_t k = 0; k < r.idx.size(); ++k) {
            double t = r.val[k] * x[r.idx[k]];
            a += t;
            scale = std::max(scale, std::abs(t));
        }
        if (a < r.lo - kRowCheckTol * scale || a > r.hi + kRowCheckTol * scale) {
            std::ostringstream os;
            os << "row " << (r.name.empty() ? std::to_string(i) : r.name) << " violated: " << r.lo << " <= " << a
               << " <= " << r.hi;
            why = os.str();
            return false;
        }
    }
    return true;
}

// attempt > 0 retries after a numerical failure with looser settings
SolveResult solve_highs(const Model& m, const Options& opt, int attempt = 0) {
    auto t0 = std::chrono::steady_clock::now();
    SolveResult res;
    Highs h;
    const double tol = attempt == 0 ? 1e-9 : 1e-7;
    h.setOptionValue("output_flag", opt.verbose);
    h.setOptionValue("random_seed", opt.seed);
    h.setOptionValue("threads", opt.threads);
    h.setOptionValue("mip_rel_gap", opt.mip_gap);
    h.setOptionValue("mip_abs_gap", opt.mip_gap > 0 ? 1e-6 : 1e-9);
    h.setOptionValue("primal_feasibility_tolerance", tol);
    h.setOptionValue("dual_feasibility_tolerance", tol);
    h.setOptionValue("mip_feasibility_tolerance", tol);
    if (attempt >= 1) h.setOptionValue("presolve", "off");
    if (attempt >= 2) h.setOptionValue("solver", "ipm");
    if (std::isfinite(opt.time_limit)) h.setOptionValue("time_limit", std::max(opt.time_limit, 0.01));
    if (opt.first_solution) h.setOptionValue("mip_max_improving_sols", 1);

    const int n = m.num_vars();
    HighsLp lp;
    lp.num_col_ = n;
    lp.num_row_ = m.num_rows();
    lp.sense_ = m.maximize() ? ObjSense::kMaximize : ObjSense::kMinimize;
    lp.offset_ = m.obj_offset();
    lp.col_cost_.resize(n);
    lp.col_lower_.resize(n);
    lp.col_upper_.resize(n);
    bool mip = false;
    lp.integrality_.assign(n, HighsVarType::kContinuous);
    for (int j = 0; j < n; ++j) {
        const auto& v = m.var(j);
        lp.col_cost_[j] = v.obj;
        lp.col_lower_[j] = v.lb;
        lp.col_upper_[j] = v.ub;
        if (v.kind != VarKind::Continuous) {
            lp.integrality_[j] = HighsVarType::kInteger;
            mip = true;
        }
    }
    if (!mip) lp.integrality_.clear();
    // column-wise matrix
    std::vector<int> count(n + 1, 0);
    for (const auto& r : m.rows())
        for (int j : r.idx) ++count[j + 1];
    for (int j = 0; j < n; ++j) count[j + 1] += count[j];
    lp.a_matrix_.format_ = MatrixFormat::kColwise;
    lp.a_matrix_.num_col_ = n;
    lp.a_matrix_.num_row_ = m.num_rows();
    lp.a_matrix_.start_.assign(count.begin(), count.end());
    lp.a_matrix_.index_.resize(count[n]);
    lp.a_matrix_.value_.resize(count[n]);
    std::vector<int> fill(count.begin(), count.end() - 1);
    lp.row_lower_.resize(m.num_rows());
    lp.row_upper_.resize(m.num_rows());
    for (int i = 0; i < m.num_rows(); ++i) {
        const auto& r = m.rows()[i];
        lp.row_lower_[i] = r.lo;
        lp.row_upper_[i] = r.hi;
        for (size_t k = 0; k < r.idx.size(); ++k) {
            int pos = fill[r.idx[k]]++;
            lp.a_matrix_.index_[pos] = i;
            lp.a_matrix_.value_[pos] = r.val[k];
        }
    }
    if (h.passModel(std::move(lp)) == HighsStatus::kError) {
        res.status = Status::Error;
        res.message = "backend rejected model";
        return res;
    }
    if (mip && static_cast<int>(m.start.size()) == n) {
        HighsSolution s;
        s.col_value = m.start;
        s.value_valid = true;
        h.setSolution(s);
    }
    HighsStatus rs = h.run();
    auto ms = h.getModelStatus();
    const auto& info = h.getInfo();
    bool has_point = info.primal_solution_status == kSolutionStatusFeasible;
    switch (ms) {
    case HighsModelStatus::kOptimal: res.status = Status::Optimal; break;
    case HighsModelStatus::kInfeasible: res.status = Status::Infeasible; break;
    case HighsModelStatus::kUnbounded: res.status = Status::Unbounded; break;
    case HighsModelStatus::kUnboundedOrInfeasible: {
        // resolve the ambiguity with a zero-objective feasibility run
        Model f = m;
        for (int j = 0; j < n; ++j) f.set_obj(j, 0.0);
        f.start.clear();
        auto r2 = solve_highs(f, opt, attempt);
        res.status = r2.has_values() ? Status::Unbounded : Status::Infeasible;
        break;
    }
    case HighsModelStatus::kTimeLimit:
    case HighsModelStatus::kIterationLimit:
    case HighsModelStatus::kSolutionLimit:
    case HighsModelStatus::kInterrupt:
        res.status = has_point ? Status::FeasibleIncumbent : Status::TimeoutNoIncumbent;
        if (opt.first_solution && has_point && ms == HighsModelStatus::kSolutionLimit) res.status = Status::Optimal;
        break;
    default:
        res.status = Status::Error;
        res.message = "backend status " + h.modelStatusToString(ms);
    }
    if (rs == HighsStatus::kError && res.status != Status::Infeasible) {
        res.status = Status::Error;
        res.message = "backend error";
    }
    if (res.has_values()) {
        const auto& sol = h.getSolution();
        res.x = sol.col_value;
        res.objective = info.objective_function_value;
        res.gap = mip ? info.mip_gap : 0.0;
        if (!mip && sol.dual_valid) res.row_dual = sol.row_dual;
        // round integer columns before the independent check
        for (int j = 0; j < n; ++j)
            if (m.var(j).kind != VarKind::Continuous) res.x[j] = std::round(res.x[j]);
        std::string why;
        if (!rows_ok(m, res.x, why)) {
            res.status = Status::Error;
            res.message = "returned point failed re-check: " + why;
            res.x.clear();
            res.row_dual.clear();
        }
    }
    res.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (res.status == Status::Error && attempt < 2) {
        auto again = solve_highs(m, opt, attempt + 1);
        again.wall_s += res.wall_s;
        return again;
    }
    return res;
}

} // namespace

std::string backend_name() {
    const char* env = std::getenv("PPOP_SOLVER");
    std::string name = env && *env ? env : "highs";
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    if (name != "highs") throw std::runtime_error("solver backend unavailable: " + name);
    return name;
}

SolveResult solve(const Model& m, const Options& opt) {
    m.validate();
    backend_name();
    return solve_highs(m, opt);
}

Model relax_to_lp(const Model& m) {
    Model r = m;
    for (int j = 0; j < r.num_vars(); ++j) {
        auto& v = r.var(j);
        if (v.kind == VarKind::Binary) {
            v.lb = std::max(v.lb, 0.0);
            v.ub = std::min(v.ub, 1.0);
        }
        v.kind = VarKind::Continuous;
    }
    return r;
}

namespace {

std::string lp_name(const Model& m, int j) {
    const auto& n = m.var(j).name;
    if (n.empty()) return "x" + std::to_string(j);
    std::string s;
    for (char c : n) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') ? c : '_';
    if (std::isdigit(static_cast<unsigned char>(s[0]))) s = "v" + s;
    return s + "_" + std::to_string(j);
}

void lp_terms(std::ostringstream& os, const Model& m, const std::vector<int>& idx, const std::vector<double>& val) {
    if (idx.empty()) {
        os << " 0 " << lp_name(m, 0);
        return;
    }
    for (size_t k = 0; k < idx.size(); ++k) os << (val[k] < 0 ? " - " : " + ") << std::abs(val[k]) << ' ' << lp_name(m, idx[k]);
}

} // namespace

std::string to_lp_format(const Model& m) {
    std::ostringstream os;
    os.precision(17);
    os << (m.maximize() ? "Maximize\n" : "Minimize\n") << " obj:";
    std::vector<int> oi;
    std::vector<double> ov;
    for (int j = 0; j < m.num_vars(); ++j)
        if (m.var(j).obj != 0.0) {
            oi.push_back(j);
            ov.push_back(m.var(j).obj);
        }
    if (m.num_vars() > 0) lp_terms(os, m, oi, ov);
    os << "\nSubject To\n";
    for (int i = 0; i < m.num_rows(); ++i) {
        const auto& r = m.rows()[i];
        std::string base = "c" + std::to_string(i);
        if (!r.name.empty()) {
            std::string nm;
            for (char c : r.name) nm += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') ? c : '_';
            base = nm + "_" + base;
        }
        auto emit = [&](const std::string& nm, const char* op, double rhs) {
            os << ' ' << nm << ':';
            lp_terms(os, m, r.idx, r.val);
            os << ' ' << op << ' ' << rhs << '\n';
        };
        if (r.lo == r.hi)
            emit(base, "=", r.lo);
        else {
            if (std::isfinite(r.lo)) emit(base + "_lo", ">=", r.lo);
            if (std::isfinite(r.hi)) emit(base + "_hi", "<=", r.hi);
        }
    }
    os << "Bounds\n";
    for (int j = 0; j < m.num_vars(); ++j) {
        const auto& v = m.var(j);
        os << ' ';
        if (std::isfinite(v.lb))
            os << v.lb;
        else
            os << "-inf";
        os << " <= " << lp_name(m, j) << " <= ";
        if (std::isfinite(v.ub))
            os << v.ub;
        else
            os << "+inf";
        os << '\n';
    }
    bool any_int = false;
    for (int j = 0; j < m.num_vars(); ++j)
        if (m.var(j).kind != VarKind::Continuous) {
            if (!any_int) os << "General\n";
            any_int = true;
            os << ' ' << lp_name(m, j) << '\n';
        }
    os << "End\n";
    return os.str();
}

} // namespace ppop::solver
