#pragma once

#include "ppop/placement.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace ppop::cli {

using nlohmann::json;

inline constexpr int kExitVerified = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBudget = 3;
inline constexpr int kExitSolver = 4;

inline constexpr int kReportSchemaVersion = 1;

struct LineGamma {
    int from = 0; // bus ids
    int to = 0;
    double gamma = 1.2;
};

struct RunConfig {
    std::string case_path;
    std::string algo = "aodc";
    double alpha = 0.25;
    int xi_p = 2;
    std::optional<int> xi_c;
    double gamma = 1.2;
    std::vector<LineGamma> gamma_lines;
    std::string sced = "relaxed";
    int kc = 10, ka = 10, kl = 10;
    int seed = 0;
    double budget_s = 1800.0;
    double nogood_cap_s = 1200.0;
    std::string out;
    std::string placement;
    std::vector<std::pair<double, double>> load_range; // kappa bounds around the nominal profile
    std::vector<int> placement_mask;                    // bus ids
    std::vector<int> pins;                              // bus ids
    std::string dispatch = "auto";
    std::string tier = "fast";
    std::string ap; // "from-to,from-to" bus-id pairs for cascade

    static RunConfig from_json(const json& j);
    json to_json() const;
};

/// Case path or short alias (ieee30, ieee57, ieee118, ieee300).
std::string resolve_case(const std::string& name);

GridModel load_case(const RunConfig& c);
AttackParams make_params(const RunConfig& c, const GridModel& g);

/// Bus ids, one per line; '#' starts a comment.
std::vector<int> read_placement(const std::string& text);
std::vector<int> read_placement_file(const std::string& path);
std::string format_placement(const std::vector<int>& bus_ids, const std::string& comment = {});

json outcome_json(const GridModel& g, const AttackOutcome& o);
json trace_json(const GridModel& g, const std::vector<TraceEntry>& t);

struct BenchRow {
    std::string name;
    std::string expected;
    std::string observed;
    bool pass = false;
    bool hard = true;
    double wall_s = 0.0;
};

std::vector<BenchRow> run_bench(const std::string& tier, const RunConfig& base);

/// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv);

} // namespace ppop::cli
