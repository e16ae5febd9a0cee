#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace ppop {

using LineSet = std::vector<int>;

struct Line {
    int from = 0; // bus index, not id
    int to = 0;
    double r = 1.0;
    double fmax = 1.0;
    double gamma = 1.2;
};

/// How the base injection p0 is obtained from a case file.
enum class DispatchRule {
    Setpoint, // (Pg - Pd) / baseMVA, error if unbalanced
    DcOpf,    // least-cost DC OPF over gen limits and rate A
    Auto      // setpoint when balanced, DC OPF otherwise
};

struct LoadOptions {
    DispatchRule dispatch = DispatchRule::Auto;
    double gamma = 1.2;
    bool merge_parallel = true;
    /// Treat units with no real-power range (synchronous condensers) as generator buses.
    bool condensers_as_generators = true;
};

struct GridModel {
    std::string name;
    double base_mva = 100.0;
    std::vector<int> bus_ids;
    std::vector<Line> lines;
    std::vector<char> is_gen;
    /// Net injection bounds at generator buses (load folded in).
    std::vector<double> pg_min;
    std::vector<double> pg_max;
    std::vector<double> p0;
    /// Linear cost per unit of net injection at generator buses.
    std::vector<double> cost;
    int slack = 0;

    int n() const { return static_cast<int>(bus_ids.size()); }
    int m() const { return static_cast<int>(lines.size()); }
    int index_of(int bus_id) const;
    std::vector<int> gen_buses() const;
    std::vector<int> load_buses() const;
    /// Neighbor lists by bus index (parallel lines counted once).
    std::vector<std::vector<int>> neighbors() const;
    std::vector<int> degree() const;
    int line_index(int from_id, int to_id) const;
};

struct DcState {
    Eigen::VectorXd theta;
    Eigen::VectorXd flows;
    LineSet outages;
};

struct MeterLayout {
    std::vector<int> node_meters;
    std::vector<int> line_meters;

    /// Injection meters at every bus and flow meters on every line.
    static MeterLayout full(const GridModel& g);
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IslandedGrid : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnbalancedInjection : std::runtime_error {
    using std::runtime_error::runtime_error;
};

GridModel load_matpower(const std::string& path, const LoadOptions& opt = {});
GridModel parse_matpower(const std::string& text, const LoadOptions& opt = {}, const std::string& name = "case");

/// Checks the GridModel invariants; throws std::invalid_argument.
void validate(const GridModel& g);

Eigen::MatrixXd admittance(const GridModel& g, const LineSet& outages = {});
Eigen::MatrixXd incidence(const GridModel& g, const LineSet& outages = {});

DcState dc_flow(const GridModel& g, const Eigen::VectorXd& p, const LineSet& outages = {});
inline DcState dc_flow(const GridModel& g, const std::vector<double>& p, const LineSet& outages = {}) {
    return dc_flow(g, Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<long>(p.size())), outages);
}

bool connected_without(const GridModel& g, const LineSet& ap);
/// Lines whose removal alone disconnects the grid.
std::vector<int> bridges(const GridModel& g);

/// Successive rounds of protective tripping; element k holds the lines tripped in round k.
std::vector<LineSet> cascade_simulate(const GridModel& g, const std::vector<double>& dispatch, const LineSet& ap);

/// Least-cost DC dispatch; returns per-bus net injection.
std::vector<double> dc_opf(const GridModel& g);

} // namespace ppop
