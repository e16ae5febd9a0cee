#pragma once

#include "ppop/grid.hpp"
#include "ppop/params.hpp"

#include <vector>

namespace ppop {

struct BigMBundle {
    double c2a = 3.0;
    double c3 = 2.0;
    std::vector<double> m2a;      // per line
    std::vector<double> m2f_line; // per line
    double m2f = 0.0;
    std::vector<double> mtheta2;       // per bus
    std::vector<double> mtheta2_tilde; // per bus
    double m2theta = 0.0;
    double m3a = 0.0;
    std::vector<double> m3a_line;
    std::vector<double> mtheta3;
    std::vector<double> m3f_line;
    double m3f = 0.0;
    std::vector<double> mpi; // per line
    double mcf = 0.0;
    double mcp = 0.0;
    double mf_lower = 0.0;
    double mf_upper = 0.0;
    double mq = 0.0;
};

/// Largest shortest-path angle bound from the slack to u that an attacker
/// removing at most k-1 lines (keeping the grid connected) can force, with
/// line weights r_e * bound_e.
double path_angle_bound(const GridModel& g, int u, const std::vector<double>& per_line_flow_bound, int k);

std::vector<double> path_angle_bounds(const GridModel& g, const std::vector<double>& per_line_flow_bound, int k);

BigMBundle compute_bigm(const GridModel& g, const AttackParams& p, double c2a = 3.0);

/// Doubles |MF_lower| and Mq once (escalation step).
void escalate(BigMBundle& b);

} // namespace ppop
