#pragma once

#include <limits>
#include <optional>
#include <vector>

namespace ppop {

enum class ScedMode { Relaxed, Kkt };

/// One box of a load-range union: p0 in [kappa_lo * p_ref, kappa_hi * p_ref].
struct LoadBox {
    std::vector<double> p_ref;
    double kappa_lo = 1.0;
    double kappa_hi = 1.0;
};

struct AttackParams {
    double alpha = 0.25;
    int xi_p = 2;
    /// Unbounded when nullopt.
    std::optional<int> xi_c;
    ScedMode sced = ScedMode::Relaxed;
    std::vector<LoadBox> load_range;
    /// Remark-2 style staging: buses allowed to carry a PMU (empty = all).
    std::vector<int> placement_mask;

    bool lp_reducible() const { return sced == ScedMode::Relaxed && !xi_c && load_range.empty(); }
};

void validate(const AttackParams& p);

} // namespace ppop
