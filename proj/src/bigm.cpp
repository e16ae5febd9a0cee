#include "ppop/bigm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <stdexcept>

namespace ppop {

void validate(const AttackParams& p) {
    if (!(p.alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
    if (p.xi_p < 0) throw std::invalid_argument("xi_p must be >= 0");
    if (p.xi_c && *p.xi_c < 0) throw std::invalid_argument("xi_c must be >= 0");
    for (const auto& b : p.load_range)
        if (b.kappa_lo > b.kappa_hi) throw std::invalid_argument("load box with kappa_lo > kappa_hi");
}

namespace {

struct Sp {
    std::vector<double> dist;
    std::vector<int> pred_line;
};

Sp dijkstra(const GridModel& g, const std::vector<double>& w, const std::vector<char>& out) {
    const int n = g.n();
    std::vector<std::vector<std::pair<int, int>>> adj(n);
    for (int e = 0; e < g.m(); ++e) {
        if (out[e]) continue;
        adj[g.lines[e].from].push_back({g.lines[e].to, e});
        adj[g.lines[e].to].push_back({g.lines[e].from, e});
    }
    Sp sp;
    sp.dist.assign(n, std::numeric_limits<double>::infinity());
    sp.pred_line.assign(n, -1);
    using QE = std::pair<double, int>;
    std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
    sp.dist[g.slack] = 0.0;
    pq.push({0.0, g.slack});
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > sp.dist[u]) continue;
        for (auto [v, e] : adj[u]) {
            double nd = d + w[e];
            if (nd < sp.dist[v] - 1e-15) {
                sp.dist[v] = nd;
                sp.pred_line[v] = e;
                pq.push({nd, v});
            }
        }
    }
    return sp;
}

class PathBounder {
public:
    PathBounder(const GridModel& g, const std::vector<double>& bound) : g_(g), w_(g.m()) {
        if (static_cast<int>(bound.size()) != g.m()) throw std::invalid_argument("per-line bound has wrong size");
        for (int e = 0; e < g.m(); ++e) w_[e] = g.lines[e].r * bound[e];
    }

    double bound(int u, int depth) { return search({}, u, depth); }

private:
    const Sp& tree(const LineSet& removed) {
        auto it = cache_.find(removed);
        if (it != cache_.end()) return it->second;
        std::vector<char> out(g_.m(), 0);
        for (int e : removed) out[e] = 1;
        return cache_.emplace(removed, dijkstra(g_, w_, out)).first->second;
    }

    double search(const LineSet& removed, int u, int depth) {
        const Sp& sp = tree(removed);
        double best = sp.dist[u];
        if (depth <= 0 || u == g_.slack) return best;
        // an attack that lengthens the path must cut the current shortest one
        std::vector<int> path;
        for (int v = u; v != g_.slack;) {
            int e = sp.pred_line[v];
            path.push_back(e);
            v = g_.lines[e].from == v ? g_.lines[e].to : g_.lines[e].from;
        }
        for (int e : path) {
            LineSet next = removed;
            next.push_back(e);
            std::sort(next.begin(), next.end());
            if (!connected_without(g_, next)) continue;
            best = std::max(best, search(next, u, depth - 1));
        }
        return best;
    }

    const GridModel& g_;
    std::vector<double> w_;
    std::map<LineSet, Sp> cache_;
};

} // namespace

double path_angle_bound(const GridModel& g, int u, const std::vector<double>& per_line_flow_bound, int k) {
    PathBounder pb(g, per_line_flow_bound);
    return pb.bound(u, std::max(k, 1) - 1);
}

std::vector<double> path_angle_bounds(const GridModel& g, const std::vector<double>& per_line_flow_bound, int k) {
    PathBounder pb(g, per_line_flow_bound);
    std::vector<double> out(g.n());
    for (int u = 0; u < g.n(); ++u) out[u] = pb.bound(u, std::max(k, 1) - 1);
    return out;
}

BigMBundle compute_bigm(const GridModel& g, const AttackParams& p, double c2a) {
    const int n = g.n(), m = g.m();
    BigMBundle b;
    b.c2a = c2a;
    b.m2a.resize(m);
    std::vector<double> fmax(m);
    double max_gf = 0.0;
    for (int e = 0; e < m; ++e) {
        const auto& l = g.lines[e];
        b.m2a[e] = b.c2a * l.gamma * l.fmax;
        fmax[e] = l.fmax;
        max_gf = std::max(max_gf, l.gamma * l.fmax);
    }
    const int k = p.xi_p + 1;
    b.mtheta2 = path_angle_bounds(g, b.m2a, k);
    b.mtheta2_tilde = path_angle_bounds(g, fmax, 1);
    b.m2theta = 0.0;
    for (int u = 0; u < n; ++u) b.m2theta = std::max(b.m2theta, b.mtheta2[u] + b.mtheta2_tilde[u]);

    auto line_guard = [&](const std::vector<double>& mt, std::vector<double>& out) {
        out.resize(m);
        double mx = 0.0;
        for (int e = 0; e < m; ++e) {
            const auto& l = g.lines[e];
            out[e] = std::max(l.r, 1.0 / l.r) * (mt[l.from] + mt[l.to]);
            mx = std::max(mx, out[e]);
        }
        return mx;
    };
    b.m2f = line_guard(b.mtheta2, b.m2f_line);

    // total generation capacity also caps any physical flow
    double supply = 0.0;
    for (int u = 0; u < n; ++u) {
        supply += std::max(g.p0[u], 0.0);
        if (g.is_gen[u]) supply += std::max(g.pg_max[u], 0.0);
    }
    if (!p.load_range.empty()) {
        double extra = 0.0;
        for (const auto& box : p.load_range)
            for (double v : box.p_ref) extra = std::max(extra, std::abs(v) * std::max(std::abs(box.kappa_hi), std::abs(box.kappa_lo)));
        supply += extra * n;
    }
    b.m3a = std::max(b.c3 * max_gf, supply);
    b.m3a_line.assign(m, b.m3a);
    b.mtheta3 = path_angle_bounds(g, b.m3a_line, k);
    b.m3f = line_guard(b.mtheta3, b.m3f_line);
    b.mpi.resize(m);
    for (int e = 0; e < m; ++e) b.mpi[e] = b.c3 * (b.m3a_line[e] / g.lines[e].fmax + g.lines[e].gamma);

    b.mcf = 0.0;
    for (const auto& l : g.lines) b.mcf = std::max(b.mcf, (1.0 + l.gamma) * l.fmax);
    double pinf = 0.0;
    for (double v : g.p0) pinf = std::max(pinf, std::abs(v));
    b.mcp = p.alpha * pinf;
    b.mf_upper = 0.0;
    b.mf_lower = -b.m2theta * b.m2theta;
    b.mq = 2.0 * b.m2theta;
    return b;
}

void escalate(BigMBundle& b) {
    b.mf_lower *= 2.0;
    b.mq *= 2.0;
}

} // namespace ppop
