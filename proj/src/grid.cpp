#include "ppop/grid.hpp"

#include "ppop/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>

namespace ppop {

int GridModel::index_of(int bus_id) const {
    auto it = std::find(bus_ids.begin(), bus_ids.end(), bus_id);
    if (it == bus_ids.end()) throw std::out_of_range("unknown bus id " + std::to_string(bus_id));
    return static_cast<int>(it - bus_ids.begin());
}

std::vector<int> GridModel::gen_buses() const {
    std::vector<int> v;
    for (int u = 0; u < n(); ++u)
        if (is_gen[u]) v.push_back(u);
    return v;
}

std::vector<int> GridModel::load_buses() const {
    std::vector<int> v;
    for (int u = 0; u < n(); ++u)
        if (!is_gen[u]) v.push_back(u);
    return v;
}

std::vector<std::vector<int>> GridModel::neighbors() const {
    std::vector<std::vector<int>> nb(n());
    for (const auto& l : lines) {
        nb[l.from].push_back(l.to);
        nb[l.to].push_back(l.from);
    }
    for (auto& v : nb) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return nb;
}

std::vector<int> GridModel::degree() const {
    auto nb = neighbors();
    std::vector<int> d(n());
    for (int u = 0; u < n(); ++u) d[u] = static_cast<int>(nb[u].size());
    return d;
}

int GridModel::line_index(int from_id, int to_id) const {
    int a = index_of(from_id), b = index_of(to_id);
    for (int e = 0; e < m(); ++e)
        if ((lines[e].from == a && lines[e].to == b) || (lines[e].from == b && lines[e].to == a)) return e;
    return -1;
}

MeterLayout MeterLayout::full(const GridModel& g) {
    MeterLayout ml;
    ml.node_meters.resize(g.n());
    std::iota(ml.node_meters.begin(), ml.node_meters.end(), 0);
    ml.line_meters.resize(g.m());
    std::iota(ml.line_meters.begin(), ml.line_meters.end(), 0);
    return ml;
}

namespace {

using Table = std::vector<std::vector<double>>;

std::string strip_comments(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool comment = false;
    for (char c : text) {
        if (c == '%') comment = true;
        if (c == '\n') comment = false;
        if (!comment) out += c;
    }
    return out;
}

Table read_table(const std::string& text, const std::string& field, bool required) {
    std::regex head("mpc\\." + field + "\\s*=\\s*\\[");
    std::smatch mt;
    if (!std::regex_search(text, mt, head)) {
        if (required) throw ParseError("missing table mpc." + field);
        return {};
    }
    size_t start = static_cast<size_t>(mt.position(0) + mt.length(0));
    size_t end = text.find(']', start);
    if (end == std::string::npos) throw ParseError("unterminated table mpc." + field);
    std::string body = text.substr(start, end - start);
    Table t;
    std::string row;
    auto flush = [&]() {
        std::istringstream is(row);
        std::vector<double> vals;
        std::string tok;
        while (is >> tok) {
            try {
                size_t used = 0;
                double v = std::stod(tok, &used);
                if (used != tok.size()) throw ParseError("bad number '" + tok + "' in mpc." + field);
                vals.push_back(v);
            } catch (const std::logic_error&) {
                if (tok == "Inf" || tok == "inf")
                    vals.push_back(solver::kInf);
                else if (tok == "-Inf" || tok == "-inf")
                    vals.push_back(-solver::kInf);
                else
                    throw ParseError("bad number '" + tok + "' in mpc." + field);
            }
        }
        if (!vals.empty()) {
            if (!t.empty() && t.front().size() != vals.size())
                throw ParseError("ragged row in mpc." + field);
            t.push_back(std::move(vals));
        }
        row.clear();
    };
    for (char c : body) {
        if (c == ';' || c == '\n')
            flush();
        else
            row += (c == ',' || c == '\t' || c == '\r') ? ' ' : c;
    }
    flush();
    return t;
}

double read_scalar(const std::string& text, const std::string& field) {
    std::regex re("mpc\\." + field + "\\s*=\\s*([-+0-9.eE]+)");
    std::smatch mt;
    if (!std::regex_search(text, mt, re)) throw ParseError("missing mpc." + field);
    return std::stod(mt[1].str());
}

struct GenRow {
    int bus;
    double pg, pmax, pmin, c1;
};

} // namespace

void validate(const GridModel& g) {
    const int n = g.n();
    if (n == 0) throw std::invalid_argument("grid has no buses");
    auto sized = [n](const std::vector<double>& v) { return static_cast<int>(v.size()) == n; };
    if (!sized(g.p0) || !sized(g.pg_min) || !sized(g.pg_max) || static_cast<int>(g.is_gen.size()) != n)
        throw std::invalid_argument("per-bus vectors have wrong size");
    if (g.slack < 0 || g.slack >= n) throw std::invalid_argument("slack out of range");
    for (const auto& l : g.lines) {
        if (l.from < 0 || l.from >= n || l.to < 0 || l.to >= n || l.from == l.to)
            throw std::invalid_argument("line endpoints invalid");
        if (!(l.r > 0.0) || !(l.fmax > 0.0) || !(l.gamma >= 1.0))
            throw std::invalid_argument("line needs r > 0, fmax > 0, gamma >= 1");
    }
    double s = std::accumulate(g.p0.begin(), g.p0.end(), 0.0);
    if (std::abs(s) > 1e-6) throw UnbalancedInjection("base injections do not sum to zero");
    if (!connected_without(g, {})) throw IslandedGrid("grid is not connected");
}

GridModel parse_matpower(const std::string& raw, const LoadOptions& opt, const std::string& name) {
    std::string text = strip_comments(raw);
    GridModel g;
    g.name = name;
    g.base_mva = read_scalar(text, "baseMVA");
    Table bus = read_table(text, "bus", true);
    Table gen = read_table(text, "gen", true);
    Table branch = read_table(text, "branch", true);
    Table gencost = read_table(text, "gencost", false);
    if (bus.empty() || bus[0].size() < 3) throw ParseError("bus table too narrow");
    if (!gen.empty() && gen[0].size() < 10) throw ParseError("gen table too narrow");
    if (branch.empty() || branch[0].size() < 11) throw ParseError("branch table too narrow");

    std::map<int, int> idx;
    std::set<int> isolated;
    std::vector<double> pd;
    int slack = -1;
    for (const auto& b : bus) {
        int id = static_cast<int>(b[0]);
        if (idx.count(id) || isolated.count(id)) throw ParseError("duplicate bus id " + std::to_string(id));
        if (static_cast<int>(b[1]) == 4) {
            isolated.insert(id);
            continue;
        }
        idx[id] = static_cast<int>(g.bus_ids.size());
        g.bus_ids.push_back(id);
        pd.push_back(b[2] / g.base_mva);
        if (static_cast<int>(b[1]) == 3) {
            if (slack >= 0) throw ParseError("more than one slack bus");
            slack = idx[id];
        }
    }
    if (slack < 0) throw ParseError("missing slack bus");
    g.slack = slack;
    const int n = g.n();

    std::vector<GenRow> gens;
    for (size_t k = 0; k < gen.size(); ++k) {
        const auto& r = gen[k];
        if (r[7] <= 0) continue;
        auto it = idx.find(static_cast<int>(r[0]));
        if (it == idx.end()) {
            if (isolated.count(static_cast<int>(r[0]))) continue;
            throw ParseError("generator at unknown bus " + std::to_string(static_cast<int>(r[0])));
        }
        double c1 = 0.0;
        if (k < gencost.size()) {
            const auto& c = gencost[k];
            int model = static_cast<int>(c[0]);
            int nc = static_cast<int>(c[3]);
            if (model == 2 && nc >= 2 && static_cast<int>(c.size()) >= 4 + nc)
                c1 = c[4 + nc - 2] * g.base_mva;
            else if (model == 1 && nc >= 2 && static_cast<int>(c.size()) >= 4 + 2 * nc) {
                double dx = c[6] - c[4];
                c1 = dx != 0 ? (c[7] - c[5]) / dx * g.base_mva : 0.0;
            }
        }
        gens.push_back({it->second, r[1] / g.base_mva, r[8] / g.base_mva, r[9] / g.base_mva, c1});
    }

    // lines, optionally merging parallel circuits
    double big_limit = 0.0;
    for (double v : pd) big_limit += std::abs(v);
    for (const auto& gr : gens) big_limit += std::abs(gr.pmax);
    big_limit = std::max(big_limit, 1.0);
    std::map<std::pair<int, int>, std::vector<std::pair<double, double>>> groups; // (x, rate)
    std::vector<std::pair<int, int>> order;
    for (const auto& r : branch) {
        if (r[10] <= 0) continue;
        auto fi = idx.find(static_cast<int>(r[0]));
        auto ti = idx.find(static_cast<int>(r[1]));
        if (fi == idx.end() || ti == idx.end()) {
            if (isolated.count(static_cast<int>(r[0])) || isolated.count(static_cast<int>(r[1]))) continue;
            throw ParseError("branch references unknown bus");
        }
        double x = std::abs(r[3]);
        if (x == 0.0) throw ParseError("branch with zero reactance");
        double rate = r[5] > 0 ? r[5] / g.base_mva : big_limit;
        std::pair<int, int> key{fi->second, ti->second};
        std::pair<int, int> ukey{std::min(key.first, key.second), std::max(key.first, key.second)};
        if (opt.merge_parallel) {
            auto gi = groups.find(ukey);
            if (gi == groups.end()) {
                order.push_back(key);
                groups[ukey] = {{x, rate}};
            } else
                gi->second.push_back({x, rate});
        } else {
            g.lines.push_back({key.first, key.second, x, rate, opt.gamma});
        }
    }
    if (opt.merge_parallel) {
        for (const auto& key : order) {
            const auto& circ = groups[{std::min(key.first, key.second), std::max(key.first, key.second)}];
            double y = 0.0;
            for (const auto& [x, rate] : circ) y += 1.0 / x;
            // the merged flow f splits as f*(1/x_i)/y; the first circuit to hit
            // its rating fixes the equivalent limit
            double lim = solver::kInf;
            for (const auto& [x, rate] : circ) lim = std::min(lim, rate * x * y);
            g.lines.push_back({key.first, key.second, 1.0 / y, lim, opt.gamma});
        }
    }

    g.is_gen.assign(n, 0);
    g.pg_min.assign(n, 0.0);
    g.pg_max.assign(n, 0.0);
    g.cost.assign(n, 0.0);
    std::vector<double> pg(n, 0.0);
    for (const auto& gr : gens) {
        if (!opt.condensers_as_generators && gr.pmax <= 0.0 && gr.pmin >= 0.0 && gr.bus != g.slack) continue;
        g.is_gen[gr.bus] = 1;
        g.pg_min[gr.bus] += gr.pmin;
        g.pg_max[gr.bus] += gr.pmax;
        pg[gr.bus] += gr.pg;
        g.cost[gr.bus] = std::max(g.cost[gr.bus], gr.c1);
    }
    for (int u = 0; u < n; ++u) {
        if (g.is_gen[u]) {
            g.pg_min[u] -= pd[u];
            g.pg_max[u] -= pd[u];
        } else {
            g.pg_min[u] = g.pg_max[u] = 0.0;
        }
    }
    g.p0.resize(n);
    for (int u = 0; u < n; ++u) g.p0[u] = pg[u] - pd[u];
    double imbalance = std::accumulate(g.p0.begin(), g.p0.end(), 0.0);
    if (!connected_without(g, {})) throw IslandedGrid("case graph is disconnected");
    if (opt.dispatch == DispatchRule::DcOpf || (opt.dispatch == DispatchRule::Auto && std::abs(imbalance) > 1e-6)) {
        g.p0 = dc_opf(g);
    } else if (std::abs(imbalance) > 1e-6) {
        throw UnbalancedInjection("generation setpoints do not match load");
    }
    validate(g);
    return g;
}

GridModel load_matpower(const std::string& path, const LoadOptions& opt) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string name = path;
    auto slash = name.find_last_of('/');
    if (slash != std::string::npos) name = name.substr(slash + 1);
    auto dot = name.rfind(".m");
    if (dot != std::string::npos) name = name.substr(0, dot);
    return parse_matpower(ss.str(), opt, name);
}

Eigen::MatrixXd incidence(const GridModel& g, const LineSet& outages) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(g.n(), g.m());
    std::vector<char> out(g.m(), 0);
    for (int e : outages) out[e] = 1;
    for (int e = 0; e < g.m(); ++e) {
        if (out[e]) continue;
        d(g.lines[e].from, e) = 1.0;
        d(g.lines[e].to, e) = -1.0;
    }
    return d;
}

Eigen::MatrixXd admittance(const GridModel& g, const LineSet& outages) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(g.n(), g.n());
    std::vector<char> out(g.m(), 0);
    for (int e : outages) out[e] = 1;
    for (int e = 0; e < g.m(); ++e) {
        if (out[e]) continue;
        const auto& l = g.lines[e];
        double y = 1.0 / l.r;
        b(l.from, l.from) += y;
        b(l.to, l.to) += y;
        b(l.from, l.to) -= y;
        b(l.to, l.from) -= y;
    }
    return b;
}

DcState dc_flow(const GridModel& g, const Eigen::VectorXd& p, const LineSet& outages) {
    const int n = g.n();
    if (p.size() != n) throw std::invalid_argument("injection vector has wrong size");
    if (std::abs(p.sum()) > 1e-6) throw UnbalancedInjection("injections do not sum to zero");
    if (!connected_without(g, outages)) throw IslandedGrid("outage set islands the grid");
    Eigen::MatrixXd b = admittance(g, outages);
    // reduce out the slack row/column
    std::vector<int> keep;
    for (int u = 0; u < n; ++u)
        if (u != g.slack) keep.push_back(u);
    const int k = n - 1;
    Eigen::MatrixXd br(k, k);
    Eigen::VectorXd pr(k);
    for (int i = 0; i < k; ++i) {
        pr(i) = p(keep[i]);
        for (int j = 0; j < k; ++j) br(i, j) = b(keep[i], keep[j]);
    }
    DcState s;
    s.outages = outages;
    std::sort(s.outages.begin(), s.outages.end());
    s.theta = Eigen::VectorXd::Zero(n);
    if (k > 0) {
        Eigen::VectorXd t = br.ldlt().solve(pr);
        for (int i = 0; i < k; ++i) s.theta(keep[i]) = t(i);
    }
    s.flows = Eigen::VectorXd::Zero(g.m());
    std::vector<char> out(g.m(), 0);
    for (int e : outages) out[e] = 1;
    for (int e = 0; e < g.m(); ++e) {
        if (out[e]) continue;
        const auto& l = g.lines[e];
        s.flows(e) = (s.theta(l.from) - s.theta(l.to)) / l.r;
    }
    return s;
}

bool connected_without(const GridModel& g, const LineSet& ap) {
    const int n = g.n();
    if (n <= 1) return true;
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<char> out(g.m(), 0);
    for (int e : ap) out[e] = 1;
    int comps = n;
    for (int e = 0; e < g.m(); ++e) {
        if (out[e]) continue;
        int a = find(g.lines[e].from), b = find(g.lines[e].to);
        if (a != b) {
            parent[a] = b;
            --comps;
        }
    }
    return comps == 1;
}

std::vector<int> bridges(const GridModel& g) {
    std::vector<int> out;
    for (int e = 0; e < g.m(); ++e)
        if (!connected_without(g, {e})) out.push_back(e);
    return out;
}

namespace {

// Connected components of the in-service graph; returns component id per bus.
std::vector<int> components(const GridModel& g, const std::vector<char>& out, int& count) {
    const int n = g.n();
    std::vector<std::vector<int>> adj(n);
    for (int e = 0; e < g.m(); ++e) {
        if (out[e]) continue;
        adj[g.lines[e].from].push_back(g.lines[e].to);
        adj[g.lines[e].to].push_back(g.lines[e].from);
    }
    std::vector<int> comp(n, -1);
    count = 0;
    for (int s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        std::vector<int> stack{s};
        comp[s] = count;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v : adj[u])
                if (comp[v] < 0) {
                    comp[v] = count;
                    stack.push_back(v);
                }
        }
        ++count;
    }
    return comp;
}

} // namespace

std::vector<LineSet> cascade_simulate(const GridModel& g, const std::vector<double>& dispatch, const LineSet& ap) {
    const int n = g.n(), m = g.m();
    if (static_cast<int>(dispatch.size()) != n) throw std::invalid_argument("dispatch has wrong size");
    double bal = std::accumulate(dispatch.begin(), dispatch.end(), 0.0);
    if (std::abs(bal) > 1e-6) throw UnbalancedInjection("dispatch is not balanced");
    std::vector<char> out(m, 0);
    for (int e : ap) out[e] = 1;
    std::vector<LineSet> rounds;
    for (int guard = 0; guard <= m; ++guard) {
        int nc = 0;
        auto comp = components(g, out, nc);
        Eigen::VectorXd p(n);
        for (int u = 0; u < n; ++u) p(u) = dispatch[u];
        // per-island proportional rebalancing
        for (int c = 0; c < nc; ++c) {
            double gen = 0.0, load = 0.0;
            for (int u = 0; u < n; ++u) {
                if (comp[u] != c) continue;
                if (p(u) > 0)
                    gen += p(u);
                else
                    load -= p(u);
            }
            if (gen >= load) {
                double s = gen > 0 ? load / gen : 0.0;
                for (int u = 0; u < n; ++u)
                    if (comp[u] == c && p(u) > 0) p(u) *= s;
            } else {
                double s = load > 0 ? gen / load : 0.0;
                for (int u = 0; u < n; ++u)
                    if (comp[u] == c && p(u) < 0) p(u) *= s;
            }
        }
        // solve each island with its own reference bus
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
        for (int e = 0; e < m; ++e) {
            if (out[e]) continue;
            const auto& l = g.lines[e];
            double y = 1.0 / l.r;
            b(l.from, l.from) += y;
            b(l.to, l.to) += y;
            b(l.from, l.to) -= y;
            b(l.to, l.from) -= y;
        }
        for (int c = 0; c < nc; ++c) {
            std::vector<int> members;
            for (int u = 0; u < n; ++u)
                if (comp[u] == c) members.push_back(u);
            if (members.size() < 2) continue;
            int ref = comp[g.slack] == c ? g.slack : members.front();
            std::vector<int> keep;
            for (int u : members)
                if (u != ref) keep.push_back(u);
            const int k = static_cast<int>(keep.size());
            Eigen::MatrixXd br(k, k);
            Eigen::VectorXd pr(k);
            for (int i = 0; i < k; ++i) {
                pr(i) = p(keep[i]);
                for (int j = 0; j < k; ++j) br(i, j) = b(keep[i], keep[j]);
            }
            Eigen::VectorXd t = br.ldlt().solve(pr);
            for (int i = 0; i < k; ++i) theta(keep[i]) = t(i);
        }
        LineSet tripped;
        for (int e = 0; e < m; ++e) {
            if (out[e]) continue;
            const auto& l = g.lines[e];
            double f = (theta(l.from) - theta(l.to)) / l.r;
            if (std::abs(f) > l.gamma * l.fmax + 1e-9) tripped.push_back(e);
        }
        if (tripped.empty()) break;
        for (int e : tripped) out[e] = 1;
        rounds.push_back(std::move(tripped));
        double remaining = 0.0;
        for (int u = 0; u < n; ++u) remaining += std::abs(p(u));
        if (remaining < 1e-12) break;
    }
    return rounds;
}

std::vector<double> dc_opf(const GridModel& g) {
    using namespace solver;
    const int n = g.n();
    Model md;
    std::vector<int> th(n), pv(n, -1);
    for (int u = 0; u < n; ++u) th[u] = md.add_var(-kInf, kInf, VarKind::Continuous, 0.0, "theta" + std::to_string(u));
    md.set_bounds(th[g.slack], 0.0, 0.0);
    for (int u = 0; u < n; ++u)
        if (g.is_gen[u]) pv[u] = md.add_var(g.pg_min[u], g.pg_max[u], VarKind::Continuous, g.cost[u], "p" + std::to_string(u));
    Eigen::MatrixXd b = admittance(g);
    for (int u = 0; u < n; ++u) {
        std::vector<Term> t;
        for (int v = 0; v < n; ++v)
            if (b(u, v) != 0.0) t.push_back({th[v], b(u, v)});
        if (g.is_gen[u]) {
            t.push_back({pv[u], -1.0});
            md.add_row(t, 0.0, 0.0);
        } else {
            md.add_row(t, g.p0[u], g.p0[u]);
        }
    }
    for (const auto& l : g.lines)
        md.add_row({{th[l.from], 1.0 / l.r}, {th[l.to], -1.0 / l.r}}, -l.fmax, l.fmax);
    auto r = solve(md);
    if (r.status != Status::Optimal) throw UnbalancedInjection("DC OPF for the base dispatch failed: " + std::string(to_string(r.status)));
    std::vector<double> p(n);
    Eigen::VectorXd theta(n);
    for (int u = 0; u < n; ++u) theta(u) = r.x[th[u]];
    Eigen::VectorXd inj = b * theta;
    for (int u = 0; u < n; ++u) p[u] = inj(u);
    // remove solver round-off so the balance invariant holds tightly
    double s = std::accumulate(p.begin(), p.end(), 0.0);
    p[g.slack] -= s;
    return p;
}

} // namespace ppop
