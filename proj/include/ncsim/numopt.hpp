#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncsim/catalog.hpp"
#include "ncsim/lp.hpp"
#include "ncsim/simplex.hpp"

namespace ncsim {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class StepRule { constant, inv_sqrt, inv_t };

struct SolverConfig {
    double step_size = 0.1;        // c0
    StepRule step_rule = StepRule::inv_sqrt;
    double proximal_c = 1.0;       // c of the proximal terms
    std::size_t anchor_period = 5; // iterations between anchor refreshes
    std::size_t max_iters = 200000;
    double tol = 1e-5;
    std::size_t tol_window = 10;   // consecutive iterations below tol to stop
    double overprovision = 1.0;    // gamma
    double x_min = 1e-4;
    double x_max_factor = 10.0;    // x_max = factor * max hyperarc rate
    double initial_q = 1.0;
    bool record_trace = true;

    void validate() const
    {
        if (!(step_size > 0.0))
            throw SolverError("step size must be positive");
        if (proximal_c < 0.0)
            throw SolverError("proximal constant must be non-negative");
        if (!(tol > 0.0))
            throw SolverError("tolerance must be positive");
        if (anchor_period == 0)
            throw SolverError("anchor period must be positive");
        if (!(overprovision > 0.0 && overprovision <= 1.0))
            throw SolverError("overprovision must lie in (0, 1]");
    }
};

/// Primal and dual iterate. Per-membership vectors are indexed like
/// CodeCatalog::memberships(); beta[s][f][z] follows nc_paths(s)[f].partitions[z].
struct SolverState {
    std::vector<double> x;
    std::vector<double> alpha;
    std::vector<double> m;
    std::vector<double> mu_m;
    std::vector<double> mu_alpha;
    std::vector<std::vector<std::vector<double>>> beta;
    std::vector<std::vector<std::vector<double>>> mu_beta;
    std::vector<double> tau;
    std::vector<double> q;
    std::size_t iter = 0;
};

struct TraceRow {
    std::size_t iter = 0;
    std::vector<double> x;
    double sum_x = 0.0;
    std::vector<double> q;
    double objective = 0.0;
    double residual = 0.0;
};

struct ConvergenceTrace {
    std::vector<TraceRow> rows;
    bool converged = false;
    std::size_t iterations = 0;

    void write_csv(std::ostream& os, const Network& net) const
    {
        os << "iter";
        for (std::size_t s = 0; s < net.flows.size(); ++s)
            os << ",x_" << s;
        os << ",sum_x";
        for (const auto& h : net.graph.hyperarcs()) {
            os << ",q_" << net.graph.nodes()[h.origin.index()].name << "_";
            for (std::size_t i = 0; i < h.targets.size(); ++i)
                os << (i ? "+" : "") << net.graph.nodes()[h.targets[i].index()].name;
        }
        os << ",objective,residual\n";
        char buf[64];
        auto num = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return buf;
        };
        for (const auto& r : rows) {
            os << r.iter;
            for (double v : r.x)
                os << ',' << num(v);
            os << ',' << num(r.sum_x);
            for (double v : r.q)
                os << ',' << num(v);
            os << ',' << num(r.objective) << ',' << num(r.residual) << '\n';
        }
    }
};

struct SolveResult {
    SolverState state;
    ConvergenceTrace trace;

    [[nodiscard]] double sum_x() const
    {
        double s = 0.0;
        for (double v : state.x)
            s += v;
        return s;
    }
};

namespace detail {

inline double max_rate(const Hypergraph& g)
{
    double r = 0.0;
    for (const auto& h : g.hyperarcs())
        r = std::max(r, h.rate);
    return r;
}

} // namespace detail

/// Rate subproblem with log utility: x_s = 1 / sum_e q_h alpha_e m_e, clamped.
inline std::vector<double> solve_rate(const std::vector<double>& q, const std::vector<double>& alpha,
                                      const std::vector<double>& m, const Network& net,
                                      double x_min, double x_max)
{
    const auto& cat = net.catalog;
    std::vector<double> price(net.flows.size(), 0.0);
    for (std::size_t e = 0; e < cat.memberships().size(); ++e) {
        const auto& mb = cat.membership(e);
        price[mb.flow.index()] += q[mb.hyperarc.index()] * alpha[e] * m[e];
    }
    std::vector<double> x(price.size());
    for (std::size_t s = 0; s < x.size(); ++s)
        x[s] = price[s] > 0.0 ? std::clamp(1.0 / price[s], x_min, x_max) : x_max;
    return x;
}

/// Proximal dominance problem per code: m maximises
/// sum_s (alpha x m - c (m - mu)^2) over the simplex of the code's flows.
inline std::vector<double> solve_dominance(const std::vector<double>& alpha,
                                           const std::vector<double>& x,
                                           const std::vector<double>& mu_m, const Network& net,
                                           double proximal_c)
{
    const auto& cat = net.catalog;
    std::vector<double> m(cat.memberships().size(), 0.0);
    for (const Code& k : cat.codes()) {
        const auto& es = cat.members_of_code(k.id);
        std::vector<double> gain(es.size()), anchor(es.size());
        for (std::size_t i = 0; i < es.size(); ++i) {
            gain[i] = alpha[es[i]] * x[cat.membership(es[i]).flow.index()];
            anchor[i] = mu_m[es[i]];
        }
        const auto w = proximal_simplex_max(gain, anchor, proximal_c);
        for (std::size_t i = 0; i < es.size(); ++i)
            m[es[i]] = w[i];
    }
    return m;
}

/// Traffic splitting at every (flow, path node): alpha minimises
/// sum_e q_h m_e alpha_e + c (alpha_e - mu_e)^2 over the options at that node.
inline std::vector<double> solve_split_onehop(const std::vector<double>& q,
                                              const std::vector<double>& m,
                                              const std::vector<double>& mu_alpha,
                                              const Network& net, double proximal_c)
{
    const auto& cat = net.catalog;
    std::vector<double> alpha(cat.memberships().size(), 0.0);
    for (const Flow& f : net.flows)
        for (std::size_t p = 0; p + 1 < f.path.size(); ++p) {
            const auto es = cat.members_at(f.id, p);
            std::vector<double> cost(es.size()), anchor(es.size());
            for (std::size_t i = 0; i < es.size(); ++i) {
                cost[i] = q[cat.membership(es[i]).hyperarc.index()] * m[es[i]];
                anchor[i] = mu_alpha[es[i]];
            }
            const auto w = proximal_simplex_min(cost, anchor, proximal_c);
            for (std::size_t i = 0; i < es.size(); ++i)
                alpha[es[i]] = w[i];
        }
    return alpha;
}

/// Partition prices sum_{e in z} q_h m_e for every (flow, coding path).
inline std::vector<std::vector<std::vector<double>>>
partition_prices(const std::vector<double>& q, const std::vector<double>& m, const Network& net)
{
    const auto& cat = net.catalog;
    std::vector<std::vector<std::vector<double>>> out(net.flows.size());
    for (const Flow& f : net.flows)
        for (const auto& seg : cat.nc_paths(f.id)) {
            std::vector<double> price;
            for (const auto& z : seg.partitions) {
                double p = 0.0;
                for (auto e : z.memberships)
                    p += q[cat.membership(e).hyperarc.index()] * m[e];
                price.push_back(p);
            }
            out[f.id.index()].push_back(std::move(price));
        }
    return out;
}

/// Multi-hop splitting: beta over the partitions of each coding path, then
/// alpha_e = beta_z for every membership of partition z (zero elsewhere).
inline std::pair<std::vector<std::vector<std::vector<double>>>, std::vector<double>>
solve_split_multihop(const std::vector<double>& q, const std::vector<double>& m,
                     const std::vector<std::vector<std::vector<double>>>& mu_beta,
                     const Network& net, double proximal_c)
{
    const auto& cat = net.catalog;
    const auto prices = partition_prices(q, m, net);
    std::vector<std::vector<std::vector<double>>> beta(net.flows.size());
    std::vector<double> alpha(cat.memberships().size(), 0.0);
    for (const Flow& f : net.flows) {
        const auto& segs = cat.nc_paths(f.id);
        for (std::size_t fi = 0; fi < segs.size(); ++fi) {
            const auto w = proximal_simplex_min(prices[f.id.index()][fi],
                                                mu_beta[f.id.index()][fi], proximal_c);
            for (std::size_t z = 0; z < w.size(); ++z)
                for (auto e : segs[fi].partitions[z].memberships) {
                    if (e >= alpha.size())
                        throw SolverError("partition references an unknown code");
                    alpha[e] = w[z];
                }
            beta[f.id.index()].push_back(w);
        }
    }
    return {std::move(beta), std::move(alpha)};
}

/// Scheduling LP: max sum_h q_h R_h tau_h s.t. sum_{h in C} tau_h <= gamma per
/// maximal clique. One clique: all airtime to the argmax (ties split); all
/// zero prices give tau = 0.
inline std::vector<double> solve_schedule(const std::vector<double>& q, const Hypergraph& g,
                                          double overprovision = 1.0)
{
    const std::size_t n = g.hyperarcs().size();
    std::vector<double> w(n);
    bool any = false;
    for (std::size_t h = 0; h < n; ++h) {
        w[h] = q[h] * g.hyperarcs()[h].rate;
        any = any || w[h] > 0.0;
    }
    std::vector<double> tau(n, 0.0);
    if (!any)
        return tau;
    const auto& cliques = g.conflict().cliques;
    if (cliques.size() == 1) {
        const auto& c = cliques.front();
        std::vector<double> v;
        for (auto h : c)
            v.push_back(w[h.index()]);
        const auto share = split_ties(v, true);
        for (std::size_t i = 0; i < c.size(); ++i)
            tau[c[i].index()] = overprovision * share[i];
        return tau;
    }
    // only hyperarcs with positive weight can carry airtime at an optimum
    std::vector<std::size_t> active;
    for (std::size_t h = 0; h < n; ++h)
        if (w[h] > 0.0)
            active.push_back(h);
    std::vector<double> c(active.size());
    for (std::size_t i = 0; i < active.size(); ++i)
        c[i] = w[active[i]];
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    for (const auto& cl : cliques) {
        std::vector<double> row(active.size(), 0.0);
        bool used = false;
        for (auto h : cl)
            for (std::size_t i = 0; i < active.size(); ++i)
                if (active[i] == h.index()) {
                    row[i] = 1.0;
                    used = true;
                }
        if (used) {
            a.push_back(std::move(row));
            b.push_back(overprovision);
        }
    }
    const auto sol = solve_lp_max(c, a, b);
    for (std::size_t i = 0; i < active.size(); ++i)
        tau[active[i]] = sol[i];
    return tau;
}

/// sum over codes of h of max_s alpha x: the traffic each hyperarc must carry.
inline std::vector<double> hyperarc_inflow(const std::vector<double>& alpha,
                                           const std::vector<double>& x, const Network& net)
{
    const auto& cat = net.catalog;
    std::vector<double> in(net.graph.hyperarcs().size(), 0.0);
    for (const Code& k : cat.codes()) {
        double mx = 0.0;
        for (auto e : cat.members_of_code(k.id))
            mx = std::max(mx, alpha[e] * x[cat.membership(e).flow.index()]);
        in[k.hyperarc.index()] += mx;
    }
    return in;
}

/// Dual update: q_h <- [q_h + c_t (inflow_h - R_h tau_h)]^+.
inline std::vector<double> update_duals(const std::vector<double>& q,
                                        const std::vector<double>& alpha,
                                        const std::vector<double>& x,
                                        const std::vector<double>& tau, const Network& net,
                                        double step)
{
    const auto in = hyperarc_inflow(alpha, x, net);
    std::vector<double> out(q.size());
    for (std::size_t h = 0; h < q.size(); ++h)
        out[h] = std::max(0.0, q[h] + step * (in[h] - net.graph.hyperarcs()[h].rate * tau[h]));
    return out;
}

inline double step_at(const SolverConfig& cfg, std::size_t t)
{
    const double tt = static_cast<double>(std::max<std::size_t>(t, 1));
    switch (cfg.step_rule) {
    case StepRule::constant:
        return cfg.step_size;
    case StepRule::inv_sqrt:
        return cfg.step_size / std::sqrt(tt);
    case StepRule::inv_t:
        return cfg.step_size / tt;
    }
    return cfg.step_size;
}

/// Uniform splits and dominance weights, duals at cfg.initial_q.
inline SolverState initial_state(const Network& net, const SolverConfig& cfg)
{
    const auto& cat = net.catalog;
    const std::size_t ne = cat.memberships().size();
    SolverState st;
    st.q.assign(net.graph.hyperarcs().size(), cfg.initial_q);
    st.tau.assign(net.graph.hyperarcs().size(), 0.0);
    st.m.assign(ne, 0.0);
    for (const Code& k : cat.codes()) {
        const auto& es = cat.members_of_code(k.id);
        for (auto e : es)
            st.m[e] = 1.0 / static_cast<double>(es.size());
    }
    st.alpha.assign(ne, 0.0);
    st.beta.resize(net.flows.size());
    if (cat.depth() == CodingDepth::two_hop) {
        for (const Flow& f : net.flows)
            for (const auto& seg : cat.nc_paths(f.id)) {
                const double share = 1.0 / static_cast<double>(seg.partitions.size());
                st.beta[f.id.index()].emplace_back(seg.partitions.size(), share);
                for (const auto& z : seg.partitions)
                    for (auto e : z.memberships)
                        st.alpha[e] = share;
            }
    } else {
        for (const Flow& f : net.flows)
            for (std::size_t p = 0; p + 1 < f.path.size(); ++p) {
                const auto es = cat.members_at(f.id, p);
                for (auto e : es)
                    st.alpha[e] = 1.0 / static_cast<double>(es.size());
            }
    }
    st.mu_m = st.m;
    st.mu_alpha = st.alpha;
    st.mu_beta = st.beta;
    const double x_max = cfg.x_max_factor * detail::max_rate(net.graph);
    st.x = solve_rate(st.q, st.alpha, st.m, net, cfg.x_min, x_max);
    return st;
}

/// Largest positive part of inflow - R tau over hyperarcs.
inline double capacity_residual(const std::vector<double>& alpha, const std::vector<double>& x,
                                const std::vector<double>& tau, const Network& net)
{
    const auto in = hyperarc_inflow(alpha, x, net);
    double r = 0.0;
    for (std::size_t h = 0; h < in.size(); ++h)
        r = std::max(r, in[h] - net.graph.hyperarcs()[h].rate * tau[h]);
    return r;
}

inline double log_utility(const std::vector<double>& x)
{
    double u = 0.0;
    for (double v : x)
        u += std::log(v);
    return u;
}

/// Dual decomposition of the NUM problem: dominance, splitting, rate,
/// scheduling and dual update per iteration, proximal anchors refreshed every
/// anchor_period. The residual is measured against the running average of
/// tau since the last power-of-two iteration.
inline SolveResult solve(const Network& net, const SolverConfig& cfg = {},
                         const std::function<void(const SolverState&)>& observer = {})
{
    cfg.validate();
    const auto& cat = net.catalog;
    const bool multihop = cat.depth() == CodingDepth::two_hop;
    const double x_max = cfg.x_max_factor * detail::max_rate(net.graph);

    SolveResult res;
    SolverState& st = res.state;
    st = initial_state(net, cfg);
    std::vector<double> tau_avg(st.tau.size(), 0.0);
    std::size_t avg_count = 0;
    std::size_t below = 0;

    for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
        st.iter = t;
        st.m = solve_dominance(st.alpha, st.x, st.mu_m, net, cfg.proximal_c);
        if (multihop) {
            auto [beta, alpha] = solve_split_multihop(st.q, st.m, st.mu_beta, net, cfg.proximal_c);
            st.beta = std::move(beta);
            st.alpha = std::move(alpha);
        } else {
            st.alpha = solve_split_onehop(st.q, st.m, st.mu_alpha, net, cfg.proximal_c);
        }
        const auto x_prev = st.x;
        st.x = solve_rate(st.q, st.alpha, st.m, net, cfg.x_min, x_max);
        st.tau = solve_schedule(st.q, net.graph, cfg.overprovision);
        st.q = update_duals(st.q, st.alpha, st.x, st.tau, net, step_at(cfg, t));

        if (std::has_single_bit(t)) {
            std::fill(tau_avg.begin(), tau_avg.end(), 0.0);
            avg_count = 0;
        }
        ++avg_count;
        for (std::size_t h = 0; h < tau_avg.size(); ++h)
            tau_avg[h] += (st.tau[h] - tau_avg[h]) / static_cast<double>(avg_count);

        if (t % cfg.anchor_period == 0) {
            st.mu_m = st.m;
            st.mu_alpha = st.alpha;
            st.mu_beta = st.beta;
        }

        if (observer)
            observer(st);

        double dx = 0.0;
        for (std::size_t s = 0; s < st.x.size(); ++s)
            dx = std::max(dx, std::abs(st.x[s] - x_prev[s]));
        const double residual = capacity_residual(st.alpha, st.x, tau_avg, net);
        if (cfg.record_trace) {
            TraceRow row;
            row.iter = t;
            row.x = st.x;
            for (double v : st.x)
                row.sum_x += v;
            row.q = st.q;
            row.objective = log_utility(st.x);
            row.residual = residual;
            res.trace.rows.push_back(std::move(row));
        }
        res.trace.iterations = t;
        below = std::max(dx, residual) < cfg.tol ? below + 1 : 0;
        if (below >= cfg.tol_window) {
            res.trace.converged = true;
            break;
        }
    }
    return res;
}

struct BruteForceResult {
    std::vector<double> x;
    double objective = -std::numeric_limits<double>::infinity();
    [[nodiscard]] double sum_x() const
    {
        double s = 0.0;
        for (double v : x)
            s += v;
        return s;
    }
};

namespace detail {

/// Stick-breaking map from [0,1]^(n-1) to the n-simplex.
inline std::vector<double> stick(const double* u, std::size_t n)
{
    std::vector<double> w(n);
    double rest = 1.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        w[i] = rest * u[i];
        rest -= w[i];
    }
    w[n - 1] = rest;
    return w;
}

} // namespace detail

/// Exhaustive coarse-to-fine search over rate direction and traffic splits.
/// For a fixed direction d and split, each hyperarc needs airtime
/// inflow_h(d) / R_h; the direction is scaled up until the busiest clique
/// uses gamma. Splits follow the coding paths for two-hop catalogs and the
/// per-node options otherwise.
inline BruteForceResult brute_force_optimum(const Network& net, double grid_step = 1e-3,
                                            double overprovision = 1.0)
{
    const auto& cat = net.catalog;
    const std::size_t nflows = net.flows.size();
    if (nflows == 0 || nflows > 3)
        throw SolverError("brute-force oracle supports 1 to 3 flows");

    // each block is a simplex; block 0 is the rate direction
    struct Block {
        std::size_t size;
        std::vector<std::vector<std::size_t>> groups; // memberships per simplex entry
    };
    std::vector<Block> blocks;
    blocks.push_back({nflows, {}});
    const bool multihop = cat.depth() == CodingDepth::two_hop;
    std::vector<std::vector<std::size_t>> fixed; // single-option memberships, alpha = 1
    for (const Flow& f : net.flows) {
        if (multihop) {
            for (const auto& seg : cat.nc_paths(f.id)) {
                Block b{seg.partitions.size(), {}};
                for (const auto& z : seg.partitions)
                    b.groups.push_back(z.memberships);
                if (b.size > 1)
                    blocks.push_back(std::move(b));
                else
                    fixed.push_back(b.groups.front());
            }
        } else {
            for (std::size_t p = 0; p + 1 < f.path.size(); ++p) {
                const auto es = cat.members_at(f.id, p);
                Block b{es.size(), {}};
                for (auto e : es)
                    b.groups.push_back({e});
                if (b.size > 1)
                    blocks.push_back(std::move(b));
                else
                    fixed.push_back(b.groups.front());
            }
        }
    }
    std::size_t dims = 0;
    for (const auto& b : blocks)
        dims += b.size - 1;

    const auto& g = net.graph;
    std::vector<double> alpha(cat.memberships().size(), 0.0);
    for (const auto& grp : fixed)
        for (auto e : grp)
            alpha[e] = 1.0;

    auto evaluate = [&](const std::vector<double>& u, std::vector<double>& x_out) {
        std::size_t off = 0;
        std::vector<double> d;
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
            const auto w = detail::stick(u.data() + off, blocks[bi].size);
            off += blocks[bi].size - 1;
            if (bi == 0)
                d = w;
            else
                for (std::size_t z = 0; z < w.size(); ++z)
                    for (auto e : blocks[bi].groups[z])
                        alpha[e] = w[z];
        }
        for (double v : d)
            if (v <= 0.0)
                return -std::numeric_limits<double>::infinity();
        const auto in = hyperarc_inflow(alpha, d, net);
        double worst = 0.0;
        for (const auto& cl : g.conflict().cliques) {
            double load = 0.0;
            for (auto h : cl)
                load += in[h.index()] / g.hyperarc(h).rate;
            worst = std::max(worst, load);
        }
        if (!(worst > 0.0))
            return -std::numeric_limits<double>::infinity();
        const double scale = overprovision / worst;
        x_out.resize(d.size());
        double obj = 0.0;
        for (std::size_t s = 0; s < d.size(); ++s) {
            x_out[s] = scale * d[s];
            obj += std::log(x_out[s]);
        }
        return obj;
    };

    // points per axis chosen so one level costs at most ~2e5 evaluations
    const std::size_t budget = 200000;
    std::size_t per_axis = 2;
    if (dims > 0)
        while (std::pow(static_cast<double>(per_axis + 1), static_cast<double>(dims)) <=
               static_cast<double>(budget))
            ++per_axis;

    std::vector<double> lo(dims, 0.0), hi(dims, 1.0);
    BruteForceResult best;
    std::vector<double> best_u(dims, 0.5);
    std::vector<double> x;
    if (dims == 0) {
        best.objective = evaluate(best_u, x);
        best.x = x;
    }
    for (int level = 0; level < 60 && dims > 0; ++level) {
        std::vector<std::size_t> idx(dims, 0);
        std::vector<double> u(dims);
        double step = 0.0;
        for (std::size_t i = 0; i < dims; ++i)
            step = std::max(step, (hi[i] - lo[i]) / static_cast<double>(per_axis - 1));
        while (true) {
            for (std::size_t i = 0; i < dims; ++i)
                u[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(idx[i]) /
                                   static_cast<double>(per_axis - 1);
            const double obj = evaluate(u, x);
            if (obj > best.objective) {
                best.objective = obj;
                best.x = x;
                best_u = u;
            }
            std::size_t i = 0;
            while (i < dims && ++idx[i] == per_axis)
                idx[i++] = 0;
            if (i == dims)
                break;
        }
        if (step <= grid_step)
            break;
        for (std::size_t i = 0; i < dims; ++i) {
            const double half = 2.0 * (hi[i] - lo[i]) / static_cast<double>(per_axis - 1);
            lo[i] = std::max(0.0, best_u[i] - half);
            hi[i] = std::min(1.0, best_u[i] + half);
        }
    }
    if (!std::isfinite(best.objective))
        throw SolverError("no feasible grid point");
    return best;
}

} // namespace ncsim
