#pragma once

// Brute-force reference solvers shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

/// Maximiser of f over the probability simplex of dimension n <= 3 by grid
/// search: a full grid at `coarse`, then a local grid at `fine` around the best.
inline std::vector<double> grid_argmax_simplex(const std::function<double(const std::vector<double>&)>& f,
                                               std::size_t n, double coarse = 1e-2,
                                               double fine = 1e-4)
{
    std::vector<double> best(n, 0.0);
    if (n == 1) {
        best[0] = 1.0;
        return best;
    }
    double best_val = -std::numeric_limits<double>::infinity();
    auto scan = [&](std::vector<double> lo, std::vector<double> hi, double step) {
        const auto steps = [&](std::size_t i) {
            return static_cast<long>(std::floor((hi[i] - lo[i]) / step + 1e-9));
        };
        std::vector<double> w(n);
        if (n == 2) {
            for (long a = 0; a <= steps(0); ++a) {
                w[0] = std::min(1.0, lo[0] + a * step);
                w[1] = 1.0 - w[0];
                const double v = f(w);
                if (v > best_val) {
                    best_val = v;
                    best = w;
                }
            }
        } else {
            for (long a = 0; a <= steps(0); ++a)
                for (long b = 0; b <= steps(1); ++b) {
                    w[0] = lo[0] + a * step;
                    w[1] = lo[1] + b * step;
                    w[2] = 1.0 - w[0] - w[1];
                    if (w[2] < -1e-12)
                        continue;
                    w[2] = std::max(0.0, w[2]);
                    const double v = f(w);
                    if (v > best_val) {
                        best_val = v;
                        best = w;
                    }
                }
        }
    };
    scan(std::vector<double>(n, 0.0), std::vector<double>(n, 1.0), coarse);
    std::vector<double> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = std::max(0.0, best[i] - 2 * coarse);
        hi[i] = std::min(1.0, best[i] + 2 * coarse);
    }
    scan(lo, hi, fine);
    return best;
}

/// Maximum of c.x over {A x <= b, x >= 0} by enumerating every basic
/// solution (n tight constraints out of rows + bounds).
inline double lp_vertex_max(const std::vector<double>& c, const std::vector<std::vector<double>>& a,
                            const std::vector<double>& b)
{
    const std::size_t n = c.size();
    const std::size_t m = a.size();
    // rows 0..m-1: A x <= b; rows m..m+n-1: -x_j <= 0
    auto row = [&](std::size_t r, std::size_t j) {
        if (r < m)
            return a[r][j];
        return r - m == j ? -1.0 : 0.0;
    };
    auto rhs = [&](std::size_t r) { return r < m ? b[r] : 0.0; };
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> pick(n);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
        if (depth == n) {
            std::vector<std::vector<double>> mat(n, std::vector<double>(n + 1));
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j)
                    mat[i][j] = row(pick[i], j);
                mat[i][n] = rhs(pick[i]);
            }
            for (std::size_t col = 0; col < n; ++col) {
                std::size_t piv = col;
                for (std::size_t i = col; i < n; ++i)
                    if (std::abs(mat[i][col]) > std::abs(mat[piv][col]))
                        piv = i;
                if (std::abs(mat[piv][col]) < 1e-12)
                    return;
                std::swap(mat[piv], mat[col]);
                for (std::size_t i = 0; i < n; ++i)
                    if (i != col) {
                        const double fct = mat[i][col] / mat[col][col];
                        for (std::size_t j = col; j <= n; ++j)
                            mat[i][j] -= fct * mat[col][j];
                    }
            }
            std::vector<double> x(n);
            for (std::size_t i = 0; i < n; ++i)
                x[i] = mat[i][n] / mat[i][i];
            for (std::size_t r = 0; r < m + n; ++r) {
                double lhs = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    lhs += row(r, j) * x[j];
                if (lhs > rhs(r) + 1e-9)
                    return;
            }
            double v = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                v += c[j] * x[j];
            best = std::max(best, v);
            return;
        }
        for (std::size_t r = start; r < m + n; ++r) {
            pick[depth] = r;
            rec(r + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

} // namespace oracle

#include "ncsim/generators.hpp"
#include "ncsim/numopt.hpp"

namespace oracle {

/// Largest gap between solve_dominance / solve_split_* and grid-search
/// maximisers of the same objectives on one random instance with <= 3 flows.
inline double subproblem_gap(std::uint64_t seed)
{
    using namespace ncsim;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const char* names[] = {"alice-bob", "x", "wheel3", "butterfly"};
    const std::string name = names[seed % 4];
    const CodingDepth depth = name == "butterfly" ? CodingDepth::two_hop : CodingDepth::one_hop;
    std::vector<double> caps;
    const std::size_t ncaps = name == "butterfly" ? 5 : name == "x" ? 4 : name == "wheel3" ? 3 : 2;
    for (std::size_t i = 0; i < ncaps; ++i)
        caps.push_back(0.5 + 4.0 * u(rng));
    const Network net = build_network(make_topology(name, caps), depth);
    const auto& cat = net.catalog;
    const std::size_t ne = cat.memberships().size();
    const double c = 0.2 + 2.0 * u(rng);

    std::vector<double> alpha(ne), mu(ne), m(ne), x(net.flows.size());
    for (auto& v : alpha)
        v = u(rng);
    for (auto& v : mu)
        v = u(rng);
    for (auto& v : m)
        v = u(rng);
    for (auto& v : x)
        v = 0.1 + 2.0 * u(rng);
    std::vector<double> q(net.graph.hyperarcs().size());
    for (auto& v : q)
        v = 3.0 * u(rng);

    double gap = 0.0;
    auto compare = [&](const std::vector<double>& got, const std::vector<double>& want) {
        for (std::size_t i = 0; i < got.size(); ++i)
            gap = std::max(gap, std::abs(got[i] - want[i]));
    };

    const auto m_star = solve_dominance(alpha, x, mu, net, c);
    for (const auto& k : cat.codes()) {
        const auto& es = cat.members_of_code(k.id);
        auto obj = [&](const std::vector<double>& w) {
            double v = 0.0;
            for (std::size_t i = 0; i < es.size(); ++i) {
                const double a = alpha[es[i]] * x[cat.membership(es[i]).flow.index()];
                v += a * w[i] - c * (w[i] - mu[es[i]]) * (w[i] - mu[es[i]]);
            }
            return v;
        };
        std::vector<double> got;
        for (auto e : es)
            got.push_back(m_star[e]);
        compare(got, grid_argmax_simplex(obj, es.size()));
    }

    if (depth == CodingDepth::two_hop) {
        std::vector<std::vector<std::vector<double>>> mu_beta(net.flows.size());
        for (const Flow& f : net.flows)
            for (const auto& seg : cat.nc_paths(f.id)) {
                std::vector<double> row;
                for (std::size_t z = 0; z < seg.partitions.size(); ++z)
                    row.push_back(u(rng));
                mu_beta[f.id.index()].push_back(row);
            }
        const auto [beta, a2] = solve_split_multihop(q, m, mu_beta, net, c);
        for (const Flow& f : net.flows) {
            const auto& segs = cat.nc_paths(f.id);
            for (std::size_t fi = 0; fi < segs.size(); ++fi) {
                const auto& parts = segs[fi].partitions;
                auto obj = [&](const std::vector<double>& w) {
                    double v = 0.0;
                    for (std::size_t z = 0; z < parts.size(); ++z) {
                        double price = 0.0;
                        for (auto e : parts[z].memberships)
                            price += q[cat.membership(e).hyperarc.index()] * m[e];
                        const double d = w[z] - mu_beta[f.id.index()][fi][z];
                        v -= price * w[z] + c * d * d;
                    }
                    return v;
                };
                compare(beta[f.id.index()][fi], grid_argmax_simplex(obj, parts.size()));
            }
        }
    } else {
        const auto a_star = solve_split_onehop(q, m, mu, net, c);
        for (const Flow& f : net.flows)
            for (std::size_t p = 0; p + 1 < f.path.size(); ++p) {
                const auto es = cat.members_at(f.id, p);
                if (es.size() > 3)
                    continue;
                auto obj = [&](const std::vector<double>& w) {
                    double v = 0.0;
                    for (std::size_t i = 0; i < es.size(); ++i) {
                        const double price = q[cat.membership(es[i]).hyperarc.index()] * m[es[i]];
                        const double d = w[i] - mu[es[i]];
                        v -= price * w[i] + c * d * d;
                    }
                    return v;
                };
                std::vector<double> got;
                for (auto e : es)
                    got.push_back(a_star[e]);
                compare(got, grid_argmax_simplex(obj, es.size()));
            }
    }
    return gap;
}

} // namespace oracle
