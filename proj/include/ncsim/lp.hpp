#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ncsim {

/// max c.x  s.t.  A x <= b, x >= 0, with b >= 0 so the origin is feasible.
/// Dense tableau simplex with Bland's rule; sized for a few dozen variables.
inline std::vector<double> solve_lp_max(const std::vector<double>& c,
                                        const std::vector<std::vector<double>>& a,
                                        const std::vector<double>& b, double eps = 1e-12)
{
    const std::size_t n = c.size();
    const std::size_t m = a.size();
    for (double v : b)
        if (v < 0.0)
            throw std::invalid_argument("solve_lp_max needs b >= 0");

    // columns: n structural, m slack, then rhs
    const std::size_t cols = n + m + 1;
    std::vector<std::vector<double>> t(m + 1, std::vector<double>(cols, 0.0));
    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            t[i][j] = a[i][j];
        t[i][n + i] = 1.0;
        t[i][cols - 1] = b[i];
        basis[i] = n + i;
    }
    for (std::size_t j = 0; j < n; ++j)
        t[m][j] = -c[j];

    for (std::size_t guard = 0; guard < 100000; ++guard) {
        std::size_t enter = cols;
        for (std::size_t j = 0; j + 1 < cols; ++j)
            if (t[m][j] < -eps) {
                enter = j;
                break;
            }
        if (enter == cols)
            break;
        std::size_t leave = m;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i)
            if (t[i][enter] > eps) {
                const double ratio = t[i][cols - 1] / t[i][enter];
                if (leave == m || ratio < best - eps ||
                    (std::abs(ratio - best) <= eps && basis[i] < basis[leave])) {
                    best = ratio;
                    leave = i;
                }
            }
        if (leave == m)
            throw std::runtime_error("unbounded LP");
        const double piv = t[leave][enter];
        for (auto& v : t[leave])
            v /= piv;
        for (std::size_t i = 0; i <= m; ++i) {
            if (i == leave || t[i][enter] == 0.0)
                continue;
            const double f = t[i][enter];
            for (std::size_t j = 0; j < cols; ++j)
                t[i][j] -= f * t[leave][j];
        }
        basis[leave] = enter;
    }

    std::vector<double> x(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] < n)
            x[basis[i]] = std::max(0.0, t[i][cols - 1]);
    return x;
}

} // namespace ncsim
