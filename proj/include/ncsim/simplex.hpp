#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace ncsim {

/// Euclidean projection of v onto the probability simplex (sort-based).
inline std::vector<double> project_simplex(const std::vector<double>& v)
{
    const std::size_t n = v.size();
    if (n == 0)
        return {};
    std::vector<double> u(v);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cum += u[j];
        const double t = (cum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0)
            theta = t;
    }
    std::vector<double> w(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::max(v[i] - theta, 0.0);
        sum += w[i];
    }
    // absorb rounding so the result sums to one
    if (sum > 0.0)
        for (auto& x : w)
            x /= sum;
    return w;
}

/// Uniform weight on the entries within rel_tol of the best value.
inline std::vector<double> split_ties(const std::vector<double>& v, bool maximize,
                                      double rel_tol = 1e-12)
{
    std::vector<double> w(v.size(), 0.0);
    if (v.empty())
        return w;
    const double best = maximize ? *std::max_element(v.begin(), v.end())
                                 : *std::min_element(v.begin(), v.end());
    const double tol = rel_tol * std::max(1.0, std::abs(best));
    std::size_t count = 0;
    for (double x : v)
        if (std::abs(x - best) <= tol)
            ++count;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (std::abs(v[i] - best) <= tol)
            w[i] = 1.0 / static_cast<double>(count);
    return w;
}

/// argmax over the simplex of sum_i (gain_i w_i - c (w_i - anchor_i)^2).
/// With c = 0 the linear problem is solved with ties split equally.
inline std::vector<double> proximal_simplex_max(const std::vector<double>& gain,
                                                const std::vector<double>& anchor, double c)
{
    if (c <= 0.0)
        return split_ties(gain, true);
    std::vector<double> v(gain.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = anchor[i] + gain[i] / (2.0 * c);
    return project_simplex(v);
}

/// argmin over the simplex of sum_i (cost_i w_i + c (w_i - anchor_i)^2).
inline std::vector<double> proximal_simplex_min(const std::vector<double>& cost,
                                                const std::vector<double>& anchor, double c)
{
    if (c <= 0.0)
        return split_ties(cost, false);
    std::vector<double> v(cost.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = anchor[i] - cost[i] / (2.0 * c);
    return project_simplex(v);
}

} // namespace ncsim
