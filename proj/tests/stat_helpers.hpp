#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

namespace pmx::testutil {

/// Kolmogorov-Smirnov statistic of samples against an analytic CDF.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        worst = std::max(worst, std::fabs(f - static_cast<double>(i) / n));
        worst = std::max(worst, std::fabs(static_cast<double>(i + 1) / n - f));
    }
    return worst;
}

/// Chi-square statistic against expected bin probabilities (counts total n).
inline double chi2_statistic(const std::vector<std::size_t>& observed,
                             const std::vector<double>& probabilities, std::size_t n) {
    double stat = 0.0;
    for (std::size_t b = 0; b < observed.size(); ++b) {
        const double expected = probabilities[b] * static_cast<double>(n);
        const double d = static_cast<double>(observed[b]) - expected;
        stat += d * d / expected;
    }
    return stat;
}

/// Equal-probability bin edges from a tabulated density on a uniform grid.
inline std::vector<double> equiprob_edges(const std::vector<double>& grid_x,
                                          const std::vector<double>& density, int bins) {
    const std::size_t m = grid_x.size();
    std::vector<double> cdf(m, 0.0);
    for (std::size_t i = 1; i < m; ++i)
        cdf[i] = cdf[i - 1] +
                 0.5 * (density[i] + density[i - 1]) * (grid_x[i] - grid_x[i - 1]);
    const double total = cdf.back();
    std::vector<double> edges{grid_x.front()};
    for (int b = 1; b < bins; ++b) {
        const double target = total * static_cast<double>(b) / bins;
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
        const auto i = static_cast<std::size_t>(it - cdf.begin());
        if (i == 0 || i >= m) {
            edges.push_back(grid_x[std::min(i, m - 1)]);
            continue;
        }
        const double t = (target - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
        edges.push_back(grid_x[i - 1] + t * (grid_x[i] - grid_x[i - 1]));
    }
    edges.push_back(grid_x.back());
    return edges;
}

}  // namespace pmx::testutil
