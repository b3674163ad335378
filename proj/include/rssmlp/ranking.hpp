#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "rssmlp/error.hpp"
#include "rssmlp/matrix.hpp"

namespace rssmlp {

// Ranks 1..n with ties replaced by the mean rank of the tied block.
inline std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    for (double v : values) {
        if (std::isnan(v)) throw ContractViolation("average_ranks: NaN input");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // positions i..j (0-based) share ranks i+1..j+1
        const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ContractViolation("pearson: length mismatch");
    if (x.size() < 2) throw ContractViolation("pearson: need at least 2 points");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        throw DomainError("pearson: correlation undefined for constant input");
    }
    return sxy / std::sqrt(sxx * syy);
}

// Spearman rank correlation: Pearson on average ranks, so ties are handled
// exactly rather than through the shortcut formula (which assumes no ties).
inline double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ContractViolation("spearman: length mismatch");
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    return pearson(rx, ry);
}

}  // namespace rssmlp
