#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rssmlp/error.hpp"
#include "rssmlp/matrix.hpp"
#include "rssmlp/metrics.hpp"
#include "rssmlp/ranking.hpp"
#include "rssmlp/special_functions.hpp"

namespace rssmlp {

inline double accuracy(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) {
        throw ContractViolation("accuracy: length mismatch");
    }
    if (pred.empty()) throw ContractViolation("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == truth[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// Unweighted mean of per-class F1. A class with zero precision and recall
// (or no support and no predictions) contributes 0.
inline double macro_f1(std::span<const int> pred, std::span<const int> truth,
                       int class_count) {
    if (pred.size() != truth.size()) {
        throw ContractViolation("macro_f1: length mismatch");
    }
    if (pred.empty()) throw ContractViolation("macro_f1: empty input");
    if (class_count < 1) throw ContractViolation("macro_f1: class_count must be >= 1");
    std::vector<std::size_t> tp(class_count, 0), fp(class_count, 0), fn(class_count, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i];
        const int t = truth[i];
        if (p < 0 || p >= class_count || t < 0 || t >= class_count) {
            throw ContractViolation("macro_f1: label outside [0, class_count)");
        }
        if (p == t) {
            ++tp[p];
        } else {
            ++fp[p];
            ++fn[t];
        }
    }
    double sum = 0.0;
    for (int c = 0; c < class_count; ++c) {
        const double prec_den = static_cast<double>(tp[c] + fp[c]);
        const double rec_den = static_cast<double>(tp[c] + fn[c]);
        const double prec = prec_den > 0.0 ? tp[c] / prec_den : 0.0;
        const double rec = rec_den > 0.0 ? tp[c] / rec_den : 0.0;
        sum += (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    }
    return sum / static_cast<double>(class_count);
}

struct TTestResult {
    double t = 0.0;
    double critical = 0.0;
    std::size_t n = 0;
    bool significant = false;
    bool degenerate = false;  // zero-variance differences
};

// Paired one-sided t-test of H1: mean(a - b) > 0 at level alpha. With
// zero-variance differences the statistic is deterministic, so the verdict
// is simply the sign of the common difference.
inline TTestResult paired_t_one_sided(std::span<const double> a,
                                      std::span<const double> b, double alpha) {
    if (a.size() != b.size()) throw ContractViolation("paired_t: length mismatch");
    if (a.size() < 2) throw ContractViolation("paired_t: need at least 2 pairs");
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ContractViolation("paired_t: alpha must lie in (0, 1)");
    }
    const std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    const double mean = mean_of(d);
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    TTestResult out;
    out.n = n;
    out.critical = student_t_quantile(1.0 - alpha, static_cast<double>(n - 1));
    if (sd == 0.0) {
        out.degenerate = true;
        out.t = mean > 0.0   ? std::numeric_limits<double>::infinity()
                : mean < 0.0 ? -std::numeric_limits<double>::infinity()
                             : 0.0;
        out.significant = mean > 0.0;
        return out;
    }
    out.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    out.significant = out.t > out.critical;
    return out;
}

// Per-dataset mean metric and within-dataset ranks (rank 1 = best, ties get
// average ranks); the input layout a rank-based comparison works from.
struct RankTable {
    std::vector<std::string> datasets;  // rows
    std::vector<std::string> methods;   // columns
    Matrix means;                        // datasets x methods
    Matrix ranks;                        // same shape
    std::vector<double> mean_ranks;      // per method
};

inline RankTable make_rank_table(std::span<const MetricRecord> records,
                                 MetricKind metric) {
    if (records.empty()) throw ContractViolation("rank table: no records");
    std::set<std::string> dataset_set, method_set;
    for (const MetricRecord& r : records) {
        dataset_set.insert(r.dataset);
        method_set.insert(r.method);
    }
    RankTable t;
    t.datasets.assign(dataset_set.begin(), dataset_set.end());
    t.methods.assign(method_set.begin(), method_set.end());
    const std::size_t n = t.datasets.size();
    const std::size_t k = t.methods.size();
    Matrix sums(n, k);
    Matrix counts(n, k);
    std::map<std::string, std::size_t> drow, mcol;
    for (std::size_t i = 0; i < n; ++i) drow[t.datasets[i]] = i;
    for (std::size_t j = 0; j < k; ++j) mcol[t.methods[j]] = j;
    for (const MetricRecord& r : records) {
        const std::size_t i = drow[r.dataset];
        const std::size_t j = mcol[r.method];
        sums(i, j) += metric_value(r, metric);
        counts(i, j) += 1.0;
    }
    t.means = Matrix(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (counts(i, j) == 0.0) {
                throw ContractViolation("rank table: no record for dataset '" +
                                        t.datasets[i] + "', method '" + t.methods[j] +
                                        "'");
            }
            t.means(i, j) = sums(i, j) / counts(i, j);
        }
    }
    t.ranks = Matrix(n, k);
    std::vector<double> negated(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) negated[j] = -t.means(i, j);
        const std::vector<double> row_ranks = average_ranks(negated);
        for (std::size_t j = 0; j < k; ++j) t.ranks(i, j) = row_ranks[j];
    }
    t.mean_ranks.assign(k, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> column(n);
        for (std::size_t i = 0; i < n; ++i) column[i] = t.ranks(i, j);
        t.mean_ranks[j] = mean_of(column);
    }
    return t;
}

struct FriedmanResult {
    double chi2 = 0.0;
    double tau_f = 0.0;
    bool tau_infinite = false;  // chi2 hit its maximum n*(k-1)
    std::size_t n = 0;
    std::size_t k = 0;
    double alpha = 0.0;
    double critical_value = 0.0;  // F quantile at (k-1, (k-1)(n-1))
    bool significant = false;
};

// Friedman chi-square with the F-distributed correction. ranks holds
// within-dataset ranks (rows = datasets, columns = methods).
inline FriedmanResult friedman_from_ranks(const Matrix& ranks, double alpha = 0.05) {
    const std::size_t n = ranks.rows;
    const std::size_t k = ranks.cols;
    if (n < 2 || k < 2) {
        throw ContractViolation("friedman: need at least 2 datasets and 2 methods");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ContractViolation("friedman: alpha must lie in (0, 1)");
    }
    FriedmanResult out;
    out.n = n;
    out.k = k;
    out.alpha = alpha;
    const double dk = static_cast<double>(k);
    const double dn = static_cast<double>(n);
    double sum_sq = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> column(n);
        for (std::size_t i = 0; i < n; ++i) column[i] = ranks(i, j);
        const double mean_rank = mean_of(column);
        sum_sq += mean_rank * mean_rank;
    }
    out.chi2 = 12.0 * dn / (dk * (dk + 1.0)) *
               (sum_sq - dk * (dk + 1.0) * (dk + 1.0) / 4.0);
    const double denom = dn * (dk - 1.0) - out.chi2;
    if (denom <= 1e-12) {
        out.tau_infinite = true;
        out.tau_f = std::numeric_limits<double>::infinity();
    } else {
        out.tau_f = (dn - 1.0) * out.chi2 / denom;
    }
    out.critical_value = f_quantile(1.0 - alpha, dk - 1.0, (dk - 1.0) * (dn - 1.0));
    out.significant = out.tau_infinite || out.tau_f > out.critical_value;
    return out;
}

inline FriedmanResult friedman_test(const RankTable& table, double alpha = 0.05) {
    return friedman_from_ranks(table.ranks, alpha);
}

// Critical-difference values of the Nemenyi post-hoc test. The studentized
// range constants (already divided by sqrt 2) are tabulated for the usual
// two levels; other inputs are rejected rather than extrapolated.
inline double nemenyi_critical_difference(std::size_t k, std::size_t n, double alpha) {
    static constexpr std::array<double, 9> q05 = {
        1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
    static constexpr std::array<double, 9> q10 = {
        1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};
    if (n == 0) throw ContractViolation("nemenyi: n must be positive");
    if (k < 2 || k > 10) {
        throw DomainError("nemenyi: set size " + std::to_string(k) +
                          " outside tabulated range 2..10");
    }
    const std::array<double, 9>* table = nullptr;
    if (alpha == 0.05) table = &q05;
    if (alpha == 0.10) table = &q10;
    if (table == nullptr) {
        throw DomainError("nemenyi: only alpha 0.05 and 0.10 are tabulated");
    }
    const double dk = static_cast<double>(k);
    return (*table)[k - 2] * std::sqrt(dk * (dk + 1.0) / (6.0 * static_cast<double>(n)));
}

}  // namespace rssmlp
