#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rssmlp/error.hpp"
#include "rssmlp/losses.hpp"
#include "rssmlp/matrix.hpp"
#include "rssmlp/parallel.hpp"
#include "rssmlp/rng.hpp"
#include "rssmlp/sampling.hpp"

namespace rssmlp {

// Discrete distribution of a margin value z (the signed agreement between a
// label and a score). Conventions that track the disagreement -z instead map
// here by negating the support; the variance gap is unchanged by that flip.
// Small finite supports make every moment enumerable, which is what lets the
// lab check sampling identities exactly.
struct FiniteMarginDistribution {
    std::vector<double> support;  // strictly increasing
    std::vector<double> prob;     // nonnegative, sums to 1
    std::vector<double> cum;      // inclusive cumulative of prob

    static FiniteMarginDistribution from_points(std::vector<double> values,
                                                std::vector<double> probs) {
        if (values.empty() || values.size() != probs.size()) {
            throw ContractViolation("margin distribution: support/prob size mismatch");
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!std::isfinite(values[i])) {
                throw ContractViolation("margin distribution: non-finite support");
            }
            if (i > 0 && values[i] <= values[i - 1]) {
                throw ContractViolation(
                    "margin distribution: support must be strictly increasing");
            }
            if (!(probs[i] >= 0.0)) {
                throw ContractViolation("margin distribution: negative probability");
            }
            sum += probs[i];
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw ContractViolation("margin distribution: probabilities sum to " +
                                    std::to_string(sum) + ", expected 1");
        }
        FiniteMarginDistribution d;
        d.support = std::move(values);
        d.prob = std::move(probs);
        for (double& p : d.prob) p /= sum;  // exact-sum cleanup
        d.cum.resize(d.prob.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < d.prob.size(); ++i) {
            acc += d.prob[i];
            d.cum[i] = acc;
        }
        d.cum.back() = 1.0;
        return d;
    }

    // Margin is +1 with probability p, else -1.
    static FiniteMarginDistribution bernoulli_pm1(double p) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ContractViolation("bernoulli margin: p outside [0, 1]");
        }
        return from_points({-1.0, 1.0}, {1.0 - p, p});
    }

    std::size_t atoms() const { return support.size(); }

    bool is_plus_minus_one() const {
        for (double v : support) {
            if (v != -1.0 && v != 1.0) return false;
        }
        return true;
    }

    double mean() const {
        double s = 0.0;
        for (std::size_t i = 0; i < atoms(); ++i) s += prob[i] * support[i];
        return s;
    }

    template <typename F>
    double expectation(F&& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < atoms(); ++i) s += prob[i] * f(support[i]);
        return s;
    }

    std::size_t sample_index(RngStream& rng) const {
        const double u = rng.next_double();
        for (std::size_t i = 0; i + 1 < cum.size(); ++i) {
            if (u < cum[i]) return i;
        }
        return cum.size() - 1;
    }
};

namespace detail {

inline std::vector<double> binomial_row(std::size_t k) {
    std::vector<double> row(k + 1, 1.0);
    for (std::size_t j = 1; j <= k; ++j) {
        row[j] = row[j - 1] * static_cast<double>(k - j + 1) / static_cast<double>(j);
    }
    return row;
}

// P(at least r of K i.i.d. draws are <= a point with CDF f).
inline double order_stat_tail(const std::vector<double>& binom, std::size_t k,
                              std::size_t r, double f) {
    double tail = 0.0;
    for (std::size_t j = r; j <= k; ++j) {
        tail += binom[j] * std::pow(f, static_cast<double>(j)) *
                std::pow(1.0 - f, static_cast<double>(k - j));
    }
    return tail;
}

}  // namespace detail

// Distribution of the r-th smallest of K i.i.d. draws, over the same support.
inline std::vector<double> order_stat_pmf(const FiniteMarginDistribution& dist,
                                          std::size_t set_size, std::size_t rank) {
    if (set_size < 1) throw ContractViolation("order_stat_pmf: K must be >= 1");
    if (rank < 1 || rank > set_size) {
        throw ContractViolation("order_stat_pmf: rank outside 1..K");
    }
    const std::vector<double> binom = detail::binomial_row(set_size);
    std::vector<double> pmf(dist.atoms());
    double prev_tail = 0.0;
    for (std::size_t i = 0; i < dist.atoms(); ++i) {
        const double tail = detail::order_stat_tail(binom, set_size, rank, dist.cum[i]);
        pmf[i] = tail - prev_tail;
        prev_tail = tail;
    }
    return pmf;
}

// E[z_(r)] for r = 1..K, computed from the binomial tail form of the
// order-statistic CDF over the finite support.
inline std::vector<double> exact_order_stat_means(const FiniteMarginDistribution& dist,
                                                  std::size_t set_size) {
    if (set_size < 1) throw ContractViolation("order stat means: K must be >= 1");
    std::vector<double> means(set_size, 0.0);
    for (std::size_t r = 1; r <= set_size; ++r) {
        const std::vector<double> pmf = order_stat_pmf(dist, set_size, r);
        double m = 0.0;
        for (std::size_t i = 0; i < dist.atoms(); ++i) m += pmf[i] * dist.support[i];
        means[r - 1] = m;
    }
    return means;
}

// Exact moments of the empirical-risk estimator mean(phi) over a sample of
// K*m margins, for both sampling schemes. The ranked-set estimator keeps one
// order statistic per rank per cycle, so its variance is the rank-averaged
// order-statistic variance shrunk by the sample size.
struct ExactMoments {
    double mean_srs = 0.0;
    double mean_rss = 0.0;
    double var_srs = 0.0;
    double var_rss = 0.0;
    std::vector<double> per_rank_phi_mean;  // E[phi(z_(r))]

    double gap() const { return var_rss - var_srs; }
};

inline ExactMoments exact_moments(const FiniteMarginDistribution& dist, LossKind loss,
                                  std::size_t set_size, std::size_t cycles) {
    if (set_size < 1 || cycles < 1) {
        throw ContractViolation("exact_moments: K and m must be >= 1");
    }
    std::vector<double> phi(dist.atoms());
    for (std::size_t i = 0; i < dist.atoms(); ++i) {
        phi[i] = loss_value(loss, dist.support[i]);
    }
    ExactMoments out;
    double phi_mean = 0.0, phi_second = 0.0;
    for (std::size_t i = 0; i < dist.atoms(); ++i) {
        phi_mean += dist.prob[i] * phi[i];
        phi_second += dist.prob[i] * phi[i] * phi[i];
    }
    out.mean_srs = phi_mean;
    out.var_srs = (phi_second - phi_mean * phi_mean) /
                  static_cast<double>(set_size * cycles);

    out.per_rank_phi_mean.resize(set_size);
    double rank_mean_sum = 0.0, rank_var_sum = 0.0;
    for (std::size_t r = 1; r <= set_size; ++r) {
        const std::vector<double> pmf = order_stat_pmf(dist, set_size, r);
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < dist.atoms(); ++i) {
            m1 += pmf[i] * phi[i];
            m2 += pmf[i] * phi[i] * phi[i];
        }
        out.per_rank_phi_mean[r - 1] = m1;
        rank_mean_sum += m1;
        rank_var_sum += m2 - m1 * m1;
    }
    out.mean_rss = rank_mean_sum / static_cast<double>(set_size);
    out.var_rss = rank_var_sum / static_cast<double>(set_size * set_size * cycles);
    return out;
}

inline constexpr double kExpGapCoefficient =
    1.3810978455418155;  // ((e - 1/e) / 2)^2, the slope^2 of exp loss on {-1,+1}
inline constexpr double kLogGapCoefficient = 0.25;

// Analytic V_RSS - V_SRS for two-point margins. On support {-1,+1} any loss
// is affine in z, so the variance gap collapses to the squared slope times
// the spread between the mean's square and the rank-mean squares.
struct GapReport {
    LossKind loss = LossKind::Exp;
    std::size_t set_size = 0;
    std::size_t cycles = 0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
    std::vector<double> order_stat_means;  // E[z_(r)], r = 1..K

    bool has_closed_form = false;
    double closed_form_gap = 0.0;
    double exact_mean = 0.0;
    double exact_var_srs = 0.0;
    double exact_var_rss = 0.0;
    double exact_gap = 0.0;

    bool has_mc = false;
    double mc_var_srs = 0.0;
    double mc_var_rss = 0.0;
    double mc_gap = 0.0;
    double se_gap = 0.0;
    double z_score = 0.0;
    bool within_four_sigma = false;
};

inline GapReport closed_form_gap(LossKind loss, std::size_t set_size,
                                 std::size_t cycles,
                                 const FiniteMarginDistribution& dist) {
    if (set_size < 1 || cycles < 1) {
        throw ContractViolation("closed_form_gap: K and m must be >= 1");
    }
    if (!dist.is_plus_minus_one()) {
        throw DomainError(
            "closed_form_gap: support must lie in {-1,+1}; use the MC route for "
            "general margins");
    }
    GapReport report;
    report.loss = loss;
    report.set_size = set_size;
    report.cycles = cycles;
    report.order_stat_means = exact_order_stat_means(dist, set_size);
    const double c_phi =
        loss == LossKind::Exp ? kExpGapCoefficient : kLogGapCoefficient;
    const double z_mean = dist.mean();
    double rank_sq = 0.0;
    for (double mr : report.order_stat_means) rank_sq += mr * mr;
    rank_sq /= static_cast<double>(set_size);
    report.closed_form_gap = c_phi * (z_mean * z_mean - rank_sq) /
                             static_cast<double>(set_size * cycles);
    report.has_closed_form = true;

    const ExactMoments exact = exact_moments(dist, loss, set_size, cycles);
    report.exact_mean = exact.mean_srs;
    report.exact_var_srs = exact.var_srs;
    report.exact_var_rss = exact.var_rss;
    report.exact_gap = exact.gap();
    return report;
}

// Jackknife standard error of the sample-variance estimator. Leave-one-out
// variances come from the centered sums in O(1) each:
//   V_(i) = (S2 - c_i^2 * n/(n-1)) / (n-2),  c_i = x_i - mean(x).
inline double jackknife_se_of_variance(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 3) throw ContractViolation("jackknife: need at least 3 observations");
    const double mean = mean_of(x);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (x[i] - mean) * (x[i] - mean);
    const double s2 = pairwise_sum(sq);
    const double dn = static_cast<double>(n);
    std::vector<double> loo(n);
    for (std::size_t i = 0; i < n; ++i) {
        loo[i] = (s2 - sq[i] * dn / (dn - 1.0)) / (dn - 2.0);
    }
    const double loo_mean = mean_of(loo);
    std::vector<double> dev(n);
    for (std::size_t i = 0; i < n; ++i) dev[i] = (loo[i] - loo_mean) * (loo[i] - loo_mean);
    return std::sqrt((dn - 1.0) / dn * pairwise_sum(dev));
}

struct MomentReport {
    SamplerKind kind = SamplerKind::Srs;
    LossKind loss = LossKind::Exp;
    std::size_t set_size = 0;
    std::size_t cycles = 0;
    std::size_t trials = 0;
    double mean = 0.0;
    double variance = 0.0;     // across trials, n-1 normalized
    double se_mean = 0.0;      // jackknife; equals s/sqrt(n) for the mean
    double se_variance = 0.0;  // jackknife
};

// Monte Carlo distribution of the estimator mean(phi) over repeated samples.
// Each trial simulates one full sample: SRS draws K*m i.i.d. margins; RSS
// runs m cycles of K groups of K i.i.d. margins, ranks each group by margin
// value and keeps the r-th smallest of group r. Trials use derived
// substreams and write disjoint slots, so worker count cannot change any
// reported digit.
inline MomentReport mc_moments(SamplerKind kind, LossKind loss,
                               const FiniteMarginDistribution& dist,
                               std::size_t set_size, std::size_t cycles,
                               std::size_t trials, const RngStream& base,
                               int workers = 1) {
    if (set_size < 1 || cycles < 1) {
        throw ContractViolation("mc_moments: K and m must be >= 1");
    }
    if (trials < 3) throw ContractViolation("mc_moments: need at least 3 trials");
    std::vector<double> phi(dist.atoms());
    for (std::size_t i = 0; i < dist.atoms(); ++i) {
        phi[i] = loss_value(loss, dist.support[i]);
    }
    const std::size_t sample = set_size * cycles;
    std::vector<double> estimates(trials);
    parallel_for(trials, workers, [&](std::size_t t) {
        RngStream rng = base.substream(t);
        double sum = 0.0;
        if (kind == SamplerKind::Srs) {
            for (std::size_t i = 0; i < sample; ++i) {
                sum += phi[dist.sample_index(rng)];
            }
        } else {
            std::vector<std::size_t> group(set_size);
            for (std::size_t c = 0; c < cycles; ++c) {
                for (std::size_t g = 0; g < set_size; ++g) {
                    for (std::size_t i = 0; i < set_size; ++i) {
                        group[i] = dist.sample_index(rng);
                    }
                    // Support is sorted, so ranking by margin value is
                    // ranking by atom index.
                    std::sort(group.begin(), group.end());
                    sum += phi[group[g]];
                }
            }
        }
        estimates[t] = sum / static_cast<double>(sample);
    });
    MomentReport report;
    report.kind = kind;
    report.loss = loss;
    report.set_size = set_size;
    report.cycles = cycles;
    report.trials = trials;
    report.mean = mean_of(estimates);
    std::vector<double> sq(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        sq[t] = (estimates[t] - report.mean) * (estimates[t] - report.mean);
    }
    report.variance = pairwise_sum(sq) / static_cast<double>(trials - 1);
    report.se_mean = std::sqrt(report.variance / static_cast<double>(trials));
    report.se_variance = jackknife_se_of_variance(estimates);
    return report;
}

inline constexpr std::uint64_t kStreamMcSrs = 401;
inline constexpr std::uint64_t kStreamMcRss = 402;

// Full experiment: exact enumeration, the two-point closed form when it
// applies, and an MC cross-check with a z-score on the variance gap.
inline GapReport run_gap_experiment(LossKind loss,
                                    const FiniteMarginDistribution& dist,
                                    std::size_t set_size, std::size_t cycles,
                                    std::size_t trials, std::uint64_t seed,
                                    int workers = 1) {
    GapReport report;
    report.loss = loss;
    report.set_size = set_size;
    report.cycles = cycles;
    report.trials = trials;
    report.seed = seed;
    report.order_stat_means = exact_order_stat_means(dist, set_size);
    const ExactMoments exact = exact_moments(dist, loss, set_size, cycles);
    report.exact_mean = exact.mean_srs;
    report.exact_var_srs = exact.var_srs;
    report.exact_var_rss = exact.var_rss;
    report.exact_gap = exact.gap();
    if (dist.is_plus_minus_one()) {
        report.has_closed_form = true;
        report.closed_form_gap =
            closed_form_gap(loss, set_size, cycles, dist).closed_form_gap;
    }
    const MomentReport srs =
        mc_moments(SamplerKind::Srs, loss, dist, set_size, cycles, trials,
                   RngStream(seed, kStreamMcSrs), workers);
    const MomentReport rss =
        mc_moments(SamplerKind::Rss, loss, dist, set_size, cycles, trials,
                   RngStream(seed, kStreamMcRss), workers);
    report.has_mc = true;
    report.mc_var_srs = srs.variance;
    report.mc_var_rss = rss.variance;
    report.mc_gap = rss.variance - srs.variance;
    report.se_gap = std::hypot(srs.se_variance, rss.se_variance);
    const double target =
        report.has_closed_form ? report.closed_form_gap : report.exact_gap;
    report.z_score = (report.mc_gap - target) / report.se_gap;
    report.within_four_sigma = std::abs(report.z_score) <= 4.0;
    return report;
}

struct BoundResult {
    double theta = 0.0;
    double value = 0.0;
    bool clamped = false;  // theta exceeded 1 and was clamped before inversion
};

// Generalization bound: theta aggregates the concentration term, the
// variance term and the approximation error, then the exp-loss psi inverse
// turns it into a zero-one-risk bound.
inline BoundResult bound_value(double sup_norm, std::size_t count, double delta,
                               double variance, double approx_error = 0.0) {
    if (!(sup_norm > 0.0)) throw ContractViolation("bound_value: M must be > 0");
    if (count < 1) throw ContractViolation("bound_value: N must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) {
        throw ContractViolation("bound_value: delta must lie in (0, 1)");
    }
    if (!(variance >= 0.0)) throw ContractViolation("bound_value: variance < 0");
    if (!(approx_error >= 0.0)) {
        throw ContractViolation("bound_value: approx error < 0");
    }
    BoundResult out;
    out.theta = 2.0 * std::sqrt(2.0 * sup_norm * sup_norm * std::log(1.0 / delta) /
                                static_cast<double>(count)) +
                2.0 * std::sqrt(variance) + approx_error;
    out.clamped = out.theta > 1.0;
    out.value = psi_inverse_exp(std::min(out.theta, 1.0));
    return out;
}

inline void to_json(nlohmann::json& j, const MomentReport& r) {
    j = nlohmann::json{{"kind", to_string(r.kind)},   {"loss", to_string(r.loss)},
                       {"K", r.set_size},             {"m", r.cycles},
                       {"trials", r.trials},          {"mean", r.mean},
                       {"variance", r.variance},      {"se_mean", r.se_mean},
                       {"se_variance", r.se_variance}};
}

inline void to_json(nlohmann::json& j, const GapReport& r) {
    j = nlohmann::json{{"loss", to_string(r.loss)},
                       {"K", r.set_size},
                       {"m", r.cycles},
                       {"trials", r.trials},
                       {"seed", r.seed},
                       {"order_stat_means", r.order_stat_means},
                       {"exact", nlohmann::json{{"mean", r.exact_mean},
                                                 {"var_srs", r.exact_var_srs},
                                                 {"var_rss", r.exact_var_rss},
                                                 {"gap", r.exact_gap}}}};
    j["closed_form_gap"] =
        r.has_closed_form ? nlohmann::json(r.closed_form_gap) : nlohmann::json();
    if (r.has_mc) {
        j["mc"] = nlohmann::json{{"var_srs", r.mc_var_srs},
                                 {"var_rss", r.mc_var_rss},
                                 {"gap", r.mc_gap},
                                 {"se_gap", r.se_gap},
                                 {"z_score", r.z_score},
                                 {"within_four_sigma", r.within_four_sigma}};
    }
}

inline void to_json(nlohmann::json& j, const BoundResult& r) {
    j = nlohmann::json{{"theta", r.theta}, {"value", r.value}, {"clamped", r.clamped}};
}

}  // namespace rssmlp
