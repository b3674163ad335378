#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rssmlp/dataset.hpp"
#include "rssmlp/error.hpp"
#include "rssmlp/ranking.hpp"
#include "rssmlp/rng.hpp"

namespace rssmlp {

// Cheap scalar ranking score s(x) = sum_j w_j x_j used to order units inside
// a ranked-set group. Judgment quality only affects efficiency, never
// validity, so a linear proxy is enough.
struct ScoreFunction {
    std::vector<double> weights;

    double score(std::span<const double> row) const {
        if (row.size() != weights.size()) {
            throw ContractViolation("ScoreFunction: dimension mismatch");
        }
        double s = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) s += weights[j] * row[j];
        return s;
    }

    std::vector<double> score_all(const Matrix& x) const {
        std::vector<double> out(x.rows);
        for (std::size_t i = 0; i < x.rows; ++i) out[i] = score(x.row_span(i));
        return out;
    }
};

// Weights are Spearman correlations between each feature column and the
// integer-coded label; columns where the correlation is undefined (constant
// feature, or constant labels) get weight zero.
inline ScoreFunction fit_score_function(const Dataset& train) {
    train.validate();
    if (train.size() < 2) {
        throw ContractViolation("fit_score_function: need at least 2 rows");
    }
    std::vector<double> y(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        y[i] = static_cast<double>(train.labels[i]);
    }
    ScoreFunction fn;
    fn.weights.resize(train.dim(), 0.0);
    std::vector<double> column(train.size());
    for (std::size_t j = 0; j < train.dim(); ++j) {
        for (std::size_t i = 0; i < train.size(); ++i) column[i] = train.features(i, j);
        try {
            fn.weights[j] = spearman(column, y);
        } catch (const DomainError&) {
            fn.weights[j] = 0.0;
        }
    }
    return fn;
}

enum class SamplerKind { Srs, Rss };

inline SamplerKind parse_sampler(const std::string& s) {
    if (s == "srs") return SamplerKind::Srs;
    if (s == "rss") return SamplerKind::Rss;
    throw ContractViolation("unknown sampler '" + s + "' (expected srs|rss)");
}

inline const char* to_string(SamplerKind k) {
    return k == SamplerKind::Srs ? "srs" : "rss";
}

// K = set size (group size and number of groups per cycle), m = cycle count.
// Zero means "derive from the pool size": K = floor(sqrt(n)), m = floor(n/K).
struct SamplerConfig {
    SamplerKind kind = SamplerKind::Rss;
    std::size_t set_size = 0;
    std::size_t cycles = 0;
    std::uint64_t seed = 0;
};

struct ResolvedSampler {
    SamplerKind kind = SamplerKind::Rss;
    std::size_t set_size = 0;
    std::size_t cycles = 0;

    std::size_t sample_size() const { return set_size * cycles; }
};

inline ResolvedSampler resolve_sampler(const SamplerConfig& cfg, std::size_t pool_size) {
    if (pool_size == 0) throw ContractViolation("resolve_sampler: empty pool");
    ResolvedSampler r;
    r.kind = cfg.kind;
    r.set_size = cfg.set_size != 0
                     ? cfg.set_size
                     : static_cast<std::size_t>(
                           std::floor(std::sqrt(static_cast<double>(pool_size))));
    if (r.set_size == 0) r.set_size = 1;
    r.cycles = cfg.cycles != 0 ? cfg.cycles : pool_size / r.set_size;
    if (r.cycles == 0) {
        throw ContractViolation("resolve_sampler: cycle count resolves to zero");
    }
    if (cfg.kind == SamplerKind::Rss && r.set_size * r.set_size > pool_size) {
        throw InfeasibleError("rss needs K*K = " +
                              std::to_string(r.set_size * r.set_size) +
                              " candidates per cycle but the pool has only " +
                              std::to_string(pool_size));
    }
    return r;
}

// Uniform draws with replacement; the plain bootstrap baseline.
inline std::vector<std::uint32_t> srs_sample(std::size_t pool_size, std::size_t count,
                                             RngStream& rng) {
    if (pool_size == 0) throw ContractViolation("srs_sample: empty pool");
    std::vector<std::uint32_t> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = static_cast<std::uint32_t>(rng.next_below(pool_size));
    }
    return out;
}

// From K groups of K candidates (group g at [g*K, (g+1)*K)), keep the
// (g+1)-th smallest of group g by score, ties broken by index. Exposed
// separately so the order-statistic selection is testable on forced groups.
inline std::vector<std::uint32_t> select_order_statistics(
    std::span<const std::uint32_t> grouped, std::size_t set_size,
    std::span<const double> scores) {
    if (grouped.size() != set_size * set_size) {
        throw ContractViolation("select_order_statistics: need K*K candidates");
    }
    std::vector<std::uint32_t> kept(set_size);
    std::vector<std::uint32_t> group(set_size);
    for (std::size_t g = 0; g < set_size; ++g) {
        const auto begin = grouped.begin() + static_cast<std::ptrdiff_t>(g * set_size);
        std::copy(begin, begin + static_cast<std::ptrdiff_t>(set_size), group.begin());
        std::sort(group.begin(), group.end(), [&](std::uint32_t a, std::uint32_t b) {
            if (scores[a] != scores[b]) return scores[a] < scores[b];
            return a < b;
        });
        kept[g] = group[g];
    }
    return kept;
}

// One ranked-set cycle over the full pool: draw K*K distinct units, split
// them into K random groups of K in draw order, keep one order statistic per
// group. pool must hold a permutation of the unit ids; its order is scratch
// state and every cycle re-randomizes the prefix, so consecutive calls see
// the whole pool each time.
inline std::vector<std::uint32_t> rss_cycle(std::vector<std::uint32_t>& pool,
                                            std::size_t set_size,
                                            std::span<const double> scores,
                                            RngStream& rng) {
    const std::size_t need = set_size * set_size;
    if (need > pool.size()) {
        throw InfeasibleError("rss_cycle: K*K = " + std::to_string(need) +
                              " exceeds pool size " + std::to_string(pool.size()));
    }
    rng.partial_shuffle(pool, need);
    return select_order_statistics({pool.data(), need}, set_size, scores);
}

// Which cycle a kept unit came from and which order statistic it was
// (rank 1 = smallest score in its group).
struct RankAnnotation {
    std::uint32_t cycle = 0;
    std::uint32_t rank = 0;
};

inline constexpr std::uint64_t kStreamPlan = 201;

// Reproducible recipe for one base classifier's training multiset.
struct SamplingPlan {
    SamplerKind kind = SamplerKind::Rss;
    std::size_t set_size = 0;
    std::size_t cycles = 0;
    std::uint64_t seed = 0;
    std::uint32_t classifier_id = 0;
    std::vector<std::uint32_t> indices;
    std::vector<RankAnnotation> ranks;  // parallel to indices; empty for srs
};

inline SamplingPlan build_plan(const SamplerConfig& cfg, const Dataset& pool,
                               const ScoreFunction& score_fn,
                               std::uint32_t classifier_id) {
    const ResolvedSampler r = resolve_sampler(cfg, pool.size());
    SamplingPlan plan;
    plan.kind = r.kind;
    plan.set_size = r.set_size;
    plan.cycles = r.cycles;
    plan.seed = cfg.seed;
    plan.classifier_id = classifier_id;
    RngStream rng = RngStream(cfg.seed, kStreamPlan).substream(classifier_id);
    if (r.kind == SamplerKind::Srs) {
        plan.indices = srs_sample(pool.size(), r.sample_size(), rng);
        return plan;
    }
    const std::vector<double> scores = score_fn.score_all(pool.features);
    std::vector<std::uint32_t> scratch(pool.size());
    std::iota(scratch.begin(), scratch.end(), 0U);
    plan.indices.reserve(r.sample_size());
    plan.ranks.reserve(r.sample_size());
    for (std::size_t c = 0; c < r.cycles; ++c) {
        const std::vector<std::uint32_t> kept = rss_cycle(scratch, r.set_size, scores, rng);
        for (std::size_t g = 0; g < kept.size(); ++g) {
            plan.indices.push_back(kept[g]);
            plan.ranks.push_back({static_cast<std::uint32_t>(c),
                                  static_cast<std::uint32_t>(g + 1)});
        }
    }
    return plan;
}

inline Dataset materialize(const Dataset& pool, const SamplingPlan& plan) {
    std::vector<std::size_t> idx(plan.indices.begin(), plan.indices.end());
    return subset(pool, idx);
}

inline void to_json(nlohmann::json& j, const RankAnnotation& a) {
    j = nlohmann::json{{"cycle", a.cycle}, {"rank", a.rank}};
}

inline void from_json(const nlohmann::json& j, RankAnnotation& a) {
    j.at("cycle").get_to(a.cycle);
    j.at("rank").get_to(a.rank);
}

inline void to_json(nlohmann::json& j, const SamplingPlan& p) {
    j = nlohmann::json{{"kind", to_string(p.kind)}, {"K", p.set_size},
                       {"m", p.cycles},            {"seed", p.seed},
                       {"classifier_id", p.classifier_id},
                       {"indices", p.indices},     {"ranks", p.ranks}};
}

inline void from_json(const nlohmann::json& j, SamplingPlan& p) {
    p.kind = parse_sampler(j.at("kind").get<std::string>());
    j.at("K").get_to(p.set_size);
    j.at("m").get_to(p.cycles);
    j.at("seed").get_to(p.seed);
    j.at("classifier_id").get_to(p.classifier_id);
    j.at("indices").get_to(p.indices);
    j.at("ranks").get_to(p.ranks);
}

}  // namespace rssmlp
