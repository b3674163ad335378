#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rssmlp/dataset.hpp"
#include "rssmlp/ensemble.hpp"
#include "rssmlp/error.hpp"
#include "rssmlp/metrics.hpp"
#include "rssmlp/rng.hpp"
#include "rssmlp/stats.hpp"

namespace rssmlp {

inline constexpr const char* kMethodSrs = "SRS-MLP";
inline constexpr const char* kMethodRss = "RSS-MLP";

struct BenchmarkConfig {
    std::string dataset_name;
    int T = 51;
    int repeats = 5;
    double train_ratio = 0.7;
    LossKind loss = LossKind::Exp;
    FusionKind fusion = FusionKind::Mean;
    std::size_t set_size = 0;  // 0 derives K from the train pool
    std::size_t cycles = 0;    // 0 derives m from the train pool
    MlpConfig mlp;
    std::uint64_t seed = 0;

    void validate() const {
        if (dataset_name.empty()) {
            throw ContractViolation("benchmark config: dataset_name is empty");
        }
        if (T < 1) throw ContractViolation("benchmark config: T must be >= 1");
        if (repeats < 1) {
            throw ContractViolation("benchmark config: repeats must be >= 1");
        }
    }
};

struct BenchmarkResult {
    std::vector<MetricRecord> records;  // repeat-major, SRS before RSS
    std::vector<SplitPlan> splits;
    std::vector<std::string> warnings;
};

// Both methods see the same splits, the same standardization, and the same
// per-repeat seed; only the sampling scheme differs. An oversized rank-set
// size is downgraded to the largest feasible one with a warning instead of
// failing the whole run.
inline BenchmarkResult run_benchmark(const BenchmarkConfig& config,
                                     const Dataset& data, std::size_t workers = 1) {
    config.validate();
    data.validate();
    BenchmarkResult result;
    result.splits = make_splits(data.size(), config.train_ratio, config.repeats,
                                config.seed);
    const std::size_t train_n = result.splits.front().train.size();
    std::size_t set_size = config.set_size;
    if (set_size != 0 && set_size * set_size > train_n) {
        const auto feasible = static_cast<std::size_t>(
            std::floor(std::sqrt(static_cast<double>(train_n))));
        result.warnings.push_back(
            "rank-set size " + std::to_string(set_size) + " needs " +
            std::to_string(set_size * set_size) + " candidates per cycle; train pool "
            "has " + std::to_string(train_n) + " rows, downgrading to " +
            std::to_string(feasible));
        set_size = feasible;
    }
    for (int r = 0; r < config.repeats; ++r) {
        const SplitPlan& split = result.splits[static_cast<std::size_t>(r)];
        Dataset train = subset(data, split.train);
        Dataset test = subset(data, split.test);
        const FeatureScaler scaler = FeatureScaler::fit(train.features);
        train.features = scaler.transform(train.features);
        test.features = scaler.transform(test.features);
        const std::uint64_t repeat_seed =
            hash_combine(config.seed, static_cast<std::uint64_t>(r));
        for (const SamplerKind kind : {SamplerKind::Srs, SamplerKind::Rss}) {
            EnsembleConfig ens;
            ens.T = config.T;
            ens.sampler.kind = kind;
            ens.sampler.set_size = set_size;
            ens.sampler.cycles = config.cycles;
            ens.mlp = config.mlp;
            ens.mlp.seed = repeat_seed;
            ens.loss = config.loss;
            ens.fusion = config.fusion;
            ens.seed = repeat_seed;
            const EnsembleModel model = train_ensemble(ens, train, workers);
            const std::vector<int> pred = ensemble_predict(model, test.features);
            MetricRecord record;
            record.dataset = config.dataset_name;
            record.method = kind == SamplerKind::Srs ? kMethodSrs : kMethodRss;
            record.repeat = r;
            record.accuracy = accuracy(test.labels, pred);
            record.macro_f1 = macro_f1(test.labels, pred, data.class_count());
            result.records.push_back(std::move(record));
        }
    }
    return result;
}

inline void to_json(nlohmann::json& j, const BenchmarkConfig& c) {
    j = nlohmann::json{{"dataset_name", c.dataset_name},
                       {"T", c.T},
                       {"repeats", c.repeats},
                       {"train_ratio", c.train_ratio},
                       {"loss", to_string(c.loss)},
                       {"fusion", to_string(c.fusion)},
                       {"set_size", c.set_size},
                       {"cycles", c.cycles},
                       {"mlp", c.mlp},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, BenchmarkConfig& c) {
    j.at("dataset_name").get_to(c.dataset_name);
    j.at("T").get_to(c.T);
    j.at("repeats").get_to(c.repeats);
    j.at("train_ratio").get_to(c.train_ratio);
    c.loss = parse_loss(j.at("loss").get<std::string>());
    c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    j.at("set_size").get_to(c.set_size);
    j.at("cycles").get_to(c.cycles);
    j.at("mlp").get_to(c.mlp);
    j.at("seed").get_to(c.seed);
}

}  // namespace rssmlp
