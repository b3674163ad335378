#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "rssmlp/benchmark.hpp"
#include "rssmlp/synthetic.hpp"

namespace {

using namespace rssmlp;

BenchmarkConfig quick_config(const std::string& name, std::uint64_t seed) {
    BenchmarkConfig cfg;
    cfg.dataset_name = name;
    cfg.T = 3;
    cfg.repeats = 2;
    cfg.mlp.hidden_dims = {8, 4};
    cfg.mlp.epochs = 4;
    cfg.seed = seed;
    return cfg;
}

TEST(synthetic, twonorm_shape_balance_and_determinism) {
    const Dataset a = make_twonorm(200, 20, 7);
    EXPECT_EQ(a.size(), 200u);
    EXPECT_EQ(a.dim(), 20u);
    EXPECT_EQ(a.class_count(), 2);
    int pos = 0;
    for (int y : a.labels) pos += y;
    EXPECT_EQ(pos, 100);
    const Dataset b = make_twonorm(200, 20, 7);
    EXPECT_EQ(a.features.data, b.features.data);
    const Dataset c = make_twonorm(200, 20, 8);
    EXPECT_NE(a.features.data, c.features.data);
    // Class-conditional feature means straddle zero at +-2/sqrt(d).
    double neg_mean = 0.0, pos_mean = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a.dim(); ++j) {
            (a.labels[i] == 0 ? neg_mean : pos_mean) += a.features(i, j);
        }
    }
    neg_mean /= 100.0 * 20.0;
    pos_mean /= 100.0 * 20.0;
    const double shift = 2.0 / std::sqrt(20.0);
    EXPECT_NEAR(neg_mean, -shift, 0.1);
    EXPECT_NEAR(pos_mean, shift, 0.1);
}

TEST(synthetic, blobs_shape_and_validation) {
    const Dataset ds = make_blobs(150, 8, 3, 3.0, 5);
    EXPECT_EQ(ds.size(), 150u);
    EXPECT_EQ(ds.dim(), 8u);
    EXPECT_EQ(ds.class_count(), 3);
    std::vector<int> counts(3, 0);
    for (int y : ds.labels) ++counts[static_cast<std::size_t>(y)];
    EXPECT_EQ(counts, (std::vector<int>{50, 50, 50}));
    EXPECT_THROW(make_blobs(100, 2, 3, 3.0, 5), ContractViolation);
    EXPECT_THROW(make_blobs(1, 8, 3, 3.0, 5), ContractViolation);
    // Center of class c sits at +separation on coordinate c.
    double on_axis = 0.0;
    int n0 = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] == 0) {
            on_axis += ds.features(i, 0);
            ++n0;
        }
    }
    EXPECT_NEAR(on_axis / n0, 3.0, 0.5);
}

TEST(benchmark, record_layout_and_shared_splits) {
    const Dataset data = make_blobs(150, 8, 3, 3.0, 11);
    const BenchmarkConfig cfg = quick_config("blobs", 42);
    const BenchmarkResult res = run_benchmark(cfg, data);
    ASSERT_EQ(res.records.size(), 4u);  // 2 repeats x 2 methods
    ASSERT_EQ(res.splits.size(), 2u);
    for (int r = 0; r < 2; ++r) {
        const MetricRecord& srs = res.records[static_cast<std::size_t>(2 * r)];
        const MetricRecord& rss = res.records[static_cast<std::size_t>(2 * r + 1)];
        EXPECT_EQ(srs.method, "SRS-MLP");
        EXPECT_EQ(rss.method, "RSS-MLP");
        EXPECT_EQ(srs.repeat, r);
        EXPECT_EQ(rss.repeat, r);
        EXPECT_EQ(srs.dataset, "blobs");
        for (const MetricRecord* rec : {&srs, &rss}) {
            EXPECT_GE(rec->accuracy, 0.0);
            EXPECT_LE(rec->accuracy, 1.0);
            EXPECT_GE(rec->macro_f1, 0.0);
            EXPECT_LE(rec->macro_f1, 1.0);
        }
    }
    EXPECT_EQ(res.splits[0].train.size(), 105u);  // floor(0.7 * 150)
    EXPECT_TRUE(res.warnings.empty());
}

TEST(benchmark, reruns_and_worker_counts_are_byte_identical) {
    const Dataset data = make_blobs(120, 8, 3, 3.0, 12);
    const BenchmarkConfig cfg = quick_config("blobs", 9);
    const BenchmarkResult a = run_benchmark(cfg, data, 1);
    const BenchmarkResult b = run_benchmark(cfg, data, 1);
    const BenchmarkResult c = run_benchmark(cfg, data, 4);
    EXPECT_EQ(ledger_to_csv(a.records), ledger_to_csv(b.records));
    EXPECT_EQ(ledger_to_csv(a.records), ledger_to_csv(c.records));
}

TEST(benchmark, seed_changes_results) {
    const Dataset data = make_blobs(120, 8, 3, 3.0, 13);
    const BenchmarkResult a = run_benchmark(quick_config("blobs", 1), data);
    const BenchmarkResult b = run_benchmark(quick_config("blobs", 2), data);
    EXPECT_NE(ledger_to_csv(a.records), ledger_to_csv(b.records));
}

TEST(benchmark, oversized_set_size_downgrades_with_warning) {
    const Dataset data = make_blobs(100, 8, 3, 3.0, 14);
    BenchmarkConfig cfg = quick_config("blobs", 3);
    cfg.set_size = 50;  // needs 2500 candidates; train pool has 70
    const BenchmarkResult res = run_benchmark(cfg, data);
    ASSERT_EQ(res.warnings.size(), 1u);
    EXPECT_NE(res.warnings[0].find("downgrading to 8"), std::string::npos);
    EXPECT_EQ(res.records.size(), 4u);
}

TEST(benchmark, learns_separable_blobs) {
    const Dataset data = make_blobs(150, 8, 3, 4.0, 15);
    BenchmarkConfig cfg = quick_config("blobs", 21);
    cfg.repeats = 1;
    cfg.mlp.epochs = 30;  // plain gradient descent needs the updates
    cfg.mlp.learning_rate = 0.05;
    const BenchmarkResult res = run_benchmark(cfg, data);
    for (const MetricRecord& rec : res.records) EXPECT_GT(rec.accuracy, 0.8);
}

TEST(benchmark, config_json_round_trip) {
    BenchmarkConfig cfg = quick_config("demo", 77);
    cfg.set_size = 5;
    cfg.cycles = 12;
    cfg.loss = LossKind::Log;
    cfg.fusion = FusionKind::Vote;
    const nlohmann::json j = cfg;
    const auto back = j.get<BenchmarkConfig>();
    EXPECT_EQ(nlohmann::json(back), j);
}

TEST(benchmark, rejects_bad_config) {
    const Dataset data = make_blobs(60, 8, 3, 3.0, 16);
    BenchmarkConfig cfg = quick_config("", 1);
    EXPECT_THROW(run_benchmark(cfg, data), ContractViolation);
    cfg = quick_config("x", 1);
    cfg.repeats = 0;
    EXPECT_THROW(run_benchmark(cfg, data), ContractViolation);
}

}  // namespace
