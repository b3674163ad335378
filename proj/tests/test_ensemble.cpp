#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rssmlp/ensemble.hpp"
#include "rssmlp/stats.hpp"

namespace {

using namespace rssmlp;

Dataset blob_pool(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed, 88);
    Dataset ds;
    ds.features = Matrix(n, 2);
    ds.labels.resize(n);
    ds.feature_names = {"x0", "x1"};
    ds.label_names = {"a", "b"};
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double center = label == 0 ? -2.0 : 2.0;
        ds.features(i, 0) = center + 0.7 * rng.next_normal();
        ds.features(i, 1) = center + 0.7 * rng.next_normal();
        ds.labels[i] = label;
    }
    return ds;
}

EnsembleConfig small_config(int t_count, FusionKind fusion) {
    EnsembleConfig cfg;
    cfg.T = t_count;
    cfg.sampler.kind = SamplerKind::Rss;
    cfg.mlp.hidden_dims = {8, 4};
    cfg.mlp.epochs = 5;
    cfg.loss = LossKind::Exp;
    cfg.fusion = fusion;
    cfg.seed = 33;
    return cfg;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path("/tmp/rssmlp_" + name) {
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

TEST(ensemble_config, validation_and_parsing) {
    EnsembleConfig cfg = small_config(0, FusionKind::Mean);
    EXPECT_THROW(cfg.validate(), ContractViolation);
    EXPECT_EQ(parse_fusion("vote"), FusionKind::Vote);
    EXPECT_EQ(parse_fusion("mean"), FusionKind::Mean);
    EXPECT_THROW(parse_fusion("max"), ContractViolation);
    EXPECT_STREQ(to_string(FusionKind::Vote), "vote");
}

TEST(ensemble_train, structure_and_plan_ids) {
    const Dataset pool = blob_pool(120, 1);
    const EnsembleModel model = train_ensemble(small_config(5, FusionKind::Mean), pool);
    ASSERT_EQ(model.members.size(), 5u);
    ASSERT_EQ(model.plans.size(), 5u);
    for (std::size_t t = 0; t < 5; ++t) {
        EXPECT_EQ(model.plans[t].classifier_id, t);
        EXPECT_EQ(model.plans[t].kind, SamplerKind::Rss);
        EXPECT_FALSE(model.plans[t].ranks.empty());
        EXPECT_EQ(model.plans[t].indices.size(),
                  model.plans[t].set_size * model.plans[t].cycles);
    }
    EXPECT_NE(model.plans[0].indices, model.plans[1].indices);
    // Dims were auto-filled from the pool.
    EXPECT_EQ(model.config.mlp.input_dim, 2);
    EXPECT_EQ(model.config.mlp.output_dim, 2);
}

TEST(ensemble_train, srs_sampler_has_no_ranks) {
    const Dataset pool = blob_pool(100, 2);
    EnsembleConfig cfg = small_config(3, FusionKind::Vote);
    cfg.sampler.kind = SamplerKind::Srs;
    const EnsembleModel model = train_ensemble(cfg, pool);
    for (const SamplingPlan& plan : model.plans) {
        EXPECT_EQ(plan.kind, SamplerKind::Srs);
        EXPECT_TRUE(plan.ranks.empty());
    }
}

TEST(ensemble_train, single_member_matches_plain_model) {
    const Dataset pool = blob_pool(100, 3);
    for (const FusionKind fusion : {FusionKind::Vote, FusionKind::Mean}) {
        EnsembleConfig cfg = small_config(1, fusion);
        const EnsembleModel ens = train_ensemble(cfg, pool);
        const std::vector<int> fused = ensemble_predict(ens, pool.features);
        const std::vector<int> direct = predict_labels(ens.members[0], pool.features);
        EXPECT_EQ(fused, direct);
    }
}

TEST(ensemble_train, worker_count_does_not_change_serialized_result) {
    const Dataset pool = blob_pool(120, 4);
    const EnsembleConfig cfg = small_config(3, FusionKind::Mean);
    const EnsembleModel serial = train_ensemble(cfg, pool, 1);
    const EnsembleModel threaded = train_ensemble(cfg, pool, 4);
    TempDir d1("ens_w1"), d4("ens_w4");
    save_ensemble(serial, d1.path.string());
    save_ensemble(threaded, d4.path.string());
    const auto names = {"manifest.json", "model_000.json", "model_001.json",
                        "model_002.json"};
    for (const char* name : names) {
        const std::string a = slurp(d1.path / name);
        const std::string b = slurp(d4.path / name);
        ASSERT_FALSE(a.empty());
        EXPECT_EQ(a, b) << name;
    }
}

TEST(ensemble_train, deterministic_per_seed) {
    const Dataset pool = blob_pool(100, 5);
    const EnsembleConfig cfg = small_config(2, FusionKind::Mean);
    const EnsembleModel a = train_ensemble(cfg, pool);
    const EnsembleModel b = train_ensemble(cfg, pool);
    EnsembleConfig other = cfg;
    other.seed = 34;
    const EnsembleModel c = train_ensemble(other, pool);
    EXPECT_EQ(model_to_json(a.members[0]), model_to_json(b.members[0]));
    EXPECT_EQ(a.plans[1].indices, b.plans[1].indices);
    EXPECT_NE(model_to_json(a.members[0]), model_to_json(c.members[0]));
}

TEST(ensemble_train, member_failure_names_the_classifier) {
    const Dataset pool = blob_pool(80, 6);
    EnsembleConfig cfg = small_config(2, FusionKind::Mean);
    cfg.mlp.learning_rate = 1e9;  // guaranteed divergence
    try {
        train_ensemble(cfg, pool);
        FAIL() << "expected TrainingError";
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("classifier"), std::string::npos);
    }
}

TEST(ensemble_train, rejects_mismatched_dims) {
    const Dataset pool = blob_pool(80, 7);
    EnsembleConfig cfg = small_config(2, FusionKind::Mean);
    cfg.mlp.input_dim = 9;
    EXPECT_THROW(train_ensemble(cfg, pool), ContractViolation);
    cfg = small_config(2, FusionKind::Mean);
    cfg.mlp.output_dim = 1;  // fewer outputs than classes
    EXPECT_THROW(train_ensemble(cfg, pool), ContractViolation);
}

TEST(ensemble_predict, fusion_is_invariant_to_member_order) {
    const Dataset pool = blob_pool(120, 8);
    for (const FusionKind fusion : {FusionKind::Vote, FusionKind::Mean}) {
        const EnsembleModel model = train_ensemble(small_config(5, fusion), pool);
        EnsembleModel reversed = model;
        std::reverse(reversed.members.begin(), reversed.members.end());
        EXPECT_EQ(ensemble_predict(model, pool.features),
                  ensemble_predict(reversed, pool.features));
    }
}

TEST(ensemble_predict, fusions_agree_on_unanimous_rows) {
    const Dataset pool = blob_pool(150, 9);
    EnsembleConfig cfg = small_config(5, FusionKind::Vote);
    cfg.mlp.epochs = 20;  // converged members agree on most of the pool
    EnsembleModel model = train_ensemble(cfg, pool);
    const std::vector<int> vote = ensemble_predict(model, pool.features);
    model.config.fusion = FusionKind::Mean;
    const std::vector<int> mean = ensemble_predict(model, pool.features);
    std::vector<std::vector<int>> per_member;
    for (const MlpModel& m : model.members) {
        per_member.push_back(predict_labels(m, pool.features));
    }
    std::size_t unanimous = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        bool all_same = true;
        for (const auto& pred : per_member) all_same &= pred[i] == per_member[0][i];
        if (all_same) {
            ++unanimous;
            EXPECT_EQ(vote[i], per_member[0][i]);
            EXPECT_EQ(mean[i], per_member[0][i]);
        }
    }
    EXPECT_GT(unanimous, pool.size() / 2);  // blobs are easy, most rows unanimous
}

TEST(ensemble_predict, vote_ties_go_to_lowest_class_id) {
    // Two hand-built single-layer members that disagree on every row.
    MlpConfig cfg;
    cfg.input_dim = 1;
    cfg.hidden_dims = {};
    cfg.output_dim = 2;
    cfg.batch_norm = false;
    RngStream rng(1, 1);
    MlpModel up = mlp_init(cfg, rng);
    up.layers[0].weight.data = {0.0, 0.0};
    up.layers[0].bias = {0.0, 1.0};  // always predicts class 1
    MlpModel down = up;
    down.layers[0].bias = {1.0, 0.0};  // always predicts class 0
    EnsembleModel model;
    model.config.T = 2;
    model.config.mlp = cfg;
    model.config.fusion = FusionKind::Vote;
    model.label_names = {"a", "b"};
    model.members = {up, down};
    model.plans.resize(2);
    const Matrix x(3, 1, {0.0, 1.0, -1.0});
    EXPECT_EQ(ensemble_predict(model, x), (std::vector<int>{0, 0, 0}));
}

TEST(ensemble_predict, mean_scores_average_members) {
    MlpConfig cfg;
    cfg.input_dim = 1;
    cfg.hidden_dims = {};
    cfg.output_dim = 2;
    cfg.batch_norm = false;
    RngStream rng(2, 1);
    MlpModel a = mlp_init(cfg, rng);
    a.layers[0].weight.data = {0.0, 0.0};
    a.layers[0].bias = {2.0, 0.0};
    MlpModel b = a;
    b.layers[0].bias = {0.0, 1.0};
    EnsembleModel model;
    model.config.T = 2;
    model.config.mlp = cfg;
    model.config.fusion = FusionKind::Mean;
    model.label_names = {"a", "b"};
    model.members = {a, b};
    model.plans.resize(2);
    const Matrix x(1, 1, {0.5});
    const Matrix scores = ensemble_mean_scores(model, x);
    EXPECT_DOUBLE_EQ(scores(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(scores(0, 1), 0.5);
    EXPECT_EQ(ensemble_predict(model, x), (std::vector<int>{0}));
}

TEST(ensemble_io, directory_round_trip_preserves_predictions) {
    const Dataset pool = blob_pool(100, 10);
    EnsembleConfig cfg = small_config(3, FusionKind::Mean);
    EnsembleModel model = train_ensemble(cfg, pool);
    model.scaler = FeatureScaler::fit(pool.features);
    TempDir dir("ens_roundtrip");
    save_ensemble(model, dir.path.string());
    const EnsembleModel loaded = load_ensemble(dir.path.string());
    EXPECT_EQ(loaded.label_names, model.label_names);
    ASSERT_TRUE(loaded.scaler.has_value());
    EXPECT_EQ(loaded.scaler->mean, model.scaler->mean);
    EXPECT_EQ(loaded.plans[2].indices, model.plans[2].indices);
    const std::vector<int> before = ensemble_predict(model, pool.features);
    const std::vector<int> after = ensemble_predict(loaded, pool.features);
    EXPECT_EQ(before, after);
    const Matrix sa = ensemble_mean_scores(model, pool.features);
    const Matrix sb = ensemble_mean_scores(loaded, pool.features);
    for (std::size_t i = 0; i < sa.data.size(); ++i) EXPECT_EQ(sa.data[i], sb.data[i]);
}

TEST(ensemble_io, decode_predictions_maps_names) {
    EnsembleModel model;
    model.label_names = {"no", "yes"};
    EXPECT_EQ(decode_predictions(model, {1, 0, 1}),
              (std::vector<std::string>{"yes", "no", "yes"}));
    EXPECT_THROW(decode_predictions(model, {2}), ContractViolation);
}

TEST(ensemble_io, load_rejects_missing_or_tampered) {
    EXPECT_THROW(load_ensemble("/nonexistent/dir"), IoError);
    const Dataset pool = blob_pool(80, 11);
    const EnsembleModel model = train_ensemble(small_config(2, FusionKind::Mean), pool);
    TempDir dir("ens_tamper");
    save_ensemble(model, dir.path.string());
    // Corrupt the manifest version.
    nlohmann::json manifest;
    {
        std::ifstream in(dir.path / "manifest.json");
        in >> manifest;
    }
    manifest["version"] = "0.0.1";
    {
        std::ofstream out(dir.path / "manifest.json", std::ios::binary);
        out << manifest.dump(2) << '\n';
    }
    EXPECT_THROW(load_ensemble(dir.path.string()), ParseError);
}

}  // namespace
