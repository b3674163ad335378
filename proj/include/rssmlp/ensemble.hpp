#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rssmlp/dataset.hpp"
#include "rssmlp/error.hpp"
#include "rssmlp/losses.hpp"
#include "rssmlp/matrix.hpp"
#include "rssmlp/mlp.hpp"
#include "rssmlp/parallel.hpp"
#include "rssmlp/rng.hpp"
#include "rssmlp/sampling.hpp"
#include "rssmlp/version.hpp"

namespace rssmlp {

inline constexpr std::uint64_t kStreamTrain = 301;

enum class FusionKind { Vote, Mean };

inline FusionKind parse_fusion(const std::string& s) {
    if (s == "vote") return FusionKind::Vote;
    if (s == "mean") return FusionKind::Mean;
    throw ContractViolation("unknown fusion '" + s + "' (expected vote|mean)");
}

inline const char* to_string(FusionKind k) {
    return k == FusionKind::Vote ? "vote" : "mean";
}

struct EnsembleConfig {
    int T = 51;
    SamplerConfig sampler;
    MlpConfig mlp;
    LossKind loss = LossKind::Exp;
    FusionKind fusion = FusionKind::Mean;
    std::uint64_t seed = 0;

    void validate() const {
        if (T < 1) throw ContractViolation("ensemble config: T must be >= 1");
    }
};

struct EnsembleModel {
    EnsembleConfig config;
    std::vector<std::string> label_names;
    std::optional<FeatureScaler> scaler;  // set when the pipeline standardized
    std::vector<SamplingPlan> plans;
    std::vector<MlpModel> members;
};

// One bagging round: every base classifier gets its own sampling plan and its
// own training stream, both keyed by the classifier id, so the result does
// not depend on how the work is spread over threads.
inline EnsembleModel train_ensemble(EnsembleConfig config, const Dataset& pool,
                                    std::size_t workers = 1) {
    config.validate();
    pool.validate();
    if (config.mlp.input_dim == 0) {
        config.mlp.input_dim = static_cast<int>(pool.dim());
    }
    if (config.mlp.output_dim == 0) config.mlp.output_dim = pool.class_count();
    if (config.mlp.input_dim != static_cast<int>(pool.dim())) {
        throw ContractViolation("ensemble: mlp input_dim != pool feature count");
    }
    if (config.mlp.output_dim < pool.class_count()) {
        throw ContractViolation("ensemble: mlp output_dim < pool class count");
    }
    config.mlp.validate();
    config.sampler.seed = config.seed;
    const ScoreFunction score_fn = fit_score_function(pool);

    EnsembleModel model;
    model.config = config;
    model.label_names = pool.label_names;
    const auto t_count = static_cast<std::size_t>(config.T);
    model.plans.resize(t_count);
    model.members.resize(t_count);
    parallel_for(t_count, workers, [&](std::size_t t) {
        try {
            model.plans[t] = build_plan(config.sampler, pool, score_fn,
                                        static_cast<std::uint32_t>(t));
            const Dataset sample = materialize(pool, model.plans[t]);
            RngStream rng = RngStream(config.seed, kStreamTrain).substream(t);
            auto [member, trace] =
                mlp_train(config.mlp, sample.features, sample.labels, config.loss, rng);
            model.members[t] = std::move(member);
        } catch (const Error& e) {
            throw TrainingError("classifier " + std::to_string(t) + ": " + e.what());
        }
    });
    return model;
}

// Mean fusion: average the raw member scores, then argmax.
inline Matrix ensemble_mean_scores(const EnsembleModel& model, const Matrix& features) {
    if (model.members.empty()) throw ContractViolation("ensemble: no members");
    const Matrix x = model.scaler ? model.scaler->transform(features) : features;
    Matrix sum = predict_scores(model.members.front(), x);
    for (std::size_t t = 1; t < model.members.size(); ++t) {
        const Matrix s = predict_scores(model.members[t], x);
        for (std::size_t e = 0; e < sum.data.size(); ++e) sum.data[e] += s.data[e];
    }
    const double inv = 1.0 / static_cast<double>(model.members.size());
    for (double& v : sum.data) v *= inv;
    return sum;
}

inline std::vector<int> ensemble_predict(const EnsembleModel& model,
                                         const Matrix& features) {
    if (model.members.empty()) throw ContractViolation("ensemble: no members");
    if (model.config.fusion == FusionKind::Mean) {
        const Matrix scores = ensemble_mean_scores(model, features);
        std::vector<int> labels(scores.rows);
        for (std::size_t i = 0; i < scores.rows; ++i) {
            labels[i] = argmax_label(scores.row_span(i));
        }
        return labels;
    }
    // Vote fusion: plurality over member labels, ties to the lowest class id.
    const Matrix x = model.scaler ? model.scaler->transform(features) : features;
    const auto classes = static_cast<std::size_t>(model.config.mlp.output_dim);
    std::vector<std::vector<int>> votes(x.rows, std::vector<int>(classes, 0));
    for (const MlpModel& member : model.members) {
        const std::vector<int> pred = predict_labels(member, x);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            ++votes[i][static_cast<std::size_t>(pred[i])];
        }
    }
    std::vector<int> labels(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c) {
            if (votes[i][c] > votes[i][best]) best = c;
        }
        labels[i] = static_cast<int>(best);
    }
    return labels;
}

inline std::vector<std::string> decode_predictions(const EnsembleModel& model,
                                                   const std::vector<int>& labels) {
    std::vector<std::string> out;
    out.reserve(labels.size());
    for (int id : labels) {
        if (id < 0 || id >= static_cast<int>(model.label_names.size())) {
            throw ContractViolation("ensemble: predicted label id out of range");
        }
        out.push_back(model.label_names[static_cast<std::size_t>(id)]);
    }
    return out;
}

inline void to_json(nlohmann::json& j, const SamplerConfig& c) {
    j = nlohmann::json{{"kind", to_string(c.kind)},
                       {"set_size", c.set_size},
                       {"cycles", c.cycles},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, SamplerConfig& c) {
    c.kind = parse_sampler(j.at("kind").get<std::string>());
    j.at("set_size").get_to(c.set_size);
    j.at("cycles").get_to(c.cycles);
    j.at("seed").get_to(c.seed);
}

inline void to_json(nlohmann::json& j, const FeatureScaler& s) {
    j = nlohmann::json{{"mean", s.mean}, {"std_dev", s.std_dev}};
}

inline void from_json(const nlohmann::json& j, FeatureScaler& s) {
    j.at("mean").get_to(s.mean);
    j.at("std_dev").get_to(s.std_dev);
}

inline void to_json(nlohmann::json& j, const EnsembleConfig& c) {
    j = nlohmann::json{{"T", c.T},
                       {"sampler", c.sampler},
                       {"mlp", c.mlp},
                       {"loss", to_string(c.loss)},
                       {"fusion", to_string(c.fusion)},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, EnsembleConfig& c) {
    j.at("T").get_to(c.T);
    j.at("sampler").get_to(c.sampler);
    j.at("mlp").get_to(c.mlp);
    c.loss = parse_loss(j.at("loss").get<std::string>());
    c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    j.at("seed").get_to(c.seed);
}

namespace detail {

inline std::string member_file_name(std::size_t t) {
    std::string digits = std::to_string(t);
    while (digits.size() < 3) digits.insert(digits.begin(), '0');
    return "model_" + digits + ".json";
}

}  // namespace detail

// Directory layout: manifest.json plus one file per base classifier. The
// manifest carries everything needed to reproduce or audit the ensemble.
inline void save_ensemble(const EnsembleModel& model, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["config"] = model.config;
    manifest["label_names"] = model.label_names;
    manifest["scaler"] = model.scaler ? nlohmann::json(*model.scaler)
                                      : nlohmann::json();
    manifest["plans"] = model.plans;
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t t = 0; t < model.members.size(); ++t) {
        files.push_back(detail::member_file_name(t));
    }
    manifest["members"] = files;
    const std::filesystem::path base(dir);
    {
        std::ofstream out(base / "manifest.json", std::ios::binary);
        if (!out) throw IoError("cannot write '" + (base / "manifest.json").string() + "'");
        out << manifest.dump(2) << '\n';
    }
    for (std::size_t t = 0; t < model.members.size(); ++t) {
        save_model(model.members[t], (base / detail::member_file_name(t)).string());
    }
}

inline EnsembleModel load_ensemble(const std::string& dir) {
    const std::filesystem::path base(dir);
    std::ifstream in(base / "manifest.json");
    if (!in) throw IoError("cannot open '" + (base / "manifest.json").string() + "'");
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + (base / "manifest.json").string() + "': " + e.what());
    }
    try {
        if (manifest.at("version").get<std::string>() != kVersion) {
            throw ParseError("ensemble version '" +
                             manifest.at("version").get<std::string>() +
                             "' not supported (expected " + kVersion + ")");
        }
        EnsembleModel model;
        model.config = manifest.at("config").get<EnsembleConfig>();
        manifest.at("label_names").get_to(model.label_names);
        if (!manifest.at("scaler").is_null()) {
            model.scaler = manifest.at("scaler").get<FeatureScaler>();
        }
        model.plans = manifest.at("plans").get<std::vector<SamplingPlan>>();
        for (const nlohmann::json& f : manifest.at("members")) {
            model.members.push_back(
                load_model((base / f.get<std::string>()).string()));
        }
        if (model.members.empty()) throw ParseError("ensemble: no member files");
        if (model.members.size() != static_cast<std::size_t>(model.config.T)) {
            throw ParseError("ensemble: member count != configured T");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("ensemble manifest: ") + e.what());
    }
}

}  // namespace rssmlp
