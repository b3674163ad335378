#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rssmlp/error.hpp"
#include "rssmlp/losses.hpp"
#include "rssmlp/matrix.hpp"
#include "rssmlp/rng.hpp"
#include "rssmlp/version.hpp"

namespace rssmlp {

inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.9;  // running = 0.9*old + 0.1*batch

struct MlpConfig {
    int input_dim = 0;
    std::vector<int> hidden_dims = {256, 128};
    int output_dim = 0;
    bool batch_norm = true;
    double dropout_rate = 0.0;
    std::optional<double> grad_clip_max_norm;
    double learning_rate = 0.01;
    int epochs = 50;
    int batch_size = 32;
    std::uint64_t seed = 0;

    void validate() const {
        if (input_dim < 1) throw ContractViolation("mlp config: input_dim must be >= 1");
        if (output_dim < 1) {
            throw ContractViolation("mlp config: output_dim must be >= 1");
        }
        for (int h : hidden_dims) {
            if (h < 1) throw ContractViolation("mlp config: hidden dims must be >= 1");
        }
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
            throw ContractViolation("mlp config: dropout_rate must lie in [0, 1)");
        }
        if (grad_clip_max_norm && !(*grad_clip_max_norm > 0.0)) {
            throw ContractViolation("mlp config: grad clip norm must be > 0");
        }
        if (!(learning_rate > 0.0)) {
            throw ContractViolation("mlp config: learning_rate must be > 0");
        }
        if (epochs < 0) throw ContractViolation("mlp config: epochs must be >= 0");
        if (batch_size < 1) throw ContractViolation("mlp config: batch_size must be >= 1");
        if (batch_norm && batch_size == 1) {
            throw ContractViolation("mlp config: batch_size 1 is incompatible with "
                                    "batch normalization");
        }
    }

    std::vector<int> layer_dims() const {
        std::vector<int> dims;
        dims.push_back(input_dim);
        dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
        dims.push_back(output_dim);
        return dims;
    }
};

struct MlpLayer {
    Matrix weight;             // in x out
    std::vector<double> bias;  // out
    bool has_bn = false;
    std::vector<double> gamma, beta, run_mean, run_var;  // out entries when has_bn
};

struct MlpModel {
    MlpConfig config;
    std::vector<MlpLayer> layers;

    std::size_t input_dim() const { return layers.front().weight.rows; }
    std::size_t output_dim() const { return layers.back().weight.cols; }
};

// Glorot-uniform weights, zero biases, identity batch-norm parameters.
// Entries are drawn in layer order, row-major, so a (seed, stream) pair
// pins every parameter bit.
inline MlpModel mlp_init(const MlpConfig& config, RngStream& rng) {
    config.validate();
    MlpModel model;
    model.config = config;
    const std::vector<int> dims = config.layer_dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        MlpLayer layer;
        const auto fan_in = static_cast<std::size_t>(dims[l]);
        const auto fan_out = static_cast<std::size_t>(dims[l + 1]);
        layer.weight = Matrix(fan_in, fan_out);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& w : layer.weight.data) w = rng.next_uniform(-limit, limit);
        layer.bias.assign(fan_out, 0.0);
        layer.has_bn = config.batch_norm && l + 2 < dims.size();  // hidden layers only
        if (layer.has_bn) {
            layer.gamma.assign(fan_out, 1.0);
            layer.beta.assign(fan_out, 0.0);
            layer.run_mean.assign(fan_out, 0.0);
            layer.run_var.assign(fan_out, 1.0);
        }
        model.layers.push_back(std::move(layer));
    }
    return model;
}

struct LayerCache {
    Matrix input;           // activations entering the layer
    Matrix normalized;      // x-hat, batch-norm layers only
    std::vector<double> inv_std;
    Matrix pre_activation;  // value fed to relu (hidden layers)
    Matrix dropout_mask;    // 0 or 1/keep entries; empty when dropout off
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    Matrix output;
};

namespace detail {

inline Matrix affine(const Matrix& x, const MlpLayer& layer) {
    Matrix z = matmul(x, layer.weight);
    for (std::size_t i = 0; i < z.rows; ++i) {
        for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += layer.bias[j];
    }
    return z;
}

inline void relu_inplace(Matrix& m) {
    for (double& v : m.data) v = v > 0.0 ? v : 0.0;
}

}  // namespace detail

// Training-mode forward: batch statistics for normalization (with running
// updates), inverted dropout after each hidden activation. The cache holds
// everything the backward pass needs.
inline Matrix mlp_forward_train(MlpModel& model, const Matrix& batch, RngStream& rng,
                                ForwardCache& cache) {
    if (batch.cols != model.input_dim()) {
        throw ContractViolation("mlp forward: batch width != input_dim");
    }
    if (batch.rows == 0) throw ContractViolation("mlp forward: empty batch");
    const double rate = model.config.dropout_rate;
    cache.layers.assign(model.layers.size(), {});
    Matrix x = batch;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        MlpLayer& layer = model.layers[l];
        LayerCache& lc = cache.layers[l];
        lc.input = x;
        Matrix z = detail::affine(x, layer);
        const bool is_hidden = l + 1 < model.layers.size();
        if (layer.has_bn) {
            if (z.rows < 2) {
                throw ContractViolation(
                    "mlp forward: batch normalization needs at least 2 rows in "
                    "train mode");
            }
            const double b = static_cast<double>(z.rows);
            lc.normalized = Matrix(z.rows, z.cols);
            lc.inv_std.resize(z.cols);
            for (std::size_t j = 0; j < z.cols; ++j) {
                double mean = 0.0;
                for (std::size_t i = 0; i < z.rows; ++i) mean += z(i, j);
                mean /= b;
                double var = 0.0;
                for (std::size_t i = 0; i < z.rows; ++i) {
                    const double d = z(i, j) - mean;
                    var += d * d;
                }
                var /= b;  // biased, as in the normalization itself
                const double inv = 1.0 / std::sqrt(var + kBnEpsilon);
                lc.inv_std[j] = inv;
                for (std::size_t i = 0; i < z.rows; ++i) {
                    const double xhat = (z(i, j) - mean) * inv;
                    lc.normalized(i, j) = xhat;
                    z(i, j) = layer.gamma[j] * xhat + layer.beta[j];
                }
                layer.run_mean[j] = kBnMomentum * layer.run_mean[j] +
                                    (1.0 - kBnMomentum) * mean;
                layer.run_var[j] = kBnMomentum * layer.run_var[j] +
                                   (1.0 - kBnMomentum) * var;
            }
        }
        if (is_hidden) {
            lc.pre_activation = z;
            detail::relu_inplace(z);
            if (rate > 0.0) {
                const double keep = 1.0 - rate;
                lc.dropout_mask = Matrix(z.rows, z.cols);
                for (std::size_t e = 0; e < z.data.size(); ++e) {
                    lc.dropout_mask.data[e] =
                        rng.next_double() < keep ? 1.0 / keep : 0.0;
                    z.data[e] *= lc.dropout_mask.data[e];
                }
            }
        }
        x = std::move(z);
    }
    check_finite(x, "mlp forward");
    cache.output = x;
    return x;
}

// Evaluation-mode forward: running statistics, no dropout, no state changes.
inline Matrix mlp_forward_eval(const MlpModel& model, const Matrix& batch) {
    if (batch.cols != model.input_dim()) {
        throw ContractViolation("mlp forward: batch width != input_dim");
    }
    if (batch.rows == 0) throw ContractViolation("mlp forward: empty batch");
    Matrix x = batch;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const MlpLayer& layer = model.layers[l];
        Matrix z = detail::affine(x, layer);
        if (layer.has_bn) {
            for (std::size_t j = 0; j < z.cols; ++j) {
                const double inv = 1.0 / std::sqrt(layer.run_var[j] + kBnEpsilon);
                for (std::size_t i = 0; i < z.rows; ++i) {
                    z(i, j) = layer.gamma[j] * (z(i, j) - layer.run_mean[j]) * inv +
                              layer.beta[j];
                }
            }
        }
        if (l + 1 < model.layers.size()) detail::relu_inplace(z);
        x = std::move(z);
    }
    check_finite(x, "mlp forward");
    return x;
}

struct LayerGradients {
    Matrix weight;
    std::vector<double> bias;
    std::vector<double> gamma, beta;
};

struct MlpGradients {
    std::vector<LayerGradients> layers;

    double global_norm() const {
        double ss = 0.0;
        for (const LayerGradients& g : layers) {
            for (double v : g.weight.data) ss += v * v;
            for (double v : g.bias) ss += v * v;
            for (double v : g.gamma) ss += v * v;
            for (double v : g.beta) ss += v * v;
        }
        return std::sqrt(ss);
    }

    void scale(double factor) {
        for (LayerGradients& g : layers) {
            for (double& v : g.weight.data) v *= factor;
            for (double& v : g.bias) v *= factor;
            for (double& v : g.gamma) v *= factor;
            for (double& v : g.beta) v *= factor;
        }
    }
};

// Backpropagation through output linear, dropout, relu, batch-norm and the
// hidden affines. dout is d(risk)/d(outputs) from batch_risk.
inline MlpGradients mlp_backward(const MlpModel& model, const ForwardCache& cache,
                                 const Matrix& dout) {
    MlpGradients grads;
    grads.layers.resize(model.layers.size());
    Matrix d = dout;
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const MlpLayer& layer = model.layers[l];
        const LayerCache& lc = cache.layers[l];
        LayerGradients& lg = grads.layers[l];
        const bool is_hidden = l + 1 < model.layers.size();
        if (is_hidden) {
            if (lc.dropout_mask.data.size() == d.data.size()) {
                for (std::size_t e = 0; e < d.data.size(); ++e) {
                    d.data[e] *= lc.dropout_mask.data[e];
                }
            }
            for (std::size_t e = 0; e < d.data.size(); ++e) {
                if (lc.pre_activation.data[e] <= 0.0) d.data[e] = 0.0;
            }
        }
        if (layer.has_bn) {
            const double b = static_cast<double>(d.rows);
            lg.gamma.assign(d.cols, 0.0);
            lg.beta.assign(d.cols, 0.0);
            Matrix dz(d.rows, d.cols);
            for (std::size_t j = 0; j < d.cols; ++j) {
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (std::size_t i = 0; i < d.rows; ++i) {
                    const double dxhat = d(i, j) * layer.gamma[j];
                    lg.gamma[j] += d(i, j) * lc.normalized(i, j);
                    lg.beta[j] += d(i, j);
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * lc.normalized(i, j);
                }
                const double inv_b = lc.inv_std[j] / b;
                for (std::size_t i = 0; i < d.rows; ++i) {
                    const double dxhat = d(i, j) * layer.gamma[j];
                    dz(i, j) = inv_b * (b * dxhat - sum_dxhat -
                                        lc.normalized(i, j) * sum_dxhat_xhat);
                }
            }
            d = std::move(dz);
        }
        lg.weight = matmul_transpose_a(lc.input, d);
        lg.bias.assign(d.cols, 0.0);
        for (std::size_t i = 0; i < d.rows; ++i) {
            for (std::size_t j = 0; j < d.cols; ++j) lg.bias[j] += d(i, j);
        }
        if (l > 0) d = matmul_transpose_b(d, layer.weight);
    }
    return grads;
}

struct TrainTrace {
    std::vector<double> epoch_risk;       // train-mode risk, one entry per epoch
    double final_risk = 0.0;              // eval-mode risk on the full data
    double max_applied_grad_norm = 0.0;   // after clipping
};

namespace detail {

inline Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), x.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto src = x.row_span(idx[i]);
        std::copy(src.begin(), src.end(), out.row_span(i).begin());
    }
    return out;
}

inline void apply_update(MlpModel& model, const MlpGradients& grads, double lr) {
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        MlpLayer& layer = model.layers[l];
        const LayerGradients& g = grads.layers[l];
        for (std::size_t e = 0; e < layer.weight.data.size(); ++e) {
            layer.weight.data[e] -= lr * g.weight.data[e];
        }
        for (std::size_t j = 0; j < layer.bias.size(); ++j) {
            layer.bias[j] -= lr * g.bias[j];
        }
        if (layer.has_bn) {
            for (std::size_t j = 0; j < layer.gamma.size(); ++j) {
                layer.gamma[j] -= lr * g.gamma[j];
                layer.beta[j] -= lr * g.beta[j];
            }
        }
    }
}

}  // namespace detail

// Mini-batch gradient descent on the surrogate risk. Batches are consecutive
// slices of a per-epoch shuffle; a trailing single row is merged into the
// previous batch when batch normalization would reject it.
inline std::pair<MlpModel, TrainTrace> mlp_train(const MlpConfig& config,
                                                 const Matrix& features,
                                                 std::span<const int> labels,
                                                 LossKind loss, RngStream& rng) {
    config.validate();
    if (features.rows != labels.size()) {
        throw ContractViolation("mlp train: features rows != labels length");
    }
    if (features.rows < 2) throw ContractViolation("mlp train: need at least 2 rows");
    if (features.cols != static_cast<std::size_t>(config.input_dim)) {
        throw ContractViolation("mlp train: feature width != input_dim");
    }
    for (int y : labels) {
        if (y < 0 || y >= config.output_dim) {
            throw ContractViolation("mlp train: label outside [0, output_dim)");
        }
    }
    MlpModel model = mlp_init(config, rng);
    TrainTrace trace;
    const std::size_t n = features.rows;
    const auto bs = static_cast<std::size_t>(config.batch_size);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(perm);
        double risk_sum = 0.0;
        std::size_t start = 0;
        int batch_id = 0;
        while (start < n) {
            std::size_t stop = std::min(start + bs, n);
            // A trailing singleton cannot be batch-normalized; fold it in.
            if (config.batch_norm && n - stop == 1) stop = n;
            const std::span<const std::size_t> idx(perm.data() + start, stop - start);
            const Matrix batch = detail::gather_rows(features, idx);
            std::vector<int> batch_labels(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                batch_labels[i] = labels[idx[i]];
            }
            try {
                ForwardCache cache;
                const Matrix out = mlp_forward_train(model, batch, rng, cache);
                const BatchRisk br = batch_risk(loss, out, batch_labels);
                if (!std::isfinite(br.risk)) {
                    throw NumericError("non-finite risk");
                }
                MlpGradients grads = mlp_backward(model, cache, br.grad);
                if (config.grad_clip_max_norm) {
                    const double norm = grads.global_norm();
                    if (norm > *config.grad_clip_max_norm) {
                        grads.scale(*config.grad_clip_max_norm / norm);
                    }
                }
                trace.max_applied_grad_norm =
                    std::max(trace.max_applied_grad_norm, grads.global_norm());
                detail::apply_update(model, grads, config.learning_rate);
                risk_sum += br.risk * static_cast<double>(idx.size());
            } catch (const NumericError& e) {
                throw TrainingError("training diverged at epoch " +
                                    std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_id) + ": " + e.what());
            }
            start = stop;
            ++batch_id;
        }
        trace.epoch_risk.push_back(risk_sum / static_cast<double>(n));
    }
    const Matrix final_out = mlp_forward_eval(model, features);
    trace.final_risk = batch_risk(loss, final_out, labels).risk;
    return {std::move(model), std::move(trace)};
}

inline Matrix predict_scores(const MlpModel& model, const Matrix& features) {
    return mlp_forward_eval(model, features);
}

inline int argmax_label(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
        if (row[j] > row[best]) best = j;  // ties keep the lowest class id
    }
    return static_cast<int>(best);
}

inline std::vector<int> predict_labels(const MlpModel& model, const Matrix& features) {
    const Matrix scores = predict_scores(model, features);
    std::vector<int> labels(scores.rows);
    for (std::size_t i = 0; i < scores.rows; ++i) {
        labels[i] = argmax_label(scores.row_span(i));
    }
    return labels;
}

inline void to_json(nlohmann::json& j, const MlpConfig& c) {
    j = nlohmann::json{{"input_dim", c.input_dim},
                       {"hidden_dims", c.hidden_dims},
                       {"output_dim", c.output_dim},
                       {"batch_norm", c.batch_norm},
                       {"dropout_rate", c.dropout_rate},
                       {"learning_rate", c.learning_rate},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"seed", c.seed}};
    j["grad_clip_max_norm"] = c.grad_clip_max_norm
                                  ? nlohmann::json(*c.grad_clip_max_norm)
                                  : nlohmann::json();
}

inline void from_json(const nlohmann::json& j, MlpConfig& c) {
    j.at("input_dim").get_to(c.input_dim);
    j.at("hidden_dims").get_to(c.hidden_dims);
    j.at("output_dim").get_to(c.output_dim);
    j.at("batch_norm").get_to(c.batch_norm);
    j.at("dropout_rate").get_to(c.dropout_rate);
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("epochs").get_to(c.epochs);
    j.at("batch_size").get_to(c.batch_size);
    j.at("seed").get_to(c.seed);
    const auto& clip = j.at("grad_clip_max_norm");
    c.grad_clip_max_norm =
        clip.is_null() ? std::nullopt : std::optional<double>(clip.get<double>());
}

inline nlohmann::json model_to_json(const MlpModel& model) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["config"] = model.config;
    j["bn_epsilon"] = kBnEpsilon;
    j["bn_momentum"] = kBnMomentum;
    j["layers"] = nlohmann::json::array();
    for (const MlpLayer& layer : model.layers) {
        nlohmann::json lj;
        lj["w"] = nlohmann::json{{"rows", layer.weight.rows},
                                 {"cols", layer.weight.cols},
                                 {"data", layer.weight.data}};
        lj["b"] = layer.bias;
        lj["gamma"] = layer.gamma;
        lj["beta"] = layer.beta;
        lj["run_mean"] = layer.run_mean;
        lj["run_var"] = layer.run_var;
        j["layers"].push_back(std::move(lj));
    }
    return j;
}

inline MlpModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<std::string>() != kVersion) {
            throw ParseError("model version '" +
                             j.at("version").get<std::string>() +
                             "' not supported (expected " + kVersion + ")");
        }
        MlpModel model;
        model.config = j.at("config").get<MlpConfig>();
        for (const nlohmann::json& lj : j.at("layers")) {
            MlpLayer layer;
            const nlohmann::json& w = lj.at("w");
            layer.weight = Matrix(w.at("rows").get<std::size_t>(),
                                  w.at("cols").get<std::size_t>(),
                                  w.at("data").get<std::vector<double>>());
            layer.bias = lj.at("b").get<std::vector<double>>();
            layer.gamma = lj.at("gamma").get<std::vector<double>>();
            layer.beta = lj.at("beta").get<std::vector<double>>();
            layer.run_mean = lj.at("run_mean").get<std::vector<double>>();
            layer.run_var = lj.at("run_var").get<std::vector<double>>();
            layer.has_bn = !layer.gamma.empty();
            if (layer.bias.size() != layer.weight.cols) {
                throw ParseError("model layer: bias length != weight cols");
            }
            if (layer.has_bn && (layer.gamma.size() != layer.weight.cols ||
                                 layer.beta.size() != layer.weight.cols ||
                                 layer.run_mean.size() != layer.weight.cols ||
                                 layer.run_var.size() != layer.weight.cols)) {
                throw ParseError("model layer: batch-norm vector length mismatch");
            }
            for (double v : layer.run_var) {
                if (!(v > 0.0)) throw ParseError("model layer: running variance <= 0");
            }
            model.layers.push_back(std::move(layer));
        }
        if (model.layers.empty()) throw ParseError("model: no layers");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model json: ") + e.what());
    }
}

inline void save_model(const MlpModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << model_to_json(model).dump(2) << '\n';
    if (!out) throw IoError("short write to '" + path + "'");
}

inline MlpModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    return model_from_json(j);
}

}  // namespace rssmlp
