#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rssmlp/benchmark.hpp"
#include "rssmlp/dataset.hpp"
#include "rssmlp/ensemble.hpp"
#include "rssmlp/error.hpp"
#include "rssmlp/metrics.hpp"
#include "rssmlp/stats.hpp"
#include "rssmlp/synthetic.hpp"
#include "rssmlp/variance_lab.hpp"
#include "rssmlp/version.hpp"

namespace {

using namespace rssmlp;
namespace fs = std::filesystem;

// fnv1a64 is a change-detection digest for the run manifest, not a
// cryptographic commitment.
std::string fnv1a64_hex(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return "fnv1a64:" + out.str();
}

std::string slurp_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << content;
    if (!out) throw IoError("short write to '" + path + "'");
}

bool is_synth_spec(const std::string& spec) { return spec.rfind("synth:", 0) == 0; }

std::vector<std::string> split_spec(const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

template <typename T>
T parse_number(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        if constexpr (std::is_floating_point_v<T>) {
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return static_cast<T>(v);
        } else {
            const long long v = std::stoll(s, &pos);
            if (pos != s.size() || v < 0) throw std::invalid_argument(s);
            return static_cast<T>(v);
        }
    } catch (const std::exception&) {
        throw ContractViolation(what + ": cannot parse number '" + s + "'");
    }
}

// --data accepts a CSV path or a generator spec:
//   synth:twonorm:<n>:<d>:<seed>
//   synth:blobs:<n>:<d>:<classes>:<separation>:<seed>
Dataset load_data_spec(const std::string& spec) {
    if (!is_synth_spec(spec)) return load_csv(spec);
    const std::vector<std::string> p = split_spec(spec);
    if (p.size() >= 2 && p[1] == "twonorm") {
        if (p.size() != 5) {
            throw ContractViolation(
                "data spec: expected synth:twonorm:<n>:<d>:<seed>");
        }
        return make_twonorm(parse_number<std::size_t>(p[2], "twonorm n"),
                            parse_number<std::size_t>(p[3], "twonorm d"),
                            parse_number<std::uint64_t>(p[4], "twonorm seed"));
    }
    if (p.size() >= 2 && p[1] == "blobs") {
        if (p.size() != 7) {
            throw ContractViolation(
                "data spec: expected synth:blobs:<n>:<d>:<classes>:<sep>:<seed>");
        }
        return make_blobs(parse_number<std::size_t>(p[2], "blobs n"),
                          parse_number<std::size_t>(p[3], "blobs d"),
                          parse_number<int>(p[4], "blobs classes"),
                          parse_number<double>(p[5], "blobs separation"),
                          parse_number<std::uint64_t>(p[6], "blobs seed"));
    }
    throw ContractViolation("data spec: unknown generator '" + spec + "'");
}

std::string digest_data_spec(const std::string& spec) {
    return is_synth_spec(spec) ? fnv1a64_hex(spec) : fnv1a64_hex(slurp_file(spec));
}

std::string dataset_display_name(const std::string& spec) {
    if (is_synth_spec(spec)) {
        const std::vector<std::string> p = split_spec(spec);
        return p.size() >= 2 ? p[1] : spec;
    }
    return fs::path(spec).stem().string();
}

// --dist accepts bernoulli:<p> or table:<file.json> where the file holds
// {"support": [...], "prob": [...]}.
FiniteMarginDistribution parse_dist_spec(const std::string& spec) {
    const std::vector<std::string> p = split_spec(spec);
    if (p.size() == 2 && p[0] == "bernoulli") {
        return FiniteMarginDistribution::bernoulli_pm1(
            parse_number<double>(p[1], "bernoulli p"));
    }
    if (p.size() == 2 && p[0] == "table") {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(slurp_file(p[1]));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("'" + p[1] + "': " + e.what());
        }
        try {
            return FiniteMarginDistribution::from_points(
                j.at("support").get<std::vector<double>>(),
                j.at("prob").get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("'" + p[1] + "': expected {support, prob}: " + e.what());
        }
    }
    throw ContractViolation(
        "dist spec: expected bernoulli:<p> or table:<file.json>, got '" + spec + "'");
}

std::vector<int> parse_hidden_dims(const std::string& s) {
    if (s.empty() || s == "none") return {};
    std::vector<int> dims;
    for (const std::string& part : split_spec(s)) {
        // accept both "256,128" and "256:128"
        std::string token;
        for (char c : part) {
            if (c == ',') {
                if (!token.empty()) dims.push_back(parse_number<int>(token, "hidden"));
                token.clear();
            } else {
                token += c;
            }
        }
        if (!token.empty()) dims.push_back(parse_number<int>(token, "hidden"));
    }
    return dims;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

nlohmann::json run_manifest(const std::string& command, std::uint64_t seed,
                            nlohmann::json config,
                            std::vector<std::pair<std::string, std::string>> inputs,
                            std::vector<std::string> outputs, double wall_seconds) {
    nlohmann::json m;
    m["version"] = kVersion;
    m["command"] = command;
    m["seed"] = seed;
    m["config"] = std::move(config);
    m["inputs"] = nlohmann::json::array();
    for (auto& [source, digest] : inputs) {
        m["inputs"].push_back({{"source", source}, {"digest", digest}});
    }
    m["outputs"] = outputs;
    m["wall_clock_seconds"] = wall_seconds;
    return m;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

// Shared flag bundles -------------------------------------------------------

struct MlpFlags {
    std::string hidden = "256,128";
    int epochs = 50;
    double learning_rate = 0.01;
    int batch_size = 32;
    double dropout = 0.0;
    double clip = 0.0;  // 0 means off
    bool no_batch_norm = false;
};

void add_mlp_flags(CLI::App* cmd, MlpFlags& f) {
    cmd->add_option("--hidden", f.hidden, "Comma-separated hidden layer widths")
        ->envname("RSSMLP_HIDDEN")
        ->capture_default_str();
    cmd->add_option("--epochs", f.epochs, "Training epochs per base model")
        ->envname("RSSMLP_EPOCHS")
        ->capture_default_str();
    cmd->add_option("--lr", f.learning_rate, "Gradient-descent learning rate")
        ->envname("RSSMLP_LR")
        ->capture_default_str();
    cmd->add_option("--batch-size", f.batch_size, "Mini-batch size")
        ->envname("RSSMLP_BATCH_SIZE")
        ->capture_default_str();
    cmd->add_option("--dropout", f.dropout, "Dropout rate in [0, 1)")
        ->envname("RSSMLP_DROPOUT")
        ->capture_default_str();
    cmd->add_option("--clip", f.clip, "Global gradient-norm clip (0 disables)")
        ->envname("RSSMLP_CLIP")
        ->capture_default_str();
    cmd->add_flag("--no-batch-norm", f.no_batch_norm,
                  "Disable batch normalization in hidden layers");
}

MlpConfig to_mlp_config(const MlpFlags& f) {
    MlpConfig cfg;
    cfg.hidden_dims = parse_hidden_dims(f.hidden);
    cfg.epochs = f.epochs;
    cfg.learning_rate = f.learning_rate;
    cfg.batch_size = f.batch_size;
    cfg.dropout_rate = f.dropout;
    if (f.clip > 0.0) cfg.grad_clip_max_norm = f.clip;
    cfg.batch_norm = !f.no_batch_norm;
    return cfg;
}

// benchmark / rerun ---------------------------------------------------------

struct BenchmarkInvocation {
    std::string data_spec;
    BenchmarkConfig cfg;
    std::size_t workers = 1;
    std::string out_dir = ".";
};

int exec_benchmark(const BenchmarkInvocation& inv) {
    Timer timer;
    const Dataset data = load_data_spec(inv.data_spec);
    const BenchmarkResult result = run_benchmark(inv.cfg, data, inv.workers);
    ensure_dir(inv.out_dir);
    const fs::path base(inv.out_dir);
    const std::string ledger_path = (base / "ledger.csv").string();
    const std::string manifest_path = (base / "run_manifest.json").string();
    write_ledger(ledger_path, result.records);
    for (const std::string& w : result.warnings) std::cerr << "warning: " << w << '\n';

    nlohmann::json config;
    config["data"] = inv.data_spec;
    config["benchmark"] = inv.cfg;
    config["workers"] = inv.workers;
    config["out_dir"] = inv.out_dir;
    nlohmann::json manifest =
        run_manifest("benchmark", inv.cfg.seed, std::move(config),
                     {{inv.data_spec, digest_data_spec(inv.data_spec)}},
                     {ledger_path, manifest_path}, timer.seconds());
    manifest["warnings"] = result.warnings;
    write_text_file(manifest_path, manifest.dump(2) + "\n");

    for (const char* method : {kMethodSrs, kMethodRss}) {
        double acc = 0.0, f1 = 0.0;
        int count = 0;
        for (const MetricRecord& r : result.records) {
            if (r.method == method) {
                acc += r.accuracy;
                f1 += r.macro_f1;
                ++count;
            }
        }
        std::cout << method << " mean_accuracy=" << format_double(acc / count)
                  << " mean_macro_f1=" << format_double(f1 / count) << '\n';
    }
    std::cout << "wrote " << ledger_path << '\n';
    std::cout << "wrote " << manifest_path << '\n';
    return 0;
}

int exec_rerun(const std::string& manifest_path, std::optional<std::size_t> workers,
               std::optional<std::string> out_dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(slurp_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + manifest_path + "': " + e.what());
    }
    try {
        if (manifest.at("command").get<std::string>() != "benchmark") {
            throw ContractViolation("rerun supports benchmark manifests only");
        }
        BenchmarkInvocation inv;
        const nlohmann::json& config = manifest.at("config");
        inv.data_spec = config.at("data").get<std::string>();
        inv.cfg = config.at("benchmark").get<BenchmarkConfig>();
        inv.workers = config.at("workers").get<std::size_t>();
        inv.out_dir = config.at("out_dir").get<std::string>();
        if (workers) inv.workers = *workers;
        if (out_dir) inv.out_dir = *out_dir;
        return exec_benchmark(inv);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + manifest_path + "': not a run manifest: " + e.what());
    }
}

// train / predict -----------------------------------------------------------

struct TrainArgs {
    std::string data_spec;
    std::string out_dir;
    std::string sampler = "rss";
    int T = 51;
    std::string loss = "exp";
    std::string fusion = "mean";
    std::size_t set_size = 0;
    std::size_t cycles = 0;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    bool no_standardize = false;
    MlpFlags mlp;
};

int exec_train(const TrainArgs& args) {
    Timer timer;
    Dataset data = load_data_spec(args.data_spec);
    std::optional<FeatureScaler> scaler;
    if (!args.no_standardize) {
        scaler = FeatureScaler::fit(data.features);
        data.features = scaler->transform(data.features);
    }
    EnsembleConfig ens;
    ens.T = args.T;
    ens.sampler.kind = parse_sampler(args.sampler);
    ens.sampler.set_size = args.set_size;
    ens.sampler.cycles = args.cycles;
    ens.mlp = to_mlp_config(args.mlp);
    ens.loss = parse_loss(args.loss);
    ens.fusion = parse_fusion(args.fusion);
    ens.seed = args.seed;
    EnsembleModel model = train_ensemble(ens, data, args.workers);
    model.scaler = scaler;  // stored so predict can take raw features
    save_ensemble(model, args.out_dir);

    const std::string manifest_path =
        (fs::path(args.out_dir) / "run_manifest.json").string();
    nlohmann::json config;
    config["data"] = args.data_spec;
    config["ensemble"] = model.config;
    config["standardize"] = !args.no_standardize;
    config["workers"] = args.workers;
    config["out"] = args.out_dir;
    const nlohmann::json manifest =
        run_manifest("train", args.seed, std::move(config),
                     {{args.data_spec, digest_data_spec(args.data_spec)}},
                     {args.out_dir, manifest_path}, timer.seconds());
    write_text_file(manifest_path, manifest.dump(2) + "\n");
    std::cout << "saved ensemble to " << args.out_dir << '\n';
    return 0;
}

// Feature rows for prediction: a CSV whose columns are all features, or the
// training layout with a trailing label column (ignored here).
Matrix load_feature_rows(const std::string& path, std::size_t input_dim) {
    const std::string text = slurp_file(path);
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(detail::split_csv_line(line));
    }
    if (rows.empty()) throw ParseError("'" + path + "': no rows");
    std::size_t first_data = 0;
    // A header is any first line with a cell that does not parse as a number.
    for (const std::string& cell : rows[0]) {
        try {
            (void)detail::parse_cell(cell, 1, "probe");
        } catch (const ParseError&) {
            first_data = 1;
            break;
        }
    }
    if (rows.size() <= first_data) throw ParseError("'" + path + "': no data rows");
    const std::size_t cols = rows[first_data].size();
    if (cols != input_dim && cols != input_dim + 1) {
        throw ContractViolation("'" + path + "' has " + std::to_string(cols) +
                                " columns; the model expects " +
                                std::to_string(input_dim) + " features");
    }
    Matrix x(rows.size() - first_data, input_dim);
    for (std::size_t i = first_data; i < rows.size(); ++i) {
        if (rows[i].size() != cols) {
            throw ParseError("'" + path + "': row " + std::to_string(i + 1) +
                             " has " + std::to_string(rows[i].size()) +
                             " cells, expected " + std::to_string(cols));
        }
        for (std::size_t j = 0; j < input_dim; ++j) {
            x(i - first_data, j) =
                detail::parse_cell(rows[i][j], i + 1, "feature " + std::to_string(j));
        }
    }
    return x;
}

int exec_predict(const std::string& model_dir, const std::string& data_path,
                 const std::string& out_path) {
    const EnsembleModel model = load_ensemble(model_dir);
    const Matrix features =
        load_feature_rows(data_path, static_cast<std::size_t>(model.config.mlp.input_dim));
    const std::vector<int> labels = ensemble_predict(model, features);
    const std::vector<std::string> names = decode_predictions(model, labels);
    std::ostringstream out;
    out << "prediction\n";
    for (const std::string& name : names) out << name << '\n';
    if (out_path.empty()) {
        std::cout << out.str();
    } else {
        write_text_file(out_path, out.str());
        std::cout << "wrote " << out_path << '\n';
    }
    return 0;
}

// variance-lab / bound ------------------------------------------------------

struct VarianceLabArgs {
    std::string dist = "bernoulli:0.5";
    std::string loss = "exp";
    std::size_t set_size = 2;
    std::size_t cycles = 10;
    std::size_t trials = 100000;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    std::string out_dir;
};

int exec_variance_lab(const VarianceLabArgs& args) {
    Timer timer;
    const FiniteMarginDistribution dist = parse_dist_spec(args.dist);
    const GapReport report =
        run_gap_experiment(parse_loss(args.loss), dist, args.set_size, args.cycles,
                           args.trials, args.seed, args.workers);
    const nlohmann::json j = report;
    std::cout << j.dump(2) << '\n';
    if (!args.out_dir.empty()) {
        ensure_dir(args.out_dir);
        const fs::path base(args.out_dir);
        const std::string report_path = (base / "gap_report.json").string();
        const std::string manifest_path = (base / "run_manifest.json").string();
        write_text_file(report_path, j.dump(2) + "\n");
        nlohmann::json config;
        config["dist"] = args.dist;
        config["loss"] = args.loss;
        config["K"] = args.set_size;
        config["m"] = args.cycles;
        config["trials"] = args.trials;
        config["workers"] = args.workers;
        write_text_file(manifest_path,
                        run_manifest("variance-lab", args.seed, std::move(config),
                                     {{args.dist, fnv1a64_hex(args.dist)}},
                                     {report_path, manifest_path}, timer.seconds())
                                .dump(2) +
                            "\n");
    }
    return 0;
}

int exec_bound(double m_bound, double n, double delta, double variance,
               double approx) {
    const BoundResult result = bound_value(m_bound, n, delta, variance, approx);
    const nlohmann::json j = result;
    std::cout << j.dump(2) << '\n';
    return 0;
}

// stats ----------------------------------------------------------------------

int exec_stats_friedman(const std::string& input, const std::string& metric,
                        double alpha) {
    const std::vector<MetricRecord> records = read_ledger(input);
    const RankTable table = make_rank_table(records, parse_metric(metric));
    const FriedmanResult fr = friedman_test(table, alpha);
    nlohmann::json j;
    j["chi2"] = fr.chi2;
    j["tau_f"] = fr.tau_infinite ? nlohmann::json() : nlohmann::json(fr.tau_f);
    j["tau_infinite"] = fr.tau_infinite;
    j["n"] = fr.n;
    j["k"] = fr.k;
    j["alpha"] = fr.alpha;
    j["critical_value"] = fr.critical_value;
    j["significant"] = fr.significant;
    j["methods"] = table.methods;
    j["mean_ranks"] = table.mean_ranks;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int exec_stats_nemenyi(const std::string& input, const std::string& metric,
                       double alpha) {
    const std::vector<MetricRecord> records = read_ledger(input);
    const RankTable table = make_rank_table(records, parse_metric(metric));
    const double cd =
        nemenyi_critical_difference(table.methods.size(), table.datasets.size(), alpha);
    nlohmann::json methods = nlohmann::json::array();
    std::vector<std::size_t> order(table.methods.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return table.mean_ranks[a] != table.mean_ranks[b]
                   ? table.mean_ranks[a] < table.mean_ranks[b]
                   : table.methods[a] < table.methods[b];
    });
    for (std::size_t i : order) {
        methods.push_back({{"method", table.methods[i]},
                           {"mean_rank", table.mean_ranks[i]}});
    }
    nlohmann::json j;
    j["cd"] = cd;
    j["alpha"] = alpha;
    j["n"] = table.datasets.size();
    j["k"] = table.methods.size();
    j["methods"] = methods;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int exec_stats_ttest(const std::string& input, const std::string& metric,
                     const std::string& method_a, const std::string& method_b,
                     double alpha) {
    const std::vector<MetricRecord> records = read_ledger(input);
    const MetricKind kind = parse_metric(metric);
    std::map<std::pair<std::string, int>, std::pair<std::optional<double>,
                                                    std::optional<double>>>
        cells;
    for (const MetricRecord& r : records) {
        if (r.method == method_a) {
            cells[{r.dataset, r.repeat}].first = metric_value(r, kind);
        } else if (r.method == method_b) {
            cells[{r.dataset, r.repeat}].second = metric_value(r, kind);
        }
    }
    std::vector<double> a, b;
    for (const auto& [key, pair] : cells) {
        if (!pair.first || !pair.second) {
            throw ContractViolation("ttest: unpaired cell for dataset '" + key.first +
                                    "' repeat " + std::to_string(key.second));
        }
        a.push_back(*pair.first);
        b.push_back(*pair.second);
    }
    if (a.empty()) {
        throw ContractViolation("ttest: no rows matched methods '" + method_a +
                                "' and '" + method_b + "'");
    }
    const TTestResult res = paired_t_one_sided(a, b, alpha);
    double mean_diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean_diff += a[i] - b[i];
    mean_diff /= static_cast<double>(a.size());
    nlohmann::json j;
    j["method_a"] = method_a;
    j["method_b"] = method_b;
    j["metric"] = metric;
    j["n"] = res.n;
    j["mean_diff"] = mean_diff;
    j["t"] = std::isfinite(res.t) ? nlohmann::json(res.t) : nlohmann::json();
    j["critical"] = res.critical;
    j["alpha"] = alpha;
    j["significant"] = res.significant;
    j["degenerate"] = res.degenerate;
    std::cout << j.dump(2) << '\n';
    return 0;
}

int exit_code_for(const std::string& code) {
    if (code == "contract") return 2;
    if (code == "parse") return 3;
    if (code == "infeasible") return 4;
    if (code == "domain") return 5;
    if (code == "io") return 6;
    if (code == "numeric") return 7;
    if (code == "training") return 8;
    return 70;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rank-set-sampled bagging of multilayer perceptrons"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    int rc = 0;

    // benchmark
    BenchmarkInvocation bench;
    MlpFlags bench_mlp;
    CLI::App* cmd_bench = app.add_subcommand(
        "benchmark", "Compare SRS and RSS ensembles over repeated splits");
    cmd_bench->add_option("--data", bench.data_spec,
                          "CSV path or synth:<generator> spec")
        ->envname("RSSMLP_DATA")
        ->required();
    cmd_bench->add_option("--T", bench.cfg.T, "Base classifiers per ensemble")
        ->envname("RSSMLP_T")
        ->capture_default_str();
    cmd_bench->add_option("--repeats", bench.cfg.repeats, "Split repetitions")
        ->envname("RSSMLP_REPEATS")
        ->capture_default_str();
    cmd_bench->add_option("--ratio", bench.cfg.train_ratio, "Train fraction")
        ->envname("RSSMLP_RATIO")
        ->capture_default_str();
    std::string bench_loss = "exp", bench_fusion = "mean";
    cmd_bench->add_option("--loss", bench_loss, "Surrogate loss: exp|log")
        ->envname("RSSMLP_LOSS")
        ->capture_default_str();
    cmd_bench->add_option("--fusion", bench_fusion, "Fusion rule: vote|mean")
        ->envname("RSSMLP_FUSION")
        ->capture_default_str();
    cmd_bench->add_option("--K", bench.cfg.set_size, "Rank-set size (0 = auto)")
        ->envname("RSSMLP_K")
        ->capture_default_str();
    cmd_bench->add_option("--m", bench.cfg.cycles, "Sampling cycles (0 = auto)")
        ->envname("RSSMLP_M")
        ->capture_default_str();
    cmd_bench->add_option("--seed", bench.cfg.seed, "Master seed")
        ->envname("RSSMLP_SEED")
        ->required();
    cmd_bench->add_option("--workers", bench.workers, "Worker threads")
        ->envname("RSSMLP_WORKERS")
        ->capture_default_str();
    cmd_bench->add_option("--out-dir", bench.out_dir, "Output directory")
        ->envname("RSSMLP_OUT_DIR")
        ->capture_default_str();
    add_mlp_flags(cmd_bench, bench_mlp);
    cmd_bench->callback([&] {
        bench.cfg.loss = parse_loss(bench_loss);
        bench.cfg.fusion = parse_fusion(bench_fusion);
        bench.cfg.mlp = to_mlp_config(bench_mlp);
        if (bench.cfg.dataset_name.empty()) {
            bench.cfg.dataset_name = dataset_display_name(bench.data_spec);
        }
        rc = exec_benchmark(bench);
    });

    // rerun
    std::string rerun_manifest;
    std::size_t rerun_workers = 0;
    std::string rerun_out;
    CLI::App* cmd_rerun =
        app.add_subcommand("rerun", "Re-execute a benchmark from its run manifest");
    cmd_rerun->add_option("--manifest", rerun_manifest, "run_manifest.json path")
        ->envname("RSSMLP_MANIFEST")
        ->required();
    CLI::Option* rerun_workers_opt =
        cmd_rerun->add_option("--workers", rerun_workers, "Override worker threads")
            ->envname("RSSMLP_WORKERS");
    CLI::Option* rerun_out_opt =
        cmd_rerun->add_option("--out-dir", rerun_out, "Override output directory")
            ->envname("RSSMLP_OUT_DIR");
    cmd_rerun->callback([&] {
        rc = exec_rerun(rerun_manifest,
                        rerun_workers_opt->count() ? std::optional(rerun_workers)
                                                   : std::nullopt,
                        rerun_out_opt->count() ? std::optional(rerun_out)
                                               : std::nullopt);
    });

    // train
    TrainArgs train;
    CLI::App* cmd_train =
        app.add_subcommand("train", "Train one ensemble and save it to a directory");
    cmd_train->add_option("--data", train.data_spec, "CSV path or synth spec")
        ->envname("RSSMLP_DATA")
        ->required();
    cmd_train->add_option("--out", train.out_dir, "Ensemble output directory")
        ->envname("RSSMLP_OUT")
        ->required();
    cmd_train->add_option("--sampler", train.sampler, "Sampling scheme: rss|srs")
        ->envname("RSSMLP_SAMPLER")
        ->capture_default_str();
    cmd_train->add_option("--T", train.T, "Base classifiers")
        ->envname("RSSMLP_T")
        ->capture_default_str();
    cmd_train->add_option("--loss", train.loss, "Surrogate loss: exp|log")
        ->envname("RSSMLP_LOSS")
        ->capture_default_str();
    cmd_train->add_option("--fusion", train.fusion, "Fusion rule: vote|mean")
        ->envname("RSSMLP_FUSION")
        ->capture_default_str();
    cmd_train->add_option("--K", train.set_size, "Rank-set size (0 = auto)")
        ->envname("RSSMLP_K")
        ->capture_default_str();
    cmd_train->add_option("--m", train.cycles, "Sampling cycles (0 = auto)")
        ->envname("RSSMLP_M")
        ->capture_default_str();
    cmd_train->add_option("--seed", train.seed, "Master seed")
        ->envname("RSSMLP_SEED")
        ->capture_default_str();
    cmd_train->add_option("--workers", train.workers, "Worker threads")
        ->envname("RSSMLP_WORKERS")
        ->capture_default_str();
    cmd_train->add_flag("--no-standardize", train.no_standardize,
                        "Skip feature standardization");
    add_mlp_flags(cmd_train, train.mlp);
    cmd_train->callback([&] { rc = exec_train(train); });

    // predict
    std::string predict_model, predict_data, predict_out;
    CLI::App* cmd_predict =
        app.add_subcommand("predict", "Predict labels with a saved ensemble");
    cmd_predict->add_option("--model", predict_model, "Ensemble directory")
        ->envname("RSSMLP_MODEL")
        ->required();
    cmd_predict->add_option("--data", predict_data, "Feature CSV")
        ->envname("RSSMLP_DATA")
        ->required();
    cmd_predict->add_option("--out", predict_out, "Output CSV (default stdout)")
        ->envname("RSSMLP_OUT");
    cmd_predict->callback(
        [&] { rc = exec_predict(predict_model, predict_data, predict_out); });

    // variance-lab
    VarianceLabArgs lab;
    CLI::App* cmd_lab = app.add_subcommand(
        "variance-lab", "Exact and Monte Carlo risk-estimator moments");
    cmd_lab->add_option("--dist", lab.dist, "bernoulli:<p> or table:<file.json>")
        ->envname("RSSMLP_DIST")
        ->capture_default_str();
    std::string lab_loss = "exp";
    cmd_lab->add_option("--loss", lab_loss, "Surrogate loss: exp|log")
        ->envname("RSSMLP_LOSS")
        ->capture_default_str();
    cmd_lab->add_option("--K", lab.set_size, "Rank-set size")
        ->envname("RSSMLP_K")
        ->capture_default_str();
    cmd_lab->add_option("--m", lab.cycles, "Cycles per sample")
        ->envname("RSSMLP_M")
        ->capture_default_str();
    cmd_lab->add_option("--trials", lab.trials, "Monte Carlo trials")
        ->envname("RSSMLP_TRIALS")
        ->capture_default_str();
    cmd_lab->add_option("--seed", lab.seed, "Master seed")
        ->envname("RSSMLP_SEED")
        ->capture_default_str();
    cmd_lab->add_option("--workers", lab.workers, "Worker threads")
        ->envname("RSSMLP_WORKERS")
        ->capture_default_str();
    cmd_lab->add_option("--out-dir", lab.out_dir, "Also write report files here")
        ->envname("RSSMLP_OUT_DIR");
    cmd_lab->callback([&] {
        lab.loss = lab_loss;
        rc = exec_variance_lab(lab);
    });

    // bound
    double bound_m = 1.0, bound_n = 100.0, bound_delta = 0.05, bound_v = 0.0,
           bound_approx = 0.0;
    CLI::App* cmd_bound = app.add_subcommand(
        "bound", "Generalization bound from sample size, confidence and variance");
    cmd_bound->add_option("--M", bound_m, "Loss upper bound M")
        ->envname("RSSMLP_BOUND_M")
        ->required();
    cmd_bound->add_option("--n", bound_n, "Sample size")
        ->envname("RSSMLP_BOUND_N")
        ->required();
    cmd_bound->add_option("--delta", bound_delta, "Confidence level delta")
        ->envname("RSSMLP_DELTA")
        ->required();
    cmd_bound->add_option("--variance", bound_v, "Variance term V")
        ->envname("RSSMLP_VARIANCE")
        ->required();
    cmd_bound->add_option("--approx", bound_approx, "Approximation-error term")
        ->envname("RSSMLP_APPROX")
        ->capture_default_str();
    cmd_bound->callback(
        [&] { rc = exec_bound(bound_m, bound_n, bound_delta, bound_v, bound_approx); });

    // stats
    CLI::App* cmd_stats =
        app.add_subcommand("stats", "Rank and significance tests over a ledger");
    cmd_stats->require_subcommand(1);
    std::string stats_input, stats_metric = "accuracy";
    double stats_alpha = 0.05;
    std::string ttest_a = kMethodRss, ttest_b = kMethodSrs;
    for (const char* name : {"friedman", "nemenyi", "ttest"}) {
        CLI::App* sub = cmd_stats->add_subcommand(
            name, std::string("Run the ") + name + " procedure");
        sub->add_option("--input", stats_input, "Ledger CSV")
            ->envname("RSSMLP_INPUT")
            ->required();
        sub->add_option("--metric", stats_metric, "accuracy|macro_f1")
            ->envname("RSSMLP_METRIC")
            ->capture_default_str();
        sub->add_option("--alpha", stats_alpha, "Significance level")
            ->envname("RSSMLP_ALPHA")
            ->capture_default_str();
        if (std::string(name) == "ttest") {
            sub->add_option("--method-a", ttest_a, "Left method (H1: a > b)")
                ->capture_default_str();
            sub->add_option("--method-b", ttest_b, "Right method")
                ->capture_default_str();
            sub->callback([&] {
                rc = exec_stats_ttest(stats_input, stats_metric, ttest_a, ttest_b,
                                      stats_alpha);
            });
        } else if (std::string(name) == "friedman") {
            sub->callback(
                [&] { rc = exec_stats_friedman(stats_input, stats_metric, stats_alpha); });
        } else {
            sub->callback(
                [&] { rc = exec_stats_nemenyi(stats_input, stats_metric, stats_alpha); });
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error code=usage msg=" << e.what() << '\n';
        return 64;
    } catch (const Error& e) {
        std::cerr << "error code=" << e.code() << " msg=" << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error code=internal msg=" << e.what() << '\n';
        return 70;
    }
    return rc;
}
