#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rssmlp/rng.hpp"

#ifndef RSSMLP_CLI_PATH
#error "RSSMLP_CLI_PATH must point at the built binary"
#endif

namespace {

namespace fs = std::filesystem;

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const std::string tag = "/tmp/rssmlp_cli_capture_" + std::to_string(++counter);
    const std::string cmd = env_prefix + std::string(RSSMLP_CLI_PATH) + " " + args +
                            " >" + tag + ".out 2>" + tag + ".err";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(tag + ".out");
    r.err = slurp(tag + ".err");
    std::remove((tag + ".out").c_str());
    std::remove((tag + ".err").c_str());
    return r;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path("/tmp/rssmlp_cli_" + name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

TEST(cli, version_flag) {
    const CliResult r = run_cli("--version");
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_NE(r.out.find("0.1.0"), std::string::npos);
}

TEST(cli, bound_matches_reference_value) {
    const CliResult r = run_cli("bound --M 1 --n 100 --delta 0.05 --variance 0.01");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const nlohmann::json j = nlohmann::json::parse(r.out);
    EXPECT_NEAR(j.at("value").get<double>(), 0.9505895033785835, 1e-12);
    EXPECT_FALSE(j.at("clamped").get<bool>());
}

TEST(cli, bound_rejects_bad_domain_with_parsable_error) {
    const CliResult r = run_cli("bound --M 1 --n 100 --delta 0 --variance 0.01");
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_EQ(r.err.rfind("error code=contract msg=", 0), 0u) << r.err;
    EXPECT_EQ(r.err.find('\n'), r.err.size() - 1);  // single line
}

TEST(cli, usage_errors_are_single_line_and_distinct) {
    const CliResult missing_seed =
        run_cli("benchmark --data synth:blobs:60:8:3:3.0:1");
    EXPECT_EQ(missing_seed.exit_code, 64);
    EXPECT_EQ(missing_seed.err.rfind("error code=usage msg=", 0), 0u);
    const CliResult unknown = run_cli("frobnicate");
    EXPECT_EQ(unknown.exit_code, 64);
}

TEST(cli, io_errors_map_to_io_exit_code) {
    const CliResult r = run_cli("stats friedman --input /nonexistent/ledger.csv");
    EXPECT_EQ(r.exit_code, 6);
    EXPECT_EQ(r.err.rfind("error code=io msg=", 0), 0u) << r.err;
}

TEST(cli, variance_lab_reports_reference_gap) {
    const CliResult r = run_cli(
        "variance-lab --dist bernoulli:0.5 --loss exp --K 2 --m 10 "
        "--trials 4000 --seed 11");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const nlohmann::json j = nlohmann::json::parse(r.out);
    EXPECT_NEAR(j.at("closed_form_gap").get<double>(), -0.017263723069272693, 1e-15);
    EXPECT_NEAR(j.at("exact").at("gap").get<double>(), -0.017263723069272693, 1e-15);
    EXPECT_TRUE(j.at("mc").at("within_four_sigma").get<bool>());
    EXPECT_EQ(j.at("K").get<int>(), 2);
    EXPECT_EQ(j.at("m").get<int>(), 10);
}

TEST(cli, variance_lab_log_loss_reference) {
    const CliResult r = run_cli(
        "variance-lab --dist bernoulli:0.5 --loss log --K 2 --m 10 "
        "--trials 4000 --seed 12");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const nlohmann::json j = nlohmann::json::parse(r.out);
    EXPECT_NEAR(j.at("closed_form_gap").get<double>(), -0.003125, 1e-15);
}

TEST(cli, variance_lab_table_distribution) {
    TempDir dir("table_dist");
    write_file(dir.path / "dist.json",
               R"({"support": [-1.0, 0.25, 2.0], "prob": [0.3, 0.5, 0.2]})");
    const CliResult r = run_cli("variance-lab --dist table:" +
                                (dir.path / "dist.json").string() +
                                " --loss exp --K 3 --m 4 --trials 3000 --seed 3");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const nlohmann::json j = nlohmann::json::parse(r.out);
    EXPECT_TRUE(j.at("closed_form_gap").is_null());  // support is not {-1, +1}
    EXPECT_LE(j.at("exact").at("gap").get<double>(), 1e-15);
    EXPECT_TRUE(j.at("mc").at("within_four_sigma").get<bool>());
    const CliResult bad = run_cli("variance-lab --dist table:/nonexistent.json");
    EXPECT_EQ(bad.exit_code, 6);
}

TEST(cli, benchmark_writes_ledger_and_manifest) {
    TempDir dir("bench");
    const std::string out = (dir.path / "run").string();
    const CliResult r = run_cli(
        "benchmark --data synth:blobs:100:8:3:3.5:5 --T 2 --repeats 2 "
        "--epochs 3 --hidden 8,4 --seed 7 --out-dir " + out);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const std::string ledger = slurp(out + "/ledger.csv");
    std::size_t lines = 0;
    for (char c : ledger) lines += c == '\n';
    EXPECT_EQ(lines, 5u);  // header + 2 repeats x 2 methods
    EXPECT_EQ(ledger.rfind("dataset,method,repeat,accuracy,macro_f1\n", 0), 0u);
    EXPECT_NE(ledger.find("blobs,SRS-MLP,0,"), std::string::npos);
    EXPECT_NE(ledger.find("blobs,RSS-MLP,1,"), std::string::npos);
    const nlohmann::json manifest =
        nlohmann::json::parse(slurp(out + "/run_manifest.json"));
    EXPECT_EQ(manifest.at("command"), "benchmark");
    EXPECT_EQ(manifest.at("seed"), 7);
    EXPECT_EQ(manifest.at("version"), "0.1.0");
    EXPECT_EQ(manifest.at("inputs").size(), 1u);
    EXPECT_EQ(manifest.at("inputs")[0].at("digest").get<std::string>().rfind(
                  "fnv1a64:", 0),
              0u);
    EXPECT_EQ(manifest.at("outputs").size(), 2u);
    EXPECT_GE(manifest.at("wall_clock_seconds").get<double>(), 0.0);
    EXPECT_EQ(manifest.at("config").at("benchmark").at("T"), 2);
}

TEST(cli, rerun_reproduces_ledger_bytes_across_worker_counts) {
    TempDir dir("rerun");
    const std::string a = (dir.path / "a").string();
    const std::string b = (dir.path / "b").string();
    const CliResult first = run_cli(
        "benchmark --data synth:blobs:100:8:3:3.5:6 --T 2 --repeats 2 "
        "--epochs 3 --hidden 8,4 --seed 9 --workers 1 --out-dir " + a);
    ASSERT_EQ(first.exit_code, 0) << first.err;
    const CliResult second = run_cli("rerun --manifest " + a +
                                     "/run_manifest.json --workers 4 --out-dir " + b);
    ASSERT_EQ(second.exit_code, 0) << second.err;
    const std::string la = slurp(a + "/ledger.csv");
    const std::string lb = slurp(b + "/ledger.csv");
    ASSERT_FALSE(la.empty());
    EXPECT_EQ(la, lb);
    // The rerun manifest remembers the overridden settings.
    const nlohmann::json manifest = nlohmann::json::parse(slurp(b + "/run_manifest.json"));
    EXPECT_EQ(manifest.at("config").at("workers"), 4);
    const CliResult bad = run_cli("rerun --manifest /nonexistent.json");
    EXPECT_EQ(bad.exit_code, 6);
}

TEST(cli, environment_variables_fill_missing_flags) {
    TempDir dir("envseed");
    const std::string out = (dir.path / "run").string();
    const CliResult r = run_cli(
        "benchmark --data synth:blobs:80:8:3:3.5:2 --T 2 --repeats 1 "
        "--epochs 2 --hidden 8,4 --out-dir " + out,
        "RSSMLP_SEED=1234 ");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const nlohmann::json manifest =
        nlohmann::json::parse(slurp(out + "/run_manifest.json"));
    EXPECT_EQ(manifest.at("seed"), 1234);
}

std::string make_blob_csv(const fs::path& p, std::size_t n, bool with_labels) {
    rssmlp::RngStream rng(404, 1);
    std::ostringstream out;
    out << (with_labels ? "f0,f1,label\n" : "f0,f1\n");
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double c = label == 0 ? -2.0 : 2.0;
        out << (c + 0.5 * rng.next_normal()) << ',' << (c + 0.5 * rng.next_normal());
        if (with_labels) out << ',' << (label == 0 ? "low" : "high");
        out << '\n';
    }
    write_file(p, out.str());
    return p.string();
}

TEST(cli, train_then_predict_round_trip) {
    TempDir dir("trainpredict");
    const std::string train_csv = make_blob_csv(dir.path / "train.csv", 40, true);
    const std::string model_dir = (dir.path / "model").string();
    const CliResult trained = run_cli(
        "train --data " + train_csv + " --out " + model_dir +
        " --T 3 --epochs 10 --hidden 8,4 --lr 0.05 --seed 5");
    ASSERT_EQ(trained.exit_code, 0) << trained.err;
    EXPECT_TRUE(fs::exists(model_dir + "/manifest.json"));
    EXPECT_TRUE(fs::exists(model_dir + "/model_002.json"));
    EXPECT_TRUE(fs::exists(model_dir + "/run_manifest.json"));

    // Features-only CSV.
    const std::string feat_csv = make_blob_csv(dir.path / "features.csv", 10, false);
    const CliResult predicted =
        run_cli("predict --model " + model_dir + " --data " + feat_csv);
    ASSERT_EQ(predicted.exit_code, 0) << predicted.err;
    EXPECT_EQ(predicted.out.rfind("prediction\n", 0), 0u);
    std::size_t lines = 0;
    for (char c : predicted.out) lines += c == '\n';
    EXPECT_EQ(lines, 11u);
    EXPECT_NE(predicted.out.find("low"), std::string::npos);
    EXPECT_NE(predicted.out.find("high"), std::string::npos);

    // Labeled CSV is accepted too; the label column is ignored.
    const CliResult labeled =
        run_cli("predict --model " + model_dir + " --data " + train_csv + " --out " +
                (dir.path / "pred.csv").string());
    ASSERT_EQ(labeled.exit_code, 0) << labeled.err;
    const std::string written = slurp(dir.path / "pred.csv");
    std::size_t written_lines = 0;
    for (char c : written) written_lines += c == '\n';
    EXPECT_EQ(written_lines, 41u);
}

TEST(cli, predict_rejects_wrong_width) {
    TempDir dir("predictwidth");
    const std::string train_csv = make_blob_csv(dir.path / "train.csv", 30, true);
    const std::string model_dir = (dir.path / "model").string();
    ASSERT_EQ(run_cli("train --data " + train_csv + " --out " + model_dir +
                      " --T 1 --epochs 2 --hidden 4 --seed 5")
                  .exit_code,
              0);
    write_file(dir.path / "wide.csv", "a,b,c,d\n1,2,3,4\n");
    const CliResult r =
        run_cli("predict --model " + model_dir + " --data " +
                (dir.path / "wide.csv").string());
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_EQ(r.err.rfind("error code=contract msg=", 0), 0u) << r.err;
}

const char* kFixtureLedger =
    "dataset,method,repeat,accuracy,macro_f1\n"
    "d1,A,0,0.9,0.9\nd1,B,0,0.8,0.8\nd1,C,0,0.7,0.7\n"
    "d2,A,0,0.9,0.9\nd2,B,0,0.8,0.8\nd2,C,0,0.7,0.7\n"
    "d3,A,0,0.9,0.9\nd3,B,0,0.8,0.8\nd3,C,0,0.7,0.7\n";

TEST(cli, stats_friedman_reports_rank_structure) {
    TempDir dir("friedman");
    write_file(dir.path / "ledger.csv", kFixtureLedger);
    const CliResult r = run_cli("stats friedman --input " +
                                (dir.path / "ledger.csv").string() +
                                " --metric accuracy");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const nlohmann::json j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j.at("n"), 3);
    EXPECT_EQ(j.at("k"), 3);
    // Perfect agreement across datasets maxes the statistic.
    EXPECT_NEAR(j.at("chi2").get<double>(), 6.0, 1e-12);
    EXPECT_TRUE(j.at("tau_infinite").get<bool>());
    EXPECT_TRUE(j.at("tau_f").is_null());
    EXPECT_EQ(j.at("methods"), (std::vector<std::string>{"A", "B", "C"}));
    EXPECT_EQ(j.at("mean_ranks"), (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(cli, stats_nemenyi_sorts_methods_by_rank) {
    TempDir dir("nemenyi");
    write_file(dir.path / "ledger.csv", kFixtureLedger);
    const CliResult r = run_cli("stats nemenyi --input " +
                                (dir.path / "ledger.csv").string());
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const nlohmann::json j = nlohmann::json::parse(r.out);
    const double expected_cd = 2.343 * std::sqrt(3.0 * 4.0 / (6.0 * 3.0));
    EXPECT_NEAR(j.at("cd").get<double>(), expected_cd, 1e-12);
    ASSERT_EQ(j.at("methods").size(), 3u);
    EXPECT_EQ(j.at("methods")[0].at("method"), "A");
    EXPECT_EQ(j.at("methods")[0].at("mean_rank"), 1.0);
    EXPECT_EQ(j.at("methods")[2].at("method"), "C");
}

TEST(cli, stats_ttest_flags_constant_difference_as_degenerate) {
    TempDir dir("ttest");
    write_file(dir.path / "ledger.csv", kFixtureLedger);
    const CliResult r = run_cli(
        "stats ttest --input " + (dir.path / "ledger.csv").string() +
        " --metric accuracy --method-a A --method-b B");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const nlohmann::json j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j.at("n"), 3);
    EXPECT_NEAR(j.at("mean_diff").get<double>(), 0.1, 1e-12);
    EXPECT_TRUE(j.at("degenerate").get<bool>());
    EXPECT_TRUE(j.at("significant").get<bool>());
    EXPECT_TRUE(j.at("t").is_null());  // +infinity has no JSON encoding
    const CliResult missing = run_cli(
        "stats ttest --input " + (dir.path / "ledger.csv").string() +
        " --method-a A --method-b Z");
    EXPECT_EQ(missing.exit_code, 2);
}

}  // namespace
