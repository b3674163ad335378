#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rssmlp/error.hpp"
#include "rssmlp/matrix.hpp"
#include "rssmlp/rng.hpp"

namespace rssmlp {

// Labeled tabular data. Labels are dense ids 0..C-1 in first-appearance
// order; label_names maps an id back to the original string.
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    std::vector<std::string> label_names;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
    int class_count() const { return static_cast<int>(label_names.size()); }

    void validate() const {
        if (features.rows != labels.size()) {
            throw ContractViolation("dataset: feature rows != label count");
        }
        if (features.rows == 0) throw ContractViolation("dataset: empty");
        check_finite(features, "dataset features");
        for (int y : labels) {
            if (y < 0 || y >= class_count()) {
                throw ContractViolation("dataset: label id out of range");
            }
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row,
                         const std::string& column) {
    const auto fail = [&](const char* why) -> ParseError {
        return ParseError("row " + std::to_string(row) + ", column '" + column +
                          "': " + why + " '" + cell + "'");
    };
    if (cell.empty()) throw fail("empty cell");
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec == std::errc::result_out_of_range) throw fail("out-of-range value");
    if (ec != std::errc{} || ptr != last) throw fail("non-numeric value");
    if (!std::isfinite(value)) throw fail("non-finite value");
    return value;
}

}  // namespace detail

// Header + comma-separated numeric features, label in the last column
// (any string). Ragged or non-numeric rows are rejected with row/column
// coordinates; data rows are numbered from 1.
inline Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "': empty file");
    const std::vector<std::string> header = detail::split_csv_line(line);
    if (header.size() < 2) {
        throw ParseError("'" + path + "': need at least one feature and a label column");
    }
    const std::size_t dim = header.size() - 1;

    Dataset ds;
    ds.feature_names.assign(header.begin(), header.end() - 1);
    std::map<std::string, int> label_ids;
    std::vector<double> values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ParseError("row " + std::to_string(row) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(header.size()));
        }
        for (std::size_t j = 0; j < dim; ++j) {
            values.push_back(detail::parse_cell(cells[j], row, header[j]));
        }
        const std::string& raw = cells[dim];
        auto [it, fresh] = label_ids.try_emplace(raw, static_cast<int>(ds.label_names.size()));
        if (fresh) ds.label_names.push_back(raw);
        ds.labels.push_back(it->second);
    }
    if (row == 0) throw ParseError("'" + path + "': no data rows");
    ds.features = Matrix(row, dim, std::move(values));
    ds.validate();
    return ds;
}

inline std::vector<std::string> decode_labels(const Dataset& ds, std::span<const int> ids) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (id < 0 || id >= ds.class_count()) {
            throw ContractViolation("decode_labels: id out of range");
        }
        out.push_back(ds.label_names[static_cast<std::size_t>(id)]);
    }
    return out;
}

// Per-column affine map fitted on training data: x -> (x - mean) / std with
// population std; constant columns get std 1 so they map to zero.
struct FeatureScaler {
    std::vector<double> mean;
    std::vector<double> std_dev;

    static FeatureScaler fit(const Matrix& x) {
        if (x.rows == 0) throw ContractViolation("FeatureScaler: empty input");
        FeatureScaler s;
        s.mean.resize(x.cols);
        s.std_dev.resize(x.cols);
        std::vector<double> column(x.rows);
        for (std::size_t j = 0; j < x.cols; ++j) {
            for (std::size_t i = 0; i < x.rows; ++i) column[i] = x(i, j);
            const double mu = mean_of(column);
            double ss = 0.0;
            for (double v : column) ss += (v - mu) * (v - mu);
            const double sigma = std::sqrt(ss / static_cast<double>(x.rows));
            s.mean[j] = mu;
            s.std_dev[j] = sigma > 0.0 ? sigma : 1.0;
        }
        return s;
    }

    Matrix transform(const Matrix& x) const {
        if (x.cols != mean.size()) {
            throw ContractViolation("FeatureScaler: column count mismatch");
        }
        Matrix out(x.rows, x.cols);
        for (std::size_t i = 0; i < x.rows; ++i) {
            for (std::size_t j = 0; j < x.cols; ++j) {
                out(i, j) = (x(i, j) - mean[j]) / std_dev[j];
            }
        }
        return out;
    }
};

inline Dataset subset(const Dataset& ds, std::span<const std::size_t> idx) {
    Dataset out;
    out.feature_names = ds.feature_names;
    out.label_names = ds.label_names;
    out.features = Matrix(idx.size(), ds.dim());
    out.labels.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= ds.size()) throw ContractViolation("subset: index out of range");
        const auto src = ds.features.row_span(idx[k]);
        std::copy(src.begin(), src.end(), out.features.row_span(k).begin());
        out.labels.push_back(ds.labels[idx[k]]);
    }
    return out;
}

// One train/test partition of row indices; seed is the master seed the whole
// series of repeats was derived from, so a plan file alone can be re-checked.
struct SplitPlan {
    int repeat = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

inline constexpr std::uint64_t kStreamSplit = 101;

inline std::vector<SplitPlan> make_splits(std::size_t n, double ratio, int repeats,
                                          std::uint64_t seed) {
    if (n < 2) throw ContractViolation("make_splits: need at least 2 rows");
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ContractViolation("make_splits: ratio must lie in (0, 1)");
    }
    if (repeats < 1) throw ContractViolation("make_splits: repeats must be positive");
    const auto n_train =
        static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
    if (n_train == 0 || n_train == n) {
        throw ContractViolation("make_splits: ratio leaves an empty side");
    }
    std::vector<SplitPlan> plans;
    plans.reserve(static_cast<std::size_t>(repeats));
    RngStream base(seed, kStreamSplit);
    for (int r = 0; r < repeats; ++r) {
        RngStream rng = base.substream(static_cast<std::uint64_t>(r));
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        SplitPlan plan;
        plan.repeat = r;
        plan.seed = seed;
        plan.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
        plan.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
        std::sort(plan.train.begin(), plan.train.end());
        std::sort(plan.test.begin(), plan.test.end());
        plans.push_back(std::move(plan));
    }
    return plans;
}

inline void to_json(nlohmann::json& j, const SplitPlan& p) {
    j = nlohmann::json{
        {"repeat", p.repeat}, {"seed", p.seed}, {"train", p.train}, {"test", p.test}};
}

inline void from_json(const nlohmann::json& j, SplitPlan& p) {
    j.at("repeat").get_to(p.repeat);
    j.at("seed").get_to(p.seed);
    j.at("train").get_to(p.train);
    j.at("test").get_to(p.test);
}

}  // namespace rssmlp
