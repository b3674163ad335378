#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rssmlp/error.hpp"

namespace rssmlp {

// One benchmark measurement; the on-disk ledger is one CSV row per record.
struct MetricRecord {
    std::string dataset;
    std::string method;
    int repeat = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

enum class MetricKind { Accuracy, MacroF1 };

inline MetricKind parse_metric(const std::string& s) {
    if (s == "accuracy") return MetricKind::Accuracy;
    if (s == "macro_f1") return MetricKind::MacroF1;
    throw ContractViolation("unknown metric '" + s + "' (expected accuracy|macro_f1)");
}

inline const char* to_string(MetricKind k) {
    return k == MetricKind::Accuracy ? "accuracy" : "macro_f1";
}

inline double metric_value(const MetricRecord& r, MetricKind k) {
    return k == MetricKind::Accuracy ? r.accuracy : r.macro_f1;
}

// Shortest decimal string that round-trips to the same double, so ledgers
// written by identically seeded runs are byte-identical.
inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw NumericError("format_double failed");
    return std::string(buf, ptr);
}

inline constexpr const char* kLedgerHeader = "dataset,method,repeat,accuracy,macro_f1";

inline std::string ledger_to_csv(std::span<const MetricRecord> records) {
    std::string out = kLedgerHeader;
    out += '\n';
    for (const MetricRecord& r : records) {
        if (r.dataset.find(',') != std::string::npos ||
            r.method.find(',') != std::string::npos) {
            throw ContractViolation("ledger: names must not contain commas");
        }
        out += r.dataset;
        out += ',';
        out += r.method;
        out += ',';
        out += std::to_string(r.repeat);
        out += ',';
        out += format_double(r.accuracy);
        out += ',';
        out += format_double(r.macro_f1);
        out += '\n';
    }
    return out;
}

inline std::vector<MetricRecord> ledger_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("ledger: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kLedgerHeader) {
        throw ParseError("ledger: unexpected header '" + line + "'");
    }
    std::vector<MetricRecord> records;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 5) {
            throw ParseError("ledger row " + std::to_string(row) + " has " +
                             std::to_string(cells.size()) + " cells, expected 5");
        }
        MetricRecord r;
        r.dataset = cells[0];
        r.method = cells[1];
        const auto parse_num = [&](const std::string& s, auto& out) {
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
            if (ec != std::errc{} || ptr != s.data() + s.size()) {
                throw ParseError("ledger row " + std::to_string(row) +
                                 ": bad number '" + s + "'");
            }
        };
        parse_num(cells[2], r.repeat);
        parse_num(cells[3], r.accuracy);
        parse_num(cells[4], r.macro_f1);
        records.push_back(std::move(r));
    }
    return records;
}

inline void write_ledger(const std::string& path,
                         std::span<const MetricRecord> records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << ledger_to_csv(records);
    if (!out) throw IoError("short write to '" + path + "'");
}

inline std::vector<MetricRecord> read_ledger(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return ledger_from_csv(in);
}

}  // namespace rssmlp
