#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tabunc/core/rng.hpp"
#include "tabunc/data/dataset.hpp"

namespace tabunc {

// How rows of a CSV file are assigned to train/val/test.
struct SplitSpec {
    std::optional<std::string> column; // values "train" / "val" / "test"
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

} // namespace detail

// Reads a headered, comma-separated numeric file. Row and column numbers in
// parse errors are 1-based and count the header as row 1.
inline Dataset load_csv(const std::string& path, const std::string& target_column, const SplitSpec& split_spec = {},
                        bool standardize = true) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CSV file '" + path + "'");
    std::string header_line;
    if (!std::getline(in, header_line)) throw ParseError("empty CSV file '" + path + "'", 1, 0);

    std::vector<std::string> header;
    for (auto f : detail::split_fields(header_line)) header.emplace_back(detail::trim(f));
    std::optional<std::size_t> target_idx;
    std::optional<std::size_t> split_idx;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == target_column) target_idx = c;
        if (split_spec.column && header[c] == *split_spec.column) split_idx = c;
    }
    if (!target_idx) throw ConfigError("target column '" + target_column + "' not found in '" + path + "'");
    if (split_spec.column && !split_idx) {
        throw ConfigError("split column '" + *split_spec.column + "' not found in '" + path + "'");
    }

    Dataset ds;
    ds.generator = "csv";
    ds.seed = split_spec.seed;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != *target_idx && (!split_idx || c != *split_idx)) {
            feature_cols.push_back(c);
            ds.feature_names.push_back(header[c]);
        }
    }

    std::vector<double> xs;
    std::string line;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_fields(line);
        if (fields.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             row, fields.size());
        }
        for (std::size_t c : feature_cols) {
            auto v = detail::parse_double(fields[c]);
            if (!v) throw ParseError("non-numeric cell '" + std::string(fields[c]) + "'", row, c + 1);
            xs.push_back(*v);
        }
        auto t = detail::parse_double(fields[*target_idx]);
        if (!t) throw ParseError("non-numeric target '" + std::string(fields[*target_idx]) + "'", row, *target_idx + 1);
        ds.y.push_back(*t);
        if (split_idx) {
            const std::string tag(detail::trim(fields[*split_idx]));
            try {
                ds.split.push_back(split_from_string(tag));
            } catch (const ConfigError&) {
                throw ParseError("unknown split tag '" + tag + "'", row, *split_idx + 1);
            }
        }
    }
    ds.x = Matrix(ds.y.size(), feature_cols.size(), std::move(xs));

    if (!split_idx) {
        const std::size_t n = ds.y.size();
        const auto n_val = std::size_t(std::llround(double(n) * split_spec.val_fraction));
        const auto n_test = std::size_t(std::llround(double(n) * split_spec.test_fraction));
        if (n_val + n_test > n) throw ConfigError("split fractions exceed the row count");
        ds.split.assign(n, Split::train);
        auto perm = Rng(split_spec.seed).split("csv-split").permutation(n);
        for (std::size_t i = 0; i < n_val; ++i) ds.split[perm[i]] = Split::val;
        for (std::size_t i = n_val; i < n_val + n_test; ++i) ds.split[perm[i]] = Split::test;
    }
    ds.validate();
    if (standardize) ds = standardize_target(standardize_features(ds));
    return ds;
}

// Maps standardized targets back to original units.
inline std::vector<double> inverse_target(const Dataset& ds, const std::vector<double>& values) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = ds.standardization.target_to_original(values[i]);
    return out;
}

} // namespace tabunc
