#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "madcn/errors.hpp"
#include "madcn/matrix.hpp"
#include "madcn/schema.hpp"

namespace madcn {

using CategoryMaps = std::map<std::string, std::vector<std::string>>;

// Column-typed in-memory panel. Immutable once built; safe to share across
// threads.
struct Dataset {
    FeatureSchema schema;
    std::size_t n_rows = 0;
    Matrix dense;                         // n_rows x m
    std::vector<std::vector<int>> sparse_codes; // n_rows x n
    Matrix targets;                       // n_rows x t
    std::vector<std::pair<std::string, std::string>> row_keys; // (id, year)
    CategoryMaps category_maps;           // sparse label -> code order
};

struct IngestLog {
    std::size_t rows_read = 0;
    std::size_t dropped_missing = 0;     // empty in-scope cell
    std::size_t dropped_unparseable = 0; // dense/target cell not a finite number
    std::size_t dropped_short_row = 0;   // fewer cells than header columns

    std::size_t dropped_total() const {
        return dropped_missing + dropped_unparseable + dropped_short_row;
    }

    std::string to_text() const {
        std::ostringstream os;
        os << "rows_read: " << rows_read << "\n"
           << "rows_kept: " << rows_read - dropped_total() << "\n"
           << "dropped_missing: " << dropped_missing << "\n"
           << "dropped_unparseable: " << dropped_unparseable << "\n"
           << "dropped_short_row: " << dropped_short_row << "\n";
        return os.str();
    }
};

struct IngestResult {
    Dataset dataset;
    IngestLog log;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

inline std::optional<double> parse_finite(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace detail

// Parses a UTF-8 comma-separated file with a header row. Dense and target
// cells parse as floats; sparse cells map to integer codes via the supplied
// label lists, or in first-seen order when none are given. Rows with a
// missing or unparseable in-scope cell are dropped and counted.
inline IngestResult ingest_csv(const std::string& path, const FeatureSchema& schema,
                               const CategoryMaps& category_maps = {}) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw io_error("cannot open data file: " + path);

    std::string header_line;
    if (!std::getline(in, header_line)) {
        throw io_error("data file is empty: " + path);
    }
    auto header = detail::split_csv_line(header_line);
    std::unordered_map<std::string, std::size_t> col_of;
    for (std::size_t i = 0; i < header.size(); ++i) col_of[header[i]] = i;

    auto require_col = [&](const std::string& name) {
        auto it = col_of.find(name);
        if (it == col_of.end()) {
            throw schema_error("data file " + path + " is missing column: " + name);
        }
        return it->second;
    };

    std::vector<std::size_t> dense_cols, sparse_cols, target_cols;
    for (const auto& f : schema.dense_fields) dense_cols.push_back(require_col(f.name));
    for (const auto& f : schema.sparse_fields) sparse_cols.push_back(require_col(f.name));
    for (const auto& t : schema.target_fields) target_cols.push_back(require_col(t));
    std::size_t id_col = require_col(schema.id_field);
    std::size_t time_col = require_col(schema.time_field);

    const bool fixed_maps = !category_maps.empty();
    CategoryMaps maps = category_maps;
    std::vector<std::unordered_map<std::string, int>> code_of(schema.sparse_count());
    for (std::size_t j = 0; j < schema.sparse_count(); ++j) {
        const auto& name = schema.sparse_fields[j].name;
        if (auto it = maps.find(name); it != maps.end()) {
            for (std::size_t k = 0; k < it->second.size(); ++k) {
                code_of[j][it->second[k]] = static_cast<int>(k);
            }
        } else {
            maps[name] = {};
        }
    }

    IngestLog log;
    std::vector<double> dense_flat, target_flat;
    std::vector<std::vector<int>> codes;
    std::vector<std::pair<std::string, std::string>> keys;

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++log.rows_read;
        auto cells = detail::split_csv_line(line);
        if (cells.size() < header.size()) {
            ++log.dropped_short_row;
            continue;
        }

        std::vector<double> drow(schema.dense_count());
        std::vector<double> trow(schema.target_count());
        std::vector<int> crow(schema.sparse_count());
        bool missing = false, bad = false;

        auto parse_into = [&](std::size_t col, double& out) {
            const auto& cell = cells[col];
            if (cell.empty()) {
                missing = true;
                return;
            }
            auto v = detail::parse_finite(cell);
            if (!v) {
                bad = true;
                return;
            }
            out = *v;
        };
        for (std::size_t j = 0; j < dense_cols.size() && !missing && !bad; ++j) {
            parse_into(dense_cols[j], drow[j]);
        }
        for (std::size_t j = 0; j < target_cols.size() && !missing && !bad; ++j) {
            parse_into(target_cols[j], trow[j]);
        }
        for (std::size_t j = 0; j < sparse_cols.size() && !missing && !bad; ++j) {
            const auto& label = cells[sparse_cols[j]];
            if (label.empty()) {
                missing = true;
                break;
            }
            auto it = code_of[j].find(label);
            if (it != code_of[j].end()) {
                crow[j] = it->second;
                continue;
            }
            const auto& field = schema.sparse_fields[j];
            if (fixed_maps || code_of[j].size() >= field.cardinality) {
                throw encoding_error("sparse field " + field.name + ": label \"" + label +
                                     "\" exceeds declared cardinality " +
                                     std::to_string(field.cardinality));
            }
            int code = static_cast<int>(code_of[j].size());
            code_of[j][label] = code;
            maps[field.name].push_back(label);
            crow[j] = code;
        }

        if (missing) {
            ++log.dropped_missing;
            continue;
        }
        if (bad) {
            ++log.dropped_unparseable;
            continue;
        }

        dense_flat.insert(dense_flat.end(), drow.begin(), drow.end());
        target_flat.insert(target_flat.end(), trow.begin(), trow.end());
        codes.push_back(std::move(crow));
        keys.emplace_back(cells[id_col], cells[time_col]);
    }

    Dataset ds;
    ds.schema = schema;
    ds.n_rows = keys.size();
    ds.dense = Matrix(ds.n_rows, schema.dense_count(), std::move(dense_flat));
    ds.targets = Matrix(ds.n_rows, schema.target_count(), std::move(target_flat));
    ds.sparse_codes = std::move(codes);
    ds.row_keys = std::move(keys);
    ds.category_maps = std::move(maps);
    return {std::move(ds), log};
}

// Round-trip serialization: numbers print with 17 significant digits so a
// re-ingest reproduces every double bit-exactly.
inline void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);

    const auto& s = ds.schema;
    std::vector<std::string> cols;
    cols.push_back(s.id_field);
    cols.push_back(s.time_field);
    bool id_is_sparse = false, time_is_sparse = false;
    for (const auto& f : s.sparse_fields) {
        id_is_sparse |= f.name == s.id_field;
        time_is_sparse |= f.name == s.time_field;
        if (f.name != s.id_field && f.name != s.time_field) cols.push_back(f.name);
    }
    for (const auto& f : s.dense_fields) {
        if (f.name != s.id_field && f.name != s.time_field) cols.push_back(f.name);
    }
    for (const auto& t : s.target_fields) cols.push_back(t);

    for (std::size_t i = 0; i < cols.size(); ++i) {
        out << (i ? "," : "") << cols[i];
    }
    out << "\n";

    char buf[32];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };

    for (std::size_t r = 0; r < ds.n_rows; ++r) {
        std::vector<std::string> cells;
        cells.push_back(ds.row_keys[r].first);
        cells.push_back(ds.row_keys[r].second);
        for (std::size_t j = 0; j < s.sparse_count(); ++j) {
            const auto& f = s.sparse_fields[j];
            if (f.name == s.id_field || f.name == s.time_field) continue;
            cells.push_back(ds.category_maps.at(f.name)[ds.sparse_codes[r][j]]);
        }
        for (std::size_t j = 0; j < s.dense_count(); ++j) {
            const auto& f = s.dense_fields[j];
            if (f.name == s.id_field || f.name == s.time_field) continue;
            cells.push_back(fmt(ds.dense(r, j)));
        }
        for (std::size_t j = 0; j < s.target_count(); ++j) cells.push_back(fmt(ds.targets(r, j)));
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << (i ? "," : "") << cells[i];
        }
        out << "\n";
    }
}

} // namespace madcn
