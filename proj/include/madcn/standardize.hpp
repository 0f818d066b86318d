#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "madcn/dataset.hpp"
#include "madcn/errors.hpp"

namespace madcn {

// Per-field mean and population standard deviation (divisor N). Fields whose
// training variance is zero are flagged and standardize to 0 instead of
// dividing by zero.
struct StandardizerStats {
    struct FieldStats {
        double mu = 0.0;
        double sigma = 1.0;
        bool constant = false;
    };
    std::vector<FieldStats> fields;

    double standardize(std::size_t j, double x) const {
        const auto& f = fields[j];
        return f.constant ? 0.0 : (x - f.mu) / f.sigma;
    }

    double invert(std::size_t j, double z) const {
        const auto& f = fields[j];
        return f.constant ? f.mu : z * f.sigma + f.mu;
    }

    bool operator==(const StandardizerStats&) const = default;
};

inline bool operator==(const StandardizerStats::FieldStats& a,
                       const StandardizerStats::FieldStats& b) {
    return a.mu == b.mu && a.sigma == b.sigma && a.constant == b.constant;
}

inline StandardizerStats fit_standardizer(const Dataset& ds, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw argument_error("fit_standardizer: rows must be nonempty");
    const std::size_t m = ds.schema.dense_count();
    StandardizerStats stats;
    stats.fields.resize(m);
    const double n = static_cast<double>(rows.size());
    for (std::size_t j = 0; j < m; ++j) {
        double sum = 0.0;
        for (auto r : rows) sum += ds.dense(r, j);
        double mu = sum / n;
        double ss = 0.0;
        for (auto r : rows) {
            double d = ds.dense(r, j) - mu;
            ss += d * d;
        }
        double var = ss / n;
        auto& f = stats.fields[j];
        f.mu = mu;
        if (var == 0.0) {
            f.constant = true;
            f.sigma = 0.0;
        } else {
            f.sigma = std::sqrt(var);
        }
    }
    return stats;
}

inline Dataset apply_standardizer(const Dataset& ds, const StandardizerStats& stats) {
    if (stats.fields.size() != ds.schema.dense_count()) {
        throw schema_error("standardizer fitted for " + std::to_string(stats.fields.size()) +
                           " dense fields, dataset has " +
                           std::to_string(ds.schema.dense_count()));
    }
    Dataset out = ds;
    for (std::size_t r = 0; r < ds.n_rows; ++r) {
        for (std::size_t j = 0; j < stats.fields.size(); ++j) {
            out.dense(r, j) = stats.standardize(j, ds.dense(r, j));
        }
    }
    return out;
}

} // namespace madcn
