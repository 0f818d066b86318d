#pragma once

// Shared synthetic regression fixture: y = 3*x1 + 2*x2*x3 + N(0, 0.01),
// x ~ U(-1, 1). The generator is independent of every model under test.

#include <cstdint>
#include <string>

#include "madcn/dataset.hpp"
#include "madcn/rng.hpp"
#include "madcn/schema.hpp"

namespace madcn::testing {

inline FeatureSchema synth_schema() {
    FeatureSchema s;
    s.dense_fields = {{"x1", ""}, {"x2", ""}, {"x3", ""}};
    s.sparse_fields = {};
    s.target_fields = {"y"};
    s.id_field = "id";
    s.time_field = "year";
    return s;
}

inline Dataset synth_interaction(std::size_t n, std::uint64_t seed) {
    Dataset ds;
    ds.schema = synth_schema();
    ds.n_rows = n;
    ds.dense = Matrix(n, 3);
    ds.targets = Matrix(n, 1);
    ds.sparse_codes.assign(n, {});
    Rng rng(seed);
    for (std::size_t r = 0; r < n; ++r) {
        double x1 = rng.uniform(-1.0, 1.0);
        double x2 = rng.uniform(-1.0, 1.0);
        double x3 = rng.uniform(-1.0, 1.0);
        ds.dense(r, 0) = x1;
        ds.dense(r, 1) = x2;
        ds.dense(r, 2) = x3;
        ds.targets(r, 0) = 3.0 * x1 + 2.0 * x2 * x3 + rng.gaussian(0.0, 0.1);
        ds.row_keys.emplace_back(std::to_string(r), "2020");
    }
    return ds;
}

// y = x1 * x2 without noise, for the depth-1 cross expressiveness check
inline Dataset synth_product(std::size_t n, std::uint64_t seed) {
    Dataset ds;
    ds.schema = synth_schema();
    ds.schema.dense_fields = {{"x1", ""}, {"x2", ""}};
    ds.n_rows = n;
    ds.dense = Matrix(n, 2);
    ds.targets = Matrix(n, 1);
    ds.sparse_codes.assign(n, {});
    Rng rng(seed);
    for (std::size_t r = 0; r < n; ++r) {
        double x1 = rng.uniform(-1.0, 1.0);
        double x2 = rng.uniform(-1.0, 1.0);
        ds.dense(r, 0) = x1;
        ds.dense(r, 1) = x2;
        ds.targets(r, 0) = x1 * x2;
        ds.row_keys.emplace_back(std::to_string(r), "2020");
    }
    return ds;
}

} // namespace madcn::testing
