#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "madcn/errors.hpp"
#include "madcn/rng.hpp"

namespace madcn {

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

// Uniform random permutation under the seed; the first floor(ratio * n)
// indices go to train. Floor reproduces the 31,086 / 10,363 partition of a
// 41,449-row panel at ratio 0.75.
inline SplitIndices split(std::size_t n_rows, double ratio, std::uint64_t seed) {
    if (n_rows < 2) throw argument_error("split needs n_rows >= 2");
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw argument_error("split ratio must be in (0, 1), got " + std::to_string(ratio));
    }
    std::vector<std::size_t> perm(n_rows);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    rng.shuffle(perm);

    auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n_rows)));
    SplitIndices out;
    out.seed = seed;
    out.train.assign(perm.begin(), perm.begin() + n_train);
    out.test.assign(perm.begin() + n_train, perm.end());
    return out;
}

} // namespace madcn
