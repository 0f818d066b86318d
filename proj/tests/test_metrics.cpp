#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "madcn/matrix.hpp"
#include "madcn/metrics.hpp"
#include "madcn/rng.hpp"

using namespace madcn;

TEST_CASE("mse oracle values") {
    Vec y{0, 0}, yhat{1, 3};
    REQUIRE(mse(y, y) == 0.0);
    // ((0-1)^2 + (0-3)^2) / 2 = 10/2 = 5
    REQUIRE(mse(y, yhat) == 5.0);
}

TEST_CASE("mse scales quadratically") {
    Rng rng(1);
    Vec y(20), yhat(20);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = rng.uniform(-5, 5);
        yhat[i] = rng.uniform(-5, 5);
    }
    double base = mse(y, yhat);
    const double c = 3.0;
    Vec yc = y, yhc = yhat;
    for (auto& v : yc) v *= c;
    for (auto& v : yhc) v *= c;
    REQUIRE(mse(yc, yhc) == Catch::Approx(c * c * base).epsilon(1e-12));
}

TEST_CASE("mae oracle values") {
    Vec y{0, 0}, yhat{1, 3};
    REQUIRE(mae(y, y) == 0.0);
    // (1 + 3) / 2 = 2
    REQUIRE(mae(y, yhat) == 2.0);
}

TEST_CASE("mae <= sqrt(mse) on random pairs") {
    Rng rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng.index(30);
        Vec y(n), yhat(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.uniform(-10, 10);
            yhat[i] = rng.uniform(-10, 10);
        }
        REQUIRE(mae(y, yhat) <= std::sqrt(mse(y, yhat)) + 1e-12);
    }
}

TEST_CASE("r2 oracle values") {
    Vec y{1, 2, 3};
    REQUIRE(r2(y, y) == 1.0);

    Vec mean_pred{2, 2, 2};
    REQUIRE(r2(y, mean_pred) == 0.0);

    // SS_res = 1, SS_tot = 2 -> 1 - 1/2 = 0.5
    Vec yhat{1, 2, 4};
    REQUIRE(r2(y, yhat) == 0.5);
}

TEST_CASE("r2 errors on zero target variance") {
    Vec y{3, 3, 3}, yhat{1, 2, 3};
    REQUIRE_THROWS_AS(r2(y, yhat), degenerate_target_error);
}

TEST_CASE("r2 is invariant under a shared affine map") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 2 + rng.index(30);
        Vec y(n), yhat(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.uniform(-10, 10);
            yhat[i] = rng.uniform(-10, 10);
        }
        double base;
        try {
            base = r2(y, yhat);
        } catch (const degenerate_target_error&) {
            continue;
        }
        double a = rng.uniform(0.5, 4.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        double b = rng.uniform(-10, 10);
        Vec ya = y, yha = yhat;
        for (auto& v : ya) v = a * v + b;
        for (auto& v : yha) v = a * v + b;
        REQUIRE(std::fabs(r2(ya, yha) - base) < 1e-10);
    }
}

TEST_CASE("metrics are permutation invariant in paired order") {
    Rng rng(4);
    Vec y(40), yhat(40);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = rng.uniform(-10, 10);
        yhat[i] = rng.uniform(-10, 10);
    }
    auto base = metric_triple(y, yhat);

    std::vector<std::size_t> perm(y.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Vec yp(y.size()), yhp(y.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        yp[i] = y[perm[i]];
        yhp[i] = yhat[perm[i]];
    }
    auto perms = metric_triple(yp, yhp);
    REQUIRE(std::fabs(perms.mse - base.mse) < 1e-12);
    REQUIRE(std::fabs(perms.mae - base.mae) < 1e-12);
    REQUIRE(std::fabs(perms.r2 - base.r2) < 1e-12);
}

TEST_CASE("metric argument validation") {
    Vec a{1, 2}, b{1};
    REQUIRE_THROWS_AS(mse(a, b), argument_error);
    REQUIRE_THROWS_AS(mae(a, b), argument_error);
    REQUIRE_THROWS_AS(mse(Vec{}, Vec{}), argument_error);
}
