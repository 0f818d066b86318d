#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "madcn/errors.hpp"

namespace madcn {

struct MetricTriple {
    double mse = 0.0;
    double mae = 0.0;
    double r2 = 0.0;
};

namespace detail {
inline void check_metric_args(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) {
        throw argument_error("metric length mismatch: " + std::to_string(y.size()) + " vs " +
                             std::to_string(yhat.size()));
    }
    if (y.empty()) throw argument_error("metrics need at least one sample");
}
} // namespace detail

inline double mse(std::span<const double> y, std::span<const double> yhat) {
    detail::check_metric_args(y, yhat);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double d = y[i] - yhat[i];
        s += d * d;
    }
    return s / static_cast<double>(y.size());
}

inline double mae(std::span<const double> y, std::span<const double> yhat) {
    detail::check_metric_args(y, yhat);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::fabs(y[i] - yhat[i]);
    return s / static_cast<double>(y.size());
}

// 1 - SS_res / SS_tot. A zero-variance target is an error rather than a NaN
// so it cannot silently corrupt a benchmark table.
inline double r2(std::span<const double> y, std::span<const double> yhat) {
    detail::check_metric_args(y, yhat);
    if (y.size() < 2) throw argument_error("r2 needs at least two samples");
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double r = y[i] - yhat[i];
        double t = y[i] - mean;
        ss_res += r * r;
        ss_tot += t * t;
    }
    if (ss_tot == 0.0) {
        throw degenerate_target_error("r2 undefined: target has zero variance");
    }
    return 1.0 - ss_res / ss_tot;
}

inline MetricTriple metric_triple(std::span<const double> y, std::span<const double> yhat) {
    return {mse(y, yhat), mae(y, yhat), r2(y, yhat)};
}

} // namespace madcn
