#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "madcn/dataset.hpp"
#include "madcn/errors.hpp"
#include "madcn/matrix.hpp"
#include "madcn/metrics.hpp"
#include "madcn/model.hpp"
#include "madcn/rng.hpp"
#include "madcn/split.hpp"

namespace madcn {

enum class Optimizer { adam, sgd };

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    std::size_t early_stop_patience = 20; // 0 disables
    double validation_fraction = 0.1;     // in [0, 0.5)
    Optimizer optimizer = Optimizer::adam;
    bool progress = false; // epoch,train_loss,val_loss lines on stderr

    void validate() const {
        if (batch_size == 0) throw argument_error("batch_size must be positive");
        if (!(learning_rate > 0.0)) throw argument_error("learning_rate must be > 0");
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
            throw argument_error("adam betas must lie in (0, 1)");
        }
        if (!(adam_eps > 0.0)) throw argument_error("adam_eps must be > 0");
        if (!(validation_fraction >= 0.0 && validation_fraction < 0.5)) {
            throw argument_error("validation_fraction must lie in [0, 0.5)");
        }
    }
};

// First/second moment per parameter tensor, aligned with the manifest order.
struct AdamState {
    std::vector<Vec> m;
    std::vector<Vec> v;
    std::uint64_t t = 0;

    static AdamState for_model(const MadcnModel& model) {
        AdamState s;
        const ParamSet& ps = model.params;
        visit_params(ps, [&](const std::string&, auto span, std::size_t, std::size_t) {
            s.m.emplace_back(span.size(), 0.0);
            s.v.emplace_back(span.size(), 0.0);
        });
        return s;
    }
};

// (1/batch) * sum over samples and targets of squared error.
inline double mse_loss(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) {
        throw shape_error("mse_loss shape mismatch: " + pred.shape_str() + " vs " +
                          target.shape_str());
    }
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = target[i] - pred[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.rows());
}

// Bias-corrected Adam; the step counter increments before the update.
inline void adam_step(MadcnModel& model, const ParamSet& grads, AdamState& state,
                      const TrainConfig& cfg) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));

    std::size_t slot = 0;
    ParamSet& ps = model.params;
    const ParamSet& gs = grads;
    std::vector<std::span<const double>> gviews;
    visit_params(gs, [&](const std::string&, auto v, std::size_t, std::size_t) {
        gviews.emplace_back(v.data(), v.size());
    });
    visit_params(ps, [&](const std::string& name, std::span<double> v, std::size_t, std::size_t) {
        auto g = gviews[slot];
        if (g.size() != v.size()) {
            throw shape_error("gradient for " + name + " has wrong length");
        }
        auto& m = state.m[slot];
        auto& sv = state.v[slot];
        for (std::size_t i = 0; i < v.size(); ++i) {
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
            sv[i] = cfg.adam_beta2 * sv[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = sv[i] / bc2;
            v[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
        ++slot;
    });
}

// Plain theta <- theta - eta * grad.
inline void sgd_step(MadcnModel& model, const ParamSet& grads, const TrainConfig& cfg) {
    std::vector<std::span<const double>> gviews;
    const ParamSet& gs = grads;
    visit_params(gs, [&](const std::string&, auto v, std::size_t, std::size_t) {
        gviews.emplace_back(v.data(), v.size());
    });
    std::size_t slot = 0;
    visit_params(model.params,
                 [&](const std::string&, std::span<double> v, std::size_t, std::size_t) {
                     auto g = gviews[slot++];
                     for (std::size_t i = 0; i < v.size(); ++i) {
                         v[i] -= cfg.learning_rate * g[i];
                     }
                 });
}

struct TrainReport {
    std::vector<double> epoch_train_loss;
    std::vector<double> epoch_val_loss; // empty when validation_fraction == 0
    std::vector<MetricTriple> final_train; // per target
    std::vector<MetricTriple> final_test;  // per target
    double wall_clock_seconds = 0.0;
    std::uint64_t seed = 0;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
};

namespace detail {
inline const std::vector<int>& codes_of(const Dataset& ds, std::size_t r) {
    static const std::vector<int> none;
    return ds.sparse_codes.empty() ? none : ds.sparse_codes[r];
}
} // namespace detail

// Infer-mode metrics per target over the given rows.
inline std::vector<MetricTriple> evaluate(const MadcnModel& model, const Dataset& ds,
                                          const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw argument_error("evaluate: rows must be nonempty");
    const std::size_t t = model.target_count();
    std::vector<Vec> y(t), yhat(t);
    for (auto& v : y) v.reserve(rows.size());
    for (auto& v : yhat) v.reserve(rows.size());
    for (auto r : rows) {
        Vec pred = model.forward(ds.dense.row(r), detail::codes_of(ds, r), RunMode::infer);
        for (std::size_t k = 0; k < t; ++k) {
            y[k].push_back(ds.targets(r, k));
            yhat[k].push_back(pred[k]);
        }
    }
    std::vector<MetricTriple> out(t);
    for (std::size_t k = 0; k < t; ++k) out[k] = metric_triple(y[k], yhat[k]);
    return out;
}

namespace detail {

inline double dataset_loss(const MadcnModel& model, const Dataset& ds,
                           const std::vector<std::size_t>& rows) {
    const std::size_t t = model.target_count();
    double s = 0.0;
    for (auto r : rows) {
        Vec pred = model.forward(ds.dense.row(r), codes_of(ds, r), RunMode::infer);
        for (std::size_t k = 0; k < t; ++k) {
            double d = ds.targets(r, k) - pred[k];
            s += d * d;
        }
    }
    return s / static_cast<double>(rows.size());
}

} // namespace detail

// Mini-batch training with seed-derived shuffling, optional validation-based
// early stopping, and Adam (or literal SGD) updates.
inline TrainReport train(MadcnModel& model, const Dataset& ds, const SplitIndices& split,
                         const TrainConfig& cfg) {
    cfg.validate();
    if (split.train.empty()) throw argument_error("train: empty train split");
    if (ds.schema != model.schema) {
        throw schema_error("train: dataset schema does not match model schema");
    }

    const auto start = std::chrono::steady_clock::now();

    std::vector<std::size_t> fit_rows = split.train;
    std::vector<std::size_t> val_rows;
    if (cfg.validation_fraction > 0.0) {
        Rng vr(derive_seed(cfg.seed, "validation"));
        vr.shuffle(fit_rows);
        auto n_val = static_cast<std::size_t>(
            std::floor(cfg.validation_fraction * static_cast<double>(fit_rows.size())));
        if (n_val > 0) {
            val_rows.assign(fit_rows.end() - static_cast<std::ptrdiff_t>(n_val), fit_rows.end());
            fit_rows.resize(fit_rows.size() - n_val);
        }
    }
    if (fit_rows.empty()) throw argument_error("train: no rows left after validation holdout");

    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    Rng noise_rng(derive_seed(cfg.seed, "noise"));
    AdamState adam = AdamState::for_model(model);

    TrainReport report;
    report.seed = cfg.seed;

    const std::size_t t = model.target_count();
    ParamSet grads = model.zero_grads();
    ForwardCache cache;

    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::optional<ParamSet> best_params;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(fit_rows);

        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < fit_rows.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, fit_rows.size());
            const double batch_n = static_cast<double>(end - begin);

            visit_params(grads, [](const std::string&, std::span<double> v, std::size_t,
                                   std::size_t) { std::fill(v.begin(), v.end(), 0.0); });

            double batch_loss = 0.0;
            try {
                for (std::size_t i = begin; i < end; ++i) {
                    const std::size_t r = fit_rows[i];
                    Vec pred = model.forward(ds.dense.row(r), detail::codes_of(ds, r),
                                             RunMode::train, &noise_rng, &cache);
                    Vec dy(t);
                    for (std::size_t k = 0; k < t; ++k) {
                        double diff = pred[k] - ds.targets(r, k);
                        batch_loss += diff * diff;
                        dy[k] = 2.0 * diff / batch_n;
                    }
                    model.backward(cache, dy, grads);
                }
            } catch (const evaluation_error& e) {
                throw divergence_error("training diverged at epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(batch_index) + ": " +
                                       e.what());
            }
            batch_loss /= batch_n;
            if (!std::isfinite(batch_loss)) {
                throw divergence_error("training diverged at epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(batch_index));
            }
            if (cfg.optimizer == Optimizer::adam) {
                adam_step(model, grads, adam, cfg);
            } else {
                sgd_step(model, grads, cfg);
            }
            epoch_loss += batch_loss * batch_n;
            ++batch_index;
        }
        epoch_loss /= static_cast<double>(fit_rows.size());
        report.epoch_train_loss.push_back(epoch_loss);
        ++report.epochs_run;

        double val_loss = std::numeric_limits<double>::quiet_NaN();
        if (!val_rows.empty()) {
            val_loss = detail::dataset_loss(model, ds, val_rows);
            report.epoch_val_loss.push_back(val_loss);
            if (val_loss < best_val) {
                best_val = val_loss;
                best_params = model.params;
                report.best_epoch = epoch;
                since_best = 0;
            } else if (cfg.early_stop_patience > 0) {
                if (++since_best >= cfg.early_stop_patience) {
                    if (cfg.progress) {
                        std::fprintf(stderr, "%zu,%.9g,%.9g\n", epoch, epoch_loss, val_loss);
                    }
                    break;
                }
            }
        }
        if (cfg.progress) {
            if (std::isnan(val_loss)) {
                std::fprintf(stderr, "%zu,%.9g,\n", epoch, epoch_loss);
            } else {
                std::fprintf(stderr, "%zu,%.9g,%.9g\n", epoch, epoch_loss, val_loss);
            }
        }
    }

    if (best_params && cfg.early_stop_patience > 0) {
        model.params = std::move(*best_params);
    }

    report.final_train = evaluate(model, ds, split.train);
    report.final_test = evaluate(model, ds, split.test);
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

} // namespace madcn
