#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "madcn/dataset.hpp"
#include "madcn/errors.hpp"
#include "madcn/matrix.hpp"
#include "madcn/model.hpp"
#include "madcn/rng.hpp"

namespace madcn {

// Scalar-output view of any trained model over raw inputs.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual double predict(std::span<const double> dense_raw, std::span<const int> codes) const = 0;
};

class MadcnPredictor : public Predictor {
public:
    MadcnPredictor(const MadcnModel& model, std::size_t output_index = 0)
        : model_(&model), output_index_(output_index) {}

    double predict(std::span<const double> dense_raw, std::span<const int> codes) const override {
        return model_->forward(dense_raw, codes, RunMode::infer)[output_index_];
    }

private:
    const MadcnModel* model_;
    std::size_t output_index_;
};

// An explained feature is one schema field; a sparse field swaps as one
// atomic unit.
struct ExplainedFeature {
    bool sparse = false;
    std::size_t index = 0; // within the dense block or the sparse block
    std::string name;
};

inline std::vector<ExplainedFeature> explained_features(
    const FeatureSchema& schema, const std::vector<std::string>& exclude = {}) {
    auto excluded = [&](const std::string& n) {
        return std::find(exclude.begin(), exclude.end(), n) != exclude.end();
    };
    std::vector<ExplainedFeature> out;
    for (std::size_t j = 0; j < schema.dense_count(); ++j) {
        if (!excluded(schema.dense_fields[j].name)) {
            out.push_back({false, j, schema.dense_fields[j].name});
        }
    }
    for (std::size_t j = 0; j < schema.sparse_count(); ++j) {
        if (!excluded(schema.sparse_fields[j].name)) {
            out.push_back({true, j, schema.sparse_fields[j].name});
        }
    }
    return out;
}

struct SampleRef {
    Vec dense;
    std::vector<int> codes;
};

// Reference rows the interventional valuation imputes from.
struct BackgroundSet {
    Matrix dense;                        // B x m, raw values
    std::vector<std::vector<int>> codes; // B x n
    std::uint64_t seed = 0;

    std::size_t size() const { return dense.rows(); }

    static BackgroundSet sample(const Dataset& ds, const std::vector<std::size_t>& from_rows,
                                std::size_t budget, std::uint64_t seed) {
        if (from_rows.empty()) throw argument_error("background sample: no rows given");
        std::vector<std::size_t> pool = from_rows;
        Rng rng(seed);
        rng.shuffle(pool);
        const std::size_t b = std::min(budget, pool.size());
        BackgroundSet bg;
        bg.seed = seed;
        bg.dense = Matrix(b, ds.schema.dense_count());
        bg.codes.resize(b);
        for (std::size_t i = 0; i < b; ++i) {
            auto row = ds.dense.row(pool[i]);
            std::copy(row.begin(), row.end(), bg.dense.row(i).begin());
            bg.codes[i] = ds.sparse_codes.empty() ? std::vector<int>{} : ds.sparse_codes[pool[i]];
        }
        return bg;
    }
};

enum class ShapMethod { exact, permutation };

struct Explanation {
    double phi0 = 0.0;
    Vec phi;
    double fx = 0.0;
    ShapMethod method = ShapMethod::exact;
    std::size_t n_permutations = 0; // 0 for exact
    std::vector<std::string> feature_names;
    bool residual_redistributed = false;
    double residual = 0.0; // efficiency gap before redistribution
};

// Interventional expectation over the background: features in the mask keep
// the sample's value, all other explained features come from each background
// row in turn. Non-explained fields always keep the sample's value.
inline double coalition_value(const Predictor& f, const SampleRef& x, std::uint32_t mask,
                              const std::vector<ExplainedFeature>& feats,
                              const BackgroundSet& bg) {
    if (bg.size() == 0) throw argument_error("coalition_value: empty background");
    Vec dense = x.dense;
    std::vector<int> codes = x.codes;
    double sum = 0.0;
    for (std::size_t b = 0; b < bg.size(); ++b) {
        for (std::size_t i = 0; i < feats.size(); ++i) {
            if (mask & (std::uint32_t{1} << i)) continue;
            const auto& ft = feats[i];
            if (ft.sparse) {
                codes[ft.index] = bg.codes[b][ft.index];
            } else {
                dense[ft.index] = bg.dense(b, ft.index);
            }
        }
        sum += f.predict(dense, codes);
        // restore the coalition features for the next row
        for (std::size_t i = 0; i < feats.size(); ++i) {
            if (mask & (std::uint32_t{1} << i)) continue;
            const auto& ft = feats[i];
            if (ft.sparse) {
                codes[ft.index] = x.codes[ft.index];
            } else {
                dense[ft.index] = x.dense[ft.index];
            }
        }
    }
    return sum / static_cast<double>(bg.size());
}

namespace detail {

inline double binom(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
        r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return r;
}

} // namespace detail

// Exact Shapley values by subset enumeration with the factorial weights
// |S|! (F - |S| - 1)! / F!, evaluated once per coalition.
inline Explanation shap_exact(const Predictor& f, const SampleRef& x, const BackgroundSet& bg,
                              const std::vector<ExplainedFeature>& feats) {
    const std::size_t F = feats.size();
    if (F == 0) throw argument_error("shap_exact: no features to explain");
    if (F > 20) {
        throw capacity_error("shap_exact supports at most 20 features (got " +
                             std::to_string(F) + "); use shap_permutation");
    }

    const std::uint32_t full = (std::uint32_t{1} << F) - 1;
    std::vector<double> value(static_cast<std::size_t>(full) + 1);
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
        value[mask] = coalition_value(f, x, mask, feats, bg);
    }

    // weight by coalition size: 1 / (F * C(F-1, s))
    std::vector<double> weight(F);
    for (std::size_t s = 0; s < F; ++s) {
        weight[s] = 1.0 / (static_cast<double>(F) * detail::binom(F - 1, s));
    }

    Explanation e;
    e.method = ShapMethod::exact;
    e.phi0 = value[0];
    e.fx = f.predict(x.dense, x.codes);
    e.phi.assign(F, 0.0);
    for (std::size_t i = 0; i < F; ++i) {
        const std::uint32_t bit = std::uint32_t{1} << i;
        for (std::uint32_t mask = 0; mask <= full; ++mask) {
            if (mask & bit) continue;
            const auto s = static_cast<std::size_t>(std::popcount(mask));
            e.phi[i] += weight[s] * (value[mask | bit] - value[mask]);
        }
        e.feature_names.push_back(feats[i].name);
    }
    return e;
}

// Averages marginal contributions along explicit feature orderings; the
// sampled estimator feeds seed-generated orderings through this.
inline Explanation shap_from_orderings(const Predictor& f, const SampleRef& x,
                                       const BackgroundSet& bg,
                                       const std::vector<ExplainedFeature>& feats,
                                       const std::vector<std::vector<std::size_t>>& orderings) {
    const std::size_t F = feats.size();
    if (orderings.empty()) throw argument_error("shap_from_orderings: no orderings");

    Explanation e;
    e.method = ShapMethod::permutation;
    e.n_permutations = orderings.size();
    e.phi0 = coalition_value(f, x, 0, feats, bg);
    e.fx = f.predict(x.dense, x.codes);
    e.phi.assign(F, 0.0);

    for (const auto& order : orderings) {
        std::uint32_t mask = 0;
        double prev = e.phi0;
        for (auto idx : order) {
            mask |= std::uint32_t{1} << idx;
            double cur = coalition_value(f, x, mask, feats, bg);
            e.phi[idx] += cur - prev;
            prev = cur;
        }
    }
    for (auto& p : e.phi) p /= static_cast<double>(orderings.size());

    // enforce efficiency; the redistribution is flagged so consumers can
    // tell enforced from natural efficiency
    double sum_phi = std::accumulate(e.phi.begin(), e.phi.end(), 0.0);
    e.residual = e.fx - e.phi0 - sum_phi;
    double total_abs = 0.0;
    for (auto p : e.phi) total_abs += std::fabs(p);
    if (total_abs > 0.0) {
        for (auto& p : e.phi) p += e.residual * std::fabs(p) / total_abs;
    } else {
        for (auto& p : e.phi) p += e.residual / static_cast<double>(F);
    }
    e.residual_redistributed = true;

    for (const auto& ft : feats) e.feature_names.push_back(ft.name);
    return e;
}

inline Explanation shap_permutation(const Predictor& f, const SampleRef& x,
                                    const BackgroundSet& bg,
                                    const std::vector<ExplainedFeature>& feats,
                                    std::size_t n_perm, std::uint64_t seed) {
    if (n_perm == 0) throw argument_error("shap_permutation: n_perm must be >= 1");
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> orderings(n_perm);
    for (auto& order : orderings) {
        order.resize(feats.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
    }
    return shap_from_orderings(f, x, bg, feats, orderings);
}

// ---------------------------------------------------------------------------
// aggregation and exports

// mean |phi| per feature, descending; ties break by feature name.
inline std::vector<std::pair<std::string, double>> importance_summary(
    const std::vector<Explanation>& explanations) {
    if (explanations.empty()) throw argument_error("importance_summary: no explanations");
    const auto& names = explanations.front().feature_names;
    Vec acc(names.size(), 0.0);
    for (const auto& e : explanations) {
        if (e.feature_names != names) {
            throw argument_error("importance_summary: explanations disagree on feature sets");
        }
        for (std::size_t i = 0; i < names.size(); ++i) acc[i] += std::fabs(e.phi[i]);
    }
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        out.emplace_back(names[i], acc[i] / static_cast<double>(explanations.size()));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

struct DependenceRecord {
    std::pair<std::string, std::string> sample_key;
    double feature_value = 0.0;
    double shap_value = 0.0;
    double color_feature_value = 0.0;
};

namespace detail {

inline double raw_feature_value(const Dataset& ds, std::size_t row, const std::string& name) {
    for (std::size_t j = 0; j < ds.schema.dense_count(); ++j) {
        if (ds.schema.dense_fields[j].name == name) return ds.dense(row, j);
    }
    for (std::size_t j = 0; j < ds.schema.sparse_count(); ++j) {
        if (ds.schema.sparse_fields[j].name == name) {
            return static_cast<double>(ds.sparse_codes[row][j]);
        }
    }
    throw argument_error("unknown feature: " + name);
}

} // namespace detail

// The data behind the paper's colored dependence scatter: one record per
// explained sample.
inline std::vector<DependenceRecord> dependence_export(
    const std::vector<Explanation>& explanations, const std::vector<std::size_t>& rows,
    const Dataset& ds, const std::string& feature, const std::string& color_feature) {
    if (explanations.size() != rows.size()) {
        throw argument_error("dependence_export: explanations and rows differ in length");
    }
    if (explanations.empty()) return {};
    const auto& names = explanations.front().feature_names;
    auto pos = std::find(names.begin(), names.end(), feature);
    if (pos == names.end()) {
        throw argument_error("feature " + feature + " is not in the explained set");
    }
    const auto fi = static_cast<std::size_t>(pos - names.begin());

    std::vector<DependenceRecord> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        DependenceRecord rec;
        rec.sample_key = ds.row_keys[rows[i]];
        rec.feature_value = detail::raw_feature_value(ds, rows[i], feature);
        rec.shap_value = explanations[i].phi[fi];
        rec.color_feature_value = detail::raw_feature_value(ds, rows[i], color_feature);
        out.push_back(std::move(rec));
    }
    return out;
}

struct ForceRecord {
    double phi0 = 0.0;
    double fx = 0.0;
    struct Entry {
        std::string feature;
        double phi = 0.0;
        int direction = 0; // sign of phi
    };
    std::vector<Entry> entries; // |phi| descending, ties by name
};

inline ForceRecord force_record(const Explanation& e) {
    ForceRecord out;
    out.phi0 = e.phi0;
    out.fx = e.fx;
    for (std::size_t i = 0; i < e.phi.size(); ++i) {
        int dir = e.phi[i] > 0.0 ? 1 : (e.phi[i] < 0.0 ? -1 : 0);
        out.entries.push_back({e.feature_names[i], e.phi[i], dir});
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const auto& a, const auto& b) {
        double ma = std::fabs(a.phi), mb = std::fabs(b.phi);
        if (ma != mb) return ma > mb;
        return a.feature < b.feature;
    });
    return out;
}

// ---------------------------------------------------------------------------
// CSV exports

namespace detail {

inline std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

inline void write_explanation_csv(const std::vector<Explanation>& explanations,
                                  const std::vector<std::size_t>& rows, const Dataset& ds,
                                  const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << "sample_id,year,feature,phi,feature_value,method,n_permutations,phi0,fx\n";
    for (std::size_t i = 0; i < explanations.size(); ++i) {
        const auto& e = explanations[i];
        const auto& key = ds.row_keys[rows[i]];
        const char* method = e.method == ShapMethod::exact ? "exact" : "permutation";
        for (std::size_t j = 0; j < e.phi.size(); ++j) {
            out << key.first << ',' << key.second << ',' << e.feature_names[j] << ','
                << detail::g17(e.phi[j]) << ','
                << detail::g17(detail::raw_feature_value(ds, rows[i], e.feature_names[j])) << ','
                << method << ',' << e.n_permutations << ',' << detail::g17(e.phi0) << ','
                << detail::g17(e.fx) << '\n';
        }
    }
}

inline void write_importance_csv(const std::vector<std::pair<std::string, double>>& ranking,
                                 const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << "feature,mean_abs_shap,rank\n";
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        out << ranking[i].first << ',' << detail::g17(ranking[i].second) << ',' << i + 1 << '\n';
    }
}

inline void write_dependence_csv(const std::vector<DependenceRecord>& records,
                                 const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << "sample_id,year,feature_value,shap_value,color_feature_value\n";
    for (const auto& r : records) {
        out << r.sample_key.first << ',' << r.sample_key.second << ','
            << detail::g17(r.feature_value) << ',' << detail::g17(r.shap_value) << ','
            << detail::g17(r.color_feature_value) << '\n';
    }
}

} // namespace madcn
