#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "madcn/dataset.hpp"
#include "madcn/errors.hpp"
#include "madcn/matrix.hpp"
#include "madcn/model.hpp"
#include "madcn/serialize.hpp"
#include "madcn/standardize.hpp"

namespace madcn {

// LR and KNN consume standardized dense features plus one-hot encoded sparse
// fields; they have no embedding mechanism.
inline Matrix baseline_features(const Dataset& ds, const StandardizerStats& stats) {
    const auto& s = ds.schema;
    std::size_t width = s.dense_count();
    for (const auto& f : s.sparse_fields) width += f.cardinality;

    Matrix out(ds.n_rows, width);
    for (std::size_t r = 0; r < ds.n_rows; ++r) {
        for (std::size_t j = 0; j < s.dense_count(); ++j) {
            out(r, j) = stats.standardize(j, ds.dense(r, j));
        }
        std::size_t off = s.dense_count();
        for (std::size_t j = 0; j < s.sparse_count(); ++j) {
            out(r, off + static_cast<std::size_t>(ds.sparse_codes[r][j])) = 1.0;
            off += s.sparse_fields[j].cardinality;
        }
    }
    return out;
}

struct LinearModel {
    Matrix weights;  // features x targets
    Vec intercept;   // targets
    double ridge_lambda = 0.0;

    Vec predict(std::span<const double> x) const {
        Vec out(intercept);
        for (std::size_t k = 0; k < out.size(); ++k) {
            for (std::size_t j = 0; j < weights.rows(); ++j) out[k] += weights(j, k) * x[j];
        }
        return out;
    }
};

namespace detail {

// Gaussian elimination with partial pivoting; A is destroyed.
inline void solve_inplace(Matrix& a, Matrix& rhs) {
    const std::size_t n = a.rows();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::fabs(a(r, col)) > std::fabs(a(pivot, col))) pivot = r;
        }
        if (std::fabs(a(pivot, col)) < 1e-12) {
            throw singularity_error(
                "normal equations are singular; refit with ridge_lambda > 0");
        }
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
            for (std::size_t j = 0; j < rhs.cols(); ++j) std::swap(rhs(col, j), rhs(pivot, j));
        }
        const double inv = 1.0 / a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) * inv;
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
            for (std::size_t j = 0; j < rhs.cols(); ++j) rhs(r, j) -= f * rhs(col, j);
        }
    }
    for (std::size_t col = n; col-- > 0;) {
        for (std::size_t j = 0; j < rhs.cols(); ++j) {
            double v = rhs(col, j);
            for (std::size_t r = col + 1; r < n; ++r) v -= a(col, r) * rhs(r, j);
            rhs(col, j) = v / a(col, col);
        }
    }
}

} // namespace detail

// Solves (X^T X + lambda I) w = X^T y on intercept-augmented features with an
// unpenalized intercept column.
inline LinearModel fit_linear(const Matrix& features, const Matrix& targets,
                              double ridge_lambda) {
    if (features.rows() != targets.rows()) {
        throw shape_error("fit_linear: features " + features.shape_str() + " vs targets " +
                          targets.shape_str());
    }
    if (ridge_lambda < 0.0) throw argument_error("ridge_lambda must be >= 0");
    const std::size_t n = features.rows();
    const std::size_t p = features.cols();
    const std::size_t t = targets.cols();

    // gram over [X | 1]
    Matrix gram(p + 1, p + 1);
    Matrix xty(p + 1, t);
    for (std::size_t r = 0; r < n; ++r) {
        auto row = features.row(r);
        for (std::size_t i = 0; i < p; ++i) {
            if (row[i] == 0.0) continue;
            for (std::size_t j = i; j < p; ++j) gram(i, j) += row[i] * row[j];
            gram(i, p) += row[i];
            for (std::size_t k = 0; k < t; ++k) xty(i, k) += row[i] * targets(r, k);
        }
        for (std::size_t k = 0; k < t; ++k) xty(p, k) += targets(r, k);
    }
    gram(p, p) = static_cast<double>(n);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);
        gram(p, i) = gram(i, p);
        gram(i, i) += ridge_lambda; // intercept stays unpenalized
    }

    detail::solve_inplace(gram, xty);

    LinearModel model;
    model.ridge_lambda = ridge_lambda;
    model.weights = Matrix(p, t);
    model.intercept.assign(t, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = 0; k < t; ++k) model.weights(j, k) = xty(j, k);
    }
    for (std::size_t k = 0; k < t; ++k) model.intercept[k] = xty(p, k);
    return model;
}

struct KnnModel {
    std::size_t k = 5;
    Matrix train_features; // standardized
    Matrix train_targets;

    void validate() const {
        if (k == 0 || k > train_features.rows()) {
            throw argument_error("knn: k must lie in [1, stored rows]");
        }
    }
};

// Mean target of the k nearest stored rows; distance ties break toward the
// lower row index.
inline Vec knn_predict(const KnnModel& model, std::span<const double> query) {
    model.validate();
    if (query.size() != model.train_features.cols()) {
        throw shape_error("knn query length " + std::to_string(query.size()) +
                          " does not match stored features " +
                          std::to_string(model.train_features.cols()));
    }
    const std::size_t n = model.train_features.rows();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t r = 0; r < n; ++r) {
        double d2 = 0.0;
        auto row = model.train_features.row(r);
        for (std::size_t j = 0; j < query.size(); ++j) {
            double d = row[j] - query[j];
            d2 += d * d;
        }
        dist[r] = {d2, r};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(model.k),
                      dist.end());
    Vec out(model.train_targets.cols(), 0.0);
    for (std::size_t i = 0; i < model.k; ++i) {
        auto row = model.train_targets.row(dist[i].second);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += row[j];
    }
    for (auto& v : out) v /= static_cast<double>(model.k);
    return out;
}

enum class AblationKind { dnn_only, dcn_no_attention };

// Table 2 ablations assembled from the same components: DNN keeps only the
// deep branch; DCN keeps cross + deep with attention and noise off.
inline MadcnModel build_ablation(AblationKind kind, FeatureSchema schema,
                                 CategoryMaps category_maps, StandardizerStats standardizer,
                                 ModelHyperparams hyper, std::uint64_t seed) {
    switch (kind) {
    case AblationKind::dnn_only:
        hyper.use_cross = false;
        hyper.use_attention = false;
        hyper.use_deep = true;
        break;
    case AblationKind::dcn_no_attention:
        hyper.use_attention = false;
        hyper.use_cross = true;
        hyper.use_deep = true;
        hyper.noise.sigma = 0.0;
        hyper.noise.mu = 0.0;
        break;
    default:
        throw argument_error("unknown ablation kind");
    }
    return MadcnModel::build(std::move(schema), std::move(category_maps), std::move(standardizer),
                             hyper, seed);
}

// ---------------------------------------------------------------------------
// container serialization (same layout as the MADCN file, distinct magic)

inline void save_linear(const LinearModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    nlohmann::json header;
    header["ridge_lambda"] = m.ridge_lambda;
    header["manifest"] = {{{"name", "weights"},
                           {"rows", m.weights.rows()},
                           {"cols", m.weights.cols()},
                           {"offset", 0}},
                          {{"name", "intercept"},
                           {"rows", 1},
                           {"cols", m.intercept.size()},
                           {"offset", m.weights.size() * sizeof(double)}}};
    std::string hs = header.dump();
    out.write(kLinearMagic, 5);
    char version = static_cast<char>(kFormatVersion);
    out.write(&version, 1);
    detail::write_u64_le(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    detail::write_doubles_le(out, m.weights.data());
    detail::write_doubles_le(out, m.intercept);
    if (!out) throw io_error("write failed: " + path);
}

inline LinearModel load_linear(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open model file: " + path);
    detail::check_magic_version(in, kLinearMagic, path);
    auto header = detail::read_header(in, path);
    LinearModel m;
    try {
        m.ridge_lambda = header.at("ridge_lambda").get<double>();
        auto wj = header.at("manifest").at(0);
        m.weights = Matrix(wj.at("rows").get<std::size_t>(), wj.at("cols").get<std::size_t>());
        auto ij = header.at("manifest").at(1);
        m.intercept.assign(ij.at("cols").get<std::size_t>(), 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw format_error("file " + path + " header misses fields: " + e.what());
    }
    detail::read_doubles_le(in, m.weights.data());
    detail::read_doubles_le(in, m.intercept);
    return m;
}

inline void save_knn(const KnnModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    nlohmann::json header;
    header["k"] = m.k;
    header["distance"] = "euclidean";
    header["manifest"] = {{{"name", "train_features"},
                           {"rows", m.train_features.rows()},
                           {"cols", m.train_features.cols()},
                           {"offset", 0}},
                          {{"name", "train_targets"},
                           {"rows", m.train_targets.rows()},
                           {"cols", m.train_targets.cols()},
                           {"offset", m.train_features.size() * sizeof(double)}}};
    std::string hs = header.dump();
    out.write(kKnnMagic, 5);
    char version = static_cast<char>(kFormatVersion);
    out.write(&version, 1);
    detail::write_u64_le(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    detail::write_doubles_le(out, m.train_features.data());
    detail::write_doubles_le(out, m.train_targets.data());
    if (!out) throw io_error("write failed: " + path);
}

inline KnnModel load_knn(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open model file: " + path);
    detail::check_magic_version(in, kKnnMagic, path);
    auto header = detail::read_header(in, path);
    KnnModel m;
    try {
        m.k = header.at("k").get<std::size_t>();
        auto fj = header.at("manifest").at(0);
        m.train_features =
            Matrix(fj.at("rows").get<std::size_t>(), fj.at("cols").get<std::size_t>());
        auto tj = header.at("manifest").at(1);
        m.train_targets =
            Matrix(tj.at("rows").get<std::size_t>(), tj.at("cols").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
        throw format_error("file " + path + " header misses fields: " + e.what());
    }
    detail::read_doubles_le(in, m.train_features.data());
    detail::read_doubles_le(in, m.train_targets.data());
    m.validate();
    return m;
}

} // namespace madcn
