#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "madcn/errors.hpp"
#include "madcn/matrix.hpp"
#include "madcn/rng.hpp"
#include "madcn/schema.hpp"
#include "madcn/standardize.hpp"

namespace madcn {

enum class RunMode { train, infer };

enum class Activation { relu, identity };

struct EmbeddingTable {
    std::string field_name;
    Matrix table; // cardinality x d
};

struct NoiseConfig {
    double mu = 0.0;
    double sigma = 0.1;
    bool train_only = true;
};

struct CrossLayerParams {
    Vec w;          // length D
    double b = 0.0; // scalar
};

struct DenseLayerParams {
    Matrix weight; // out x in
    Vec bias;      // length out
    Activation activation = Activation::relu;
};

struct AttentionParams {
    std::size_t heads = 0;
    std::size_t d_k = 0;
    std::vector<Matrix> w_q, w_k, w_v; // per head, d_model x d_k
    Matrix w_o;                        // (heads * d_k) x d_model
};

// One token per schema field: dense scalars map through a learned 1 x d_model
// projection, each sparse embedding through a d x d_model projection.
struct TokenProjection {
    std::size_t m = 0;       // dense fields
    std::size_t n = 0;       // sparse fields
    std::size_t d = 0;       // embedding dim
    std::size_t d_model = 0;
    std::vector<Matrix> proj; // m entries 1 x d_model, then n entries d x d_model

    std::size_t token_count() const { return m + n; }
};

// ---------------------------------------------------------------------------
// layer ops

inline Vec embed_lookup(const EmbeddingTable& table, int code) {
    if (code < 0 || static_cast<std::size_t>(code) >= table.table.rows()) {
        throw encoding_error("embedding " + table.field_name + ": code " + std::to_string(code) +
                             " out of range [0, " + std::to_string(table.table.rows()) + ")");
    }
    auto row = table.table.row(static_cast<std::size_t>(code));
    return Vec(row.begin(), row.end());
}

inline Vec assemble_input(const Vec& dense_std, const std::vector<Vec>& embeds) {
    Vec z = dense_std;
    for (const auto& e : embeds) z.insert(z.end(), e.begin(), e.end());
    return z;
}

// Train mode adds R ~ N(mu, sigma^2) drawn i.i.d. per coordinate from the
// supplied stream; inference never perturbs.
inline Vec inject_noise(const Vec& z, const NoiseConfig& cfg, RunMode mode, Rng& rng) {
    if (mode == RunMode::infer) return z;
    if (!cfg.train_only && cfg.sigma == 0.0) return z;
    Vec out = z;
    for (auto& v : out) v += rng.gaussian(cfg.mu, cfg.sigma);
    return out;
}

// x_{l+1} = (w . x_l + b) * x0 + x_l with scalar bias; w = 0, b = 0 gives the
// residual identity.
inline Vec cross_forward(const Vec& x0, const Vec& xl, const CrossLayerParams& p,
                         double* s_out = nullptr) {
    if (x0.size() != xl.size() || p.w.size() != xl.size()) {
        throw shape_error("cross layer shape mismatch: x0 " + std::to_string(x0.size()) +
                          ", xl " + std::to_string(xl.size()) + ", w " +
                          std::to_string(p.w.size()));
    }
    double s = dot(p.w, xl) + p.b;
    if (s_out) *s_out = s;
    Vec out(xl.size());
    for (std::size_t i = 0; i < xl.size(); ++i) out[i] = s * x0[i] + xl[i];
    return out;
}

struct CrossBackward {
    Vec dx0;
    Vec dxl;
    Vec dw;
    double db = 0.0;
};

inline CrossBackward cross_backward(const Vec& x0, const Vec& xl, const CrossLayerParams& p,
                                    const Vec& g) {
    double s = dot(p.w, xl) + p.b;
    double c = dot(g, x0); // gradient reaching the scalar s
    CrossBackward out;
    out.dx0.resize(x0.size());
    out.dxl.resize(xl.size());
    out.dw.resize(p.w.size());
    for (std::size_t i = 0; i < xl.size(); ++i) {
        out.dx0[i] = s * g[i];
        out.dxl[i] = g[i] + c * p.w[i];
        out.dw[i] = c * xl[i];
    }
    out.db = c;
    return out;
}

inline Vec deep_forward(const Vec& h, const DenseLayerParams& p, Vec* pre_out = nullptr) {
    if (h.size() != p.weight.cols()) {
        throw shape_error("dense layer expects input length " + std::to_string(p.weight.cols()) +
                          ", got " + std::to_string(h.size()));
    }
    Vec pre(p.weight.rows());
    for (std::size_t i = 0; i < p.weight.rows(); ++i) {
        pre[i] = dot(p.weight.row(i), h) + p.bias[i];
    }
    if (pre_out) *pre_out = pre;
    if (p.activation == Activation::relu) {
        for (auto& v : pre) v = v > 0.0 ? v : 0.0;
    }
    return pre;
}

struct DenseBackward {
    Vec dinput;
    Matrix dweight;
    Vec dbias;
};

inline DenseBackward dense_backward(const Vec& input, const Vec& pre, const DenseLayerParams& p,
                                    const Vec& g) {
    Vec gpre(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        gpre[i] = p.activation == Activation::relu ? (pre[i] > 0.0 ? g[i] : 0.0) : g[i];
    }
    DenseBackward out;
    out.dinput.assign(input.size(), 0.0);
    out.dweight = Matrix(p.weight.rows(), p.weight.cols());
    out.dbias = gpre;
    for (std::size_t i = 0; i < p.weight.rows(); ++i) {
        for (std::size_t j = 0; j < p.weight.cols(); ++j) {
            out.dweight(i, j) = gpre[i] * input[j];
            out.dinput[j] += p.weight(i, j) * gpre[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// multi-head attention over feature tokens

struct AttentionCache {
    Matrix tokens;                 // T x d_model
    std::vector<Matrix> q, k, v;   // per head, T x d_k
    std::vector<Matrix> attn;      // per head, T x T, rows sum to 1
    Matrix concat;                 // T x heads*d_k
    Matrix out_tokens;             // T x d_model
    Vec a;                         // d_model, mean over output tokens
};

inline Matrix project_tokens(const Vec& z, const TokenProjection& tp) {
    const std::size_t T = tp.token_count();
    Matrix tokens(T, tp.d_model);
    for (std::size_t i = 0; i < tp.m; ++i) {
        const auto& p = tp.proj[i]; // 1 x d_model
        for (std::size_t c = 0; c < tp.d_model; ++c) tokens(i, c) = z[i] * p(0, c);
    }
    for (std::size_t j = 0; j < tp.n; ++j) {
        const auto& p = tp.proj[tp.m + j]; // d x d_model
        const std::size_t off = tp.m + j * tp.d;
        for (std::size_t c = 0; c < tp.d_model; ++c) {
            double s = 0.0;
            for (std::size_t r = 0; r < tp.d; ++r) s += z[off + r] * p(r, c);
            tokens(tp.m + j, c) = s;
        }
    }
    return tokens;
}

inline Vec attention_forward(const Vec& z, const AttentionParams& p, const TokenProjection& tp,
                             AttentionCache* cache = nullptr) {
    if (z.size() != tp.m + tp.n * tp.d) {
        throw shape_error("attention expects input length " +
                          std::to_string(tp.m + tp.n * tp.d) + ", got " +
                          std::to_string(z.size()));
    }
    if (p.w_q.size() != p.heads || p.w_o.rows() != p.heads * p.d_k) {
        throw shape_error("attention parameter layout mismatch: heads " +
                          std::to_string(p.heads) + ", w_o " + p.w_o.shape_str());
    }
    const std::size_t T = tp.token_count();
    Matrix tokens = project_tokens(z, tp);

    AttentionCache local;
    AttentionCache& c = cache ? *cache : local;
    c.tokens = tokens;
    c.q.clear();
    c.k.clear();
    c.v.clear();
    c.attn.clear();
    c.concat = Matrix(T, p.heads * p.d_k);

    const double scale = 1.0 / std::sqrt(static_cast<double>(p.d_k));
    for (std::size_t h = 0; h < p.heads; ++h) {
        Matrix q = matmul(tokens, p.w_q[h]);
        Matrix k = matmul(tokens, p.w_k[h]);
        Matrix v = matmul(tokens, p.w_v[h]);
        Matrix scores = matmul(q, transpose(k));
        for (std::size_t i = 0; i < scores.size(); ++i) scores[i] *= scale;
        Matrix attn = softmax_rows(scores);
        Matrix head = matmul(attn, v);
        for (std::size_t r = 0; r < T; ++r) {
            for (std::size_t j = 0; j < p.d_k; ++j) c.concat(r, h * p.d_k + j) = head(r, j);
        }
        c.q.push_back(std::move(q));
        c.k.push_back(std::move(k));
        c.v.push_back(std::move(v));
        c.attn.push_back(std::move(attn));
    }
    c.out_tokens = matmul(c.concat, p.w_o);

    Vec a(tp.d_model, 0.0);
    for (std::size_t r = 0; r < T; ++r) {
        for (std::size_t j = 0; j < tp.d_model; ++j) a[j] += c.out_tokens(r, j);
    }
    for (auto& v : a) v /= static_cast<double>(T);
    c.a = a;
    return a;
}

// Accumulates parameter gradients into gp / gtp and returns dz.
inline Vec attention_backward(const AttentionCache& c, const Vec& z, const AttentionParams& p,
                              const TokenProjection& tp, const Vec& da, AttentionParams& gp,
                              TokenProjection& gtp) {
    const std::size_t T = tp.token_count();
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.d_k));

    // mean over tokens
    Matrix dout(T, tp.d_model);
    for (std::size_t r = 0; r < T; ++r) {
        for (std::size_t j = 0; j < tp.d_model; ++j) {
            dout(r, j) = da[j] / static_cast<double>(T);
        }
    }

    Matrix concat_t = transpose(c.concat);
    Matrix dwo = matmul(concat_t, dout);
    for (std::size_t i = 0; i < dwo.size(); ++i) gp.w_o[i] += dwo[i];
    Matrix dconcat = matmul(dout, transpose(p.w_o));

    Matrix dtokens(T, tp.d_model);
    Matrix tokens_t = transpose(c.tokens);
    for (std::size_t h = 0; h < p.heads; ++h) {
        Matrix dhead(T, p.d_k);
        for (std::size_t r = 0; r < T; ++r) {
            for (std::size_t j = 0; j < p.d_k; ++j) dhead(r, j) = dconcat(r, h * p.d_k + j);
        }
        Matrix dattn = matmul(dhead, transpose(c.v[h]));
        Matrix dv = matmul(transpose(c.attn[h]), dhead);

        // softmax rows: ds = A .* (dA - rowdot(dA, A))
        Matrix dscores(T, T);
        for (std::size_t r = 0; r < T; ++r) {
            double rd = dot(dattn.row(r), c.attn[h].row(r));
            for (std::size_t j = 0; j < T; ++j) {
                dscores(r, j) = c.attn[h](r, j) * (dattn(r, j) - rd);
            }
        }
        for (std::size_t i = 0; i < dscores.size(); ++i) dscores[i] *= scale;

        Matrix dq = matmul(dscores, c.k[h]);
        Matrix dk = matmul(transpose(dscores), c.q[h]);

        Matrix dwq = matmul(tokens_t, dq);
        Matrix dwk = matmul(tokens_t, dk);
        Matrix dwv = matmul(tokens_t, dv);
        for (std::size_t i = 0; i < dwq.size(); ++i) {
            gp.w_q[h][i] += dwq[i];
            gp.w_k[h][i] += dwk[i];
            gp.w_v[h][i] += dwv[i];
        }

        Matrix dt_q = matmul(dq, transpose(p.w_q[h]));
        Matrix dt_k = matmul(dk, transpose(p.w_k[h]));
        Matrix dt_v = matmul(dv, transpose(p.w_v[h]));
        for (std::size_t i = 0; i < dtokens.size(); ++i) {
            dtokens[i] += dt_q[i] + dt_k[i] + dt_v[i];
        }
    }

    // token projections back to z
    Vec dz(z.size(), 0.0);
    for (std::size_t i = 0; i < tp.m; ++i) {
        const auto& pr = tp.proj[i];
        auto& gpr = gtp.proj[i];
        double acc = 0.0;
        for (std::size_t cix = 0; cix < tp.d_model; ++cix) {
            gpr(0, cix) += z[i] * dtokens(i, cix);
            acc += dtokens(i, cix) * pr(0, cix);
        }
        dz[i] = acc;
    }
    for (std::size_t j = 0; j < tp.n; ++j) {
        const auto& pr = tp.proj[tp.m + j];
        auto& gpr = gtp.proj[tp.m + j];
        const std::size_t off = tp.m + j * tp.d;
        for (std::size_t r = 0; r < tp.d; ++r) {
            double acc = 0.0;
            for (std::size_t cix = 0; cix < tp.d_model; ++cix) {
                gpr(r, cix) += z[off + r] * dtokens(tp.m + j, cix);
                acc += dtokens(tp.m + j, cix) * pr(r, cix);
            }
            dz[off + r] = acc;
        }
    }
    return dz;
}

// ---------------------------------------------------------------------------
// model

struct ModelHyperparams {
    std::size_t embed_dim = 8;
    std::size_t cross_layers = 3;
    std::vector<std::size_t> deep_layers = {128, 64};
    std::size_t heads = 4;
    std::size_t d_model = 32;
    std::size_t d_k = 8;
    bool use_cross = true;
    bool use_deep = true;
    bool use_attention = true;
    NoiseConfig noise;

    bool operator==(const ModelHyperparams&) const = default;
};

inline bool operator==(const NoiseConfig& a, const NoiseConfig& b) {
    return a.mu == b.mu && a.sigma == b.sigma && a.train_only == b.train_only;
}

// Every trainable tensor of the model; gradients use the same layout.
struct ParamSet {
    std::vector<EmbeddingTable> embeddings;
    std::vector<CrossLayerParams> cross_stack;
    std::vector<DenseLayerParams> deep_stack;
    TokenProjection token_proj;
    AttentionParams attention;
    DenseLayerParams output_head;
};

// Applies fn(name, span, rows, cols) to each tensor in manifest order. The
// order is the serialization order and the Adam slot order.
template <typename PS, typename Fn>
void visit_params(PS& ps, Fn&& fn) {
    for (auto& e : ps.embeddings) {
        fn("embed." + e.field_name, std::span(e.table.data()), e.table.rows(), e.table.cols());
    }
    for (std::size_t l = 0; l < ps.cross_stack.size(); ++l) {
        auto& c = ps.cross_stack[l];
        fn("cross." + std::to_string(l) + ".w", std::span(c.w), std::size_t{1}, c.w.size());
        fn("cross." + std::to_string(l) + ".b", std::span(&c.b, 1), std::size_t{1}, std::size_t{1});
    }
    for (std::size_t l = 0; l < ps.deep_stack.size(); ++l) {
        auto& d = ps.deep_stack[l];
        fn("deep." + std::to_string(l) + ".w", std::span(d.weight.data()), d.weight.rows(),
           d.weight.cols());
        fn("deep." + std::to_string(l) + ".b", std::span(d.bias), std::size_t{1}, d.bias.size());
    }
    for (std::size_t i = 0; i < ps.token_proj.proj.size(); ++i) {
        auto& p = ps.token_proj.proj[i];
        fn("token." + std::to_string(i), std::span(p.data()), p.rows(), p.cols());
    }
    for (std::size_t h = 0; h < ps.attention.heads; ++h) {
        auto tag = "attn." + std::to_string(h);
        fn(tag + ".wq", std::span(ps.attention.w_q[h].data()), ps.attention.w_q[h].rows(),
           ps.attention.w_q[h].cols());
        fn(tag + ".wk", std::span(ps.attention.w_k[h].data()), ps.attention.w_k[h].rows(),
           ps.attention.w_k[h].cols());
        fn(tag + ".wv", std::span(ps.attention.w_v[h].data()), ps.attention.w_v[h].rows(),
           ps.attention.w_v[h].cols());
    }
    if (ps.attention.heads > 0) {
        fn("attn.wo", std::span(ps.attention.w_o.data()), ps.attention.w_o.rows(),
           ps.attention.w_o.cols());
    }
    fn("out.w", std::span(ps.output_head.weight.data()), ps.output_head.weight.rows(),
       ps.output_head.weight.cols());
    fn("out.b", std::span(ps.output_head.bias), std::size_t{1}, ps.output_head.bias.size());
}

struct ForwardCache {
    Vec dense_std;
    std::vector<int> codes;
    Vec z;
    Vec z_noised;
    std::vector<Vec> cross_xs; // x0..xL
    std::vector<double> cross_s;
    std::vector<Vec> deep_pre;
    std::vector<Vec> deep_act;
    AttentionCache attn;
    Vec z_final;
    Vec yhat;
};

class MadcnModel {
public:
    FeatureSchema schema;
    CategoryMaps category_maps;
    StandardizerStats standardizer;
    ModelHyperparams hyper;
    ParamSet params;
    std::uint64_t seed = 0;

    std::size_t input_dim() const {
        return schema.dense_count() + schema.sparse_count() * hyper.embed_dim;
    }

    std::size_t deep_out_dim() const {
        return hyper.use_deep && !hyper.deep_layers.empty() ? hyper.deep_layers.back() : 0;
    }

    std::size_t fusion_dim() const {
        std::size_t f = 0;
        if (hyper.use_cross) f += input_dim();
        if (hyper.use_deep) f += deep_out_dim();
        if (hyper.use_attention) f += hyper.d_model;
        return f;
    }

    std::size_t target_count() const { return schema.target_count(); }

    static MadcnModel build(FeatureSchema schema, CategoryMaps category_maps,
                            StandardizerStats standardizer, ModelHyperparams hyper,
                            std::uint64_t seed) {
        schema.validate();
        if (hyper.use_deep && hyper.deep_layers.empty()) {
            throw argument_error("deep branch enabled but no layer widths given");
        }
        MadcnModel m;
        m.schema = std::move(schema);
        m.category_maps = std::move(category_maps);
        m.standardizer = std::move(standardizer);
        m.hyper = std::move(hyper);
        m.seed = seed;
        m.allocate();
        m.init_params(Rng(derive_seed(seed, "init")));
        return m;
    }

    Vec forward(std::span<const double> dense_raw, std::span<const int> codes, RunMode mode,
                Rng* noise_rng = nullptr, ForwardCache* cache = nullptr) const {
        const std::size_t m = schema.dense_count();
        const std::size_t n = schema.sparse_count();
        if (dense_raw.size() != m) {
            throw shape_error("input: expected " + std::to_string(m) + " dense values, got " +
                              std::to_string(dense_raw.size()));
        }
        if (codes.size() != n) {
            throw shape_error("input: expected " + std::to_string(n) + " sparse codes, got " +
                              std::to_string(codes.size()));
        }

        Vec dense_std(m);
        for (std::size_t j = 0; j < m; ++j) dense_std[j] = standardizer.standardize(j, dense_raw[j]);

        std::vector<Vec> embeds;
        embeds.reserve(n);
        for (std::size_t j = 0; j < n; ++j) embeds.push_back(embed_lookup(params.embeddings[j], codes[j]));

        Vec z = assemble_input(dense_std, embeds);

        ForwardCache local;
        ForwardCache& c = cache ? *cache : local;
        c.dense_std = dense_std;
        c.codes.assign(codes.begin(), codes.end());
        c.z = z;
        c.cross_xs.clear();
        c.cross_s.clear();
        c.deep_pre.clear();
        c.deep_act.clear();

        Vec z_final;
        if (hyper.use_cross) {
            c.cross_xs.push_back(z);
            Vec x = z;
            for (const auto& layer : params.cross_stack) {
                double s = 0.0;
                x = cross_forward(z, x, layer, &s);
                c.cross_xs.push_back(x);
                c.cross_s.push_back(s);
            }
            z_final.insert(z_final.end(), x.begin(), x.end());
        }
        if (hyper.use_deep) {
            if (mode == RunMode::train && !noise_rng) {
                throw argument_error("train-mode forward needs a noise generator");
            }
            Rng unused(0);
            c.z_noised = inject_noise(z, hyper.noise, mode, noise_rng ? *noise_rng : unused);
            Vec h = c.z_noised;
            for (const auto& layer : params.deep_stack) {
                Vec pre;
                h = deep_forward(h, layer, &pre);
                c.deep_pre.push_back(std::move(pre));
                c.deep_act.push_back(h);
            }
            z_final.insert(z_final.end(), h.begin(), h.end());
        }
        if (hyper.use_attention) {
            Vec a = attention_forward(z, params.attention, params.token_proj, &c.attn);
            z_final.insert(z_final.end(), a.begin(), a.end());
        }
        c.z_final = z_final;

        Vec yhat = deep_forward(z_final, params.output_head);
        if (!all_finite(yhat)) {
            throw evaluation_error("model forward produced non-finite output");
        }
        c.yhat = yhat;
        return yhat;
    }

    // Accumulates parameter gradients into grads; returns the gradient with
    // respect to the raw dense inputs (chained through the standardizer).
    Vec backward(const ForwardCache& c, const Vec& dy, ParamSet& grads) const {
        const std::size_t D = input_dim();

        Vec pre_out(params.output_head.bias.size());
        for (std::size_t i = 0; i < pre_out.size(); ++i) {
            pre_out[i] = dot(params.output_head.weight.row(i), c.z_final) +
                         params.output_head.bias[i];
        }
        auto ob = dense_backward(c.z_final, pre_out, params.output_head, dy);
        accumulate(grads.output_head, ob.dweight, ob.dbias);
        const Vec& dz_final = ob.dinput;

        Vec dz(D, 0.0);
        std::size_t off = 0;
        if (hyper.use_cross) {
            Vec g(dz_final.begin() + off, dz_final.begin() + off + D);
            off += D;
            Vec dx0(D, 0.0);
            for (std::size_t l = params.cross_stack.size(); l-- > 0;) {
                auto cb = cross_backward(c.cross_xs[0], c.cross_xs[l], params.cross_stack[l], g);
                for (std::size_t i = 0; i < D; ++i) {
                    dx0[i] += cb.dx0[i];
                    grads.cross_stack[l].w[i] += cb.dw[i];
                }
                grads.cross_stack[l].b += cb.db;
                g = std::move(cb.dxl);
            }
            for (std::size_t i = 0; i < D; ++i) dz[i] += g[i] + dx0[i];
        }
        if (hyper.use_deep) {
            std::size_t w = deep_out_dim();
            Vec g(dz_final.begin() + off, dz_final.begin() + off + w);
            off += w;
            for (std::size_t l = params.deep_stack.size(); l-- > 0;) {
                const Vec& input = l == 0 ? c.z_noised : c.deep_act[l - 1];
                auto db = dense_backward(input, c.deep_pre[l], params.deep_stack[l], g);
                accumulate(grads.deep_stack[l], db.dweight, db.dbias);
                g = std::move(db.dinput);
            }
            for (std::size_t i = 0; i < D; ++i) dz[i] += g[i];
        }
        if (hyper.use_attention) {
            Vec da(dz_final.begin() + off, dz_final.begin() + off + hyper.d_model);
            Vec dz_attn = attention_backward(c.attn, c.z, params.attention, params.token_proj, da,
                                             grads.attention, grads.token_proj);
            for (std::size_t i = 0; i < D; ++i) dz[i] += dz_attn[i];
        }

        const std::size_t m = schema.dense_count();
        for (std::size_t j = 0; j < schema.sparse_count(); ++j) {
            auto grow = grads.embeddings[j].table.row(static_cast<std::size_t>(c.codes[j]));
            const std::size_t base = m + j * hyper.embed_dim;
            for (std::size_t i = 0; i < hyper.embed_dim; ++i) grow[i] += dz[base + i];
        }

        Vec d_dense_raw(m, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            const auto& f = standardizer.fields[j];
            d_dense_raw[j] = f.constant ? 0.0 : dz[j] / f.sigma;
        }
        return d_dense_raw;
    }

    ParamSet zero_grads() const {
        ParamSet g = params;
        visit_params(g, [](const std::string&, std::span<double> v, std::size_t, std::size_t) {
            std::fill(v.begin(), v.end(), 0.0);
        });
        return g;
    }

private:
    void allocate() {
        const std::size_t m = schema.dense_count();
        const std::size_t n = schema.sparse_count();
        const std::size_t d = hyper.embed_dim;
        const std::size_t D = input_dim();

        for (const auto& f : schema.sparse_fields) {
            params.embeddings.push_back({f.name, Matrix(f.cardinality, d)});
        }
        if (hyper.use_cross) {
            params.cross_stack.resize(hyper.cross_layers);
            for (auto& c : params.cross_stack) c.w.assign(D, 0.0);
        }
        if (hyper.use_deep) {
            std::size_t in = D;
            for (auto width : hyper.deep_layers) {
                params.deep_stack.push_back({Matrix(width, in), Vec(width, 0.0), Activation::relu});
                in = width;
            }
        }
        if (hyper.use_attention) {
            auto& tp = params.token_proj;
            tp.m = m;
            tp.n = n;
            tp.d = d;
            tp.d_model = hyper.d_model;
            for (std::size_t i = 0; i < m; ++i) tp.proj.emplace_back(1, hyper.d_model);
            for (std::size_t j = 0; j < n; ++j) tp.proj.emplace_back(d, hyper.d_model);

            auto& at = params.attention;
            at.heads = hyper.heads;
            at.d_k = hyper.d_k;
            for (std::size_t h = 0; h < hyper.heads; ++h) {
                at.w_q.emplace_back(hyper.d_model, hyper.d_k);
                at.w_k.emplace_back(hyper.d_model, hyper.d_k);
                at.w_v.emplace_back(hyper.d_model, hyper.d_k);
            }
            at.w_o = Matrix(hyper.heads * hyper.d_k, hyper.d_model);
        }
        params.output_head = {Matrix(schema.target_count(), fusion_dim()),
                              Vec(schema.target_count(), 0.0), Activation::identity};
    }

    // Fan-based uniform init; biases stay zero. Weight tensors draw in
    // manifest order so a seed fixes every parameter.
    void init_params(Rng rng) {
        visit_params(params, [&](const std::string& name, std::span<double> v, std::size_t rows,
                                 std::size_t cols) {
            if (name.ends_with(".b") || name == "out.b") return;
            double fan_in = static_cast<double>(cols);
            double fan_out = static_cast<double>(rows);
            if (name.starts_with("cross.")) {
                fan_in = static_cast<double>(cols);
                fan_out = 1.0;
            } else if (name.starts_with("deep.") || name == "out.w") {
                fan_in = static_cast<double>(cols);
                fan_out = static_cast<double>(rows);
            } else {
                // embeddings, tokens, attention: rows feed in, cols feed out
                fan_in = static_cast<double>(rows);
                fan_out = static_cast<double>(cols);
            }
            double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (auto& x : v) x = rng.uniform(-limit, limit);
        });
    }

    static void accumulate(DenseLayerParams& g, const Matrix& dw, const Vec& db) {
        for (std::size_t i = 0; i < dw.size(); ++i) g.weight[i] += dw[i];
        for (std::size_t i = 0; i < db.size(); ++i) g.bias[i] += db[i];
    }
};

} // namespace madcn
