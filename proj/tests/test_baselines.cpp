#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "madcn/baselines.hpp"
#include "madcn/metrics.hpp"
#include "madcn/train.hpp"
#include "synth_fixture.hpp"

using namespace madcn;
using madcn::testing::synth_interaction;
using madcn::testing::synth_product;

TEST_CASE("fit_linear recovers exact linear data") {
    // y = 2x + 1
    Matrix x(5, 1, {0, 1, 2, 3, 4});
    Matrix y(5, 1, {1, 3, 5, 7, 9});
    auto m = fit_linear(x, y, 0.0);
    REQUIRE(m.weights(0, 0) == Catch::Approx(2.0).margin(1e-8));
    REQUIRE(m.intercept[0] == Catch::Approx(1.0).margin(1e-8));
    REQUIRE(m.predict(Vec{10.0})[0] == Catch::Approx(21.0).margin(1e-7));
}

TEST_CASE("fit_linear on a constant target gives zero weights") {
    Rng rng(1);
    Matrix x(20, 2);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);
    Matrix y(20, 1, Vec(20, 4.25));
    auto m = fit_linear(x, y, 1e-9);
    REQUIRE(std::fabs(m.weights(0, 0)) < 1e-6);
    REQUIRE(std::fabs(m.weights(1, 0)) < 1e-6);
    REQUIRE(m.intercept[0] == Catch::Approx(4.25).margin(1e-6));
}

TEST_CASE("huge ridge shrinks weights to zero but keeps the intercept") {
    Rng rng(2);
    Matrix x(50, 2);
    Matrix y(50, 1);
    double sum = 0.0;
    for (std::size_t r = 0; r < 50; ++r) {
        x(r, 0) = rng.uniform(-1, 1);
        x(r, 1) = rng.uniform(-1, 1);
        y(r, 0) = 3.0 * x(r, 0) - 1.0 * x(r, 1) + 0.5;
        sum += y(r, 0);
    }
    auto m = fit_linear(x, y, 1e12);
    REQUIRE(std::fabs(m.weights(0, 0)) < 1e-9);
    REQUIRE(std::fabs(m.weights(1, 0)) < 1e-9);
    REQUIRE(m.intercept[0] == Catch::Approx(sum / 50.0).margin(1e-9));
}

TEST_CASE("fit_linear residuals are orthogonal to the features at lambda 0") {
    Rng rng(3);
    Matrix x(40, 3);
    Matrix y(40, 1);
    for (std::size_t r = 0; r < 40; ++r) {
        for (std::size_t j = 0; j < 3; ++j) x(r, j) = rng.uniform(-2, 2);
        y(r, 0) = rng.uniform(-5, 5);
    }
    auto m = fit_linear(x, y, 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
        double ip = 0.0;
        for (std::size_t r = 0; r < 40; ++r) {
            double resid = y(r, 0) - m.predict(x.row(r))[0];
            ip += resid * x(r, j);
        }
        REQUIRE(std::fabs(ip) < 1e-8);
    }
}

TEST_CASE("a singular system at lambda 0 suggests ridge") {
    // duplicated column makes X^T X singular
    Matrix x(10, 2);
    Matrix y(10, 1);
    Rng rng(4);
    for (std::size_t r = 0; r < 10; ++r) {
        x(r, 0) = rng.uniform(-1, 1);
        x(r, 1) = x(r, 0);
        y(r, 0) = x(r, 0);
    }
    REQUIRE_THROWS_MATCHES(fit_linear(x, y, 0.0), singularity_error,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("ridge_lambda")));
    REQUIRE_NOTHROW(fit_linear(x, y, 1e-6));
}

TEST_CASE("knn returns the stored target at distance zero") {
    KnnModel m;
    m.k = 1;
    m.train_features = Matrix(3, 2, {0, 0, 1, 1, 2, 2});
    m.train_targets = Matrix(3, 1, {10, 20, 30});
    REQUIRE(knn_predict(m, Vec{1, 1}) == Vec{20});
}

TEST_CASE("knn with k covering all rows returns the global mean") {
    KnnModel m;
    m.k = 3;
    m.train_features = Matrix(3, 2, {0, 0, 1, 1, 2, 2});
    m.train_targets = Matrix(3, 1, {10, 20, 30});
    REQUIRE(knn_predict(m, Vec{5, 5}) == Vec{20});
}

TEST_CASE("knn averages the two nearest of three rows") {
    // distances from the query 0 are 1, 2, 3
    KnnModel m;
    m.k = 2;
    m.train_features = Matrix(3, 1, {1, 2, 3});
    m.train_targets = Matrix(3, 1, {10, 20, 30});
    REQUIRE(knn_predict(m, Vec{0.0}) == Vec{15});
}

TEST_CASE("knn breaks distance ties by lower row index") {
    KnnModel m;
    m.k = 1;
    m.train_features = Matrix(2, 1, {1, -1}); // both at distance 1 from 0
    m.train_targets = Matrix(2, 1, {111, 222});
    REQUIRE(knn_predict(m, Vec{0.0}) == Vec{111});
}

TEST_CASE("knn validates k and query length") {
    KnnModel m;
    m.k = 5;
    m.train_features = Matrix(3, 1, {1, 2, 3});
    m.train_targets = Matrix(3, 1, {1, 2, 3});
    REQUIRE_THROWS_AS(knn_predict(m, Vec{0.0}), argument_error);
    m.k = 2;
    REQUIRE_THROWS_AS(knn_predict(m, Vec{0.0, 1.0}), shape_error);
}

TEST_CASE("baseline_features one-hot encodes sparse fields") {
    Dataset ds;
    ds.schema.dense_fields = {{"a", ""}};
    ds.schema.sparse_fields = {{"c", 3}};
    ds.schema.target_fields = {"y"};
    ds.schema.id_field = "id";
    ds.schema.time_field = "t";
    ds.n_rows = 2;
    ds.dense = Matrix(2, 1, {1.0, 3.0});
    ds.sparse_codes = {{2}, {0}};
    ds.targets = Matrix(2, 1, {0, 0});

    StandardizerStats st;
    st.fields = {{2.0, 1.0, false}};
    Matrix f = baseline_features(ds, st);
    REQUIRE(f.rows() == 2);
    REQUIRE(f.cols() == 4);
    REQUIRE(f(0, 0) == -1.0);
    REQUIRE(f.row(0)[3] == 1.0); // code 2 -> third one-hot slot
    REQUIRE(f.row(1)[1] == 1.0); // code 0 -> first one-hot slot
}

TEST_CASE("dnn ablation with zero parameters predicts zero and is deterministic") {
    auto ds = synth_interaction(64, 11);
    auto sp = split(64, 0.75, 11);
    auto stats = fit_standardizer(ds, sp.train);

    ModelHyperparams h;
    h.deep_layers = {8, 4};
    auto m = build_ablation(AblationKind::dnn_only, ds.schema, {}, stats, h, 21);
    REQUIRE_FALSE(m.hyper.use_cross);
    REQUIRE_FALSE(m.hyper.use_attention);

    visit_params(m.params, [](const std::string&, std::span<double> v, std::size_t,
                              std::size_t) { std::fill(v.begin(), v.end(), 0.0); });
    Vec x{0.1, 0.2, 0.3};
    REQUIRE(m.forward(x, {}, RunMode::infer) == Vec{0});

    // no noise path at inference: repeated calls agree bitwise
    auto m2 = build_ablation(AblationKind::dnn_only, ds.schema, {}, stats, h, 22);
    REQUIRE(m2.forward(x, {}, RunMode::infer) == m2.forward(x, {}, RunMode::infer));
}

TEST_CASE("dcn ablation disables attention and noise") {
    auto ds = synth_interaction(32, 12);
    auto sp = split(32, 0.75, 12);
    auto stats = fit_standardizer(ds, sp.train);
    ModelHyperparams h;
    auto m = build_ablation(AblationKind::dcn_no_attention, ds.schema, {}, stats, h, 23);
    REQUIRE(m.hyper.use_cross);
    REQUIRE_FALSE(m.hyper.use_attention);
    REQUIRE(m.hyper.noise.sigma == 0.0);
}

TEST_CASE("build_ablation rejects an unknown kind") {
    auto ds = synth_interaction(8, 13);
    StandardizerStats st;
    st.fields = {{0, 1, false}, {0, 1, false}, {0, 1, false}};
    REQUIRE_THROWS_AS(build_ablation(static_cast<AblationKind>(99), ds.schema, {}, st,
                                     ModelHyperparams{}, 1),
                      argument_error);
}

TEST_CASE("dcn ablation learns the product interaction") {
    auto ds = synth_interaction(2000, 31);
    auto sp = split(ds.n_rows, 0.75, 31);
    auto stats = fit_standardizer(ds, sp.train);

    ModelHyperparams h;
    h.cross_layers = 2;
    h.deep_layers = {32, 16};
    auto model = build_ablation(AblationKind::dcn_no_attention, ds.schema, {}, stats, h, 33);

    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.batch_size = 128;
    cfg.seed = 34;
    cfg.early_stop_patience = 0;
    auto report = train(model, ds, sp, cfg);
    REQUIRE(report.final_test[0].r2 >= 0.95);
}

TEST_CASE("a depth-1 cross-only model fits x1*x2 almost exactly") {
    auto ds = synth_product(1200, 41);
    auto sp = split(ds.n_rows, 0.75, 41);
    auto stats = fit_standardizer(ds, sp.train);

    ModelHyperparams h;
    h.cross_layers = 1;
    h.use_deep = false;
    h.use_attention = false;
    auto model = MadcnModel::build(ds.schema, {}, stats, h, 42);

    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 64;
    cfg.learning_rate = 5e-3;
    cfg.seed = 43;
    cfg.validation_fraction = 0.0;
    cfg.early_stop_patience = 0;
    auto report = train(model, ds, sp, cfg);
    REQUIRE(report.final_train[0].r2 >= 0.99);
}

TEST_CASE("linear and knn baselines on the interaction benchmark") {
    auto ds = synth_interaction(1500, 51);
    auto sp = split(ds.n_rows, 0.75, 51);
    auto stats = fit_standardizer(ds, sp.train);
    Matrix all_features = baseline_features(ds, stats);

    Matrix train_x(sp.train.size(), all_features.cols());
    Matrix train_y(sp.train.size(), 1);
    for (std::size_t i = 0; i < sp.train.size(); ++i) {
        auto row = all_features.row(sp.train[i]);
        std::copy(row.begin(), row.end(), train_x.row(i).begin());
        train_y(i, 0) = ds.targets(sp.train[i], 0);
    }

    auto lr = fit_linear(train_x, train_y, 1e-6);
    Vec y_test, lr_pred;
    for (auto r : sp.test) {
        y_test.push_back(ds.targets(r, 0));
        lr_pred.push_back(lr.predict(all_features.row(r))[0]);
    }
    double lr_r2 = r2(y_test, lr_pred);
    // LR captures 3*x1 but none of the x2*x3 interaction
    REQUIRE(lr_r2 > 0.5);
    REQUIRE(lr_r2 < 0.95);

    KnnModel knn;
    knn.k = 5;
    knn.train_features = train_x;
    knn.train_targets = train_y;
    Vec knn_pred;
    for (auto r : sp.test) knn_pred.push_back(knn_predict(knn, all_features.row(r))[0]);
    double knn_r2 = r2(y_test, knn_pred);
    REQUIRE(knn_r2 > lr_r2); // the local learner sees the interaction
}

TEST_CASE("linear and knn serialization round-trips") {
    auto dir = std::filesystem::temp_directory_path() / "madcn_baseline_test";
    std::filesystem::create_directories(dir);

    LinearModel lm;
    lm.weights = Matrix(3, 1, {1.5, -2.5, 0.25});
    lm.intercept = {0.75};
    lm.ridge_lambda = 1e-6;
    auto lp = (dir / "lin.bin").string();
    save_linear(lm, lp);
    auto lm2 = load_linear(lp);
    REQUIRE(lm2.weights == lm.weights);
    REQUIRE(lm2.intercept == lm.intercept);
    REQUIRE(lm2.ridge_lambda == lm.ridge_lambda);

    KnnModel km;
    km.k = 2;
    km.train_features = Matrix(3, 2, {1, 2, 3, 4, 5, 6});
    km.train_targets = Matrix(3, 1, {7, 8, 9});
    auto kp = (dir / "knn.bin").string();
    save_knn(km, kp);
    auto km2 = load_knn(kp);
    REQUIRE(km2.k == 2);
    REQUIRE(km2.train_features == km.train_features);
    REQUIRE(km2.train_targets == km.train_targets);

    // the magic strings differ per family
    REQUIRE_THROWS_AS(load_linear(kp), format_error);
    REQUIRE_THROWS_AS(load_knn(lp), format_error);
}
