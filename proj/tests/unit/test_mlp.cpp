#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "rehab/errors.hpp"
#include "rehab/metrics.hpp"
#include "rehab/mlp.hpp"
#include "rehab/rng.hpp"

using namespace rehab;

namespace {

// Identity first layer and summing head: logit(x) = relu(x0) + relu(x1).
MlpModel hand_net() {
    MlpModel m = MlpModel::init({2, 2, 1}, OutputHead::SigmoidBinary, 1);
    m.layers[0].w = {1.0, 0.0, 0.0, 1.0};
    m.layers[0].b = {0.0, 0.0};
    m.layers[1].w = {1.0, 1.0};
    m.layers[1].b = {0.0};
    return m;
}

// Linearly separable by the first coordinate, with filler noise dims.
std::pair<std::vector<std::vector<double>>, std::vector<int>> separable(
    int n, int dims, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        std::vector<double> row(dims);
        row[0] = label ? rng.uniform(0.5, 1.5) : rng.uniform(-1.5, -0.5);
        for (int d = 1; d < dims; ++d) row[d] = rng.uniform(-0.3, 0.3);
        X.push_back(std::move(row));
        y.push_back(label);
    }
    return {X, y};
}

double max_rel_grad_err(MlpModel& m, const std::vector<std::vector<double>>& X,
                        const std::vector<int>& y) {
    const auto [loss, grads] = loss_and_grad(m, X, y);
    (void)loss;
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        for (std::size_t k = 0; k < m.layers[l].w.size(); ++k) {
            const double keep = m.layers[l].w[k];
            m.layers[l].w[k] = keep + h;
            const double up = loss_and_grad(m, X, y).first;
            m.layers[l].w[k] = keep - h;
            const double dn = loss_and_grad(m, X, y).first;
            m.layers[l].w[k] = keep;
            const double fd = (up - dn) / (2.0 * h);
            const double ga = grads.dw[l][k];
            const double denom =
                std::max({std::fabs(fd), std::fabs(ga), 1e-6});
            worst = std::max(worst, std::fabs(fd - ga) / denom);
        }
    }
    return worst;
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("init shapes, zero biases and bounded weights") {
    const MlpModel m = MlpModel::init({4, 8, 3, 1}, OutputHead::SigmoidBinary, 7);
    CHECK(m.input_size() == 4);
    CHECK(m.output_size() == 1);
    REQUIRE(m.layers.size() == 3);
    CHECK(m.parameter_count() ==
          (4 * 8 + 8) + (8 * 3 + 3) + (3 * 1 + 1));
    for (const auto& l : m.layers) {
        const double limit = std::sqrt(6.0 / l.in);
        for (double w : l.w) {
            CHECK(w >= -limit);
            CHECK(w <= limit);
        }
        for (double b : l.b) CHECK(b == 0.0);
    }
    CHECK(MlpModel::init({4, 8, 1}, OutputHead::SigmoidBinary, 7) ==
          MlpModel::init({4, 8, 1}, OutputHead::SigmoidBinary, 7));
    CHECK(MlpModel::init({4, 8, 1}, OutputHead::SigmoidBinary, 7) !=
          MlpModel::init({4, 8, 1}, OutputHead::SigmoidBinary, 8));
}

TEST_CASE("depth limits are enforced") {
    CHECK_THROWS_AS(MlpModel::init({4, 1}, OutputHead::SigmoidBinary, 1),
                    DomainError);
    CHECK_THROWS_AS(
        MlpModel::init({4, 8, 8, 8, 8, 1}, OutputHead::SigmoidBinary, 1),
        DomainError);
    CHECK_THROWS_AS(MlpModel::init({4, 8, 2}, OutputHead::SigmoidBinary, 1),
                    DomainError);  // sigmoid head needs one output
    CHECK_NOTHROW(MlpModel::init({4, 8, 2}, OutputHead::LinearQ, 1));
}

TEST_CASE("forward matches a hand computation") {
    const MlpModel m = hand_net();
    // relu(2) + relu(-3) = 2, sigmoid(2) = 0.8807970779778823.
    const auto out = forward(m, {2.0, -3.0});
    REQUIRE(out.size() == 1);
    CHECK(out[0] == doctest::Approx(0.8807970779778823).epsilon(1e-12));
    const ForwardCache cache = forward_cached(m, {2.0, -3.0});
    CHECK(cache.acts.back()[0] == doctest::Approx(2.0));  // raw logit
    CHECK(cache.acts[1] == std::vector<double>{2.0, 0.0});
    CHECK_THROWS_AS(forward(m, {1.0}), DimensionMismatch);
}

TEST_CASE("cross-entropy loss and gradient on one example") {
    MlpModel m = hand_net();
    // z = 2, y = 1: loss = log(1 + e^-2), dz = sigmoid(2) - 1.
    const auto [loss, grads] = loss_and_grad(m, {{2.0, -3.0}}, {1});
    CHECK(loss == doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-12));
    const double dz = 0.8807970779778823 - 1.0;
    // Head gradient: dz * hidden activation (2, 0).
    CHECK(grads.dw[1][0] == doctest::Approx(dz * 2.0).epsilon(1e-9));
    CHECK(grads.dw[1][1] == doctest::Approx(0.0));
    CHECK(grads.db[1][0] == doctest::Approx(dz).epsilon(1e-9));
    // ReLU blocks the dead unit: column for x1 gets no gradient.
    CHECK(grads.dw[0][3] == doctest::Approx(0.0));
    CHECK_THROWS_AS(loss_and_grad(m, {}, {}), DimensionMismatch);
    CHECK_THROWS_AS(loss_and_grad(m, {{1.0, 2.0}}, {1, 0}),
                    DimensionMismatch);
}

TEST_CASE("analytic gradients agree with finite differences") {
    const auto [X, y] = separable(16, 5, 21);
    for (std::uint64_t seed : {1ULL, 2ULL}) {
        MlpModel m = MlpModel::init({5, 7, 4, 1}, OutputHead::SigmoidBinary,
                                    seed);
        CHECK(max_rel_grad_err(m, X, y) < 1e-4);
    }
}

TEST_CASE("q-loss only trains the taken action") {
    MlpModel m = MlpModel::init({2, 3, 2}, OutputHead::LinearQ, 3);
    const std::vector<std::vector<double>> X = {{0.5, -0.2}};
    const auto q = forward(m, X[0]);
    const std::vector<int> act = {1};
    const std::vector<double> targets = {q[1] + 1.0};
    const auto [loss, grads] = q_loss_and_grad(m, X, act, targets);
    CHECK(loss == doctest::Approx(0.5).epsilon(1e-9));  // 0.5 * 1^2
    // Head row for action 0 is untouched.
    CHECK(grads.dw[1][0] == 0.0);
    CHECK(grads.dw[1][1] == 0.0);
    CHECK(grads.dw[1][2] == 0.0);
    CHECK(grads.db[1][0] == 0.0);
}

TEST_CASE("adam first step moves by lr in the gradient sign direction") {
    MlpModel m = MlpModel::init({3, 4, 1}, OutputHead::SigmoidBinary, 11);
    const MlpModel before = m;
    Gradients g = Gradients::zeros_like(m);
    Rng rng(4);
    for (auto& layer : g.dw)
        for (double& v : layer) v = rng.sign() * rng.uniform(0.05, 1.0);
    for (auto& layer : g.db)
        for (double& v : layer) v = rng.sign() * rng.uniform(0.05, 1.0);
    AdamState state = AdamState::zeros_like(m);
    const double lr = 0.01;
    adam_step(m, g, state, lr);
    for (std::size_t l = 0; l < m.layers.size(); ++l)
        for (std::size_t k = 0; k < m.layers[l].w.size(); ++k) {
            const double delta = m.layers[l].w[k] - before.layers[l].w[k];
            const double sign = g.dw[l][k] > 0 ? 1.0 : -1.0;
            CHECK(std::fabs(delta + lr * sign) < 1e-6);
        }
}

TEST_CASE("training separates a separable set") {
    const auto [X, y] = separable(200, 6, 33);
    MlpModel m = MlpModel::init({6, 16, 1}, OutputHead::SigmoidBinary, 5);
    const double before = loss_and_grad(m, X, y).first;
    const auto [loss, iters] = train_single(m, X, y, 0.01, 1e-6, 300);
    CHECK(loss < before);
    CHECK(iters <= 300);
    std::vector<int> pred;
    for (const auto& row : X)
        pred.push_back(forward(m, row)[0] >= 0.5 ? 1 : 0);
    CHECK(accuracy(pred, y) == doctest::Approx(1.0));
}

TEST_CASE("tiny learning rate never increases the loss") {
    const auto [X, y] = separable(40, 4, 17);
    MlpModel m = MlpModel::init({4, 8, 1}, OutputHead::SigmoidBinary, 2);
    AdamState state = AdamState::zeros_like(m);
    double prev = loss_and_grad(m, X, y).first;
    for (int i = 0; i < 50; ++i) {
        const auto [loss, grads] = loss_and_grad(m, X, y);
        adam_step(m, grads, state, 1e-4);
        const double now = loss_and_grad(m, X, y).first;
        CHECK(now <= prev + 1e-12);
        prev = now;
    }
}

TEST_CASE("grid search covers the grid depth-major and is reproducible") {
    const auto [X, y] = separable(60, 4, 55);
    TrainConfig cfg;
    cfg.depths = {1, 2};
    cfg.widths = {4, 8};
    cfg.learning_rates = {0.01, 0.001};
    cfg.max_iter = 40;
    cfg.seed = 9;
    const auto [model, report] = train_predictor(X, y, cfg);
    REQUIRE(report.cells.size() == 2 * 2 * 2);
    // Depth-major architecture order, learning rate fastest.
    CHECK(report.cells[0].hidden == std::vector<int>{4});
    CHECK(report.cells[0].lr == doctest::Approx(0.01));
    CHECK(report.cells[1].hidden == std::vector<int>{4});
    CHECK(report.cells[1].lr == doctest::Approx(0.001));
    CHECK(report.cells[2].hidden == std::vector<int>{8});
    CHECK(report.cells[4].hidden == std::vector<int>{4, 4});
    CHECK(report.cells[6].hidden == std::vector<int>{8, 8});
    CHECK(report.best_index < report.cells.size());
    const double best = report.cells[report.best_index].val_f1;
    for (const auto& c : report.cells) CHECK(c.val_f1 <= best + 1e-12);

    // Same seed, same outcome; worker count changes nothing.
    TrainConfig cfg2 = cfg;
    cfg2.threads = 3;
    const auto [model2, report2] = train_predictor(X, y, cfg2);
    CHECK(model2 == model);
    CHECK(report2.best_index == report.best_index);
    for (std::size_t i = 0; i < report.cells.size(); ++i) {
        CHECK(report2.cells[i].val_f1 ==
              doctest::Approx(report.cells[i].val_f1));
        CHECK(report2.cells[i].iterations == report.cells[i].iterations);
    }
}

TEST_CASE("grid search needs both classes") {
    const std::vector<std::vector<double>> X = {{0.0}, {1.0}, {2.0}};
    TrainConfig cfg;
    cfg.depths = {1};
    cfg.widths = {4};
    cfg.learning_rates = {0.01};
    CHECK_THROWS_AS(train_predictor(X, {1, 1, 1}, cfg), DegenerateLabels);
    CHECK_THROWS_AS(train_predictor({}, {}, cfg), EmptyTrainingSet);
}

TEST_CASE("masked encoding zeroes unacquired values and appends the mask") {
    auto names = testutil::names_n(2);
    FeatureVector fv = testutil::fv_of(names, {3.0, 4.0});
    fv.mask = {1, 0};
    CHECK(encode_input(fv) == std::vector<double>{3.0, 0.0, 1.0, 0.0});
    fv.mask.clear();  // empty mask means fully acquired
    CHECK(encode_input(fv) == std::vector<double>{3.0, 4.0, 1.0, 1.0});
}

TEST_CASE("prediction threshold sits at one half") {
    // One feature, so the encoded input is (value, mask bit). With head
    // weights (1, -1) the logit is relu(v) - 1 for v > 0.
    MlpModel m = hand_net();
    m.layers[1].w = {1.0, -1.0};
    auto names = testutil::names_n(1);
    const Prediction hi = predict(m, testutil::fv_of(names, {5.0}));
    CHECK(hi.probability == doctest::Approx(1.0 / (1.0 + std::exp(-4.0))));
    CHECK(hi.label == 1);
    const Prediction lo = predict(m, testutil::fv_of(names, {0.5}));
    CHECK(lo.probability == doctest::Approx(1.0 / (1.0 + std::exp(0.5))));
    CHECK(lo.label == 0);
}

TEST_CASE("predictor checkpoints round-trip and validate names") {
    const auto [X, y] = separable(40, 3, 77);
    TrainConfig cfg;
    cfg.depths = {1};
    cfg.widths = {4};
    cfg.learning_rates = {0.01};
    cfg.max_iter = 30;
    cfg.seed = 13;
    // Build feature vectors so the checkpoint carries real normalization.
    auto names = testutil::names_n(3);
    std::vector<FeatureVector> fvs;
    for (const auto& row : X) fvs.push_back(testutil::fv_of(names, row));
    const NormParams norm = fit_zscore(fvs);
    std::vector<std::vector<double>> Xe;
    for (const auto& fv : fvs)
        Xe.push_back(encode_input(apply_zscore(norm, fv)));
    const auto [model, report] = train_predictor(Xe, y, cfg);

    const std::string path = testutil::temp_path("predictor") + ".json";
    save_predictor({model, norm}, path);
    const PredictorCheckpoint back = load_predictor(path, names.get());
    CHECK(back.model == model);
    CHECK(back.norm.mean == norm.mean);
    CHECK(back.norm.std_dev == norm.std_dev);

    const auto other = testutil::names_n(4);
    CHECK_THROWS_AS(load_predictor(path, other.get()), ConfigError);
    CHECK_THROWS_AS(load_predictor("/nonexistent/predictor.json"), IoError);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.depths = {0};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.learning_rates.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.val_fraction = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.threads = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}  // TEST_SUITE
