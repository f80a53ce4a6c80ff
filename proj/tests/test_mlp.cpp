#include <doctest.h>

#include <cmath>
#include <numeric>

#include "faceclust/error.hpp"
#include "faceclust/mlp.hpp"
#include "faceclust/serialize.hpp"
#include "support.hpp"
#include "synth/synth.hpp"

using namespace faceclust;

namespace {

const std::vector<std::size_t> kSmall{5, 4, 3};
const std::vector<std::size_t> kWide{10, 8, 4};

std::vector<double> random_input(std::size_t n, Rng& rng) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    return x;
}

}  // namespace

TEST_CASE("init: deterministic, zero biases, bounded weights") {
    const MlpModel a = mlp_init(kWide, 3);
    CHECK(a == mlp_init(kWide, 3));
    CHECK(!(a == mlp_init(kWide, 4)));
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        const double bound = std::sqrt(6.0 / static_cast<double>(kWide[l] + kWide[l + 1]));
        for (double b : a.layers[l].biases) CHECK(b == 0.0);
        for (double w : a.layers[l].weights.data()) CHECK(std::abs(w) <= bound);
        CHECK(a.layers[l].weights.rows() == kWide[l + 1]);
        CHECK(a.layers[l].weights.cols() == kWide[l]);
    }
    CHECK_THROWS_AS(mlp_init(std::vector<std::size_t>{3}, 0), Error);
    CHECK_THROWS_AS(mlp_init(std::vector<std::size_t>{3, 0, 2}, 0), Error);
}

TEST_CASE("softmax: sums to one and is shift invariant") {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        const auto logits = random_input(6, rng);
        const auto p = softmax(logits);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        auto shifted = logits;
        for (double& v : shifted) v += 123.0;
        const auto q = softmax(shifted);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
    }
    const auto big = softmax(std::vector<double>{1000.0, 0.0});
    CHECK(big[0] == 1.0);
}

TEST_CASE("forward: zero model is uniform, bias shift leaves probabilities unchanged") {
    MlpModel m = mlp_init(kSmall, 0);
    for (auto& layer : m.layers) {
        for (double& w : layer.weights.data()) w = 0.0;
    }
    const auto p = forward(m, std::vector<double>{1, 2, 3, 4, 5});
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0));

    Rng rng(2);
    MlpModel r = mlp_init(kSmall, 7);
    const auto x = random_input(5, rng);
    const auto before = forward(r, x);
    for (double& b : r.layers.back().biases) b += 4.0;
    const auto after = forward(r, x);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(std::abs(before[i] - after[i]) <= 1e-12);
    CHECK_THROWS_AS(forward(r, std::vector<double>{1, 2}), Error);
}

TEST_CASE("input scale multiplies the input") {
    Rng rng(3);
    MlpModel m = mlp_init(kSmall, 1);
    const auto x = random_input(5, rng);
    auto doubled = x;
    for (double& v : doubled) v *= 2.0;
    MlpModel scaled = m;
    scaled.input_scale = 2.0;
    CHECK(forward(scaled, x) == forward(m, doubled));
}

TEST_CASE("gradient check over 20 seeds and two shapes") {
    for (const auto& shape : {kSmall, kWide}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(seed + 100);
            const MlpModel m = mlp_init(shape, seed);
            const auto x = random_input(shape.front(), rng);
            const std::size_t label = rng.index(shape.back());
            CHECK(grad_check(m, x, label) < 1e-4);
        }
    }
}

TEST_CASE("analytic output-bias gradient of a zero model") {
    MlpModel m = mlp_init(kSmall, 0);
    for (auto& layer : m.layers) {
        for (double& w : layer.weights.data()) w = 0.0;
    }
    Gradients g = zero_gradients(m);
    const double l = loss_and_gradient(m, std::vector<double>{1, 1, 1, 1, 1}, 1, g);
    CHECK(l == doctest::Approx(std::log(3.0)));
    CHECK(g.biases.back()[0] == doctest::Approx(1.0 / 3.0));
    CHECK(g.biases.back()[1] == doctest::Approx(1.0 / 3.0 - 1.0));
    CHECK(g.biases.back()[2] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("central differences are second order on a smooth model") {
    // No hidden layer: the loss is smooth everywhere.
    Rng rng(4);
    const MlpModel m = mlp_init(std::vector<std::size_t>{4, 3}, 5);
    const auto x = random_input(4, rng);
    auto numeric = [&](double eps) {
        MlpModel p = m;
        double& w = p.layers[0].weights(0, 0);
        const double saved = w;
        w = saved + eps;
        const double up = loss(p, x, 2);
        w = saved - eps;
        const double down = loss(p, x, 2);
        return (up - down) / (2 * eps);
    };
    Gradients g = zero_gradients(m);
    loss_and_gradient(m, x, 2, g);
    const double exact = g.weights[0](0, 0);
    const double e1 = std::abs(numeric(1e-2) - exact), e2 = std::abs(numeric(2e-2) - exact);
    CHECK(e2 == doctest::Approx(4.0 * e1).epsilon(0.05));
}

TEST_CASE("stratified split: per-class holdout and errors") {
    std::vector<std::size_t> labels;
    for (std::size_t c = 0; c < 3; ++c)
        for (int i = 0; i < 10; ++i) labels.push_back(c);
    const auto s = stratified_split(labels, 3, 0.2, 7);
    CHECK(s.validation.size() == 6);
    CHECK(s.train.size() == 24);
    std::vector<int> held(3, 0);
    for (std::size_t i : s.validation) ++held[labels[i]];
    for (int h : held) CHECK(h == 2);
    CHECK(stratified_split(labels, 3, 0.2, 7).validation == s.validation);

    // At least one held out and one kept, even for tiny classes.
    const auto tiny = stratified_split(std::vector<std::size_t>{0, 0, 1, 1}, 2, 0.01, 1);
    CHECK(tiny.validation.size() == 2);
    CHECK(tiny.train.size() == 2);
    try {
        stratified_split(std::vector<std::size_t>{0, 0, 1}, 2, 0.2, 1);
        FAIL("expected Split");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Split);
        CHECK(std::string(e.what()).find("cluster 1") != std::string::npos);
    }
}

TEST_CASE("training config validation") {
    TrainConfig c;
    CHECK_NOTHROW(validate(c));
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(validate(c), Error);
    c = {};
    c.validation_fraction = 1.0;
    CHECK_THROWS_AS(validate(c), Error);
    c = {};
    c.batch_size = 0;
    CHECK_THROWS_AS(validate(c), Error);
}

TEST_CASE("separable blobs reach full held-out accuracy") {
    Rng rng(5);
    const auto b = synth::blobs(4, 10, 6, 1.0, 20.0, rng);
    MlpModel m = mlp_init(std::vector<std::size_t>{6, 16, 4}, 11);
    m.input_scale = 0.05;
    TrainConfig c;
    c.learning_rate = 0.1;
    c.seed = 12;
    const TrainResult r = train(m, b.points, b.labels, c);
    CHECK(r.metrics.accuracy == 1.0);
    CHECK(r.metrics.loss_history.size() == 200);
    CHECK(r.metrics.loss_history.back() < r.metrics.loss_history.front());
    CHECK(r.metrics.train_count + r.metrics.validation_count == 40);
    std::size_t diagonal = 0;
    for (std::size_t i = 0; i < 4; ++i) diagonal += r.metrics.confusion[i][i];
    CHECK(diagonal == r.metrics.validation_count);
    const TrainResult again = train(m, b.points, b.labels, c);
    CHECK(again.model == r.model);
}

TEST_CASE("a single sample is memorized") {
    MlpModel m = mlp_init(kSmall, 2);
    const Matrix x(1, 5, std::vector<double>{0.5, -1, 2, 0, 1});
    const std::vector<std::size_t> labels{2};
    const std::vector<std::size_t> rows{0};
    TrainConfig c;
    c.learning_rate = 0.5;
    c.epochs = 3000;
    const auto history = fit(m, x, labels, rows, c);
    CHECK(history.back() < 1e-3);
    CHECK(predict_class(m, x.row(0)) == 2);
}

TEST_CASE("serialization round trip keeps predictions") {
    Rng rng(6);
    MlpModel m = mlp_init(kWide, 9);
    m.input_scale = 0.25;
    const MlpModel back = mlp_from_json(to_json(m));
    CHECK(back == m);
    const auto x = random_input(10, rng);
    CHECK(forward(back, x) == forward(m, x));
    CHECK_THROWS_AS(mlp_from_json(R"({"schema_version":1,"layer_sizes":[2,2],"layers":[]})"), Error);
}
