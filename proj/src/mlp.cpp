#include "faceclust/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "faceclust/error.hpp"
#include "faceclust/rng.hpp"

namespace faceclust {

MlpModel mlp_init(std::span<const std::size_t> layer_sizes, std::uint64_t seed) {
    require(layer_sizes.size() >= 2, "mlp: at least an input and an output layer are required");
    for (std::size_t s : layer_sizes) require(s >= 1, "mlp: layer sizes must be >= 1");
    MlpModel m;
    m.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
    m.init_seed = seed;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t in = layer_sizes[l], out = layer_sizes[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        MlpLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
        for (double& w : layer.weights.data()) w = rng.uniform(-bound, bound);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

std::vector<double> softmax(std::span<const double> logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - top);
    for (double& v : p) v /= sum;
    return p;
}

namespace {

// Activations per layer: acts[0] is the scaled input, acts[l+1] the output of
// layer l (raw logits for the last layer). pre[l] holds pre-activations.
struct Pass {
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> pre;
};

Pass run(const MlpModel& model, std::span<const double> x) {
    if (x.size() != model.input_size())
        fail(ErrorCode::Argument, "mlp: expected input of size " + std::to_string(model.input_size()) + ", got " +
                                      std::to_string(x.size()));
    Pass p;
    std::vector<double> in(x.begin(), x.end());
    for (double& v : in) v *= model.input_scale;
    p.acts.push_back(std::move(in));
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const MlpLayer& layer = model.layers[l];
        std::vector<double> z(layer.biases);
        for (std::size_t o = 0; o < z.size(); ++o) z[o] += dot(layer.weights.row(o), p.acts.back());
        std::vector<double> a = z;
        if (l + 1 < model.layers.size())
            for (double& v : a) v = std::max(v, 0.0);
        p.pre.push_back(std::move(z));
        p.acts.push_back(std::move(a));
    }
    return p;
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - top);
    return top + std::log(sum) - logits[label];
}

}  // namespace

std::vector<double> forward(const MlpModel& model, std::span<const double> x) {
    return softmax(run(model, x).acts.back());
}

std::size_t predict_class(const MlpModel& model, std::span<const double> x) {
    const auto p = forward(model, x);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

Gradients zero_gradients(const MlpModel& model) {
    Gradients g;
    for (const auto& layer : model.layers) {
        g.weights.emplace_back(layer.weights.rows(), layer.weights.cols());
        g.biases.emplace_back(layer.biases.size(), 0.0);
    }
    return g;
}

double loss_and_gradient(const MlpModel& model, std::span<const double> x, std::size_t label, Gradients& grad) {
    require(label < model.output_size(), "mlp: label outside output range");
    const Pass p = run(model, x);
    const auto& logits = p.acts.back();
    std::vector<double> delta = softmax(logits);
    delta[label] -= 1.0;
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const auto& input = p.acts[l];
        Matrix& gw = grad.weights[l];
        for (std::size_t o = 0; o < delta.size(); ++o) {
            grad.biases[l][o] += delta[o];
            auto row = gw.row(o);
            for (std::size_t i = 0; i < input.size(); ++i) row[i] += delta[o] * input[i];
        }
        if (l == 0) break;
        std::vector<double> back(input.size(), 0.0);
        const Matrix& w = model.layers[l].weights;
        for (std::size_t o = 0; o < delta.size(); ++o) {
            const auto row = w.row(o);
            for (std::size_t i = 0; i < input.size(); ++i) back[i] += row[i] * delta[o];
        }
        for (std::size_t i = 0; i < back.size(); ++i)
            if (!(p.pre[l - 1][i] > 0.0)) back[i] = 0.0;
        delta = std::move(back);
    }
    return cross_entropy(logits, label);
}

double loss(const MlpModel& model, std::span<const double> x, std::size_t label) {
    require(label < model.output_size(), "mlp: label outside output range");
    return cross_entropy(run(model, x).acts.back(), label);
}

void validate(const TrainConfig& c) {
    require(c.learning_rate > 0.0, "mlp: learning_rate must be > 0");
    require(c.epochs >= 1, "mlp: epochs must be >= 1");
    require(c.batch_size >= 1, "mlp: batch_size must be >= 1");
    require(c.validation_fraction > 0.0 && c.validation_fraction < 1.0, "mlp: validation_fraction must be in (0, 1)");
}

StratifiedSplit stratified_split(std::span<const std::size_t> labels, std::size_t classes, double fraction,
                                 std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] < classes, "split: label outside class range");
        members[labels[i]].push_back(i);
    }
    for (std::size_t c = 0; c < classes; ++c)
        if (members[c].size() < 2)
            fail(ErrorCode::Split, "cluster " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                                       " member(s); a stratified split needs at least 2");
    Rng rng(seed);
    StratifiedSplit split;
    for (auto& m : members) {
        rng.shuffle(m);
        const auto count = static_cast<double>(m.size());
        auto held = static_cast<std::size_t>(std::lround(fraction * count));
        held = std::clamp<std::size_t>(held, 1, m.size() - 1);
        split.validation.insert(split.validation.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(held));
        split.train.insert(split.train.end(), m.begin() + static_cast<std::ptrdiff_t>(held), m.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    return split;
}

std::vector<double> fit(MlpModel& model, const Matrix& x, std::span<const std::size_t> labels,
                        std::span<const std::size_t> rows, const TrainConfig& config) {
    require(config.learning_rate > 0.0 && config.epochs >= 1 && config.batch_size >= 1,
            "mlp: invalid training configuration");
    require(!rows.empty(), "mlp: no training rows");
    require(x.cols() == model.input_size(), "mlp: sample width does not match the input layer");
    Rng rng(config.seed);
    std::vector<std::size_t> order(rows.begin(), rows.end());
    std::vector<double> history;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            Gradients g = zero_gradients(model);
            for (std::size_t b = start; b < end; ++b) loss_and_gradient(model, x.row(order[b]), labels[order[b]], g);
            const double step = config.learning_rate / static_cast<double>(end - start);
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                auto& w = model.layers[l].weights.data();
                const auto& gw = g.weights[l].data();
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * gw[i];
                auto& bias = model.layers[l].biases;
                for (std::size_t i = 0; i < bias.size(); ++i) bias[i] -= step * g.biases[l][i];
            }
        }
        double total = 0.0;
        for (std::size_t r : rows) total += loss(model, x.row(r), labels[r]);
        history.push_back(total / static_cast<double>(rows.size()));
    }
    return history;
}

EvalMetrics evaluate(const MlpModel& model, const Matrix& x, std::span<const std::size_t> labels,
                     std::span<const std::size_t> rows) {
    const std::size_t k = model.output_size();
    EvalMetrics m;
    m.confusion.assign(k, std::vector<std::size_t>(k, 0));
    std::size_t correct = 0;
    for (std::size_t r : rows) {
        const std::size_t pred = predict_class(model, x.row(r));
        ++m.confusion[labels[r]][pred];
        correct += pred == labels[r];
    }
    m.accuracy = rows.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(rows.size());
    m.validation_count = rows.size();
    return m;
}

TrainResult train(MlpModel model, const Matrix& x, std::span<const std::size_t> labels, const TrainConfig& config) {
    validate(config);
    require(labels.size() == x.rows(), "mlp: label count differs from sample count");
    const StratifiedSplit split = stratified_split(labels, model.output_size(), config.validation_fraction, config.seed);
    auto history = fit(model, x, labels, split.train, config);
    EvalMetrics metrics = evaluate(model, x, labels, split.validation);
    metrics.loss_history = std::move(history);
    metrics.train_count = split.train.size();
    return {std::move(model), std::move(metrics)};
}

double grad_check(const MlpModel& model, std::span<const double> x, std::size_t label, double epsilon) {
    MlpModel m = model;
    // Keep every hidden pre-activation farther from 0 than a perturbation can move it.
    const double margin = 1e3 * epsilon;
    for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
        const Pass p = run(m, x);
        for (std::size_t o = 0; o < p.pre[l].size(); ++o) {
            const double z = p.pre[l][o];
            if (std::abs(z) < margin) m.layers[l].biases[o] += (z >= 0.0 ? 1.0 : -1.0) * 2.0 * margin;
        }
    }

    Gradients g = zero_gradients(m);
    loss_and_gradient(m, x, label, g);
    double worst = 0.0;
    auto check = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + epsilon;
        const double up = loss(m, x, label);
        param = saved - epsilon;
        const double down = loss(m, x, label);
        param = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        worst = std::max(worst, std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric)));
    };
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto& w = m.layers[l].weights.data();
        for (std::size_t i = 0; i < w.size(); ++i) check(w[i], g.weights[l].data()[i]);
        auto& b = m.layers[l].biases;
        for (std::size_t i = 0; i < b.size(); ++i) check(b[i], g.biases[l][i]);
    }
    return worst;
}

}  // namespace faceclust
