#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "faceclust/matrix.hpp"

namespace faceclust {

struct MlpLayer {
    Matrix weights;  // out x in
    std::vector<double> biases;
    bool operator==(const MlpLayer&) const = default;
};

// Rectifier on hidden layers, softmax on the output layer. Inputs are
// multiplied by `input_scale` before the first layer.
struct MlpModel {
    std::vector<std::size_t> layer_sizes;
    std::vector<MlpLayer> layers;
    std::uint64_t init_seed = 0;
    double input_scale = 1.0;

    std::size_t input_size() const { return layer_sizes.front(); }
    std::size_t output_size() const { return layer_sizes.back(); }
    bool operator==(const MlpModel&) const = default;
};

// Glorot-uniform weights from a seeded stream, zero biases.
MlpModel mlp_init(std::span<const std::size_t> layer_sizes, std::uint64_t seed);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> forward(const MlpModel& model, std::span<const double> x);
std::size_t predict_class(const MlpModel& model, std::span<const double> x);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

Gradients zero_gradients(const MlpModel& model);

// Cross-entropy of one sample; adds its gradient into `grad`.
double loss_and_gradient(const MlpModel& model, std::span<const double> x, std::size_t label, Gradients& grad);
double loss(const MlpModel& model, std::span<const double> x, std::size_t label);

struct TrainConfig {
    double learning_rate = 0.01;
    int epochs = 200;
    std::size_t batch_size = 16;
    double validation_fraction = 0.2;
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

struct EvalMetrics {
    double accuracy = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    std::vector<double> loss_history;
    std::size_t train_count = 0;
    std::size_t validation_count = 0;
};

struct StratifiedSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

// Per class: shuffled members, round(fraction * count) of them (at least one,
// at most count - 1) held out.
StratifiedSplit stratified_split(std::span<const std::size_t> labels, std::size_t classes, double fraction,
                                 std::uint64_t seed);

// Mini-batch gradient descent on mean cross-entropy over `rows`; returns the
// mean training loss after each epoch.
std::vector<double> fit(MlpModel& model, const Matrix& x, std::span<const std::size_t> labels,
                        std::span<const std::size_t> rows, const TrainConfig& config);

EvalMetrics evaluate(const MlpModel& model, const Matrix& x, std::span<const std::size_t> labels,
                     std::span<const std::size_t> rows);

struct TrainResult {
    MlpModel model;
    EvalMetrics metrics;
};

TrainResult train(MlpModel model, const Matrix& x, std::span<const std::size_t> labels, const TrainConfig& config);

// Largest |a - n| / max(1e-8, |a| + |n|) over all parameters, comparing the
// analytic gradient with central differences. Hidden pre-activations within
// reach of epsilon are first nudged off the rectifier kink.
double grad_check(const MlpModel& model, std::span<const double> x, std::size_t label, double epsilon = 1e-5);

}  // namespace faceclust
