#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gapfill/errors.hpp"
#include "gapfill/series.hpp"

namespace gapfill {

/// The six tuned hyperparameters. Every hidden layer shares the node count
/// and dropout rate.
struct MlpArchitecture {
    int batch_size = 32;
    int epochs = 100;
    int layers = 1;
    int nodes_per_layer = 10;
    double dropout_rate = 0.0;
    int lag = 30;

    friend bool operator==(const MlpArchitecture&, const MlpArchitecture&) = default;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool shuffle = true;
    std::uint64_t seed = 0;
};

/// Affine map `out = weights * in + bias`; weights are (out x in).
struct DenseLayer {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
};

/// Trained (or freshly initialized) network: hidden ReLU layers followed by
/// one linear output node.
struct MlpModel {
    MlpArchitecture architecture;
    std::size_t input_width = 0;
    std::uint64_t seed = 0;
    std::vector<DenseLayer> layers;  // hidden layers, then the output layer

    std::size_t hidden_count() const { return layers.size() - 1; }
};

/// Column-per-sample design matrix: inputs are (width x rows), targets (rows).
struct Dataset {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd targets;

    std::size_t rows() const { return static_cast<std::size_t>(inputs.cols()); }
    std::size_t width() const { return static_cast<std::size_t>(inputs.rows()); }
};

/// Materializes a missing-free lagged table.
inline Dataset make_dataset(const LaggedTable& table) {
    Dataset data;
    const std::size_t w = table.width();
    const std::size_t r = table.rows();
    data.inputs.resize(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(r));
    data.targets.resize(static_cast<Eigen::Index>(r));
    const auto& series = table.source();
    const std::size_t n = series.width();
    for (std::size_t row = 0; row < r; ++row) {
        const std::size_t first = table.row_origin()[row] - table.lag() - 1;
        double* dst = data.inputs.col(static_cast<Eigen::Index>(row)).data();
        for (std::size_t step = 0; step <= table.lag(); ++step) {
            for (std::size_t var = 0; var < n; ++var) {
                const auto v = series.at(first + step, var);
                if (!v) throw DataError("lagged table row with origin " + std::to_string(table.row_origin()[row]) +
                                        " contains a missing value");
                *dst++ = *v;
            }
        }
        const auto y = table.output(row);
        if (!y) throw DataError("lagged table output at origin " + std::to_string(table.row_origin()[row]) + " is missing");
        data.targets[static_cast<Eigen::Index>(row)] = *y;
    }
    return data;
}

/// He-style initialization: N(0, 2 / fan_in) weights, zero biases.
inline MlpModel init_model(const MlpArchitecture& arch, std::size_t input_width, std::uint64_t seed) {
    if (input_width < 1) throw ConfigError("input width must be >= 1");
    if (arch.layers < 1 || arch.nodes_per_layer < 1) throw ConfigError("architecture needs >= 1 hidden node");
    MlpModel model;
    model.architecture = arch;
    model.input_width = input_width;
    model.seed = seed;
    std::mt19937_64 rng(seed);
    auto make = [&rng](Eigen::Index out, Eigen::Index in) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in)));
        DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
        for (Eigen::Index j = 0; j < in; ++j)
            for (Eigen::Index i = 0; i < out; ++i) layer.weights(i, j) = dist(rng);
        return layer;
    };
    Eigen::Index fan_in = static_cast<Eigen::Index>(input_width);
    for (int l = 0; l < arch.layers; ++l) {
        model.layers.push_back(make(arch.nodes_per_layer, fan_in));
        fan_in = arch.nodes_per_layer;
    }
    model.layers.push_back(make(1, fan_in));
    return model;
}

enum class Mode { train, infer };

/// Per-hidden-layer multiplicative masks (nodes x batch): 0 for dropped units,
/// 1/(1-rate) for survivors. Empty means no dropout.
using DropoutMasks = std::vector<Eigen::MatrixXd>;

template <class Rng>
DropoutMasks sample_dropout_masks(const MlpModel& model, Eigen::Index batch, Rng& rng) {
    DropoutMasks masks;
    const double rate = model.architecture.dropout_rate;
    if (rate <= 0.0) return masks;
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale = 1.0 / (1.0 - rate);
    for (std::size_t l = 0; l < model.hidden_count(); ++l) {
        Eigen::MatrixXd m(model.layers[l].weights.rows(), batch);
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = keep(rng) ? scale : 0.0;
        masks.push_back(std::move(m));
    }
    return masks;
}

namespace detail {

struct ForwardCache {
    std::vector<Eigen::MatrixXd> pre;   // hidden pre-activations
    std::vector<Eigen::MatrixXd> post;  // hidden outputs after ReLU and mask
    Eigen::RowVectorXd output;
};

inline void forward_batch(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                          const DropoutMasks& masks, ForwardCache& cache) {
    const std::size_t hidden = model.hidden_count();
    cache.pre.resize(hidden);
    cache.post.resize(hidden);
    for (std::size_t l = 0; l < hidden; ++l) {
        const auto& layer = model.layers[l];
        auto& z = cache.pre[l];
        if (l == 0) z.noalias() = layer.weights * inputs;
        else z.noalias() = layer.weights * cache.post[l - 1];
        z.colwise() += layer.bias;
        auto& a = cache.post[l];
        a = z.cwiseMax(0.0);
        if (!masks.empty()) a.array() *= masks[l].array();
    }
    const auto& out = model.layers.back();
    cache.output.noalias() = out.weights * cache.post.back();
    cache.output.array() += out.bias[0];
}

}  // namespace detail

/// Network output for each column of `inputs`, dropout disabled.
inline Eigen::RowVectorXd predict(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
    if (static_cast<std::size_t>(inputs.rows()) != model.input_width)
        throw DataError("input width " + std::to_string(inputs.rows()) + " does not match model width " +
                        std::to_string(model.input_width));
    detail::ForwardCache cache;
    detail::forward_batch(model, inputs, {}, cache);
    return cache.output;
}

/// Single-row forward pass. In train mode hidden units are dropped with the
/// architecture's rate using a mask drawn from `dropout_seed`.
inline double forward(const MlpModel& model, std::span<const double> input_row, Mode mode,
                      std::uint64_t dropout_seed = 0) {
    if (input_row.size() != model.input_width)
        throw DataError("input width " + std::to_string(input_row.size()) + " does not match model width " +
                        std::to_string(model.input_width));
    const Eigen::Map<const Eigen::VectorXd> x(input_row.data(), static_cast<Eigen::Index>(input_row.size()));
    DropoutMasks masks;
    if (mode == Mode::train) {
        std::mt19937_64 rng(dropout_seed);
        masks = sample_dropout_masks(model, 1, rng);
    }
    detail::ForwardCache cache;
    detail::forward_batch(model, x, masks, cache);
    return cache.output[0];
}

inline double mse(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.empty() || predictions.size() != targets.size())
        throw DataError("mse needs equal nonzero lengths");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - targets[i];
        sum += d * d;
    }
    return sum / static_cast<double>(predictions.size());
}

/// Parameter-shaped container used for gradients and Adam moments.
struct Gradients {
    std::vector<DenseLayer> layers;
    double loss = 0.0;  // batch MSE at the evaluated parameters
};

inline Gradients zeros_like(const MlpModel& model) {
    Gradients g;
    for (const auto& l : model.layers)
        g.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                            Eigen::VectorXd::Zero(l.bias.size())});
    return g;
}

/// Exact reverse-mode gradient of the batch MSE under fixed dropout masks.
/// The ReLU derivative at 0 is taken as 0.
inline Gradients gradients(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                           const Eigen::Ref<const Eigen::RowVectorXd>& targets, const DropoutMasks& masks) {
    const Eigen::Index batch = inputs.cols();
    detail::ForwardCache cache;
    detail::forward_batch(model, inputs, masks, cache);

    Gradients g;
    g.layers.resize(model.layers.size());
    const Eigen::RowVectorXd residual = cache.output - targets;
    g.loss = residual.squaredNorm() / static_cast<double>(batch);

    Eigen::MatrixXd delta = (2.0 / static_cast<double>(batch)) * residual;
    for (std::size_t k = model.layers.size(); k-- > 0;) {
        auto& gl = g.layers[k];
        if (k == 0) gl.weights.noalias() = delta * inputs.transpose();
        else gl.weights.noalias() = delta * cache.post[k - 1].transpose();
        gl.bias = delta.rowwise().sum();
        if (k == 0) break;
        Eigen::MatrixXd up = model.layers[k].weights.transpose() * delta;
        const auto& z = cache.pre[k - 1];
        up.array() *= (z.array() > 0.0).cast<double>();
        if (!masks.empty()) up.array() *= masks[k - 1].array();
        delta = std::move(up);
    }
    return g;
}

struct AdamState {
    Gradients m;
    Gradients v;
    long step = 0;
};

inline AdamState make_adam_state(const MlpModel& model) { return {zeros_like(model), zeros_like(model), 0}; }

/// One bias-corrected Adam update; `step` is the 1-based update count.
inline void adam_step(MlpModel& model, AdamState& state, const Gradients& grad, const TrainConfig& cfg, long step) {
    if (step < 1) throw ConfigError("adam step must be >= 1");
    state.step = step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m.array() = cfg.beta1 * m.array() + (1.0 - cfg.beta1) * g.array();
        v.array() = cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square();
        param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        update(model.layers[l].weights, state.m.layers[l].weights, state.v.layers[l].weights, grad.layers[l].weights);
        update(model.layers[l].bias, state.m.layers[l].bias, state.v.layers[l].bias, grad.layers[l].bias);
    }
}

struct TrainResult {
    MlpModel model;
    double val_mse = 0.0;
    double train_mse = 0.0;
};

inline double evaluate_mse(const MlpModel& model, const Dataset& data) {
    const Eigen::RowVectorXd pred = predict(model, data.inputs);
    const Eigen::VectorXd diff = pred.transpose() - data.targets;
    return diff.squaredNorm() / static_cast<double>(data.rows());
}

/// Mini-batch Adam training on all rows of `data`: `epochs * ceil(R / batch)`
/// steps over batches of a fresh permutation each epoch (the last batch may
/// be short). Deterministic given `cfg.seed`.
inline MlpModel fit_model(const Dataset& data, const MlpArchitecture& arch, const TrainConfig& cfg) {
    if (data.rows() == 0) throw DataError("empty training table");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (arch.batch_size < 1 || arch.epochs < 1) throw ConfigError("batch size and epochs must be >= 1");
    if (arch.dropout_rate < 0.0 || arch.dropout_rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");

    MlpModel model = init_model(arch, data.width(), cfg.seed);
    std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
    AdamState adam = make_adam_state(model);

    const auto rows = static_cast<Eigen::Index>(data.rows());
    const Eigen::Index batch = std::min<Eigen::Index>(arch.batch_size, rows);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Eigen::MatrixXd xb(data.inputs.rows(), batch);
    Eigen::RowVectorXd yb(batch);
    long step = 0;
    for (int epoch = 0; epoch < arch.epochs; ++epoch) {
        if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index start = 0; start < rows; start += batch) {
            const Eigen::Index len = std::min(batch, rows - start);
            if (xb.cols() != len) {
                xb.resize(Eigen::NoChange, len);
                yb.resize(len);
            }
            for (Eigen::Index j = 0; j < len; ++j) {
                const Eigen::Index src = order[static_cast<std::size_t>(start + j)];
                xb.col(j) = data.inputs.col(src);
                yb[j] = data.targets[src];
            }
            const auto masks = sample_dropout_masks(model, len, rng);
            const Gradients g = gradients(model, xb, yb, masks);
            if (!std::isfinite(g.loss))
                throw DivergedError("non-finite training loss at epoch " + std::to_string(epoch + 1));
            adam_step(model, adam, g, cfg, ++step);
        }
        if (xb.cols() != batch) {
            xb.resize(Eigen::NoChange, batch);
            yb.resize(batch);
        }
    }
    return model;
}

/// Trains on `train_data` and scores the final model on `val_data` with
/// dropout disabled.
inline TrainResult train(const Dataset& train_data, const Dataset& val_data, const MlpArchitecture& arch,
                         const TrainConfig& cfg) {
    if (val_data.rows() == 0) throw DataError("empty validation table");
    if (train_data.width() != val_data.width()) throw DataError("training and validation widths differ");
    TrainResult result{fit_model(train_data, arch, cfg), 0.0, 0.0};
    result.val_mse = evaluate_mse(result.model, val_data);
    result.train_mse = evaluate_mse(result.model, train_data);
    if (!std::isfinite(result.val_mse)) throw DivergedError("non-finite validation loss");
    return result;
}

inline TrainResult train(const LaggedTable& train_table, const LaggedTable& val_table, const MlpArchitecture& arch,
                         const TrainConfig& cfg) {
    if (train_table.lag() != static_cast<std::size_t>(arch.lag) || val_table.lag() != train_table.lag())
        throw DataError("lagged tables do not match the architecture's lag");
    if (train_table.rows() == 0 || val_table.rows() == 0) throw DataError("empty lagged table");
    return train(make_dataset(train_table), make_dataset(val_table), arch, cfg);
}

}  // namespace gapfill
