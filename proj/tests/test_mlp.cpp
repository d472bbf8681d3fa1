#include <gtest/gtest.h>

#include <random>

#include "gapfill/mlp.hpp"
#include "support/gradcheck.hpp"

using namespace gapfill;
using gapfill::testing::flatten;
using gapfill::testing::naive_loss;
using gapfill::testing::parameters;
using gapfill::testing::random_dataset;

namespace {

MlpArchitecture arch(int layers, int nodes, double dropout = 0.0, int batch = 16, int epochs = 10) {
    MlpArchitecture a;
    a.layers = layers;
    a.nodes_per_layer = nodes;
    a.dropout_rate = dropout;
    a.batch_size = batch;
    a.epochs = epochs;
    a.lag = 1;
    return a;
}

}  // namespace

TEST(Init, DeterministicWithZeroBiases) {
    const auto a = init_model(arch(3, 7), 11, 42);
    const auto b = init_model(arch(3, 7), 11, 42);
    ASSERT_EQ(a.layers.size(), 4u);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        EXPECT_EQ(a.layers[l].weights, b.layers[l].weights);
        EXPECT_TRUE(a.layers[l].bias.isZero(0.0));
    }
    EXPECT_EQ(a.layers[0].weights.rows(), 7);
    EXPECT_EQ(a.layers[0].weights.cols(), 11);
    EXPECT_EQ(a.layers[3].weights.rows(), 1);
    EXPECT_NE(init_model(arch(3, 7), 11, 43).layers[0].weights, a.layers[0].weights);
}

TEST(Init, WeightVarianceMatchesFanIn) {
    const int fan_in = 40;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto m = init_model(arch(2, 50), fan_in, seed);
        for (std::size_t l = 0; l < 2; ++l) {
            const auto& w = m.layers[l].weights;
            const double mean = w.mean();
            const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
            const double expected = 2.0 / static_cast<double>(w.cols());
            EXPECT_NEAR(var, expected, 0.2 * expected) << "seed " << seed << " layer " << l;
        }
    }
}

TEST(Forward, ZeroWeightsGiveOutputBias) {
    auto m = init_model(arch(2, 4), 3, 1);
    for (auto& l : m.layers) l.weights.setZero();
    m.layers.back().bias[0] = 0.37;
    const std::vector<double> x = {5.0, -2.0, 1.0};
    EXPECT_EQ(forward(m, x, Mode::infer), 0.37);
}

TEST(Forward, ReluClipsNegativeHidden) {
    auto m = init_model(arch(1, 1), 1, 1);
    m.layers[0].weights(0, 0) = 1.0;
    m.layers[1].weights(0, 0) = 1.0;
    const std::vector<double> x = {-2.0};
    EXPECT_EQ(forward(m, x, Mode::infer), 0.0);
}

TEST(Forward, HandSetTwoThreeOneNetwork) {
    auto m = init_model(arch(1, 3), 2, 1);
    m.layers[0].weights << 0.5, -1.0, 2.0, 0.25, -0.75, -0.5;
    m.layers[0].bias << 0.1, -0.2, 0.3;
    m.layers[1].weights << 1.5, -2.0, 0.7;
    m.layers[1].bias << -0.05;
    const std::vector<double> x = {0.8, -0.4};
    // Hand computation: z = (0.9, 1.3, -0.1); relu = (0.9, 1.3, 0); out = 1.35 - 2.6 - 0.05.
    EXPECT_NEAR(forward(m, x, Mode::infer), -1.3, 1e-12);
    Eigen::MatrixXd xs(2, 1);
    xs << 0.8, -0.4;
    EXPECT_NEAR(predict(m, xs)[0], -1.3, 1e-12);
}

TEST(Forward, InferModeIsPureAndWidthChecked) {
    const auto m = init_model(arch(2, 8, 0.5), 4, 3);
    const std::vector<double> x = {0.1, 0.2, 0.3, 0.4};
    EXPECT_EQ(forward(m, x, Mode::infer, 1), forward(m, x, Mode::infer, 2));
    EXPECT_EQ(forward(m, x, Mode::train, 9), forward(m, x, Mode::train, 9));
    const std::vector<double> bad = {0.1, 0.2};
    EXPECT_THROW(forward(m, bad, Mode::infer), DataError);
}

TEST(Dropout, InvertedScalingPreservesExpectation) {
    const auto m = init_model(arch(2, 20, 0.3), 6, 5);
    Eigen::VectorXd x(6);
    x << 0.3, 0.9, 0.1, 0.5, 0.7, 0.2;
    const Eigen::VectorXd a1 = (m.layers[0].weights * x + m.layers[0].bias).cwiseMax(0.0);
    const Eigen::VectorXd z2 = m.layers[1].weights * a1 + m.layers[1].bias;
    std::mt19937_64 rng(77);
    const int draws = 100000;
    const auto masks = sample_dropout_masks(m, draws, rng);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(20);
    for (int j = 0; j < draws; ++j)
        mean += m.layers[1].weights * (a1.array() * masks[0].col(j).array()).matrix() + m.layers[1].bias;
    mean /= draws;
    EXPECT_LE((mean - z2).norm(), 0.02 * z2.norm());
}

TEST(Mse, Examples) {
    const std::vector<double> a = {1.0, 2.0}, z = {0.0, 0.0}, t = {3.0, 4.0};
    EXPECT_EQ(mse(a, a), 0.0);
    EXPECT_EQ(mse(z, t), 12.5);
    EXPECT_THROW(mse(std::vector<double>{}, std::vector<double>{}), DataError);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 3.0);
    std::vector<double> p(100), q(100);
    for (int i = 0; i < 100; ++i) p[i] = n(rng), q[i] = n(rng);
    long double s = 0.0L;
    for (int i = 0; i < 100; ++i) s += static_cast<long double>(p[i] - q[i]) * (p[i] - q[i]);
    EXPECT_NEAR(mse(p, q), static_cast<double>(s / 100.0L), 1e-12);
}

TEST(Gradients, ZeroErrorGivesZeroGradient) {
    const auto m = init_model(arch(2, 5), 3, 2);
    std::mt19937_64 rng(1);
    auto d = random_dataset(3, 7, rng);
    const Eigen::RowVectorXd y = predict(m, d.inputs);
    const auto g = gradients(m, d.inputs, y, {});
    for (double v : flatten(g)) EXPECT_EQ(v, 0.0);
}

TEST(Gradients, OutputBiasSingleSample) {
    const auto m = init_model(arch(1, 4), 3, 2);
    Eigen::MatrixXd x(3, 1);
    x << 0.2, 0.4, 0.6;
    const double pred = predict(m, x)[0];
    Eigen::RowVectorXd y(1);
    y << 1.5;
    const auto g = gradients(m, x, y, {});
    EXPECT_NEAR(g.layers.back().bias[0], 2.0 * (pred - 1.5), 1e-14);
}

TEST(Gradients, MatchCentralDifferencesOverRandomConfigurations) {
    const auto errors = gapfill::testing::gradient_check_errors(120, 2024);
    ASSERT_EQ(errors.size(), 120u);
    double worst = 0.0;
    for (std::size_t t = 0; t < errors.size(); ++t) {
        EXPECT_LT(errors[t], 1e-5) << "trial " << t;
        worst = std::max(worst, errors[t]);
    }
    RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(Gradients, LossMatchesNaiveForwardPass) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        MlpModel m = init_model(arch(1 + trial % 3, 4, 0.2), 5, rng());
        auto d = random_dataset(5, 6, rng);
        const Eigen::RowVectorXd y = d.targets.transpose();
        const auto masks = sample_dropout_masks(m, d.inputs.cols(), rng);
        EXPECT_NEAR(gradients(m, d.inputs, y, masks).loss, naive_loss(m, d.inputs, y, masks), 1e-12);
    }
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
    auto m = init_model(arch(1, 2), 2, 4);
    const auto before = parameters(m);
    std::vector<double> initial;
    for (double* p : before) initial.push_back(*p);
    auto state = make_adam_state(m);
    auto g = zeros_like(m);
    for (auto& l : g.layers) {
        l.weights.setOnes();
        l.bias.setOnes();
    }
    TrainConfig cfg;
    adam_step(m, state, g, cfg, 1);
    const auto after = parameters(m);
    for (std::size_t i = 0; i < after.size(); ++i) {
        const double delta = *after[i] - initial[i];
        EXPECT_NEAR(delta, -1e-3 / (1.0 + 1e-8), 1e-15);
        EXPECT_NEAR(delta, -9.99999990e-4, 1e-12);
    }
}

TEST(Adam, ZeroGradientLeavesParameters) {
    auto m = init_model(arch(2, 3), 2, 4);
    const auto copy = m;
    auto state = make_adam_state(m);
    const auto g = zeros_like(m);
    for (long t = 1; t <= 5; ++t) adam_step(m, state, g, TrainConfig{}, t);
    for (std::size_t l = 0; l < m.layers.size(); ++l) EXPECT_EQ(m.layers[l].weights, copy.layers[l].weights);
}

TEST(Train, Deterministic) {
    std::mt19937_64 rng(6);
    const auto train_data = random_dataset(5, 60, rng);
    const auto val_data = random_dataset(5, 20, rng);
    TrainConfig cfg;
    cfg.seed = 99;
    const auto a = train(train_data, val_data, arch(2, 6, 0.2, 8, 5), cfg);
    const auto b = train(train_data, val_data, arch(2, 6, 0.2, 8, 5), cfg);
    EXPECT_EQ(a.val_mse, b.val_mse);
    for (std::size_t l = 0; l < a.model.layers.size(); ++l)
        EXPECT_EQ(a.model.layers[l].weights, b.model.layers[l].weights);
    EXPECT_EQ(a.val_mse, evaluate_mse(a.model, val_data));
}

// With batch >= rows there is one full-batch Adam step per epoch; a manual
// loop over the same updates reproduces the trained model exactly.
TEST(Train, FullBatchIsOneStepPerEpoch) {
    std::mt19937_64 rng(12);
    const auto d = random_dataset(4, 30, rng);
    TrainConfig cfg;
    cfg.seed = 5;
    cfg.shuffle = false;
    const auto a = arch(2, 5, 0.0, 200, 7);
    const auto trained = fit_model(d, a, cfg);
    MlpModel manual = init_model(a, 4, cfg.seed);
    auto state = make_adam_state(manual);
    for (long t = 1; t <= 7; ++t) adam_step(manual, state, gradients(manual, d.inputs, d.targets.transpose(), {}), cfg, t);
    for (std::size_t l = 0; l < manual.layers.size(); ++l) {
        EXPECT_EQ(trained.layers[l].weights, manual.layers[l].weights);
        EXPECT_EQ(trained.layers[l].bias, manual.layers[l].bias);
    }
    auto bigger = a;
    bigger.batch_size = 30;
    const auto same = fit_model(d, bigger, cfg);
    EXPECT_EQ(same.layers[0].weights, trained.layers[0].weights);
}

TEST(Train, LearnsExactLinearTarget) {
    std::mt19937_64 rng(21);
    auto d = random_dataset(4, 200, rng);
    for (Eigen::Index j = 0; j < d.inputs.cols(); ++j)
        d.targets[j] = 0.4 + 0.3 * d.inputs(0, j) - 0.2 * d.inputs(1, j) + 0.1 * d.inputs(2, j);
    TrainConfig cfg;
    cfg.seed = 3;
    const auto m = fit_model(d, arch(1, 20, 0.0, 20, 500), cfg);
    EXPECT_LT(evaluate_mse(m, d), 1e-3);
}

TEST(Train, DivergenceIsReported) {
    std::mt19937_64 rng(2);
    auto d = random_dataset(3, 20, rng);
    d.targets *= 1e300;
    TrainConfig cfg;
    cfg.learning_rate = 1e3;
    EXPECT_THROW(fit_model(d, arch(1, 5, 0.0, 5, 20), cfg), DivergedError);
}

TEST(Train, RejectsEmptyData) {
    Dataset empty;
    empty.inputs.resize(3, 0);
    EXPECT_THROW(fit_model(empty, arch(1, 2), TrainConfig{}), DataError);
}
