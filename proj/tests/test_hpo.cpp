#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "gapfill/hpo.hpp"
#include "support/quadratic.hpp"

using namespace gapfill;
using gapfill::testing::QuadraticObjective;

namespace {

HyperparameterSpace grid_5x5() {
    using S = HyperparameterSpace;
    return S({S::arithmetic(10, 30, 5), S::arithmetic(50, 250, 50), {1.0}, {5.0}, {0.0}, {30.0}});
}

/// Smooth daily series with a weak dependence of y on a lagged support.
std::shared_ptr<const MultivariateSeries> small_scaled_series(std::size_t s = 120) {
    std::vector<TimePoint> ts;
    Column y(s), a(s);
    for (std::size_t i = 0; i < s; ++i) {
        ts.push_back(*parse_date("2015-01-01") + std::chrono::days{static_cast<long>(i)});
        a[i] = std::sin(0.3 * static_cast<double>(i));
        y[i] = 0.5 + 0.4 * std::sin(0.3 * static_cast<double>(i) - 0.3);
    }
    const auto series = MultivariateSeries::create(ts, {y, a}, {"y", "a"}, 0);
    return std::make_shared<const MultivariateSeries>(apply_scaler(series, fit_scaler(series)));
}

MlpArchitecture tiny_arch(int lag = 3) {
    MlpArchitecture a;
    a.batch_size = 16;
    a.epochs = 3;
    a.layers = 1;
    a.nodes_per_layer = 4;
    a.dropout_rate = 0.1;
    a.lag = lag;
    return a;
}

}  // namespace

TEST(Space, StandardGridSizesAndBijection) {
    const auto s = HyperparameterSpace::standard();
    EXPECT_EQ(s.levels(0), 39);
    EXPECT_EQ(s.levels(1), 10);
    EXPECT_EQ(s.levels(2), 6);
    EXPECT_EQ(s.levels(3), 10);
    EXPECT_EQ(s.levels(4), 6);
    EXPECT_EQ(s.levels(5), 68);
    EXPECT_EQ(s.cardinality(), 9547200.0);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 2000; ++i) {
        const auto p = s.sample_uniform(rng);
        EXPECT_EQ(s.encode(s.decode(p)), p);
    }
    const auto a = s.decode({38, 9, 5, 9, 5, 67});
    EXPECT_EQ(a.batch_size, 200);
    EXPECT_EQ(a.epochs, 500);
    EXPECT_EQ(a.layers, 6);
    EXPECT_EQ(a.nodes_per_layer, 50);
    EXPECT_DOUBLE_EQ(a.dropout_rate, 0.5);
    EXPECT_EQ(a.lag, 365);
    EXPECT_THROW(HyperparameterSpace({std::vector<double>{2, 1}, {1}, {1}, {1}, {0}, {1}}), ConfigError);
}

TEST(LatinHypercube, TenDistinctInRange) {
    const auto s = HyperparameterSpace::standard();
    const auto d = latin_hypercube(s, 10, 123);
    ASSERT_EQ(d.size(), 10u);
    EXPECT_EQ(std::set<EncodedPoint>(d.begin(), d.end()).size(), 10u);
    for (const auto& p : d) EXPECT_TRUE(s.contains(p));
    EXPECT_EQ(latin_hypercube(s, 10, 123), d);
    EXPECT_NE(latin_hypercube(s, 10, 124), d);
}

TEST(LatinHypercube, ExhaustsTinyGrid) {
    using S = HyperparameterSpace;
    const S s({{{1, 2}, {1, 2}, {1}, {1}, {0}, {1}}});
    const auto d = latin_hypercube(s, 4, 9);
    EXPECT_EQ(std::set<EncodedPoint>(d.begin(), d.end()).size(), 4u);
    EXPECT_THROW(latin_hypercube(s, 5, 9), ConfigError);
}

TEST(LatinHypercube, StrataAreCoveredOnFineDimensions) {
    // With 10 points on a 39-level axis every tenth of the axis holds exactly one point.
    const auto s = HyperparameterSpace::standard();
    const auto d = latin_hypercube(s, 10, 5);
    std::vector<int> counts(10, 0);
    for (const auto& p : d) ++counts[std::min(9, static_cast<int>(p[5] / (67.0 / 10.0 + 1e-9)))];
    for (int c : counts) EXPECT_LE(c, 2);
}

TEST(HpoConfig, Validation) {
    HpoConfig c;
    EXPECT_NO_THROW(c.validate());
    c.n0 = 5;
    EXPECT_THROW(c.validate(), ConfigError);
    c.surrogate = SurrogateKind::gp;
    EXPECT_NO_THROW(c.validate());
    c.n = 5;
    EXPECT_THROW(c.validate(), ConfigError);
    HpoConfig d;
    d.k = 0;
    EXPECT_THROW(d.validate(), ConfigError);
}

TEST(EvaluatePoint, SingleTrialEqualsTrainingRun) {
    const auto scaled = small_scaled_series();
    HpoConfig cfg;
    cfg.k = 1;
    cfg.seed = 77;
    TrainConfig tc;
    const auto e = evaluate_point(tiny_arch(), scaled, cfg, tc);
    ASSERT_TRUE(e.ok());
    const auto table = reduce_lagged_table(build_lagged_table(scaled, 3));
    const auto [tr, va] = split_train_val(table, 0.85);
    tc.seed = trial_seed(77, 0);
    EXPECT_EQ(e.performance, train(tr, va, tiny_arch(), tc).val_mse);
}

TEST(EvaluatePoint, MeanOfFiveTrialsAndScheduleIndependence) {
    const auto scaled = small_scaled_series();
    HpoConfig cfg;
    cfg.k = 5;
    cfg.seed = 4;
    const auto serial = evaluate_point(tiny_arch(), scaled, cfg, TrainConfig{});
    ASSERT_EQ(serial.trial_mse.size(), 5u);
    double sum = 0.0;
    for (double v : serial.trial_mse) sum += v;
    EXPECT_NEAR(serial.performance, sum / 5.0, 1e-15);
    std::set<double> distinct(serial.trial_mse.begin(), serial.trial_mse.end());
    EXPECT_GT(distinct.size(), 1u);
    cfg.jobs = 3;
    const auto threaded = evaluate_point(tiny_arch(), scaled, cfg, TrainConfig{});
    EXPECT_EQ(threaded.trial_mse, serial.trial_mse);
    EXPECT_NEAR(threaded.performance, serial.performance, 1e-12);
}

TEST(EvaluatePoint, TooShortSeriesGivesInfinityWithReason) {
    const auto scaled = small_scaled_series(12);
    HpoConfig cfg;
    cfg.k = 2;
    const auto e = evaluate_point(tiny_arch(10), scaled, cfg, TrainConfig{});
    EXPECT_FALSE(e.ok());
    EXPECT_TRUE(std::isinf(e.performance));
    EXPECT_FALSE(e.failure.empty());
}

TEST(Surrogate, ClampsFailedPointsToWorstFinite) {
    const auto space = grid_5x5();
    std::vector<EncodedPoint> pts;
    std::vector<double> perf;
    for (int i = 0; i < 9; ++i) {
        pts.push_back({i % 3, i / 3, 0, 0, 0, 0});
        perf.push_back(i == 4 ? std::numeric_limits<double>::infinity() : 1.0 + i);
    }
    for (auto kind : {SurrogateKind::rbf, SurrogateKind::gp}) {
        const auto s = fit_surrogate(kind, space, pts, perf);
        EXPECT_EQ(s.fitted_values[4], 9.0);
        EXPECT_TRUE(std::isinf(s.performances[4]));
        for (int i = 0; i < 9; ++i) {
            const double tol = kind == SurrogateKind::rbf ? 1e-8 : 1e-4 * 9.0;
            EXPECT_NEAR(s.predict(space, pts[i]), s.fitted_values[i], tol);
        }
    }
}

TEST(ProposeNext, NeverReturnsEvaluatedPoint) {
    const auto space = HyperparameterSpace::standard();
    std::mt19937_64 rng(3);
    const auto design = latin_hypercube(space, 12, 8);
    std::vector<double> perf;
    for (std::size_t i = 0; i < design.size(); ++i) perf.push_back(std::uniform_real_distribution<double>(0, 1)(rng));
    for (auto kind : {SurrogateKind::rbf, SurrogateKind::gp}) {
        const auto state = fit_surrogate(kind, space, design, perf);
        for (std::size_t it = 0; it < 8; ++it) {
            const auto p = propose_next(state, space, it, 1000 + it);
            ASSERT_TRUE(p);
            EXPECT_TRUE(space.contains(*p));
            EXPECT_EQ(std::count(design.begin(), design.end(), *p), 0);
        }
    }
}

// Oracle: enumerate all unevaluated points of the 25-point grid.
TEST(ProposeNext, HighWeightPicksAmongLowestPredictions) {
    const auto space = grid_5x5();
    auto f = [](const EncodedPoint& p) { return (p[0] - 2.6) * (p[0] - 2.6) + 0.7 * (p[1] - 1.2) * (p[1] - 1.2); };
    const std::vector<EncodedPoint> pts = {{0, 0, 0, 0, 0, 0}, {4, 0, 0, 0, 0, 0}, {0, 4, 0, 0, 0, 0},
                                           {4, 4, 0, 0, 0, 0}, {2, 2, 0, 0, 0, 0}, {1, 3, 0, 0, 0, 0},
                                           {3, 1, 0, 0, 0, 0}, {0, 2, 0, 0, 0, 0}};
    std::vector<double> perf;
    for (const auto& p : pts) perf.push_back(f(p));
    const auto state = fit_surrogate(SurrogateKind::rbf, space, pts, perf);
    std::vector<std::pair<double, EncodedPoint>> unevaluated;
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) {
            const EncodedPoint p{a, b, 0, 0, 0, 0};
            if (std::count(pts.begin(), pts.end(), p)) continue;
            unevaluated.emplace_back(state.predict(space, p), p);
        }
    std::sort(unevaluated.begin(), unevaluated.end());
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = propose_next(state, space, 0, seed, 0.95);
        ASSERT_TRUE(p);
        const bool in_top3 = *p == unevaluated[0].second || *p == unevaluated[1].second || *p == unevaluated[2].second;
        EXPECT_TRUE(in_top3) << "seed " << seed;
    }
}

TEST(ProposeNext, LowWeightFavoursDistantPoints) {
    const auto space = grid_5x5();
    const std::vector<EncodedPoint> pts = {{0, 0, 0, 0, 0, 0}, {1, 0, 0, 0, 0, 0}, {0, 1, 0, 0, 0, 0},
                                           {1, 1, 0, 0, 0, 0}, {2, 0, 0, 0, 0, 0}, {0, 2, 0, 0, 0, 0},
                                           {2, 1, 0, 0, 0, 0}, {1, 2, 0, 0, 0, 0}};
    std::vector<double> perf = {3.0, 2.5, 2.9, 2.0, 2.2, 2.8, 1.9, 2.1};
    const auto state = fit_surrogate(SurrogateKind::rbf, space, pts, perf);
    std::vector<double> dists;
    auto min_dist = [&](const EncodedPoint& p) {
        const auto u = space.unit(p);
        const Eigen::Map<const Eigen::VectorXd> x(u.data(), kSpaceDims);
        return (state.unit_points.colwise() - x).colwise().norm().minCoeff();
    };
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) {
            const EncodedPoint p{a, b, 0, 0, 0, 0};
            if (!std::count(pts.begin(), pts.end(), p)) dists.push_back(min_dist(p));
        }
    std::sort(dists.begin(), dists.end());
    const double median = dists[dists.size() / 2];
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = propose_next(state, space, 0, seed, 0.3);
        ASSERT_TRUE(p);
        EXPECT_GE(min_dist(*p), median) << "seed " << seed;
    }
}

TEST(ProposeNext, WeightsCycle) {
    EXPECT_EQ(proposal_weight(0), 0.3);
    EXPECT_EQ(proposal_weight(1), 0.5);
    EXPECT_EQ(proposal_weight(2), 0.8);
    EXPECT_EQ(proposal_weight(3), 0.95);
    EXPECT_EQ(proposal_weight(4), 0.3);
}

TEST(ProposeNext, SignalsExhaustion) {
    using S = HyperparameterSpace;
    const S space({{{1, 2, 3}, {1, 2, 3}, {1}, {1}, {0}, {1}}});
    std::vector<EncodedPoint> pts;
    std::vector<double> perf;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            pts.push_back({a, b, 0, 0, 0, 0});
            perf.push_back(a + b);
        }
    const auto state = fit_surrogate(SurrogateKind::rbf, space, pts, perf);
    EXPECT_FALSE(propose_next(state, space, 0, 1));
}

TEST(Optimize, HistoryInvariantsOnSyntheticObjective) {
    const auto space = gapfill::testing::reduced_space();
    const QuadraticObjective f(space);
    for (auto kind : {SurrogateKind::rbf, SurrogateKind::gp}) {
        HpoConfig cfg;
        cfg.surrogate = kind;
        cfg.seed = 11;
        const auto r = optimize(space, cfg, gapfill::testing::as_objective(f));
        ASSERT_EQ(r.history.size(), 50u);
        std::set<EncodedPoint> seen;
        double best = std::numeric_limits<double>::infinity();
        std::size_t argmin = 0;
        for (std::size_t i = 0; i < r.history.size(); ++i) {
            const auto& e = r.history[i];
            EXPECT_EQ(e.iteration, i + 1);
            EXPECT_EQ(e.adaptive, i >= 10);
            EXPECT_TRUE(space.contains(e.point));
            EXPECT_TRUE(seen.insert(e.point).second);
            if (e.evaluation.performance < best) best = e.evaluation.performance, argmin = i;
        }
        EXPECT_EQ(r.best_index, argmin);
        EXPECT_EQ(r.best().evaluation.performance, best);
        // Replay gives the same history.
        const auto again = optimize(space, cfg, gapfill::testing::as_objective(f));
        for (std::size_t i = 0; i < r.history.size(); ++i) EXPECT_EQ(again.history[i].point, r.history[i].point);
    }
}

TEST(Optimize, BudgetTwelveInitTenHasTwoAdaptive) {
    const auto space = gapfill::testing::reduced_space();
    const QuadraticObjective f(space);
    HpoConfig cfg;
    cfg.n = 12;
    const auto r = optimize(space, cfg, gapfill::testing::as_objective(f));
    ASSERT_EQ(r.history.size(), 12u);
    EXPECT_EQ(std::count_if(r.history.begin(), r.history.end(), [](auto& e) { return e.adaptive; }), 2);
}

TEST(Optimize, FailedPointsDoNotAbort) {
    const auto space = gapfill::testing::reduced_space();
    const QuadraticObjective f(space);
    int calls = 0;
    HpoConfig cfg;
    cfg.n = 20;
    const auto r = optimize(space, cfg, [&](const EncodedPoint& p) {
        if (++calls % 3 == 0) throw RuntimeFailure("synthetic failure");
        PointEvaluation e;
        e.performance = (calls % 5 == 0) ? std::numeric_limits<double>::infinity() : f(p);
        return e;
    });
    EXPECT_EQ(r.history.size(), 20u);
    EXPECT_TRUE(r.has_finite_best());
    EXPECT_FALSE(r.history[2].evaluation.failure.empty());
}

TEST(Optimize, AllFailuresStillCompleteBudget) {
    const auto space = gapfill::testing::reduced_space();
    HpoConfig cfg;
    cfg.n = 14;
    const auto r = optimize(space, cfg, [](const EncodedPoint&) -> PointEvaluation { throw DataError("nope"); });
    EXPECT_EQ(r.history.size(), 14u);
    EXPECT_FALSE(r.has_finite_best());
}

TEST(Optimize, FindsLowPercentileOnQuadratic) {
    const auto space = gapfill::testing::reduced_space();
    ASSERT_EQ(space.cardinality(), 3000.0);
    const QuadraticObjective f(space);
    const auto sorted = gapfill::testing::enumerate_sorted(space, f);
    const double threshold = sorted[29];  // lowest 1% of 3000
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        HpoConfig cfg;
        cfg.seed = seed;
        const auto r = optimize(space, cfg, gapfill::testing::as_objective(f));
        if (r.best().evaluation.performance <= threshold) ++hits;
    }
    EXPECT_GE(hits, 9);
}

TEST(Optimize, WorksOnRealTraining) {
    const auto scaled = small_scaled_series();
    using S = HyperparameterSpace;
    const S space({{{16, 32}, {2, 3}, {1, 2}, {3, 4}, {0.0, 0.1}, {2, 3, 4}}});
    HpoConfig cfg;
    cfg.n0 = 8;
    cfg.n = 10;
    cfg.k = 2;
    cfg.seed = 5;
    std::vector<TimePoint> ts(scaled->timestamps());
    const auto r = optimize(*scaled, space, cfg, TrainConfig{});
    EXPECT_EQ(r.history.size(), 10u);
    EXPECT_TRUE(r.has_finite_best());
    std::ostringstream csv;
    write_history_csv(csv, r);
    std::istringstream in(csv.str());
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "iteration,batch,epochs,layers,nodes,dropout,lag,mse_trial_1,mse_trial_2,mean_mse,seconds");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    EXPECT_EQ(rows, 10);
}
