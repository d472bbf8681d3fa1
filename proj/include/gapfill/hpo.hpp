#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "gapfill/csv.hpp"
#include "gapfill/errors.hpp"
#include "gapfill/mlp.hpp"
#include "gapfill/series.hpp"
#include "gapfill/space.hpp"
#include "gapfill/surrogate.hpp"

namespace gapfill {

enum class SurrogateKind { rbf, gp };

inline const char* to_string(SurrogateKind kind) { return kind == SurrogateKind::rbf ? "rbf" : "gp"; }

struct HpoConfig {
    std::size_t n0 = 10;  // initial design size
    std::size_t n = 50;   // total evaluation budget
    std::size_t k = 5;    // training repetitions per point
    SurrogateKind surrogate = SurrogateKind::rbf;
    std::uint64_t seed = 0;
    double train_fraction = 0.85;
    std::size_t jobs = 1;  // concurrent trainings within one point

    void validate() const {
        constexpr std::size_t min_rbf_design = kSpaceDims + 2;
        if (surrogate == SurrogateKind::rbf && n0 < min_rbf_design)
            throw ConfigError("rbf surrogate needs an initial design of at least " + std::to_string(min_rbf_design) +
                              " points (got " + std::to_string(n0) + ")");
        if (n0 < 2) throw ConfigError("initial design needs at least 2 points");
        if (n <= n0) throw ConfigError("evaluation budget n must exceed the initial design size n0");
        if (k < 1) throw ConfigError("k must be >= 1");
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
        if (jobs < 1) throw ConfigError("jobs must be >= 1");
    }
};

/// splitmix64 finalizer; used to derive independent streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed of training repetition `trial` under a master seed.
inline std::uint64_t trial_seed(std::uint64_t master, std::size_t trial) { return master ^ trial; }

/// Runs `body(i)` for i in [0, count) on at most `jobs` threads.
template <class Body>
void parallel_for(std::size_t count, std::size_t jobs, Body&& body) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += jobs) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct PointEvaluation {
    std::vector<double> trial_mse;  // +inf for diverged trials
    double performance = std::numeric_limits<double>::infinity();
    std::string failure;            // empty on success

    bool ok() const { return std::isfinite(performance); }
};

/// Mean validation MSE of `k` trainings of `hp` on the normalized series.
///
/// The series is lagged at `hp.lag`, reduced, and split chronologically. A
/// diverged trial makes the whole point +inf; a table too small to split
/// yields +inf with a reason instead of an error.
inline PointEvaluation evaluate_point(const MlpArchitecture& hp, const std::shared_ptr<const MultivariateSeries>& scaled,
                                      const HpoConfig& cfg, const TrainConfig& train_cfg) {
    PointEvaluation result;
    Dataset train_data, val_data;
    try {
        const auto table = reduce_lagged_table(build_lagged_table(scaled, static_cast<std::size_t>(hp.lag)));
        const auto [tr, va] = split_train_val(table, cfg.train_fraction);
        train_data = make_dataset(tr);
        val_data = make_dataset(va);
    } catch (const DataError& e) {
        result.failure = e.what();
        result.trial_mse.assign(cfg.k, std::numeric_limits<double>::infinity());
        return result;
    }
    result.trial_mse.assign(cfg.k, std::numeric_limits<double>::infinity());
    std::vector<std::string> reasons(cfg.k);
    parallel_for(cfg.k, cfg.jobs, [&](std::size_t t) {
        TrainConfig c = train_cfg;
        c.seed = trial_seed(cfg.seed, t);
        try {
            result.trial_mse[t] = train(train_data, val_data, hp, c).val_mse;
        } catch (const DivergedError& e) {
            reasons[t] = e.what();
        }
    });
    double sum = 0.0;
    for (std::size_t t = 0; t < cfg.k; ++t) {
        sum += result.trial_mse[t];
        if (!reasons[t].empty() && result.failure.empty())
            result.failure = "trial " + std::to_string(t + 1) + ": " + reasons[t];
    }
    result.performance = sum / static_cast<double>(cfg.k);
    return result;
}

/// Evaluated history plus the surrogate fitted to it.
struct SurrogateState {
    SurrogateKind kind = SurrogateKind::rbf;
    std::vector<EncodedPoint> points;
    std::vector<double> performances;  // as observed, may hold +inf
    Eigen::MatrixXd unit_points;       // (6 x n) points scaled to [0,1]^6
    Eigen::VectorXd fitted_values;     // performances with +inf clamped to the worst finite value
    std::variant<RbfInterpolant, GaussianProcess> model;
    std::size_t iteration = 0;

    double predict(const Eigen::Ref<const Eigen::VectorXd>& unit_x) const {
        return std::visit(
            [&](const auto& m) {
                if constexpr (std::is_same_v<std::decay_t<decltype(m)>, RbfInterpolant>) return m.predict(unit_x);
                else return m.predict(unit_x).mean;
            },
            model);
    }

    double predict(const HyperparameterSpace& space, const EncodedPoint& p) const {
        const auto u = space.unit(p);
        return predict(Eigen::Map<const Eigen::VectorXd>(u.data(), kSpaceDims));
    }
};

inline RbfInterpolant fit_rbf(const Eigen::MatrixXd& points, const Eigen::VectorXd& values) {
    return RbfInterpolant::fit(points, values);
}

inline GaussianProcess fit_gp(const Eigen::MatrixXd& points, const Eigen::VectorXd& values) {
    return GaussianProcess::fit(points, values);
}

/// Fits the chosen surrogate to an evaluation history. Failed (+inf) points
/// are clamped to the worst finite performance; at least one finite value is
/// required.
inline SurrogateState fit_surrogate(SurrogateKind kind, const HyperparameterSpace& space,
                                    std::vector<EncodedPoint> points, std::vector<double> performances,
                                    std::size_t iteration = 0) {
    if (points.size() != performances.size() || points.empty()) throw DataError("surrogate: bad history");
    double worst = -std::numeric_limits<double>::infinity();
    for (double v : performances)
        if (std::isfinite(v)) worst = std::max(worst, v);
    if (!std::isfinite(worst)) throw RuntimeFailure("surrogate: no finite performance to fit");

    SurrogateState s{kind, std::move(points), std::move(performances), {}, {}, RbfInterpolant{}, iteration};
    const auto n = static_cast<Eigen::Index>(s.points.size());
    s.unit_points.resize(kSpaceDims, n);
    s.fitted_values.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto u = space.unit(s.points[static_cast<std::size_t>(j)]);
        for (std::size_t d = 0; d < kSpaceDims; ++d) s.unit_points(static_cast<Eigen::Index>(d), j) = u[d];
        const double v = s.performances[static_cast<std::size_t>(j)];
        s.fitted_values[j] = std::isfinite(v) ? v : worst;
    }
    if (kind == SurrogateKind::rbf) s.model = fit_rbf(s.unit_points, s.fitted_values);
    else s.model = fit_gp(s.unit_points, s.fitted_values);
    return s;
}

inline constexpr std::array<double, 4> kProposalWeights = {0.3, 0.5, 0.8, 0.95};

/// Weight on the surrogate prediction for an adaptive iteration (0-based).
inline double proposal_weight(std::size_t iteration) { return kProposalWeights[iteration % kProposalWeights.size()]; }

/// Incumbent: lowest performance, ties broken by lexicographic order.
inline EncodedPoint incumbent(const SurrogateState& state) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < state.points.size(); ++i) {
        const double a = state.performances[i], b = state.performances[best];
        if (a < b || (a == b && state.points[i] < state.points[best])) best = i;
    }
    return state.points[best];
}

/// Unevaluated candidates: perturbations of the incumbent (each coordinate
/// moved by +-1..3 grid steps with probability 1/2, clipped) and uniform grid
/// draws. Sorted and de-duplicated.
inline std::vector<EncodedPoint> generate_candidates(const SurrogateState& state, const HyperparameterSpace& space,
                                                     std::uint64_t seed, std::size_t per_kind = 500) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution move(0.5);
    std::uniform_int_distribution<int> magnitude(1, 3);
    std::bernoulli_distribution negative(0.5);
    const EncodedPoint best = incumbent(state);
    std::set<EncodedPoint> evaluated(state.points.begin(), state.points.end());
    std::set<EncodedPoint> out;
    for (std::size_t i = 0; i < per_kind; ++i) {
        EncodedPoint c = best;
        for (std::size_t d = 0; d < kSpaceDims; ++d) {
            if (!move(rng)) continue;
            const int step = magnitude(rng) * (negative(rng) ? -1 : 1);
            c[d] = std::clamp(c[d] + step, 0, space.levels(d) - 1);
        }
        if (!evaluated.count(c)) out.insert(c);
    }
    for (std::size_t i = 0; i < per_kind; ++i) {
        const EncodedPoint c = space.sample_uniform(rng);
        if (!evaluated.count(c)) out.insert(c);
    }
    return {out.begin(), out.end()};
}

struct CandidateScore {
    EncodedPoint point{};
    double prediction = 0.0;
    double min_distance = 0.0;
    double score = 0.0;
};

/// Weighted score w * scaled(prediction) + (1 - w) * scaled(-min distance),
/// both min-max scaled over the candidate set (constant terms score 0).
inline std::vector<CandidateScore> score_candidates(const SurrogateState& state, const HyperparameterSpace& space,
                                                    const std::vector<EncodedPoint>& candidates, double weight) {
    std::vector<CandidateScore> scores;
    scores.reserve(candidates.size());
    for (const auto& c : candidates) {
        const auto u = space.unit(c);
        const Eigen::Map<const Eigen::VectorXd> x(u.data(), kSpaceDims);
        const double dist = (state.unit_points.colwise() - x).colwise().norm().minCoeff();
        scores.push_back({c, state.predict(x), dist, 0.0});
    }
    if (scores.empty()) return scores;
    auto [pmin, pmax] = std::minmax_element(scores.begin(), scores.end(),
                                            [](auto& a, auto& b) { return a.prediction < b.prediction; });
    auto [dmin, dmax] = std::minmax_element(scores.begin(), scores.end(),
                                            [](auto& a, auto& b) { return a.min_distance < b.min_distance; });
    const double plo = pmin->prediction, pr = pmax->prediction - plo;
    const double dlo = dmin->min_distance, dhi = dmax->min_distance, dr = dhi - dlo;
    for (auto& s : scores) {
        const double sp = pr > 0.0 ? (s.prediction - plo) / pr : 0.0;
        const double sd = dr > 0.0 ? (dhi - s.min_distance) / dr : 0.0;
        s.score = weight * sp + (1.0 - weight) * sd;
    }
    return scores;
}

/// Next point to evaluate, or nullopt once every grid point has been evaluated.
inline std::optional<EncodedPoint> propose_next(const SurrogateState& state, const HyperparameterSpace& space,
                                                std::size_t iteration, std::uint64_t seed,
                                                std::optional<double> weight = std::nullopt) {
    const auto candidates = generate_candidates(state, space, seed);
    const auto scores = score_candidates(state, space, candidates, weight.value_or(proposal_weight(iteration)));
    if (!scores.empty()) {
        // Candidates are in lexicographic order, so the first minimum wins ties.
        const auto best = std::min_element(scores.begin(), scores.end(),
                                           [](auto& a, auto& b) { return a.score < b.score; });
        return best->point;
    }
    std::set<EncodedPoint> evaluated(state.points.begin(), state.points.end());
    if (static_cast<double>(evaluated.size()) >= space.cardinality()) return std::nullopt;
    std::mt19937_64 rng(mix_seed(seed, 1));
    for (int i = 0; i < 100000; ++i) {
        const auto c = space.sample_uniform(rng);
        if (!evaluated.count(c)) return c;
    }
    // Nearly exhausted grid: walk it in lexicographic order.
    EncodedPoint p{};
    while (true) {
        if (!evaluated.count(p)) return p;
        std::size_t d = kSpaceDims;
        while (d-- > 0) {
            if (++p[d] < space.levels(d)) break;
            p[d] = 0;
            if (d == 0) return std::nullopt;
        }
    }
}

struct HistoryEntry {
    std::size_t iteration = 0;  // 1-based evaluation counter
    bool adaptive = false;      // false for initial design points
    EncodedPoint point{};
    MlpArchitecture architecture;
    PointEvaluation evaluation;
    double seconds = 0.0;
};

struct HpoResult {
    std::vector<HistoryEntry> history;
    std::size_t best_index = 0;

    const HistoryEntry& best() const { return history.at(best_index); }
    bool has_finite_best() const { return !history.empty() && best().evaluation.ok(); }
};

using Objective = std::function<PointEvaluation(const EncodedPoint&)>;

/// Surrogate-guided search over the grid: evaluate a Latin-hypercube design
/// of n0 points, then alternate fit -> propose -> evaluate until n
/// evaluations. The best entry is the lowest performance, earliest on ties.
inline HpoResult optimize(const HyperparameterSpace& space, const HpoConfig& cfg, const Objective& objective) {
    cfg.validate();
    HpoResult result;
    auto record = [&](const EncodedPoint& p, bool adaptive) {
        const auto t0 = std::chrono::steady_clock::now();
        HistoryEntry e;
        e.iteration = result.history.size() + 1;
        e.adaptive = adaptive;
        e.point = p;
        e.architecture = space.decode(p);
        try {
            e.evaluation = objective(p);
        } catch (const Error& ex) {
            e.evaluation.failure = ex.what();
            e.evaluation.performance = std::numeric_limits<double>::infinity();
        }
        e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (result.history.empty() || e.evaluation.performance < result.best().evaluation.performance)
            result.best_index = result.history.size();
        result.history.push_back(std::move(e));
    };

    for (const auto& p : latin_hypercube(space, cfg.n0, cfg.seed)) record(p, false);

    std::size_t adaptive_step = 0;
    while (result.history.size() < cfg.n) {
        std::vector<EncodedPoint> pts;
        std::vector<double> perf;
        for (const auto& e : result.history) {
            pts.push_back(e.point);
            perf.push_back(e.evaluation.performance);
        }
        const std::uint64_t step_seed = mix_seed(cfg.seed, result.history.size());
        std::optional<EncodedPoint> next;
        try {
            const auto state = fit_surrogate(cfg.surrogate, space, pts, perf, adaptive_step);
            next = propose_next(state, space, adaptive_step, step_seed);
        } catch (const Error&) {
            // No usable surrogate (e.g. every point failed): sample an unevaluated point.
            std::set<EncodedPoint> seen(pts.begin(), pts.end());
            if (static_cast<double>(seen.size()) >= space.cardinality()) break;
            std::mt19937_64 rng(step_seed);
            do {
                next = space.sample_uniform(rng);
            } while (seen.count(*next));
        }
        if (!next) break;
        record(*next, true);
        ++adaptive_step;
    }
    return result;
}

/// Runs the search on a (raw-unit) series: fits min-max scaling, then
/// evaluates each architecture with `evaluate_point`.
inline HpoResult optimize(const MultivariateSeries& series, const HyperparameterSpace& space, const HpoConfig& cfg,
                          const TrainConfig& train_cfg) {
    cfg.validate();
    const auto scaled = std::make_shared<const MultivariateSeries>(apply_scaler(series, fit_scaler(series)));
    return optimize(space, cfg, [&](const EncodedPoint& p) {
        return evaluate_point(space.decode(p), scaled, cfg, train_cfg);
    });
}

/// History export: iteration, the six hyperparameter values, per-trial MSEs,
/// mean MSE and wall-clock seconds.
inline void write_history_csv(std::ostream& out, const HpoResult& result) {
    std::size_t trials = 0;
    for (const auto& e : result.history) trials = std::max(trials, e.evaluation.trial_mse.size());
    std::vector<std::string> header = {"iteration", "batch", "epochs", "layers", "nodes", "dropout", "lag"};
    for (std::size_t t = 0; t < trials; ++t) header.push_back("mse_trial_" + std::to_string(t + 1));
    header.insert(header.end(), {"mean_mse", "seconds"});
    write_csv_row(out, header);
    auto num = [](double v) { return std::isfinite(v) ? format_number(v) : std::string("inf"); };
    for (const auto& e : result.history) {
        const auto& a = e.architecture;
        std::vector<std::string> row = {std::to_string(e.iteration), std::to_string(a.batch_size),
                                        std::to_string(a.epochs),    std::to_string(a.layers),
                                        std::to_string(a.nodes_per_layer), format_number(a.dropout_rate),
                                        std::to_string(a.lag)};
        for (std::size_t t = 0; t < trials; ++t)
            row.push_back(t < e.evaluation.trial_mse.size() ? num(e.evaluation.trial_mse[t]) : "");
        row.push_back(num(e.evaluation.performance));
        row.push_back(format_number(e.seconds));
        write_csv_row(out, row);
    }
}

}  // namespace gapfill
