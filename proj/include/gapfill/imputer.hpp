#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gapfill/errors.hpp"
#include "gapfill/hpo.hpp"
#include "gapfill/mlp.hpp"
#include "gapfill/series.hpp"

namespace gapfill {

/// Seed ensemble sharing one architecture, plus the scaling it was trained under.
struct ImputationModel {
    MlpArchitecture architecture;
    Scaler scaler;
    std::vector<MlpModel> members;

    std::size_t input_width() const { return members.empty() ? 0 : members.front().input_width; }
};

/// Retrains `k` seeded models of `arch` on every complete lagged row of the
/// series (no validation hold-out). Member i uses seed `master ^ i`.
inline ImputationModel finalize_model(const MultivariateSeries& series, const MlpArchitecture& arch, std::size_t k,
                                      const TrainConfig& cfg, std::size_t jobs = 1) {
    if (k < 1) throw ConfigError("ensemble size must be >= 1");
    ImputationModel model;
    model.architecture = arch;
    model.scaler = fit_scaler(series);
    const auto scaled = std::make_shared<const MultivariateSeries>(apply_scaler(series, model.scaler));
    const auto table = reduce_lagged_table(build_lagged_table(scaled, static_cast<std::size_t>(arch.lag)));
    if (table.rows() == 0) throw DataError("no complete lagged rows at lag " + std::to_string(arch.lag));
    const Dataset data = make_dataset(table);
    model.members.resize(k);
    parallel_for(k, jobs, [&](std::size_t i) {
        TrainConfig c = cfg;
        c.seed = trial_seed(cfg.seed, i);
        model.members[i] = fit_model(data, arch, c);
    });
    return model;
}

/// Mean member output for one normalized input row, dropout disabled.
inline double ensemble_predict(const ImputationModel& model, std::span<const double> row) {
    double sum = 0.0;
    for (const auto& m : model.members) sum += forward(m, row, Mode::infer);
    return sum / static_cast<double>(model.members.size());
}

struct ImputationOutcome {
    MultivariateSeries series;          // gap filled, original units
    std::optional<GapSpec> gap;         // the gap that was filled, if any
    std::vector<double> normalized;     // ensemble outputs per gap step
    std::vector<bool> out_of_range;     // prediction outside the observed target range
};

/// Sequential forward fill of the single target gap.
///
/// Missing times are visited in ascending order. Each input window covers
/// the `lag + 1` steps before the missing time and uses observed values or
/// earlier estimates; the ensemble mean (denormalized, not clipped) is
/// written into the target.
inline ImputationOutcome impute_detailed(const MultivariateSeries& series, const ImputationModel& model) {
    if (model.members.empty()) throw ConfigError("imputation model has no members");
    const auto gap = find_gap(series);
    if (!gap) return {series, std::nullopt, {}, {}};

    const std::size_t n = series.width();
    const auto lag = static_cast<std::size_t>(model.architecture.lag);
    if (model.scaler.min.size() != n) throw DataError("model scaler covers a different number of columns");
    if (model.input_width() != (lag + 1) * n)
        throw DataError("model input width " + std::to_string(model.input_width()) + " does not match (lag + 1) * N = " +
                        std::to_string((lag + 1) * n));
    if (gap->start_index < lag + 1)
        throw DataError("gap starts at row " + std::to_string(gap->start_index) + " but lag " + std::to_string(lag) +
                        " needs " + std::to_string(lag + 1) + " observed steps before it (short by " +
                        std::to_string(lag + 1 - gap->start_index) + ")");

    // Normalized working copy restricted to what the gap windows can see.
    const std::size_t first = gap->start_index - lag - 1;
    const std::size_t span_len = gap->end_index - first;
    std::vector<double> window((lag + 1) * n);
    std::vector<std::vector<double>> work(n, std::vector<double>(span_len, 0.0));
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t t = first; t < gap->end_index; ++t) {
            const auto v = series.at(t, c);
            if (v) work[c][t - first] = model.scaler.forward(c, *v);
            else if (c != series.target_index() || !gap->contains(t))
                throw DataError("missing supporting value inside the imputation window at row " + std::to_string(t));
        }
    }

    const std::size_t target = series.target_index();
    double lo = model.scaler.min[target], hi = model.scaler.max[target];
    ImputationOutcome out{series, gap, {}, {}};
    Column filled = series.target();
    for (std::size_t t = gap->start_index; t <= gap->end_index; ++t) {
        const std::size_t base = t - lag - 1 - first;
        for (std::size_t s = 0; s <= lag; ++s)
            for (std::size_t c = 0; c < n; ++c) window[s * n + c] = work[c][base + s];
        const double y = ensemble_predict(model, window);
        if (t < gap->end_index) work[target][t - first] = y;
        const double value = model.scaler.inverse(target, y);
        filled[t] = value;
        out.normalized.push_back(y);
        out.out_of_range.push_back(value < lo || value > hi);
    }
    out.series = series.with_target(std::move(filled));
    return out;
}

inline MultivariateSeries impute(const MultivariateSeries& series, const ImputationModel& model) {
    return impute_detailed(series, model).series;
}

}  // namespace gapfill
