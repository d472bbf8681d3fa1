#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gapfill/baselines.hpp"
#include "gapfill/csv.hpp"
#include "gapfill/errors.hpp"
#include "gapfill/hpo.hpp"
#include "gapfill/imputer.hpp"
#include "gapfill/series.hpp"
#include "gapfill/space.hpp"
#include "gapfill/svg.hpp"

namespace gapfill {

enum class Method { mlp_rbf, mlp_gp, linear, locf, spline, seasonal };

inline constexpr std::array<Method, 6> kAllMethods = {Method::mlp_rbf, Method::mlp_gp, Method::linear,
                                                      Method::locf,    Method::spline, Method::seasonal};

inline const char* to_string(Method m) {
    switch (m) {
        case Method::mlp_rbf: return "mlp-rbf";
        case Method::mlp_gp: return "mlp-gp";
        case Method::linear: return "linear";
        case Method::locf: return "locf";
        case Method::spline: return "spline";
        case Method::seasonal: return "seasonal";
    }
    return "?";
}

inline std::optional<Method> parse_method(std::string_view name) {
    for (Method m : kAllMethods)
        if (name == to_string(m)) return m;
    return std::nullopt;
}

inline bool is_mlp(Method m) { return m == Method::mlp_rbf || m == Method::mlp_gp; }

/// Inclusive calendar-date window, e.g. 2012-01-01 .. 2012-03-31.
struct GapWindow {
    std::string from;
    std::string to;

    std::string label() const { return from + "_" + to; }
};

/// What an imputation method is allowed to see.
struct ArtificialGap {
    MultivariateSeries gapped;
    GapSpec gap;
};

/// The removed observations, kept away from every imputation method.
struct HeldOutTruth {
    std::vector<double> values;
};

/// Removes the target observations whose date lies in [from, to].
inline std::pair<ArtificialGap, HeldOutTruth> make_artificial_gap(const MultivariateSeries& series,
                                                                  const std::string& from, const std::string& to) {
    const auto from_tp = parse_date(from);
    const auto to_tp = parse_date(to);
    if (!from_tp) throw DataError("cannot parse window start '" + from + "'");
    if (!to_tp) throw DataError("cannot parse window end '" + to + "'");
    if (*from_tp > *to_tp) throw DataError("window start " + from + " is after its end " + to);
    const auto end_tp = *to_tp + std::chrono::days{1};
    const auto& ts = series.timestamps();
    if (*from_tp < std::chrono::floor<std::chrono::days>(ts.front()) || end_tp > ts.back() + series.step())
        throw DataError("window " + from + ".." + to + " lies outside the series range");
    const auto first = static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), *from_tp) - ts.begin());
    const auto past = static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), end_tp) - ts.begin());
    if (first >= past) throw DataError("window " + from + ".." + to + " contains no observations");

    Column target = series.target();
    HeldOutTruth truth;
    for (std::size_t i = first; i < past; ++i) {
        if (!target[i])
            throw DataError("window " + from + ".." + to + " touches an already-missing value at row " +
                            std::to_string(i));
        truth.values.push_back(*target[i]);
        target[i].reset();
    }
    auto gapped = series.with_target(std::move(target));
    const auto gap = find_gap(gapped);
    if (!gap) throw DataError("window produced no gap");
    return {ArtificialGap{std::move(gapped), *gap}, std::move(truth)};
}

inline double rmse(std::span<const double> predictions, std::span<const double> truth) {
    if (predictions.empty() || predictions.size() != truth.size())
        throw DataError("rmse needs equal nonzero lengths");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - truth[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(predictions.size()));
}

struct ExperimentPlan {
    std::string dataset;  // CSV path; unused when a series is supplied directly
    std::string time_column = "date";
    std::string target_column;
    std::vector<GapWindow> windows;
    std::vector<Method> methods;
    HpoConfig hpo;
    TrainConfig train;
    HyperparameterSpace space = HyperparameterSpace::standard();
    std::size_t frequency = 365;
    bool temporal_features = true;
    bool record_wall_clock = false;
    std::uint64_t seed = 0;
};

/// Outcome of one (window, method) pair.
struct CellResult {
    std::size_t window_index = 0;
    GapWindow window;
    Method method = Method::linear;
    bool ok = false;
    std::string error;
    std::size_t n_obs = 0;
    double rmse = 0.0;
    std::vector<TimePoint> times;
    std::vector<double> truth;
    std::vector<double> prediction;
    std::vector<double> abs_error;
    std::vector<bool> out_of_range;
    std::optional<MlpArchitecture> architecture;
    double best_validation_mse = 0.0;
    double seconds = 0.0;
    std::vector<std::string> warnings;
};

struct ImputationReport {
    std::vector<TimePoint> timestamps;
    Column target;  // the complete original target, for context in charts
    std::string target_name;
    bool sub_daily = false;
    std::vector<CellResult> cells;
    bool record_wall_clock = false;

    std::size_t succeeded() const {
        return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](auto& c) { return c.ok; }));
    }
};

/// Per-cell seed derived from the master seed, window index and method.
inline std::uint64_t cell_seed(std::uint64_t master, std::size_t window, Method method) {
    return mix_seed(mix_seed(master, window), static_cast<std::uint64_t>(method));
}

namespace detail {

/// Fills the gap with one method; sees only the gapped series.
inline std::vector<double> fill_gap(const ArtificialGap& input, Method method, const ExperimentPlan& plan,
                                    std::uint64_t seed, CellResult& cell) {
    const auto& target = input.gapped.target();
    const auto slice = [&](const std::vector<double>& full) {
        return std::vector<double>(full.begin() + static_cast<std::ptrdiff_t>(input.gap.start_index),
                                   full.begin() + static_cast<std::ptrdiff_t>(input.gap.end_index + 1));
    };
    FilledColumn filled;
    switch (method) {
        case Method::linear: filled = interpolate_linear(target); break;
        case Method::locf: filled = locf(target); break;
        case Method::spline: filled = interpolate_spline(target); break;
        case Method::seasonal: filled = seasonal_interpolate(target, plan.frequency); break;
        case Method::mlp_rbf:
        case Method::mlp_gp: {
            const auto prepared = plan.temporal_features ? add_temporal_features(input.gapped) : input.gapped;
            HpoConfig cfg = plan.hpo;
            cfg.seed = seed;
            cfg.surrogate = method == Method::mlp_rbf ? SurrogateKind::rbf : SurrogateKind::gp;
            const auto search = optimize(prepared, plan.space, cfg, plan.train);
            if (!search.has_finite_best())
                throw RuntimeFailure("every evaluated architecture failed: " + search.best().evaluation.failure);
            cell.architecture = search.best().architecture;
            cell.best_validation_mse = search.best().evaluation.performance;
            TrainConfig fin = plan.train;
            fin.seed = seed;
            const auto model = finalize_model(prepared, *cell.architecture, cfg.k, fin, cfg.jobs);
            const auto outcome = impute_detailed(prepared, model);
            cell.out_of_range = outcome.out_of_range;
            std::vector<double> values;
            for (std::size_t i = input.gap.start_index; i <= input.gap.end_index; ++i)
                values.push_back(*outcome.series.target()[i]);
            return values;
        }
    }
    cell.warnings = filled.warnings;
    return slice(filled.values);
}

}  // namespace detail

/// Runs every method on every window of the plan. A failing cell is recorded
/// and does not stop the others.
inline ImputationReport run_experiment(const ExperimentPlan& plan, const MultivariateSeries& series) {
    if (plan.windows.empty()) throw ConfigError("plan has no windows");
    if (plan.methods.empty()) throw ConfigError("plan has no methods");
    ImputationReport report;
    report.timestamps = series.timestamps();
    report.target = series.target();
    report.target_name = series.target_name();
    report.sub_daily = series.is_sub_daily();
    report.record_wall_clock = plan.record_wall_clock;
    for (std::size_t w = 0; w < plan.windows.size(); ++w) {
        const auto& window = plan.windows[w];
        std::optional<std::pair<ArtificialGap, HeldOutTruth>> carved;
        std::string carve_error;
        try {
            carved = make_artificial_gap(series, window.from, window.to);
        } catch (const Error& e) {
            carve_error = e.what();
        }
        for (Method method : plan.methods) {
            CellResult cell;
            cell.window_index = w;
            cell.window = window;
            cell.method = method;
            if (!carved) {
                cell.error = carve_error;
                report.cells.push_back(std::move(cell));
                continue;
            }
            const auto& [input, truth] = *carved;
            cell.n_obs = truth.values.size();
            cell.truth = truth.values;
            for (std::size_t i = input.gap.start_index; i <= input.gap.end_index; ++i)
                cell.times.push_back(series.timestamps()[i]);
            const auto t0 = std::chrono::steady_clock::now();
            try {
                cell.prediction = detail::fill_gap(input, method, plan, cell_seed(plan.seed, w, method), cell);
                cell.rmse = rmse(cell.prediction, cell.truth);
                for (std::size_t i = 0; i < cell.truth.size(); ++i)
                    cell.abs_error.push_back(std::abs(cell.prediction[i] - cell.truth[i]));
                if (cell.out_of_range.empty()) cell.out_of_range.assign(cell.truth.size(), false);
                cell.ok = true;
            } catch (const Error& e) {
                cell.error = e.what();
                cell.prediction.clear();
            }
            cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

inline MultivariateSeries load_series(const std::string& path, const std::string& target, const std::string& time) {
    return validate_series(read_csv(path), target, time);
}

inline ImputationReport run_experiment(const ExperimentPlan& plan) {
    return run_experiment(plan, load_series(plan.dataset, plan.target_column, plan.time_column));
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw RuntimeFailure("write failed for '" + path.string() + "'");
}

}  // namespace detail

/// Writes results.csv, failures.txt (when any cell failed), and per-cell fill
/// CSVs, overlay charts and scatter plots into `directory`.
inline std::vector<std::filesystem::path> emit_report(const ImputationReport& report,
                                                      const std::filesystem::path& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec || !std::filesystem::is_directory(directory))
        throw RuntimeFailure("cannot create output directory '" + directory.string() + "'");
    std::vector<std::filesystem::path> written;

    std::ostringstream results;
    write_csv_row(results, {"window_from", "window_to", "n_obs", "method", "rmse", "batch", "epochs", "layers", "nodes",
                            "dropout", "lag", "seconds"});
    std::ostringstream timings;
    write_csv_row(timings, {"window_from", "window_to", "method", "seconds"});
    std::ostringstream failures;
    for (const auto& c : report.cells) {
        std::vector<std::string> row = {c.window.from, c.window.to, std::to_string(c.n_obs), to_string(c.method),
                                        c.ok ? format_number(c.rmse) : ""};
        if (c.architecture) {
            const auto& a = *c.architecture;
            row.insert(row.end(), {std::to_string(a.batch_size), std::to_string(a.epochs), std::to_string(a.layers),
                                   std::to_string(a.nodes_per_layer), format_number(a.dropout_rate),
                                   std::to_string(a.lag)});
        } else {
            row.insert(row.end(), 6, "");
        }
        row.push_back(report.record_wall_clock ? format_number(c.seconds) : "");
        write_csv_row(results, row);
        write_csv_row(timings, {c.window.from, c.window.to, to_string(c.method), format_number(c.seconds)});
        if (!c.ok) failures << c.window.label() << ' ' << to_string(c.method) << ": " << c.error << '\n';
    }
    detail::write_file(directory / "results.csv", results.str());
    written.push_back(directory / "results.csv");
    detail::write_file(directory / "timings.csv", timings.str());
    written.push_back(directory / "timings.csv");
    if (!failures.str().empty()) {
        detail::write_file(directory / "failures.txt", failures.str());
        written.push_back(directory / "failures.txt");
    }

    for (const auto& c : report.cells) {
        if (!c.ok) continue;
        const std::string stem = c.window.label() + "_" + to_string(c.method);
        std::ostringstream fill;
        write_csv_row(fill, {"time", "truth", "prediction", "abs_error", "out_of_range"});
        for (std::size_t i = 0; i < c.truth.size(); ++i) {
            write_csv_row(fill, {format_timestamp(c.times[i], report.sub_daily), format_number(c.truth[i]),
                                 format_number(c.prediction[i]), format_number(c.abs_error[i]),
                                 c.out_of_range[i] ? "true" : "false"});
        }
        detail::write_file(directory / ("fill_" + stem + ".csv"), fill.str());
        written.push_back(directory / ("fill_" + stem + ".csv"));

        // Overlay: one gap length of context on each side.
        const auto start = static_cast<std::size_t>(
            std::lower_bound(report.timestamps.begin(), report.timestamps.end(), c.times.front()) -
            report.timestamps.begin());
        const std::size_t len = c.truth.size();
        const std::size_t lo = start > len ? start - len : 0;
        const std::size_t hi = std::min(report.target.size(), start + 2 * len);
        svg::Series observed{"observed", "#888888", {}}, truth{"held-out truth", "black", {}},
            predicted{to_string(c.method), "#d62728", {}};
        for (std::size_t i = lo; i < hi; ++i) {
            const bool in_gap = i >= start && i < start + len;
            const double v = report.target[i] ? *report.target[i] : std::nan("");
            observed.points.emplace_back(double(i), in_gap ? std::nan("") : v);
            if (in_gap) {
                truth.points.emplace_back(double(i), c.truth[i - start]);
                predicted.points.emplace_back(double(i), c.prediction[i - start]);
            }
        }
        const std::string title = report.target_name + " " + c.window.from + " .. " + c.window.to + " (" +
                                  to_string(c.method) + ", RMSE " + format_number(c.rmse) + ")";
        detail::write_file(directory / ("series_" + stem + ".svg"),
                           svg::line_chart(title, {observed, truth, predicted}, "row index", report.target_name));
        written.push_back(directory / ("series_" + stem + ".svg"));
        detail::write_file(directory / ("scatter_" + stem + ".svg"),
                           svg::scatter(to_string(c.method) + std::string(" ") + c.window.label(), c.truth, c.prediction));
        written.push_back(directory / ("scatter_" + stem + ".svg"));
    }
    return written;
}

}  // namespace gapfill
