#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gapfill/config.hpp"
#include "gapfill/evaluation.hpp"
#include "gapfill/hpo.hpp"
#include "gapfill/imputer.hpp"
#include "gapfill/persistence.hpp"
#include "gapfill/series.hpp"

namespace gapfill::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

/// Values given on the command line; unset means "take it from the config".
struct Overrides {
    std::optional<std::string> surrogate;
    std::optional<std::size_t> budget;
    std::optional<std::size_t> init;
    std::optional<std::size_t> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::optional<std::string> out;
};

inline void apply_overrides(RunConfig& cfg, const Overrides& o) {
    if (o.surrogate) {
        if (*o.surrogate == "rbf") cfg.hpo.surrogate = SurrogateKind::rbf;
        else if (*o.surrogate == "gp") cfg.hpo.surrogate = SurrogateKind::gp;
        else throw ConfigError("--surrogate must be rbf or gp");
    }
    if (o.budget) cfg.hpo.n = *o.budget;
    if (o.init) cfg.hpo.n0 = *o.init;
    if (o.trials) cfg.hpo.k = *o.trials;
    if (o.jobs) cfg.hpo.jobs = *o.jobs;
    if (o.out) cfg.output_dir = *o.out;
    cfg.seed = resolve_seed(o.seed, cfg.seed);
    cfg.hpo.seed = *cfg.seed;
    cfg.train.seed = *cfg.seed;
    cfg.hpo.validate();
}

inline MultivariateSeries prepare(const MultivariateSeries& series, const RunConfig& cfg) {
    return cfg.temporal_features ? add_temporal_features(series) : series;
}

inline std::string gap_summary(const MultivariateSeries& s) {
    const auto runs = missing_runs(s.target());
    if (runs.empty()) return "none";
    std::string out;
    for (const auto& [a, b] : runs) {
        if (!out.empty()) out += "; ";
        out += s.target_name() + " " + format_timestamp(s.timestamps()[a], s.is_sub_daily()) + ".." +
               format_timestamp(s.timestamps()[b], s.is_sub_daily()) + " (" + std::to_string(b - a + 1) + " steps)";
    }
    return out;
}

inline int cmd_validate(const std::string& csv, const std::string& time, const std::string& target,
                        std::ostream& out) {
    const auto s = validate_series(read_csv(csv), target, time);
    out << "S=" << s.length() << ", N=" << s.width() << ", step=" << format_step(s.step())
        << ", gaps: " << gap_summary(s) << '\n';
    return kExitOk;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << text)) throw RuntimeFailure("cannot write '" + path.string() + "'");
}

inline int cmd_hpo(RunConfig cfg, const Overrides& o, bool write_model, std::ostream& out) {
    apply_overrides(cfg, o);
    const auto series = prepare(load_series(cfg.dataset, cfg.target_column, cfg.time_column), cfg);
    const auto result = optimize(series, cfg.space, cfg.hpo, cfg.train);
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    std::ostringstream history;
    write_history_csv(history, result);
    write_text(dir / "history.csv", history.str());
    if (!result.has_finite_best()) {
        out << "every evaluated architecture failed; see " << (dir / "history.csv").string() << '\n';
        return kExitRuntime;
    }
    const auto& best = result.best();
    nlohmann::json doc = architecture_to_json(best.architecture);
    doc["mean_mse"] = best.evaluation.performance;
    doc["iteration"] = best.iteration;
    doc["surrogate"] = to_string(cfg.hpo.surrogate);
    doc["seed"] = *cfg.seed;
    write_text(dir / "best_architecture.json", doc.dump(2) + "\n");
    out << "best architecture: batch=" << best.architecture.batch_size << " epochs=" << best.architecture.epochs
        << " layers=" << best.architecture.layers << " nodes=" << best.architecture.nodes_per_layer
        << " dropout=" << format_number(best.architecture.dropout_rate) << " lag=" << best.architecture.lag
        << " mean_mse=" << format_number(best.evaluation.performance) << '\n';
    if (write_model) {
        TrainConfig fin = cfg.train;
        fin.seed = *cfg.seed;
        const auto model = finalize_model(series, best.architecture, cfg.hpo.k, fin, cfg.hpo.jobs);
        save_model(model, (dir / "model.json").string());
        out << "model written to " << (dir / "model.json").string() << '\n';
    }
    return kExitOk;
}

/// Writes the input CSV back with the gap filled and an `imputed` column.
/// Untouched cells are copied verbatim.
inline int cmd_impute(RunConfig cfg, const std::string& model_path, const std::string& out_path,
                      std::ostream& out) {
    cfg.seed = resolve_seed(std::nullopt, cfg.seed);
    const auto raw = read_csv(cfg.dataset);
    const auto series = validate_series(raw, cfg.target_column, cfg.time_column);
    const auto model = load_model(model_path);
    const auto gap = find_gap(series);
    std::vector<std::optional<double>> filled(series.length());
    if (gap) {
        const auto result = impute(prepare(series, cfg), model);
        for (std::size_t i = gap->start_index; i <= gap->end_index; ++i) filled[i] = result.target()[i];
    }
    std::size_t target_col = 0;
    while (target_col < raw.header.size() && detail::trim(raw.header[target_col]) != cfg.target_column) ++target_col;

    std::ostringstream csv;
    auto header = raw.header;
    header.push_back("imputed");
    write_csv_row(csv, header);
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        auto row = raw.rows[r];
        const bool imputed = filled[r].has_value();
        if (imputed) row[target_col] = format_number(*filled[r]);
        row.push_back(imputed ? "true" : "false");
        write_csv_row(csv, row);
    }
    write_text(out_path, csv.str());
    out << "wrote " << raw.rows.size() << " rows to " << out_path << " ("
        << (gap ? std::to_string(gap->length()) + " imputed" : std::string("no gap")) << ")\n";
    return kExitOk;
}

inline int cmd_evaluate(RunConfig cfg, const Overrides& o, std::ostream& out) {
    apply_overrides(cfg, o);
    if (cfg.windows.empty()) throw ConfigError("/windows: evaluate needs at least one window");
    if (cfg.methods.empty()) throw ConfigError("/methods: evaluate needs at least one method");
    const auto report = run_experiment(cfg.plan());
    emit_report(report, cfg.output_dir);
    for (const auto& c : report.cells) {
        out << c.window.from << ".." << c.window.to << ' ' << to_string(c.method) << ": ";
        if (c.ok) out << "rmse=" << format_number(c.rmse) << " n_obs=" << c.n_obs << '\n';
        else out << "FAILED " << c.error << '\n';
    }
    out << report.succeeded() << "/" << report.cells.size() << " cells succeeded; report in " << cfg.output_dir
        << '\n';
    return report.succeeded() > 0 ? kExitOk : kExitRuntime;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"gapfill: fill a long gap in a multivariate time series with a surrogate-tuned MLP"};
    app.require_subcommand(1);
    app.footer(
        "Precedence: command-line flags override config values; the seed falls back to the config, then to the "
        "GAPFILL_SEED environment variable, then 0.\nExit codes: 0 success, 1 usage/config error, 2 data error, "
        "3 runtime failure.");

    std::string csv, time = "date", target;
    auto* validate = app.add_subcommand("validate", "Check a CSV and summarize its shape and gaps");
    validate->add_option("--csv", csv, "CSV file")->required();
    validate->add_option("--time", time, "Time column name")->capture_default_str();
    validate->add_option("--target", target, "Target column name")->required();

    std::string config_path, model_path, out_path;
    Overrides o;
    bool no_model = false;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--seed", o.seed, "Master seed (overrides config and GAPFILL_SEED)");
        sub->add_option("--jobs", o.jobs, "Maximum concurrent trainings")->check(CLI::PositiveNumber);
    };
    auto* hpo = app.add_subcommand("hpo", "Tune the MLP architecture and lag");
    add_common(hpo);
    hpo->add_option("--surrogate", o.surrogate, "rbf or gp")->check(CLI::IsMember({"rbf", "gp"}));
    hpo->add_option("--budget", o.budget, "Total evaluations n");
    hpo->add_option("--init", o.init, "Initial design size n0");
    hpo->add_option("--trials", o.trials, "Trainings per evaluated point k");
    hpo->add_option("--out", o.out, "Output directory (overrides output_dir)");
    hpo->add_flag("--no-model", no_model, "Skip training and saving the final ensemble");

    auto* imp = app.add_subcommand("impute", "Fill the target gap with a saved model");
    imp->add_option("--config", config_path, "JSON run configuration")->required();
    imp->add_option("--model", model_path, "Model JSON written by hpo")->required();
    imp->add_option("--out", out_path, "Output CSV")->required();

    auto* eval = app.add_subcommand("evaluate", "Run the artificial-gap experiment and write a report");
    add_common(eval);
    eval->add_option("--out", o.out, "Output directory (overrides output_dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (validate->parsed()) return cmd_validate(csv, time, target, out);
        const auto cfg = load_config(config_path);
        if (hpo->parsed()) return cmd_hpo(cfg, o, !no_model, out);
        if (imp->parsed()) return cmd_impute(cfg, model_path, out_path, out);
        return cmd_evaluate(cfg, o, out);
    } catch (const ConfigValidationError& e) {
        err << e.to_json() << '\n';
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "runtime failure: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace gapfill::cli
