#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gapfill/csv.hpp"
#include "gapfill/errors.hpp"
#include "gapfill/time.hpp"

namespace gapfill {

/// One variable over time. An empty optional is a missing observation.
using Column = std::vector<std::optional<double>>;

/// Timestamped S x N observation matrix with one designated target variable.
///
/// Only the target column may hold missing entries; supporting columns are
/// fully observed. Timestamps are strictly increasing with a constant step.
class MultivariateSeries {
public:
    static MultivariateSeries create(std::vector<TimePoint> timestamps, std::vector<Column> columns,
                                     std::vector<std::string> names, std::size_t target_index,
                                     std::size_t temporal_feature_count = 0) {
        MultivariateSeries s;
        s.timestamps_ = std::move(timestamps);
        s.columns_ = std::move(columns);
        s.names_ = std::move(names);
        s.target_index_ = target_index;
        s.temporal_features_ = temporal_feature_count;
        s.check();
        return s;
    }

    std::size_t length() const { return timestamps_.size(); }
    std::size_t width() const { return columns_.size(); }
    std::chrono::minutes step() const { return timestamps_[1] - timestamps_[0]; }
    bool is_sub_daily() const { return step().count() % 1440 != 0; }

    const std::vector<TimePoint>& timestamps() const { return timestamps_; }
    const std::vector<Column>& columns() const { return columns_; }
    const Column& column(std::size_t i) const { return columns_.at(i); }
    const Column& target() const { return columns_[target_index_]; }
    const std::vector<std::string>& names() const { return names_; }
    std::size_t target_index() const { return target_index_; }
    const std::string& target_name() const { return names_[target_index_]; }

    /// Number of trailing calendar-indicator columns (0 when none were added).
    std::size_t temporal_feature_count() const { return temporal_features_; }

    std::optional<double> at(std::size_t row, std::size_t col) const { return columns_[col][row]; }

    std::size_t missing_count() const {
        return static_cast<std::size_t>(std::count(target().begin(), target().end(), std::nullopt));
    }

    /// Copy with the target column replaced.
    MultivariateSeries with_target(Column target) const {
        auto columns = columns_;
        columns[target_index_] = std::move(target);
        return with_columns(std::move(columns));
    }

    /// Copy with all columns replaced (same shape, names and timestamps).
    MultivariateSeries with_columns(std::vector<Column> columns) const {
        return create(timestamps_, std::move(columns), names_, target_index_, temporal_features_);
    }

private:
    MultivariateSeries() = default;

    void check() const {
        if (timestamps_.size() < 2) throw DataError("S >= 2 required");
        if (columns_.empty()) throw DataError("N >= 1 required");
        if (names_.size() != columns_.size()) throw DataError("one name per column required");
        if (target_index_ >= columns_.size()) throw DataError("target index out of range");
        if (temporal_features_ >= columns_.size() && temporal_features_ != 0)
            throw DataError("temporal feature count exceeds column count");
        const auto step = timestamps_[1] - timestamps_[0];
        if (step.count() <= 0) throw DataError("timestamps must be strictly increasing (row 1)");
        for (std::size_t i = 1; i < timestamps_.size(); ++i) {
            if (timestamps_[i] - timestamps_[i - 1] != step) {
                throw DataError("non-uniform time step at row " + std::to_string(i) + " (" +
                                format_timestamp(timestamps_[i], true) + ")");
            }
        }
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            if (columns_[c].size() != timestamps_.size())
                throw DataError("column '" + names_[c] + "' has wrong length");
            if (c == target_index_) continue;
            for (std::size_t r = 0; r < columns_[c].size(); ++r) {
                if (!columns_[c][r])
                    throw DataError("missing value in supporting column '" + names_[c] + "' at row " +
                                    std::to_string(r));
            }
        }
    }

    std::vector<TimePoint> timestamps_;
    std::vector<Column> columns_;
    std::vector<std::string> names_;
    std::size_t target_index_ = 0;
    std::size_t temporal_features_ = 0;
};

/// Inclusive row range of one contiguous run of missing target values.
struct GapSpec {
    std::size_t start_index = 0;
    std::size_t end_index = 0;
    std::size_t target_index = 0;

    std::size_t length() const { return end_index - start_index + 1; }
    bool contains(std::size_t row) const { return row >= start_index && row <= end_index; }
    friend bool operator==(const GapSpec&, const GapSpec&) = default;
};

/// Maximal runs of missing entries as inclusive (first, last) pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> missing_runs(const Column& column) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    for (std::size_t i = 0; i < column.size(); ++i) {
        if (column[i]) continue;
        if (!runs.empty() && runs.back().second + 1 == i) runs.back().second = i;
        else runs.emplace_back(i, i);
    }
    return runs;
}

/// The single target gap, or nullopt when the target is complete.
inline std::optional<GapSpec> find_gap(const MultivariateSeries& series) {
    const auto runs = missing_runs(series.target());
    if (runs.empty()) return std::nullopt;
    if (runs.size() > 1)
        throw DataError("target '" + series.target_name() + "' has " + std::to_string(runs.size()) +
                        " separate gaps; exactly one contiguous gap is supported");
    return GapSpec{runs[0].first, runs[0].second, series.target_index()};
}

namespace detail {

inline std::vector<std::string> dedupe_names(std::vector<std::string> names) {
    std::unordered_set<std::string> seen(names.begin(), names.end());
    std::unordered_map<std::string, int> count;
    for (auto& n : names) {
        const int k = ++count[n];
        if (k == 1) continue;
        std::string candidate;
        int suffix = k;
        do {
            candidate = n + "_" + std::to_string(suffix++);
        } while (seen.count(candidate));
        seen.insert(candidate);
        n = candidate;
    }
    return names;
}

}  // namespace detail

/// Turns a raw CSV table into a validated series.
///
/// The time column may be anywhere; every other column becomes a variable in
/// file order. Missing cells are allowed only in the target column.
inline MultivariateSeries validate_series(const RawTable& raw, const std::string& target_name,
                                          const std::string& time_name) {
    const auto find = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(raw.header.begin(), raw.header.end(), name);
        if (it == raw.header.end()) throw DataError("column '" + name + "' not found in header");
        return static_cast<std::size_t>(it - raw.header.begin());
    };
    const std::size_t time_col = find(time_name);
    const std::size_t target_col = find(target_name);
    if (time_col == target_col) throw DataError("time and target columns must differ");
    if (raw.rows.size() < 2) throw DataError("S >= 2 required");
    if (raw.header.size() < 2) throw DataError("N >= 1 required");

    std::vector<TimePoint> timestamps;
    timestamps.reserve(raw.rows.size());
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        const auto tp = parse_timestamp(detail::trim(raw.rows[r][time_col]));
        if (!tp)
            throw DataError("row " + std::to_string(r + 1) + ", column '" + time_name + "': cannot parse timestamp '" +
                            raw.rows[r][time_col] + "'");
        timestamps.push_back(*tp);
    }

    std::vector<Column> columns;
    std::vector<std::string> names;
    std::size_t target_index = 0;
    for (std::size_t c = 0; c < raw.header.size(); ++c) {
        if (c == time_col) continue;
        if (c == target_col) target_index = columns.size();
        Column column(raw.rows.size());
        for (std::size_t r = 0; r < raw.rows.size(); ++r) {
            const auto& cell = raw.rows[r][c];
            if (is_missing_cell(cell)) {
                if (c != target_col)
                    throw DataError("missing value in supporting column '" + raw.header[c] + "' at row " +
                                    std::to_string(r + 1));
                continue;
            }
            const auto v = parse_number(cell);
            if (!v)
                throw DataError("row " + std::to_string(r + 1) + ", column '" + raw.header[c] +
                                "': cannot parse number '" + cell + "'");
            column[r] = *v;
        }
        columns.push_back(std::move(column));
        names.push_back(raw.header[c]);
    }
    return MultivariateSeries::create(std::move(timestamps), std::move(columns), detail::dedupe_names(std::move(names)),
                                      target_index);
}

/// Appends month-of-year, day-of-month and, for sub-daily steps, hour-of-day.
inline MultivariateSeries add_temporal_features(const MultivariateSeries& series) {
    if (series.temporal_feature_count() > 0) throw DataError("temporal features already present");
    auto columns = series.columns();
    auto names = series.names();
    const auto& ts = series.timestamps();
    Column month(ts.size()), day(ts.size()), hour(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        month[i] = month_of(ts[i]);
        day[i] = day_of_month(ts[i]);
        hour[i] = hour_of_day(ts[i]);
    }
    columns.push_back(std::move(month));
    names.emplace_back("month");
    columns.push_back(std::move(day));
    names.emplace_back("day");
    std::size_t added = 2;
    if (series.is_sub_daily()) {
        columns.push_back(std::move(hour));
        names.emplace_back("hour");
        ++added;
    }
    return MultivariateSeries::create(ts, std::move(columns), detail::dedupe_names(std::move(names)),
                                      series.target_index(), added);
}

/// Copy without the calendar-indicator columns.
inline MultivariateSeries strip_temporal_features(const MultivariateSeries& series) {
    const std::size_t keep = series.width() - series.temporal_feature_count();
    std::vector<Column> columns(series.columns().begin(), series.columns().begin() + keep);
    std::vector<std::string> names(series.names().begin(), series.names().begin() + keep);
    return MultivariateSeries::create(series.timestamps(), std::move(columns), std::move(names),
                                      series.target_index());
}

/// Per-column min-max normalization fitted on observed entries.
struct Scaler {
    std::vector<double> min;
    std::vector<double> max;
    std::size_t target_index = 0;
    std::vector<std::string> warnings;

    double range(std::size_t col) const { return max[col] - min[col]; }

    double forward(std::size_t col, double x) const {
        const double r = range(col);
        return r > 0.0 ? (x - min[col]) / r : 0.0;
    }

    double inverse(std::size_t col, double x) const { return min[col] + x * range(col); }
};

inline Scaler fit_scaler(const MultivariateSeries& series) {
    Scaler scaler;
    scaler.target_index = series.target_index();
    for (std::size_t c = 0; c < series.width(); ++c) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const auto& v : series.column(c)) {
            if (!v) continue;
            lo = std::min(lo, *v);
            hi = std::max(hi, *v);
        }
        if (!std::isfinite(lo)) throw DataError("column '" + series.names()[c] + "' has no observed values");
        if (lo == hi)
            scaler.warnings.push_back("column '" + series.names()[c] + "' is constant; normalized to zeros");
        scaler.min.push_back(lo);
        scaler.max.push_back(hi);
    }
    return scaler;
}

inline MultivariateSeries apply_scaler(const MultivariateSeries& series, const Scaler& scaler) {
    if (scaler.min.size() != series.width()) throw DataError("scaler width does not match series");
    auto columns = series.columns();
    for (std::size_t c = 0; c < columns.size(); ++c) {
        for (auto& v : columns[c]) {
            if (v) v = scaler.forward(c, *v);
        }
    }
    return series.with_columns(std::move(columns));
}

/// Maps normalized target values back to original units.
inline std::vector<double> invert_target(std::span<const double> values, const Scaler& scaler) {
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(scaler.inverse(scaler.target_index, v));
    return out;
}

/// Supervised view over a series: each row is a window of `lag + 1`
/// consecutive observation vectors and the target value one step later.
///
/// Row r predicts time `row_origin[r]` (0-based row index into the series);
/// its input concatenates the observation vectors at times
/// `origin - lag - 1, ..., origin - 1` in that order, N values per step.
/// The table shares the underlying series and never copies windows.
class LaggedTable {
public:
    LaggedTable(std::shared_ptr<const MultivariateSeries> source, std::size_t lag,
                std::vector<std::size_t> row_origin)
        : source_(std::move(source)), lag_(lag), origin_(std::move(row_origin)) {}

    std::size_t rows() const { return origin_.size(); }
    std::size_t width() const { return (lag_ + 1) * source_->width(); }
    std::size_t lag() const { return lag_; }
    const std::vector<std::size_t>& row_origin() const { return origin_; }
    const MultivariateSeries& source() const { return *source_; }
    const std::shared_ptr<const MultivariateSeries>& source_ptr() const { return source_; }

    std::optional<double> input(std::size_t row, std::size_t col) const {
        const std::size_t n = source_->width();
        const std::size_t time = origin_[row] - lag_ - 1 + col / n;
        return source_->at(time, col % n);
    }

    std::optional<double> output(std::size_t row) const {
        return source_->at(origin_[row], source_->target_index());
    }

    bool row_complete(std::size_t row) const {
        if (!output(row)) return false;
        // Supporting columns are fully observed by construction; only the target can be missing.
        const std::size_t first = origin_[row] - lag_ - 1;
        const auto& target = source_->target();
        for (std::size_t t = first; t < origin_[row]; ++t) {
            if (!target[t]) return false;
        }
        return true;
    }

    LaggedTable select(std::vector<std::size_t> origins) const { return LaggedTable(source_, lag_, std::move(origins)); }

private:
    std::shared_ptr<const MultivariateSeries> source_;
    std::size_t lag_;
    std::vector<std::size_t> origin_;
};

inline LaggedTable build_lagged_table(std::shared_ptr<const MultivariateSeries> series, std::size_t lag) {
    if (lag < 1) throw DataError("lag must be >= 1");
    const std::size_t s = series->length();
    if (s < 2 || lag > s - 2) throw DataError("series too short for lag " + std::to_string(lag));
    std::vector<std::size_t> origins;
    origins.reserve(s - lag - 1);
    for (std::size_t t = lag + 1; t < s; ++t) origins.push_back(t);
    return LaggedTable(std::move(series), lag, std::move(origins));
}

inline LaggedTable build_lagged_table(const MultivariateSeries& series, std::size_t lag) {
    return build_lagged_table(std::make_shared<const MultivariateSeries>(series), lag);
}

/// Drops every row with a missing entry in its input window or output.
inline LaggedTable reduce_lagged_table(const LaggedTable& table) {
    std::vector<std::size_t> kept;
    kept.reserve(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        if (table.row_complete(r)) kept.push_back(table.row_origin()[r]);
    }
    return table.select(std::move(kept));
}

/// Chronological split: the earliest ceil(fraction * R) rows train.
inline std::pair<LaggedTable, LaggedTable> split_train_val(const LaggedTable& table, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DataError("train fraction must lie in (0, 1)");
    const std::size_t r = table.rows();
    if (r < 2) throw DataError("at least 2 rows required to split, have " + std::to_string(r));
    const auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(r) - 1e-9));
    if (n_train == 0 || n_train >= r)
        throw DataError("split of " + std::to_string(r) + " rows leaves an empty side");
    const auto& o = table.row_origin();
    return {table.select({o.begin(), o.begin() + static_cast<std::ptrdiff_t>(n_train)}),
            table.select({o.begin() + static_cast<std::ptrdiff_t>(n_train), o.end()})};
}

}  // namespace gapfill
