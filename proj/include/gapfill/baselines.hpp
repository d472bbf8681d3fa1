#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "gapfill/errors.hpp"
#include "gapfill/series.hpp"

namespace gapfill {

/// Univariate fill result; `warnings` is non-empty when a fallback was used.
struct FilledColumn {
    std::vector<double> values;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::vector<double> observed_copy(const Column& column) {
    std::vector<double> out(column.size(), 0.0);
    for (std::size_t i = 0; i < column.size(); ++i)
        if (column[i]) out[i] = *column[i];
    return out;
}

inline void require_two_sided(const Column& column, const char* method) {
    for (const auto& [a, b] : missing_runs(column)) {
        if (a == 0 || b + 1 == column.size())
            throw DataError(std::string(method) + ": gap at rows " + std::to_string(a) + "-" + std::to_string(b) +
                            " has no observation on one side");
    }
}

}  // namespace detail

/// Last observation carried forward.
inline FilledColumn locf(const Column& column) {
    if (!column.empty() && !column.front()) throw DataError("locf: gap at the start of the series");
    FilledColumn out{detail::observed_copy(column), {}};
    for (std::size_t i = 1; i < column.size(); ++i)
        if (!column[i]) out.values[i] = out.values[i - 1];
    return out;
}

/// Straight line between the observations bracketing each gap.
inline FilledColumn interpolate_linear(const Column& column) {
    detail::require_two_sided(column, "linear interpolation");
    FilledColumn out{detail::observed_copy(column), {}};
    for (const auto& [a, b] : missing_runs(column)) {
        const std::size_t left = a - 1, right = b + 1;
        const double y0 = out.values[left], y1 = out.values[right];
        const double span = static_cast<double>(right - left);
        for (std::size_t i = a; i <= b; ++i) {
            const double f = static_cast<double>(i - left) / span;
            out.values[i] = y0 + f * (y1 - y0);
        }
    }
    return out;
}

/// Natural cubic spline (zero second derivative at the ends) through knots
/// (x_i, y_i) with strictly increasing x.
class NaturalCubicSpline {
public:
    NaturalCubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw DataError("spline needs at least two knots");
        m_.assign(n, 0.0);
        if (n == 2) return;
        // Tridiagonal system for interior second derivatives (Thomas algorithm).
        std::vector<double> sub(n, 0.0), diag(n, 1.0), sup(n, 0.0), rhs(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
            sub[i] = h0;
            diag[i] = 2.0 * (h0 + h1);
            sup[i] = h1;
            rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
        }
        for (std::size_t i = 1; i < n; ++i) {
            const double w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        m_[n - 1] = rhs[n - 1] / diag[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) m_[i] = (rhs[i] - sup[i] * m_[i + 1]) / diag[i];
    }

    double operator()(double t) const {
        std::size_t hi = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin());
        hi = std::clamp<std::size_t>(hi, 1, x_.size() - 1);
        const std::size_t lo = hi - 1;
        const double h = x_[hi] - x_[lo];
        const double a = (x_[hi] - t) / h, b = (t - x_[lo]) / h;
        return a * y_[lo] + b * y_[hi] + ((a * a * a - a) * m_[lo] + (b * b * b - b) * m_[hi]) * h * h / 6.0;
    }

private:
    std::vector<double> x_, y_, m_;
};

/// Natural cubic spline through every observed point, evaluated at missing
/// indices. Fewer than 4 observations fall back to linear interpolation.
inline FilledColumn interpolate_spline(const Column& column) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < column.size(); ++i) {
        if (!column[i]) continue;
        xs.push_back(static_cast<double>(i));
        ys.push_back(*column[i]);
    }
    if (xs.size() < 4) {
        auto out = interpolate_linear(column);
        out.warnings.push_back("spline: only " + std::to_string(xs.size()) +
                               " observed points; fell back to linear interpolation");
        return out;
    }
    detail::require_two_sided(column, "spline interpolation");
    const NaturalCubicSpline spline(std::move(xs), std::move(ys));
    FilledColumn out{detail::observed_copy(column), {}};
    for (std::size_t i = 0; i < column.size(); ++i)
        if (!column[i]) out.values[i] = spline(static_cast<double>(i));
    return out;
}

/// Per-phase means of the observed values, phase = index mod frequency.
/// Phases without observations take the global observed mean.
struct SeasonalProfile {
    std::size_t frequency = 0;
    std::vector<double> means;

    static SeasonalProfile estimate(const Column& column, std::size_t frequency) {
        if (frequency < 2) throw DataError("seasonal frequency must be >= 2");
        SeasonalProfile p{frequency, std::vector<double>(frequency, 0.0)};
        std::vector<std::size_t> counts(frequency, 0);
        double total = 0.0;
        std::size_t observed = 0;
        for (std::size_t i = 0; i < column.size(); ++i) {
            if (!column[i]) continue;
            p.means[i % frequency] += *column[i];
            ++counts[i % frequency];
            total += *column[i];
            ++observed;
        }
        if (observed == 0) throw DataError("seasonal profile: no observed values");
        const double global = total / static_cast<double>(observed);
        for (std::size_t k = 0; k < frequency; ++k)
            p.means[k] = counts[k] ? p.means[k] / static_cast<double>(counts[k]) : global;
        return p;
    }

    double at(std::size_t index) const { return means[index % frequency]; }
};

/// Removes the seasonal profile, interpolates the remainder linearly across
/// each gap, then adds the profile back.
inline FilledColumn seasonal_interpolate(const Column& column, std::size_t frequency) {
    if (column.size() < frequency)
        throw DataError("seasonal interpolation: series of length " + std::to_string(column.size()) +
                        " is shorter than the frequency " + std::to_string(frequency));
    detail::require_two_sided(column, "seasonal interpolation");
    const auto profile = SeasonalProfile::estimate(column, frequency);
    Column residual(column.size());
    for (std::size_t i = 0; i < column.size(); ++i)
        if (column[i]) residual[i] = *column[i] - profile.at(i);
    auto filled = interpolate_linear(residual);
    FilledColumn out{detail::observed_copy(column), {}};
    for (std::size_t i = 0; i < column.size(); ++i)
        if (!column[i]) out.values[i] = filled.values[i] + profile.at(i);
    return out;
}

}  // namespace gapfill
