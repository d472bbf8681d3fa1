#pragma once

#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "gapfill/csv.hpp"
#include "gapfill/time.hpp"

namespace gapfill::testing {

/// Daily 4-variable series used by the end-to-end checks.
///
/// x1 is a slow AR(1) process, x2 a noisy 9-day oscillation and x3 an
/// unrelated random walk. The target responds to x1 and x2 one step
/// earlier through a saturating product, plus an annual cycle and noise
/// of sd 0.02, clipped to [0, 1].
struct SyntheticSeries {
    std::vector<std::string> dates;
    std::vector<double> x1, x2, x3, y;
};

inline SyntheticSeries make_synthetic(std::size_t length = 2000, std::uint64_t seed = 20240607) {
    constexpr double pi = 3.14159265358979323846;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    SyntheticSeries s;
    const auto start = parse_date("2010-01-01").value();
    double a = 0.0, w = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
        s.dates.push_back(format_date(start + std::chrono::days{static_cast<long>(t)}));
        a = 0.97 * a + 0.25 * n01(rng);
        w += 0.1 * n01(rng);
        s.x1.push_back(a);
        s.x2.push_back(std::sin(2.0 * pi * static_cast<double>(t) / 9.0) + 0.1 * n01(rng));
        s.x3.push_back(w);
    }
    for (std::size_t t = 0; t < length; ++t) {
        const double p1 = t ? s.x1[t - 1] : s.x1[0];
        const double p2 = t ? s.x2[t - 1] : s.x2[0];
        const double season = 0.12 * std::sin(2.0 * pi * static_cast<double>(t) / 365.0);
        const double v = 0.5 + 0.3 * std::tanh(1.5 * p1) * p2 + season + 0.02 * n01(rng);
        s.y.push_back(std::clamp(v, 0.0, 1.0));
    }
    return s;
}

inline void write_synthetic_csv(const SyntheticSeries& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    write_csv_row(out, {"date", "x1", "x2", "x3", "y"});
    for (std::size_t t = 0; t < s.dates.size(); ++t)
        write_csv_row(out, {s.dates[t], format_number(s.x1[t]), format_number(s.x2[t]), format_number(s.x3[t]),
                            format_number(s.y[t])});
}

/// The 90-step window 2014-01-02 .. 2014-04-01 (rows 1462..1551).
inline constexpr const char* kGapFrom = "2014-01-02";
inline constexpr const char* kGapTo = "2014-04-01";

}  // namespace gapfill::testing
