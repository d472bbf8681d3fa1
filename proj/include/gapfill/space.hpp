#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gapfill/errors.hpp"
#include "gapfill/mlp.hpp"

namespace gapfill {

inline constexpr std::size_t kSpaceDims = 6;

/// Grid index per dimension: batch, epochs, layers, nodes, dropout, lag.
using EncodedPoint = std::array<int, kSpaceDims>;

/// Finite grid of candidate architectures. Each dimension is an ascending
/// value list, encoded as consecutive integers 0..m-1.
class HyperparameterSpace {
public:
    static constexpr std::array<const char*, kSpaceDims> kNames = {"batch", "epochs", "layers",
                                                                  "nodes", "dropout", "lag"};

    explicit HyperparameterSpace(std::array<std::vector<double>, kSpaceDims> values) : values_(std::move(values)) {
        for (std::size_t d = 0; d < kSpaceDims; ++d) {
            const auto& v = values_[d];
            if (v.empty()) throw ConfigError(std::string("hyperparameter list '") + kNames[d] + "' is empty");
            for (std::size_t i = 1; i < v.size(); ++i) {
                if (!(v[i] > v[i - 1]))
                    throw ConfigError(std::string("hyperparameter list '") + kNames[d] +
                                      "' must be strictly ascending");
            }
        }
    }

    /// batch {10..200 step 5}, epochs {50..500 step 50}, layers {1..6},
    /// nodes {5..50 step 5}, dropout {0.0..0.5 step 0.1}, lag {30..365 step 5}.
    static HyperparameterSpace standard() {
        return HyperparameterSpace({arithmetic(10, 200, 5), arithmetic(50, 500, 50), arithmetic(1, 6, 1),
                                    arithmetic(5, 50, 5), tenths(0, 5), arithmetic(30, 365, 5)});
    }

    static std::vector<double> arithmetic(int first, int last, int step) {
        std::vector<double> out;
        for (int v = first; v <= last; v += step) out.push_back(v);
        return out;
    }

    static std::vector<double> tenths(int first, int last) {
        std::vector<double> out;
        for (int v = first; v <= last; ++v) out.push_back(v / 10.0);
        return out;
    }

    const std::vector<double>& values(std::size_t dim) const { return values_[dim]; }
    int levels(std::size_t dim) const { return static_cast<int>(values_[dim].size()); }

    double cardinality() const {
        double n = 1.0;
        for (const auto& v : values_) n *= static_cast<double>(v.size());
        return n;
    }

    bool contains(const EncodedPoint& p) const {
        for (std::size_t d = 0; d < kSpaceDims; ++d)
            if (p[d] < 0 || p[d] >= levels(d)) return false;
        return true;
    }

    MlpArchitecture decode(const EncodedPoint& p) const {
        if (!contains(p)) throw ConfigError("encoded point outside the hyperparameter grid");
        MlpArchitecture a;
        a.batch_size = static_cast<int>(values_[0][p[0]]);
        a.epochs = static_cast<int>(values_[1][p[1]]);
        a.layers = static_cast<int>(values_[2][p[2]]);
        a.nodes_per_layer = static_cast<int>(values_[3][p[3]]);
        a.dropout_rate = values_[4][p[4]];
        a.lag = static_cast<int>(values_[5][p[5]]);
        return a;
    }

    EncodedPoint encode(const MlpArchitecture& a) const {
        const std::array<double, kSpaceDims> raw = {double(a.batch_size), double(a.epochs), double(a.layers),
                                                    double(a.nodes_per_layer), a.dropout_rate, double(a.lag)};
        EncodedPoint p{};
        for (std::size_t d = 0; d < kSpaceDims; ++d) {
            const auto& v = values_[d];
            std::size_t i = 0;
            while (i < v.size() && std::abs(v[i] - raw[d]) > 1e-9) ++i;
            if (i == v.size())
                throw ConfigError(std::string("value ") + std::to_string(raw[d]) + " not in list '" + kNames[d] + "'");
            p[d] = static_cast<int>(i);
        }
        return p;
    }

    /// Coordinates in [0,1]^6: index / (levels - 1), 0 for single-level dimensions.
    std::array<double, kSpaceDims> unit(const EncodedPoint& p) const {
        std::array<double, kSpaceDims> u{};
        for (std::size_t d = 0; d < kSpaceDims; ++d) {
            const int m = levels(d);
            u[d] = m > 1 ? static_cast<double>(p[d]) / (m - 1) : 0.0;
        }
        return u;
    }

    template <class Rng>
    EncodedPoint sample_uniform(Rng& rng) const {
        EncodedPoint p{};
        for (std::size_t d = 0; d < kSpaceDims; ++d) {
            std::uniform_int_distribution<int> pick(0, levels(d) - 1);
            p[d] = pick(rng);
        }
        return p;
    }

private:
    std::array<std::vector<double>, kSpaceDims> values_;
};

/// Latin-hypercube design of `n0` distinct grid points.
///
/// Each dimension is split into n0 strata, one uniform draw per stratum, the
/// strata permuted independently per dimension, and the unit coordinate
/// rounded to the nearest grid index. Designs with duplicate points are
/// redrawn whole.
inline std::vector<EncodedPoint> latin_hypercube(const HyperparameterSpace& space, std::size_t n0, std::uint64_t seed,
                                                 int max_attempts = 1000) {
    if (n0 == 0) throw ConfigError("design size must be >= 1");
    if (static_cast<double>(n0) > space.cardinality())
        throw ConfigError("design size " + std::to_string(n0) + " exceeds the grid size");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<EncodedPoint> design(n0);
        for (std::size_t d = 0; d < kSpaceDims; ++d) {
            std::vector<std::size_t> strata(n0);
            for (std::size_t i = 0; i < n0; ++i) strata[i] = i;
            std::shuffle(strata.begin(), strata.end(), rng);
            const int m = space.levels(d);
            for (std::size_t i = 0; i < n0; ++i) {
                const double u = (static_cast<double>(strata[i]) + unit(rng)) / static_cast<double>(n0);
                design[i][d] = static_cast<int>(std::lround(u * (m - 1)));
            }
        }
        std::set<EncodedPoint> seen(design.begin(), design.end());
        if (seen.size() == n0) return design;
    }
    throw RuntimeFailure("could not draw " + std::to_string(n0) + " distinct design points after " +
                         std::to_string(max_attempts) + " attempts");
}

}  // namespace gapfill
