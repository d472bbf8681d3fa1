#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "gapfill/errors.hpp"

namespace gapfill {

/// Cubic radial basis interpolant s(x) = sum_i w_i |x - x_i|^3 + c_0 + c^T x.
///
/// The linear tail only spans coordinates that vary across the fitted points,
/// so designs living in a lower-dimensional face of the cube stay solvable.
/// Points are columns of a (dim x n) matrix.
class RbfInterpolant {
public:
    static RbfInterpolant fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values) {
        if (points.cols() != values.size()) throw DataError("rbf: point and value counts differ");
        if (points.cols() < 1) throw DataError("rbf: no points");
        if (!values.allFinite()) throw DataError("rbf: values must be finite");

        // Drop duplicate points (keep the first occurrence).
        std::vector<Eigen::Index> keep;
        for (Eigen::Index j = 0; j < points.cols(); ++j) {
            bool dup = false;
            for (Eigen::Index k : keep) dup = dup || (points.col(j) - points.col(k)).squaredNorm() == 0.0;
            if (!dup) keep.push_back(j);
        }
        RbfInterpolant rbf;
        const auto n = static_cast<Eigen::Index>(keep.size());
        rbf.centers_.resize(points.rows(), n);
        Eigen::VectorXd f(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            rbf.centers_.col(j) = points.col(keep[static_cast<std::size_t>(j)]);
            f[j] = values[keep[static_cast<std::size_t>(j)]];
        }
        for (Eigen::Index d = 0; d < points.rows(); ++d) {
            if (rbf.centers_.row(d).maxCoeff() > rbf.centers_.row(d).minCoeff()) rbf.active_.push_back(d);
        }
        const auto p = static_cast<Eigen::Index>(rbf.active_.size()) + 1;
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + p, n + p);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) a(i, j) = kernel((rbf.centers_.col(i) - rbf.centers_.col(j)).norm());
            a(i, n) = a(n, i) = 1.0;
            for (Eigen::Index q = 1; q < p; ++q) {
                a(i, n + q) = a(n + q, i) = rbf.centers_(rbf.active_[static_cast<std::size_t>(q - 1)], i);
            }
        }
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + p);
        rhs.head(n) = f;
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (lu.rank() < n + p) throw RuntimeFailure("rbf: interpolation system is singular");
        const Eigen::VectorXd sol = lu.solve(rhs);
        rbf.weights_ = sol.head(n);
        rbf.tail_ = sol.tail(p);
        return rbf;
    }

    static double kernel(double r) { return r * r * r; }

    double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        double s = tail_[0];
        for (std::size_t q = 0; q < active_.size(); ++q) s += tail_[static_cast<Eigen::Index>(q + 1)] * x[active_[q]];
        for (Eigen::Index j = 0; j < centers_.cols(); ++j) s += weights_[j] * kernel((x - centers_.col(j)).norm());
        return s;
    }

    const Eigen::MatrixXd& centers() const { return centers_; }
    const Eigen::VectorXd& weights() const { return weights_; }
    const Eigen::VectorXd& tail() const { return tail_; }

private:
    Eigen::MatrixXd centers_;
    Eigen::VectorXd weights_;
    Eigen::VectorXd tail_;
    std::vector<Eigen::Index> active_;
};

struct GpPrediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// Zero-mean Gaussian process on standardized values with the
/// squared-exponential kernel k(x,y) = s2 * exp(-|x-y|^2 / (2 l^2)).
class GaussianProcess {
public:
    static constexpr double kNugget = 1e-8;
    static constexpr double kMaxNugget = 1e-2;
    static constexpr double kResidualTolerance = 1e-4;

    /// Length-scale and signal variance picked by log marginal likelihood over a
    /// fixed logarithmic grid. Settings whose interpolation residual at the
    /// data exceeds 1e-4 (standardized units) are only used if nothing else
    /// qualifies.
    static GaussianProcess fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values) {
        GaussianProcess best;
        bool have_best = false;
        bool best_ok = false;
        double best_lml = -std::numeric_limits<double>::infinity();
        double best_residual = std::numeric_limits<double>::infinity();
        for (double length : grid(0.02, 5.0, 16)) {
            for (double signal : grid(0.1, 10.0, 9)) {
                GaussianProcess gp;
                try {
                    gp = fit_fixed(points, values, length, signal, kNugget);
                } catch (const RuntimeFailure&) {
                    continue;
                }
                const bool ok = gp.residual_ < kResidualTolerance;
                const bool better = !have_best || (ok && !best_ok) ||
                                    (ok == best_ok && (ok ? gp.lml_ > best_lml : gp.residual_ < best_residual));
                if (better) {
                    best = std::move(gp);
                    best_lml = best.lml_;
                    best_residual = best.residual_;
                    best_ok = ok;
                    have_best = true;
                }
            }
        }
        if (!have_best) throw RuntimeFailure("gp: covariance factorization failed for every grid setting");
        return best;
    }

    /// Fit with fixed kernel hyperparameters. The nugget grows by decades up
    /// to 1e-2 if the Cholesky factorization fails.
    static GaussianProcess fit_fixed(const Eigen::MatrixXd& points, const Eigen::VectorXd& values, double length_scale,
                                     double signal_variance, double nugget = kNugget) {
        if (points.cols() != values.size() || points.cols() < 1) throw DataError("gp: bad training data");
        if (!values.allFinite()) throw DataError("gp: values must be finite");
        GaussianProcess gp;
        gp.points_ = points;
        gp.length_ = length_scale;
        gp.signal_ = signal_variance;
        const auto n = points.cols();
        gp.mean_ = values.mean();
        const double var = (values.array() - gp.mean_).square().mean();
        gp.scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
        gp.y_ = (values.array() - gp.mean_) / gp.scale_;

        Eigen::MatrixXd k(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) k(i, j) = gp.cov(points.col(i), points.col(j));
        for (double nug = nugget; nug <= kMaxNugget * 1.0000001; nug = nug > 0.0 ? nug * 10.0 : kNugget) {
            Eigen::MatrixXd kn = k;
            kn.diagonal().array() += nug;
            Eigen::LLT<Eigen::MatrixXd> llt(kn);
            if (llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all())
                continue;
            gp.nugget_ = nug;
            gp.chol_ = llt.matrixL();
            gp.alpha_ = llt.solve(gp.y_);
            if (!gp.alpha_.allFinite()) continue;
            gp.lml_ = -0.5 * gp.y_.dot(gp.alpha_) - gp.chol_.diagonal().array().log().sum() -
                      0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
            gp.residual_ = (k * gp.alpha_ - gp.y_).cwiseAbs().maxCoeff();
            return gp;
        }
        throw RuntimeFailure("gp: Cholesky failed with nugget up to 1e-2");
    }

    /// Posterior in standardized units.
    GpPrediction predict_standardized(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        const auto n = points_.cols();
        Eigen::VectorXd ks(n);
        for (Eigen::Index i = 0; i < n; ++i) ks[i] = cov(x, points_.col(i));
        const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(ks);
        return {ks.dot(alpha_), std::max(0.0, signal_ - v.squaredNorm())};
    }

    /// Posterior in the units of the fitted values.
    GpPrediction predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        const auto p = predict_standardized(x);
        return {mean_ + scale_ * p.mean, scale_ * scale_ * p.variance};
    }

    double length_scale() const { return length_; }
    double signal_variance() const { return signal_; }
    double nugget() const { return nugget_; }
    double log_marginal_likelihood() const { return lml_; }
    double max_residual() const { return residual_; }
    double value_mean() const { return mean_; }
    double value_scale() const { return scale_; }
    const Eigen::VectorXd& standardized_values() const { return y_; }

private:
    static std::vector<double> grid(double lo, double hi, int count) {
        std::vector<double> g;
        for (int i = 0; i < count; ++i)
            g.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
        return g;
    }

    double cov(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const {
        return signal_ * std::exp(-(a - b).squaredNorm() / (2.0 * length_ * length_));
    }

    Eigen::MatrixXd points_;
    Eigen::VectorXd y_;
    Eigen::VectorXd alpha_;
    Eigen::MatrixXd chol_;
    double length_ = 1.0;
    double signal_ = 1.0;
    double nugget_ = kNugget;
    double mean_ = 0.0;
    double scale_ = 1.0;
    double lml_ = 0.0;
    double residual_ = 0.0;
};

}  // namespace gapfill
