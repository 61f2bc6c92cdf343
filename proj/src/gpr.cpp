#include "otrom/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "otrom/error.hpp"

namespace otrom::gpr {

namespace {

void check_data(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "GPR inputs and outputs differ in length");
    if (x.empty()) throw Error(ErrorCode::DegenerateData, "GPR needs training data");
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!std::isfinite(x[k]) || !std::isfinite(y[k])) {
            throw Error(ErrorCode::InvalidArgument, "GPR data must be finite");
        }
    }
}

void check_hyper(const Hyperparameters& h) {
    if (!(h.signal_variance > 0.0) || !(h.length_scale > 0.0) || !(h.noise > 0.0) ||
        !std::isfinite(h.signal_variance) || !std::isfinite(h.length_scale) || !std::isfinite(h.noise)) {
        throw Error(ErrorCode::InvalidArgument, "GPR hyperparameters must be positive and finite");
    }
}

Eigen::MatrixXd signal_matrix(std::span<const double> x, const Hyperparameters& h) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j)
            k(i, j) = k(j, i) = se_kernel(x[i], x[j], h.signal_variance, h.length_scale);
    return k;
}

bool factor(const Eigen::MatrixXd& k, Eigen::LLT<Eigen::MatrixXd>& chol) {
    chol.compute(k);
    if (chol.info() != Eigen::Success) return false;
    const auto d = chol.matrixLLT().diagonal();
    return d.allFinite() && d.minCoeff() > 0.0;
}

Eigen::VectorXd centered(std::span<const double> y, double mean) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(y.size()));
    for (std::size_t k = 0; k < y.size(); ++k) r[static_cast<Eigen::Index>(k)] = y[k] - mean;
    return r;
}

double lml_or_nan(std::span<const double> x, std::span<const double> y, const Hyperparameters& h, double mean) {
    Eigen::MatrixXd k = signal_matrix(x, h);
    k.diagonal().array() += h.noise;
    Eigen::LLT<Eigen::MatrixXd> chol;
    if (!factor(k, chol)) return std::numeric_limits<double>::quiet_NaN();
    const Eigen::VectorXd r = centered(y, mean);
    const Eigen::VectorXd a = chol.solve(r);
    const double logdet = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
    const double n = static_cast<double>(x.size());
    return -0.5 * r.dot(a) - 0.5 * logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

}  // namespace

double se_kernel(double x, double xp, double signal_variance, double length_scale) {
    const double d = x - xp;
    return signal_variance * std::exp(-d * d / (2.0 * length_scale * length_scale));
}

GprModel::GprModel(std::vector<double> x, std::vector<double> y, Hyperparameters h, std::optional<double> mean,
                   int jitter_escalations)
    : x_(std::move(x)), y_(std::move(y)), h_(h) {
    check_data(x_, y_);
    check_hyper(h_);
    mean_ = mean ? *mean : std::accumulate(y_.begin(), y_.end(), 0.0) / static_cast<double>(y_.size());

    const Eigen::MatrixXd k = signal_matrix(x_, h_);
    const double base_jitter = 1e-10 * k.trace() / static_cast<double>(k.rows());
    Eigen::MatrixXd kn = k;
    kn.diagonal().array() += h_.noise;
    bool ok = factor(kn, chol_);
    double jitter = base_jitter;
    for (int attempt = 0; !ok && attempt <= jitter_escalations; ++attempt, jitter *= 10.0) {
        kn = k;
        kn.diagonal().array() += h_.noise + jitter;
        if ((ok = factor(kn, chol_))) h_.noise += jitter;
    }
    if (!ok) throw Error(ErrorCode::CholeskyFailure, "GP covariance is not positive definite after jitter");
    alpha_ = chol_.solve(centered(y_, mean_));
}

Prediction GprModel::predict(double x) const {
    const auto n = static_cast<Eigen::Index>(x_.size());
    Eigen::VectorXd ks(n);
    for (Eigen::Index i = 0; i < n; ++i) ks[i] = se_kernel(x, x_[i], h_.signal_variance, h_.length_scale);
    Prediction p;
    p.mean = mean_ + ks.dot(alpha_);
    const Eigen::VectorXd v = chol_.matrixL().solve(ks);
    const double var = h_.signal_variance - v.squaredNorm();
    p.variance = std::max(var, 0.0) + h_.noise;
    return p;
}

double GprModel::predict_mean(double x) const {
    double m = mean_;
    for (std::size_t i = 0; i < x_.size(); ++i)
        m += se_kernel(x, x_[i], h_.signal_variance, h_.length_scale) * alpha_[static_cast<Eigen::Index>(i)];
    return m;
}

Prediction gpr_predict(const GprModel& m, double x) { return m.predict(x); }

double log_marginal_likelihood(std::span<const double> x, std::span<const double> y, const Hyperparameters& h,
                               double mean) {
    check_data(x, y);
    check_hyper(h);
    const double v = lml_or_nan(x, y, h, mean);
    if (std::isnan(v)) throw Error(ErrorCode::CholeskyFailure, "GP covariance is not positive definite");
    return v;
}

std::array<double, 3> log_marginal_likelihood_gradient(std::span<const double> x, std::span<const double> y,
                                                       const Hyperparameters& h, double mean) {
    check_data(x, y);
    check_hyper(h);
    const Eigen::MatrixXd ks = signal_matrix(x, h);
    Eigen::MatrixXd k = ks;
    k.diagonal().array() += h.noise;
    Eigen::LLT<Eigen::MatrixXd> chol;
    if (!factor(k, chol)) throw Error(ErrorCode::CholeskyFailure, "GP covariance is not positive definite");
    const auto n = k.rows();
    const Eigen::VectorXd a = chol.solve(centered(y, mean));
    const Eigen::MatrixXd w = a * a.transpose() - chol.solve(Eigen::MatrixXd::Identity(n, n));

    Eigen::MatrixXd dl(n, n);
    const double l2 = h.length_scale * h.length_scale;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
            dl(i, j) = ks(i, j) * d * d / l2;
        }
    return {0.5 * (w.cwiseProduct(ks)).sum(), 0.5 * (w.cwiseProduct(dl)).sum(), 0.5 * h.noise * w.trace()};
}

GprModel gpr_fit(std::vector<double> x, std::vector<double> y, const GprOptions& opts) {
    check_data(x, y);
    if (opts.grid_points < 1 || opts.refinements < 0 || opts.jitter_escalations < 0) {
        throw Error(ErrorCode::InvalidArgument, "invalid GPR search options");
    }
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    const double span = *hi - *lo;
    if (!(span > 0.0)) throw Error(ErrorCode::DegenerateData, "all GPR inputs are identical");

    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    double min_gap = span;
    for (std::size_t k = 1; k < sorted.size(); ++k)
        if (sorted[k] > sorted[k - 1]) min_gap = std::min(min_gap, sorted[k] - sorted[k - 1]);

    const double n = static_cast<double>(y.size());
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= n;
    const double scale = var > 0.0 ? var : 1.0;

    // Search box in natural-log coordinates: (signal variance, length scale, noise).
    const std::array<double, 3> box_lo{std::log(scale * 1e-3), std::log(min_gap * 0.5), std::log(scale * 1e-12)};
    const std::array<double, 3> box_hi{std::log(scale * 1e3), std::log(span * 10.0), std::log(scale)};
    const std::array<double, 3> grid_lo{std::log(scale * 1e-2), std::log(min_gap), std::log(scale * 1e-10)};
    const std::array<double, 3> grid_hi{std::log(scale * 1e2), std::log(span * 2.0), std::log(scale * 1e-1)};

    auto objective = [&](const std::array<double, 3>& p) {
        const Hyperparameters h{std::exp(p[0]), std::exp(p[1]), std::exp(p[2])};
        const double v = lml_or_nan(x, y, h, mean);
        return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    };

    std::array<double, 3> best = grid_lo;
    double best_val = -std::numeric_limits<double>::infinity();
    const int g = opts.grid_points;
    auto level = [&](int d, int k) {
        return g == 1 ? 0.5 * (grid_lo[d] + grid_hi[d]) : grid_lo[d] + (grid_hi[d] - grid_lo[d]) * k / (g - 1);
    };
    for (int a = 0; a < g; ++a)
        for (int b = 0; b < g; ++b)
            for (int c = 0; c < g; ++c) {
                const std::array<double, 3> p{level(0, a), level(1, b), level(2, c)};
                const double v = objective(p);
                if (v > best_val) {
                    best_val = v;
                    best = p;
                }
            }

    std::array<double, 3> step{};
    for (int d = 0; d < 3; ++d) step[d] = g > 1 ? (grid_hi[d] - grid_lo[d]) / (g - 1) : 1.0;
    for (int round = 0; round < opts.refinements; ++round) {
        bool moved = false;
        for (int d = 0; d < 3; ++d) {
            for (double dir : {1.0, -1.0}) {
                auto p = best;
                p[d] = std::clamp(p[d] + dir * step[d], box_lo[d], box_hi[d]);
                if (p[d] == best[d]) continue;
                const double v = objective(p);
                if (v > best_val) {
                    best_val = v;
                    best = p;
                    moved = true;
                    break;
                }
            }
        }
        if (!moved)
            for (auto& s : step) s *= 0.5;
    }

    return GprModel(std::move(x), std::move(y), {std::exp(best[0]), std::exp(best[1]), std::exp(best[2])}, mean,
                    opts.jitter_escalations);
}

}  // namespace otrom::gpr
