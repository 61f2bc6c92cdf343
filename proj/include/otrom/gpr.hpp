#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace otrom::gpr {

double se_kernel(double x, double xp, double signal_variance, double length_scale);

struct Hyperparameters {
    double signal_variance = 1.0;  // sigma_f^2
    double length_scale = 1.0;
    double noise = 1e-8;  // observation-noise variance

    bool operator==(const Hyperparameters&) const = default;
};

struct GprOptions {
    int grid_points = 5;  // per hyperparameter, log-spaced
    int refinements = 50;  // coordinate-descent rounds
    int jitter_escalations = 4;
};

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// Exact GP posterior with an SE kernel and constant prior mean.
class GprModel {
public:
    /// Fixed hyperparameters. The prior mean defaults to the sample mean of y.
    /// Escalating jitter is added to the noise if the Cholesky factorization fails.
    GprModel(std::vector<double> x, std::vector<double> y, Hyperparameters h,
             std::optional<double> mean = std::nullopt, int jitter_escalations = 4);

    const std::vector<double>& train_x() const noexcept { return x_; }
    const std::vector<double>& train_y() const noexcept { return y_; }
    const Hyperparameters& hyperparameters() const noexcept { return h_; }  // noise includes jitter
    double mean_const() const noexcept { return mean_; }

    Prediction predict(double x) const;
    double predict_mean(double x) const;

private:
    std::vector<double> x_;
    std::vector<double> y_;
    Hyperparameters h_;
    double mean_;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    Eigen::VectorXd alpha_;
};

/// Maximizes the log marginal likelihood over (sigma_f^2, l, noise) in log space.
GprModel gpr_fit(std::vector<double> x, std::vector<double> y, const GprOptions& opts = {});

Prediction gpr_predict(const GprModel& m, double x);

/// log p(y | X, h) for centered targets y - mean. Throws CholeskyFailure.
double log_marginal_likelihood(std::span<const double> x, std::span<const double> y, const Hyperparameters& h,
                               double mean);

/// Gradient of the log marginal likelihood w.r.t. (log sigma_f^2, log l, log noise).
std::array<double, 3> log_marginal_likelihood_gradient(std::span<const double> x, std::span<const double> y,
                                                       const Hyperparameters& h, double mean);

}  // namespace otrom::gpr
