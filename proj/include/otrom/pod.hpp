#pragma once

#include <cstddef>
#include <variant>

#include <Eigen/Dense>

namespace otrom::pod {

struct EnergyThreshold {
    double value = 0.9999;  // in (0, 1]
};

struct FixedRank {
    std::size_t value = 1;
};

using Selector = std::variant<EnergyThreshold, FixedRank>;

/// Leading left singular vectors of a snapshot matrix. singular_values holds
/// every numerically nonzero singular value, not just the retained ones.
struct PODBasis {
    Eigen::MatrixXd modes;            // N_h x N_r, orthonormal columns
    Eigen::VectorXd singular_values;  // nonincreasing, > 0
    double energy_threshold = 0.0;    // 0 when selected by rank

    std::size_t rank() const noexcept { return static_cast<std::size_t>(modes.cols()); }
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(modes.rows()); }

    /// Fraction of squared singular value mass in the first k values.
    double energy(std::size_t k) const;
};

PODBasis compute_pod(const Eigen::MatrixXd& s, Selector selector = EnergyThreshold{});

Eigen::VectorXd project(const PODBasis& b, const Eigen::VectorXd& u);
Eigen::VectorXd reconstruct(const PODBasis& b, const Eigen::VectorXd& coeffs);

/// |u - U U^T u|_2 / |u|_2
double projection_error(const Eigen::VectorXd& u, const PODBasis& b);

}  // namespace otrom::pod
