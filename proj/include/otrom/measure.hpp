#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace otrom::measure {

struct Point {
    double x = 0.0;
    double z = 0.0;
};

/// Uniform 2D cell-centered grid. Linear index l = iz * nx + ix (x fastest).
class Grid {
public:
    Grid(std::size_t nx, std::size_t nz, double hx, double hz, double x0 = 0.0, double z0 = 0.0);

    std::size_t nx() const noexcept { return nx_; }
    std::size_t nz() const noexcept { return nz_; }
    double hx() const noexcept { return hx_; }
    double hz() const noexcept { return hz_; }
    double x0() const noexcept { return x0_; }
    double z0() const noexcept { return z0_; }
    std::size_t size() const noexcept { return nx_ * nz_; }

    std::size_t index(std::size_t ix, std::size_t iz) const noexcept { return iz * nx_ + ix; }
    std::size_t ix(std::size_t l) const noexcept { return l % nx_; }
    std::size_t iz(std::size_t l) const noexcept { return l / nx_; }

    Point cell_center(std::size_t l) const;

    /// Nearest cell center to p. Points outside the box clamp to the boundary
    /// cell; exact midpoints between two centers round half to even.
    std::size_t nearest_cell(Point p) const;

    bool operator==(const Grid&) const = default;

private:
    std::size_t nx_;
    std::size_t nz_;
    double hx_;
    double hz_;
    double x0_;
    double z0_;
};

struct Snapshot {
    Eigen::VectorXd values;
    double time = 0.0;
};

/// Ordered snapshots saved every `dt` on a shared grid; snapshot k sits at k * dt.
class Trajectory {
public:
    Trajectory(Grid grid, double dt, std::vector<Snapshot> snapshots);

    const Grid& grid() const noexcept { return grid_; }
    double dt() const noexcept { return dt_; }
    double t_final() const noexcept { return snapshots_.back().time; }
    std::size_t size() const noexcept { return snapshots_.size(); }
    const Snapshot& operator[](std::size_t k) const { return snapshots_[k]; }
    const std::vector<Snapshot>& snapshots() const noexcept { return snapshots_; }

    /// Snapshot stored at time t (matched to within 1e-9 * dt).
    std::optional<std::size_t> find_time(double t) const;

    /// N_h x N_T snapshot matrix.
    Eigen::MatrixXd matrix() const;

private:
    Grid grid_;
    double dt_;
    std::vector<Snapshot> snapshots_;
};

/// Normalized nonnegative weights on grid cells, plus the L1 mass removed by
/// normalization. Zero-weight atoms are never stored.
class DiscreteMeasure {
public:
    DiscreteMeasure(std::vector<std::uint32_t> support, std::vector<double> weights, double mass);

    const std::vector<std::uint32_t>& support() const noexcept { return support_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    double mass() const noexcept { return mass_; }
    std::size_t size() const noexcept { return support_.size(); }

    /// Weight of cell l (0 when l is not in the support).
    double weight_at(std::uint32_t l) const;

    std::vector<Point> points(const Grid& grid) const;

    /// Normalizes a nonnegative cell-indexed density (length = grid size).
    /// Returns nullopt when the density has zero mass.
    static std::optional<DiscreteMeasure> from_density(std::span<const double> density);

private:
    std::vector<std::uint32_t> support_;
    std::vector<double> weights_;
    double mass_;
};

struct SignedDecomposition {
    std::optional<DiscreteMeasure> positive;
    std::optional<DiscreteMeasure> negative;
};

enum class SignStrategy {
    Nonnegative,  // reject negative values, normalize the whole field
    Split,        // positive and negative parts normalized separately
};

SignedDecomposition field_to_measures(const Snapshot& s, SignStrategy strategy = SignStrategy::Split);

Snapshot measures_to_field(const SignedDecomposition& d, const Grid& g, double time = 0.0);

}  // namespace otrom::measure
