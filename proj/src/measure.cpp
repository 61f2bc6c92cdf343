#include "otrom/measure.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "otrom/error.hpp"

namespace otrom::measure {

namespace {

std::size_t nearest_axis(double coord, double origin, double h, std::size_t n) {
    const double u = std::nearbyint((coord - origin) / h);
    if (!(u > 0.0)) return 0;  // also catches NaN
    const double last = static_cast<double>(n - 1);
    return static_cast<std::size_t>(std::min(u, last));
}

}  // namespace

Grid::Grid(std::size_t nx, std::size_t nz, double hx, double hz, double x0, double z0)
    : nx_(nx), nz_(nz), hx_(hx), hz_(hz), x0_(x0), z0_(z0) {
    if (nx == 0 || nz == 0 || !(hx > 0.0) || !(hz > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "grid needs nx, nz >= 1 and hx, hz > 0");
    }
    if (nx * nz > std::size_t{0xffffffffu}) {
        throw Error(ErrorCode::TooLarge, "grid cell count exceeds 32-bit indexing");
    }
}

Point Grid::cell_center(std::size_t l) const {
    if (l >= size()) {
        throw Error(ErrorCode::IndexOutOfGrid, "cell index " + std::to_string(l) + " outside grid");
    }
    return {x0_ + hx_ * static_cast<double>(ix(l)), z0_ + hz_ * static_cast<double>(iz(l))};
}

std::size_t Grid::nearest_cell(Point p) const {
    return index(nearest_axis(p.x, x0_, hx_, nx_), nearest_axis(p.z, z0_, hz_, nz_));
}

Trajectory::Trajectory(Grid grid, double dt, std::vector<Snapshot> snapshots)
    : grid_(grid), dt_(dt), snapshots_(std::move(snapshots)) {
    if (snapshots_.empty()) throw Error(ErrorCode::InvalidArgument, "trajectory has no snapshots");
    if (!(dt_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "trajectory dt must be positive");
    for (std::size_t k = 0; k < snapshots_.size(); ++k) {
        const auto& s = snapshots_[k];
        if (static_cast<std::size_t>(s.values.size()) != grid_.size()) {
            throw Error(ErrorCode::ShapeMismatch, "snapshot " + std::to_string(k) + " length does not match grid");
        }
        if (!s.values.allFinite()) {
            throw Error(ErrorCode::InvalidArgument, "snapshot " + std::to_string(k) + " has non-finite values");
        }
        const double expected = static_cast<double>(k) * dt_;
        if (std::abs(s.time - expected) > 1e-9 * dt_ * std::max<double>(1.0, static_cast<double>(k))) {
            throw Error(ErrorCode::InvalidArgument, "snapshot times must be k * dt");
        }
    }
}

std::optional<std::size_t> Trajectory::find_time(double t) const {
    const double k = std::nearbyint(t / dt_);
    if (k < 0.0 || k >= static_cast<double>(snapshots_.size())) return std::nullopt;
    const auto idx = static_cast<std::size_t>(k);
    if (std::abs(snapshots_[idx].time - t) > 1e-9 * dt_ * std::max(1.0, k)) return std::nullopt;
    return idx;
}

Eigen::MatrixXd Trajectory::matrix() const {
    Eigen::MatrixXd s(static_cast<Eigen::Index>(grid_.size()), static_cast<Eigen::Index>(snapshots_.size()));
    for (std::size_t k = 0; k < snapshots_.size(); ++k) s.col(static_cast<Eigen::Index>(k)) = snapshots_[k].values;
    return s;
}

DiscreteMeasure::DiscreteMeasure(std::vector<std::uint32_t> support, std::vector<double> weights, double mass)
    : support_(std::move(support)), weights_(std::move(weights)), mass_(mass) {
    if (support_.size() != weights_.size()) {
        throw Error(ErrorCode::ShapeMismatch, "support and weights differ in length");
    }
    if (support_.empty()) throw Error(ErrorCode::InvalidArgument, "measure has empty support");
    if (!std::is_sorted(support_.begin(), support_.end()) ||
        std::adjacent_find(support_.begin(), support_.end()) != support_.end()) {
        throw Error(ErrorCode::InvalidArgument, "measure support must be strictly increasing");
    }
    double total = 0.0;
    for (double w : weights_) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw Error(ErrorCode::InvalidArgument, "measure weights must be finite and positive");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw Error(ErrorCode::InvalidArgument, "measure weights must sum to one");
    }
    if (!(mass_ >= 0.0) || !std::isfinite(mass_)) {
        throw Error(ErrorCode::InvalidArgument, "measure mass must be finite and nonnegative");
    }
}

double DiscreteMeasure::weight_at(std::uint32_t l) const {
    const auto it = std::lower_bound(support_.begin(), support_.end(), l);
    if (it == support_.end() || *it != l) return 0.0;
    return weights_[static_cast<std::size_t>(it - support_.begin())];
}

std::vector<Point> DiscreteMeasure::points(const Grid& grid) const {
    std::vector<Point> pts;
    pts.reserve(support_.size());
    for (auto l : support_) pts.push_back(grid.cell_center(l));
    return pts;
}

std::optional<DiscreteMeasure> DiscreteMeasure::from_density(std::span<const double> density) {
    double mass = 0.0;
    for (double v : density) mass += v;
    if (!(mass > 0.0)) return std::nullopt;
    std::vector<std::uint32_t> support;
    std::vector<double> weights;
    for (std::size_t l = 0; l < density.size(); ++l) {
        if (density[l] > 0.0) {
            const double w = density[l] / mass;
            if (w > 0.0) {
                support.push_back(static_cast<std::uint32_t>(l));
                weights.push_back(w);
            }
        }
    }
    return DiscreteMeasure(std::move(support), std::move(weights), mass);
}

SignedDecomposition field_to_measures(const Snapshot& s, SignStrategy strategy) {
    const auto n = static_cast<std::size_t>(s.values.size());
    if (!s.values.allFinite()) throw Error(ErrorCode::InvalidArgument, "field has non-finite values");
    if (s.values.lpNorm<1>() == 0.0) throw Error(ErrorCode::AllZeroField, "field is identically zero");

    std::vector<double> pos(n, 0.0);
    std::vector<double> neg(n, 0.0);
    for (std::size_t l = 0; l < n; ++l) {
        const double v = s.values[static_cast<Eigen::Index>(l)];
        if (v > 0.0) {
            pos[l] = v;
        } else if (v < 0.0) {
            if (strategy == SignStrategy::Nonnegative) {
                throw Error(ErrorCode::NegativeField, "negative value in field under nonnegative strategy");
            }
            neg[l] = -v;
        }
    }
    return {DiscreteMeasure::from_density(pos), DiscreteMeasure::from_density(neg)};
}

Snapshot measures_to_field(const SignedDecomposition& d, const Grid& g, double time) {
    Snapshot out{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.size())), time};
    auto add = [&](const DiscreteMeasure& m, double sign) {
        for (std::size_t a = 0; a < m.size(); ++a) {
            const auto l = m.support()[a];
            if (l >= g.size()) {
                throw Error(ErrorCode::IndexOutOfGrid, "support index " + std::to_string(l) + " outside grid");
            }
            out.values[l] += sign * m.mass() * m.weights()[a];
        }
    };
    if (d.positive) add(*d.positive, 1.0);
    if (d.negative) add(*d.negative, -1.0);
    return out;
}

}  // namespace otrom::measure
