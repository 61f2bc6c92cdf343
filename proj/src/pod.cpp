#include "otrom/pod.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SVD>

#include "otrom/error.hpp"

namespace otrom::pod {

double PODBasis::energy(std::size_t k) const {
    const auto n = static_cast<std::size_t>(singular_values.size());
    if (n == 0) return k == 0 ? 0.0 : 1.0;
    k = std::min(k, n);
    const double total = singular_values.squaredNorm();
    if (k == n) return 1.0;
    return singular_values.head(static_cast<Eigen::Index>(k)).squaredNorm() / total;
}

PODBasis compute_pod(const Eigen::MatrixXd& s, Selector selector) {
    if (s.rows() == 0 || s.cols() == 0) throw Error(ErrorCode::EmptyMatrix, "snapshot matrix is empty");
    if (!s.allFinite()) throw Error(ErrorCode::InvalidArgument, "snapshot matrix has non-finite entries");

    PODBasis b;
    if (const auto* t = std::get_if<EnergyThreshold>(&selector)) {
        if (!(t->value > 0.0 && t->value <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "energy threshold must lie in (0, 1]");
        }
        b.energy_threshold = t->value;
    } else if (std::get<FixedRank>(selector).value == 0) {
        throw Error(ErrorCode::InvalidArgument, "POD rank must be at least 1");
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(s, Eigen::ComputeThinU);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double tol = static_cast<double>(std::max(s.rows(), s.cols())) * std::numeric_limits<double>::epsilon() *
                       (sv.size() > 0 ? sv[0] : 0.0);
    Eigen::Index numerical_rank = 0;
    while (numerical_rank < sv.size() && sv[numerical_rank] > tol) ++numerical_rank;
    b.singular_values = sv.head(numerical_rank);

    std::size_t keep = 0;
    if (numerical_rank > 0) {
        if (b.energy_threshold > 0.0) {
            const double total = b.singular_values.squaredNorm();
            double acc = 0.0;
            while (keep < static_cast<std::size_t>(numerical_rank)) {
                acc += b.singular_values[static_cast<Eigen::Index>(keep)] *
                       b.singular_values[static_cast<Eigen::Index>(keep)];
                ++keep;
                if (keep == static_cast<std::size_t>(numerical_rank) || acc / total >= b.energy_threshold) break;
            }
        } else {
            keep = std::min<std::size_t>(std::get<FixedRank>(selector).value,
                                         static_cast<std::size_t>(numerical_rank));
        }
    }
    b.modes = svd.matrixU().leftCols(static_cast<Eigen::Index>(keep));
    return b;
}

Eigen::VectorXd project(const PODBasis& b, const Eigen::VectorXd& u) {
    if (static_cast<std::size_t>(u.size()) != b.dimension()) {
        throw Error(ErrorCode::ShapeMismatch, "snapshot length " + std::to_string(u.size()) +
                                                  " does not match basis dimension " + std::to_string(b.dimension()));
    }
    return b.modes.transpose() * u;
}

Eigen::VectorXd reconstruct(const PODBasis& b, const Eigen::VectorXd& coeffs) {
    if (static_cast<std::size_t>(coeffs.size()) != b.rank()) {
        throw Error(ErrorCode::ShapeMismatch, "coefficient count does not match basis rank");
    }
    return b.modes * coeffs;
}

double projection_error(const Eigen::VectorXd& u, const PODBasis& b) {
    const double norm = u.norm();
    if (!(norm > 0.0)) throw Error(ErrorCode::ZeroNorm, "projection error of a zero snapshot");
    return (u - reconstruct(b, project(b, u))).norm() / norm;
}

}  // namespace otrom::pod
