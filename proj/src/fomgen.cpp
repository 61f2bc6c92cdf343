#include "otrom/fomgen.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "otrom/error.hpp"

namespace otrom::fomgen {

namespace {

double blob_value(const Blob& b, double sigma2, double amp, double x, double z) {
    const double dx = x - b.center_x;
    const double dz = z - b.center_z;
    return amp * std::exp(-(dx * dx + dz * dz) / (2.0 * sigma2));
}

double max_speed(const FomConfig& cfg) {
    if (cfg.velocity.kind == VelocityKind::Constant) return std::hypot(cfg.velocity.vx, cfg.velocity.vz);
    const double xa = cfg.x0, xb = cfg.x0 + cfg.hx * static_cast<double>(cfg.nx - 1);
    const double za = cfg.z0, zb = cfg.z0 + cfg.hz * static_cast<double>(cfg.nz - 1);
    const double rx = std::max(std::abs(xa - cfg.velocity.center_x), std::abs(xb - cfg.velocity.center_x));
    const double rz = std::max(std::abs(za - cfg.velocity.center_z), std::abs(zb - cfg.velocity.center_z));
    return std::abs(cfg.velocity.omega) * std::hypot(rx, rz);
}

}  // namespace

measure::Point Velocity::at(double x, double z) const {
    if (kind == VelocityKind::Constant) return {vx, vz};
    return {-omega * (z - center_z), omega * (x - center_x)};
}

measure::Grid FomConfig::grid() const { return measure::Grid(nx, nz, hx, hz, x0, z0); }

std::size_t FomConfig::n_steps() const { return static_cast<std::size_t>(std::llround(t_final / dt)); }

void FomConfig::validate() const {
    (void)grid();
    if (!(dt > 0.0) || !(t_final > 0.0) || !std::isfinite(dt) || !std::isfinite(t_final)) {
        throw Error(ErrorCode::InvalidArgument, "dt and t_final must be positive");
    }
    if (!(nu >= 0.0)) throw Error(ErrorCode::InvalidArgument, "diffusivity must be nonnegative");
    if (!(blob.sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "blob width must be positive");
    if (save_stride == 0) throw Error(ErrorCode::InvalidArgument, "save stride must be at least 1");
    const std::size_t n = n_steps();
    if (n == 0 || std::abs(static_cast<double>(n) * dt - t_final) > 1e-9 * t_final) {
        throw Error(ErrorCode::InvalidArgument, "t_final must be a whole number of steps");
    }
    if (n % save_stride != 0) throw Error(ErrorCode::InvalidArgument, "step count must be a multiple of save stride");
    const double h = std::min(hx, hz);
    const double cfl = max_speed(*this) * dt / h;
    if (cfl > 0.5) throw Error(ErrorCode::CflViolation, "advective CFL " + std::to_string(cfl) + " exceeds 0.5");
    const double dif = nu * dt / (h * h);
    if (dif > 0.25) throw Error(ErrorCode::CflViolation, "diffusive number " + std::to_string(dif) + " exceeds 0.25");
}

measure::Trajectory simulate(const FomConfig& cfg) {
    cfg.validate();
    const auto g = cfg.grid();
    const std::size_t nx = cfg.nx, nz = cfg.nz;
    const bool periodic = cfg.boundary == Boundary::Periodic;

    // Face-normal velocities: fx[iz][ix] on the face between ix-1 and ix (ix in [0, nx]).
    std::vector<double> ux((nx + 1) * nz), uz(nx * (nz + 1));
    for (std::size_t iz = 0; iz < nz; ++iz)
        for (std::size_t ix = 0; ix <= nx; ++ix) {
            const double x = cfg.x0 + cfg.hx * (static_cast<double>(ix) - 0.5);
            const double z = cfg.z0 + cfg.hz * static_cast<double>(iz);
            ux[iz * (nx + 1) + ix] = cfg.velocity.at(x, z).x;
        }
    for (std::size_t iz = 0; iz <= nz; ++iz)
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const double x = cfg.x0 + cfg.hx * static_cast<double>(ix);
            const double z = cfg.z0 + cfg.hz * (static_cast<double>(iz) - 0.5);
            uz[iz * nx + ix] = cfg.velocity.at(x, z).z;
        }
    if (periodic) {
        // Periodic faces are shared between the two edges.
        for (std::size_t iz = 0; iz < nz; ++iz) ux[iz * (nx + 1) + nx] = ux[iz * (nx + 1)];
        for (std::size_t ix = 0; ix < nx; ++ix) uz[nz * nx + ix] = uz[ix];
    }

    Eigen::VectorXd q(static_cast<Eigen::Index>(g.size()));
    for (std::size_t l = 0; l < g.size(); ++l) {
        const auto p = g.cell_center(l);
        q[static_cast<Eigen::Index>(l)] = blob_value(cfg.blob, cfg.blob.sigma * cfg.blob.sigma, cfg.blob.amplitude, p.x, p.z);
    }

    const double dt_save = cfg.dt * static_cast<double>(cfg.save_stride);
    std::vector<measure::Snapshot> snaps{{q, 0.0}};
    std::vector<double> fx((nx + 1) * nz), fz(nx * (nz + 1));
    auto at = [&](std::size_t ix, std::size_t iz) { return q[static_cast<Eigen::Index>(iz * nx + ix)]; };
    const double cx = cfg.dt / cfg.hx, cz = cfg.dt / cfg.hz;
    const double dx = cfg.nu * cfg.dt / (cfg.hx * cfg.hx), dz = cfg.nu * cfg.dt / (cfg.hz * cfg.hz);

    const std::size_t n = cfg.n_steps();
    for (std::size_t step = 1; step <= n; ++step) {
        for (std::size_t iz = 0; iz < nz; ++iz)
            for (std::size_t ix = 0; ix <= nx; ++ix) {
                const double u = ux[iz * (nx + 1) + ix];
                double left, right;
                if (periodic) {
                    left = at((ix + nx - 1) % nx, iz);
                    right = at(ix % nx, iz);
                } else {
                    left = ix == 0 ? 0.0 : at(ix - 1, iz);
                    right = ix == nx ? 0.0 : at(ix, iz);
                }
                double f = u > 0.0 ? u * left : u * right;
                if (!periodic && ((ix == 0 && u > 0.0) || (ix == nx && u < 0.0))) f = 0.0;
                double diff = 0.0;
                if (periodic || (ix > 0 && ix < nx)) diff = dx * (left - right) / cx;
                fx[iz * (nx + 1) + ix] = f + diff;
            }
        for (std::size_t iz = 0; iz <= nz; ++iz)
            for (std::size_t ix = 0; ix < nx; ++ix) {
                const double u = uz[iz * nx + ix];
                double low, high;
                if (periodic) {
                    low = at(ix, (iz + nz - 1) % nz);
                    high = at(ix, iz % nz);
                } else {
                    low = iz == 0 ? 0.0 : at(ix, iz - 1);
                    high = iz == nz ? 0.0 : at(ix, iz);
                }
                double f = u > 0.0 ? u * low : u * high;
                if (!periodic && ((iz == 0 && u > 0.0) || (iz == nz && u < 0.0))) f = 0.0;
                double diff = 0.0;
                if (periodic || (iz > 0 && iz < nz)) diff = dz * (low - high) / cz;
                fz[iz * nx + ix] = f + diff;
            }
        for (std::size_t iz = 0; iz < nz; ++iz)
            for (std::size_t ix = 0; ix < nx; ++ix) {
                const double div = cx * (fx[iz * (nx + 1) + ix + 1] - fx[iz * (nx + 1) + ix]) +
                                   cz * (fz[(iz + 1) * nx + ix] - fz[iz * nx + ix]);
                q[static_cast<Eigen::Index>(iz * nx + ix)] -= div;
            }
        if (step % cfg.save_stride == 0) {
            snaps.push_back({q, static_cast<double>(step / cfg.save_stride) * dt_save});
        }
    }
    return measure::Trajectory(g, dt_save, std::move(snaps));
}

measure::Trajectory analytic_gaussian(const FomConfig& cfg) {
    if (cfg.velocity.kind != VelocityKind::Constant) {
        throw Error(ErrorCode::UnsupportedSpec, "analytic trajectories need a constant velocity");
    }
    cfg.validate();
    const auto g = cfg.grid();
    const double dt_save = cfg.dt * static_cast<double>(cfg.save_stride);
    const std::size_t n_save = cfg.n_steps() / cfg.save_stride;
    const double s2 = cfg.blob.sigma * cfg.blob.sigma;

    std::vector<measure::Snapshot> snaps;
    for (std::size_t k = 0; k <= n_save; ++k) {
        const double t = static_cast<double>(k) * dt_save;
        const double sigma2 = s2 + 2.0 * cfg.nu * t;
        const double amp = cfg.blob.amplitude * s2 / sigma2;
        Blob moved = cfg.blob;
        moved.center_x += cfg.velocity.vx * t;
        moved.center_z += cfg.velocity.vz * t;
        Eigen::VectorXd v(static_cast<Eigen::Index>(g.size()));
        for (std::size_t l = 0; l < g.size(); ++l) {
            const auto p = g.cell_center(l);
            v[static_cast<Eigen::Index>(l)] = blob_value(moved, sigma2, amp, p.x, p.z);
        }
        snaps.push_back({std::move(v), t});
    }
    return measure::Trajectory(g, dt_save, std::move(snaps));
}

}  // namespace otrom::fomgen
