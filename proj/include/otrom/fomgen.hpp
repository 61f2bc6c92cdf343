#pragma once

#include <cstddef>

#include "otrom/measure.hpp"

namespace otrom::fomgen {

enum class VelocityKind { Constant, Rotation };
enum class Boundary { Periodic, Outflow };

struct Velocity {
    VelocityKind kind = VelocityKind::Constant;
    double vx = 0.0;  // constant case
    double vz = 0.0;
    double omega = 0.0;  // rotation: v = omega * (-(z - cz), x - cx)
    double center_x = 0.0;
    double center_z = 0.0;

    measure::Point at(double x, double z) const;
};

struct Blob {
    double center_x = 0.0;
    double center_z = 0.0;
    double sigma = 1.0;
    double amplitude = 1.0;
};

struct FomConfig {
    std::size_t nx = 32;
    std::size_t nz = 32;
    double hx = 1.0;
    double hz = 1.0;
    double x0 = 0.0;  // center of cell (0, 0)
    double z0 = 0.0;
    Velocity velocity;
    double nu = 0.0;  // diffusivity
    Blob blob;
    double dt = 0.1;
    double t_final = 1.0;
    std::size_t save_stride = 1;
    Boundary boundary = Boundary::Periodic;

    measure::Grid grid() const;
    std::size_t n_steps() const;
    /// Throws CflViolation, InvalidArgument.
    void validate() const;
};

/// Explicit flux-form upwind advection with central diffusion; snapshots
/// every save_stride steps, spaced save_stride * dt apart.
measure::Trajectory simulate(const FomConfig& cfg);

/// Exact translating, spreading Gaussian sampled like simulate(). Constant
/// velocity only (UnsupportedSpec otherwise); no periodic images.
measure::Trajectory analytic_gaussian(const FomConfig& cfg);

}  // namespace otrom::fomgen
