#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "otrom/measure.hpp"
#include "otrom/transport.hpp"

namespace otrom::interp {

/// One sign component of a checkpoint interval. mass_left / mass_right are
/// the L1 masses of that component at the two checkpoints; a component that
/// exists on one side only is transported against a uniform measure on the
/// other checkpoint's nonzero cells and fades out through its zero mass.
struct SignPart {
    std::optional<transport::TransportPlan> plan;
    std::vector<std::uint32_t> src_support;
    std::vector<std::uint32_t> dst_support;
    double mass_left = 0.0;
    double mass_right = 0.0;

    bool operator==(const SignPart&) const = default;
};

struct IntervalModel {
    SignPart positive;
    SignPart negative;

    bool operator==(const IntervalModel&) const = default;
};

struct InterpolationOptions {
    transport::SinkhornOptions sinkhorn;  // epsilon is overwritten per component
    std::optional<double> epsilon;        // absolute regularization, cost units
    double epsilon_relative = 1e-2;       // used when epsilon is unset: x mean cost
    measure::SignStrategy sign_strategy = measure::SignStrategy::Split;
    unsigned threads = 1;
};

class InterpolationModel {
public:
    InterpolationModel(measure::Grid grid, std::vector<measure::Snapshot> checkpoints,
                       std::vector<IntervalModel> intervals);

    /// Solves one entropic OT problem per interval and sign component.
    static InterpolationModel build(const measure::Grid& grid, std::vector<measure::Snapshot> checkpoints,
                                    const InterpolationOptions& opts);

    const measure::Grid& grid() const noexcept { return grid_; }
    const std::vector<measure::Snapshot>& checkpoints() const noexcept { return checkpoints_; }
    const std::vector<IntervalModel>& intervals() const noexcept { return intervals_; }
    std::size_t n_checkpoints() const noexcept { return checkpoints_.size(); }
    double max_marginal_violation() const;

private:
    measure::Grid grid_;
    std::vector<measure::Snapshot> checkpoints_;
    std::vector<IntervalModel> intervals_;
};

struct Atom {
    measure::Point position;
    double weight = 0.0;
};

/// Unprojected McCann atoms (1 - alpha) x_i + alpha y_j carrying plan mass.
std::vector<Atom> displacement_atoms(const transport::TransportPlan& plan, std::span<const measure::Point> src,
                                     std::span<const measure::Point> dst, double alpha);

/// Displacement interpolant projected to nearest cells, coincident atoms
/// merged, renormalized by the plan's total mass.
measure::DiscreteMeasure displacement_interpolate(const transport::TransportPlan& plan,
                                                  std::span<const measure::Point> src,
                                                  std::span<const measure::Point> dst, double alpha,
                                                  const measure::Grid& grid);

/// Synthetic field on interval i at local parameter alpha.
measure::Snapshot synth_snapshot(const InterpolationModel& model, std::size_t interval, double alpha);

struct DictionaryEntry {
    std::size_t interval = 0;
    std::size_t step = 0;  // j in alpha_j = j / (n_synth + 1)
    double alpha_local = 0.0;
    double alpha_global = 0.0;
    bool checkpoint = false;
};

struct SyntheticMatrix {
    Eigen::MatrixXd columns;               // N_h x N_tot
    std::vector<DictionaryEntry> entries;  // one label per column, lexicographic (interval, step)
};

/// [u^{k_0} | synth(0, a_1) .. synth(0, a_n) | u^{k_1} | ... | u^{k_last}]
SyntheticMatrix generate_synthetic_matrix(const InterpolationModel& model, std::size_t n_synth);

}  // namespace otrom::interp
