#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "otrom/gpr.hpp"
#include "otrom/interpolation.hpp"
#include "otrom/measure.hpp"
#include "otrom/pod.hpp"

namespace otrom::rom {

struct CheckpointSet {
    std::vector<std::size_t> indices;
    std::vector<measure::Snapshot> snapshots;

    std::size_t size() const noexcept { return indices.size(); }
};

/// Equispaced indices round(i (N_T - 1) / (N_c - 1)), halves rounded away from zero.
CheckpointSet select_checkpoints(const measure::Trajectory& traj, std::size_t n_checkpoints);

/// floor((N_tot - N_c) / (N_c - 1))
std::size_t n_synth_for_total(std::size_t n_total, std::size_t n_checkpoints);

struct MappedTime {
    std::size_t interval = 0;
    double alpha = 0.0;
};

/// Uniform progression over N_c equispaced checkpoints spanning [0, t_f].
MappedTime linear_map_time(double t, double t_final, std::size_t n_checkpoints);

/// Uniform progression between the given (increasing) checkpoint times.
MappedTime linear_map_time(double t, std::span<const double> checkpoint_times);

enum class MappingKind { Linear, MinL2 };
enum class RegressionKind { Gpr, PiecewiseLinear };

std::string to_string(MappingKind k);
std::string to_string(RegressionKind k);

/// Per-snapshot dictionary argmin over the columns of a synthetic matrix.
struct DictionaryMatch {
    std::vector<std::size_t> column;   // chosen column per snapshot
    std::vector<double> alpha_global;  // its alpha_global label
    std::vector<double> residual;      // |u_k - column|_2
};

/// Exact ties go to the earliest column, i.e. the smallest (interval, step).
DictionaryMatch dictionary_argmin(const interp::SyntheticMatrix& dict, const Eigen::MatrixXd& snapshots);

/// |u_k - d_c|_2 for every snapshot k (rows) and dictionary column c (cols).
Eigen::MatrixXd dictionary_residuals(const interp::SyntheticMatrix& dict, const Eigen::MatrixXd& snapshots);

class TimeAlphaMapping {
public:
    static TimeAlphaMapping linear(std::vector<double> checkpoint_times);

    /// Regresses alpha_global on time. The regression fits the deviation from
    /// the linear mapping and is pinned to zero at checkpoint times, so every
    /// checkpoint maps to (i, 0) and the last one to (N_c - 2, 1).
    static TimeAlphaMapping minl2(std::vector<double> checkpoint_times, std::vector<double> train_times,
                                  std::vector<double> alpha_global, RegressionKind regression,
                                  const gpr::GprOptions& gpr_opts = {});

    /// Rebuilds a MinL2 mapping with known GPR hyperparameters (no refit).
    static TimeAlphaMapping minl2_with(std::vector<double> checkpoint_times, std::vector<double> train_times,
                                       std::vector<double> alpha_global, RegressionKind regression,
                                       std::optional<gpr::Hyperparameters> hyper);

    MappingKind kind() const noexcept { return kind_; }
    RegressionKind regression() const noexcept { return regression_; }
    const std::vector<double>& checkpoint_times() const noexcept { return checkpoint_times_; }
    const std::vector<double>& train_times() const noexcept { return train_times_; }
    const std::vector<double>& alpha_samples() const noexcept { return alpha_samples_; }
    std::optional<gpr::Hyperparameters> gpr_hyperparameters() const;
    std::size_t n_checkpoints() const noexcept { return checkpoint_times_.size(); }
    double t_final() const noexcept { return checkpoint_times_.back(); }

    /// Regressed alpha_global, clamped to [0, 1]. Throws TimeOutOfDomain.
    double alpha_global(double t) const;

    /// (interval, alpha_local). Throws TimeOutOfDomain.
    MappedTime map(double t) const;

private:
    TimeAlphaMapping() = default;
    double deviation(double t) const;

    MappingKind kind_ = MappingKind::Linear;
    RegressionKind regression_ = RegressionKind::Gpr;
    std::vector<double> checkpoint_times_;
    std::vector<double> train_times_;
    std::vector<double> alpha_samples_;
    std::vector<double> deviation_samples_;
    std::optional<gpr::GprModel> gpr_;
    std::vector<double> bridge_;  // regressed deviation at checkpoint times
};

MappedTime map_time(const TimeAlphaMapping& m, double t);

/// POD-R of training residuals: one GP per retained coefficient, inputs t / t_f,
/// standardized targets.
class ResidualCorrector {
public:
    ResidualCorrector(pod::PODBasis basis, std::vector<gpr::GprModel> regressors, std::vector<double> offsets,
                      std::vector<double> scales, double t_final);

    static ResidualCorrector fit(const Eigen::MatrixXd& residuals, std::span<const double> times, double t_final,
                                 double pod_threshold, const gpr::GprOptions& gpr_opts, unsigned threads = 1);

    const pod::PODBasis& basis() const noexcept { return basis_; }
    const std::vector<gpr::GprModel>& regressors() const noexcept { return regressors_; }
    const std::vector<double>& offsets() const noexcept { return offsets_; }
    const std::vector<double>& scales() const noexcept { return scales_; }
    double t_final() const noexcept { return t_final_; }

    Eigen::VectorXd coefficients(double t) const;
    Eigen::VectorXd correction(double t) const;

private:
    pod::PODBasis basis_;
    std::vector<gpr::GprModel> regressors_;
    std::vector<double> offsets_;
    std::vector<double> scales_;
    double t_final_;
};

struct RomMetadata {
    std::optional<double> epsilon;
    double epsilon_relative = 1e-2;
    double marginal_tol = 1e-9;
    std::size_t n_synth = 0;
    double pod_threshold = 0.9999;
    measure::SignStrategy sign_strategy = measure::SignStrategy::Split;
    double dt = 0.0;
    std::vector<std::size_t> checkpoint_indices;
};

class RomModel {
public:
    RomModel(interp::InterpolationModel interp, TimeAlphaMapping mapping, std::optional<ResidualCorrector> corrector,
             RomMetadata meta);

    const measure::Grid& grid() const noexcept { return interp_.grid(); }
    const interp::InterpolationModel& interpolation() const noexcept { return interp_; }
    const TimeAlphaMapping& mapping() const noexcept { return mapping_; }
    const std::optional<ResidualCorrector>& corrector() const noexcept { return corrector_; }
    const RomMetadata& metadata() const noexcept { return meta_; }
    double t_final() const noexcept { return mapping_.t_final(); }

private:
    interp::InterpolationModel interp_;
    TimeAlphaMapping mapping_;
    std::optional<ResidualCorrector> corrector_;
    RomMetadata meta_;
};

struct TrainOptions {
    std::size_t n_checkpoints = 2;
    std::size_t n_synth = 0;  // dictionary density for the MinL2 mapping
    interp::InterpolationOptions interp;
    MappingKind mapping = MappingKind::Linear;
    RegressionKind regression = RegressionKind::Gpr;
    bool correction = false;
    double pod_threshold = 0.9999;
    gpr::GprOptions gpr;
};

/// Wall-clock seconds per training stage.
struct TrainTimings {
    double checkpoints = 0.0;
    double transport = 0.0;
    double mapping = 0.0;
    double correction = 0.0;

    double total() const noexcept { return checkpoints + transport + mapping + correction; }
};

RomModel train(const measure::Trajectory& traj, const TrainOptions& opts, TrainTimings* timings = nullptr);

/// Synthetic snapshot at t from the stored plans; nothing is re-solved.
measure::Snapshot infer(const RomModel& rom, double t);

/// infer(t) + U_r G(t). Throws NoCorrector.
measure::Snapshot infer_corrected(const RomModel& rom, double t);

enum class ErrorKind { Disc, Interp, Gen, Proj };

std::string to_string(ErrorKind k);

struct ErrorReport {
    ErrorKind kind = ErrorKind::Interp;
    std::vector<double> times;
    std::vector<double> errors;
    double mean = 0.0;
};

/// |ref - cand|_2 / |ref|_2. Throws ZeroReferenceNorm.
double relative_l2(const Eigen::VectorXd& reference, const Eigen::VectorXd& candidate);

ErrorReport make_report(ErrorKind kind, std::vector<double> times, std::vector<double> errors);

/// Relative L2 error of candidate(t) against the reference snapshot stored at t.
ErrorReport error_metrics(ErrorKind kind, const measure::Trajectory& reference,
                          const std::function<Eigen::VectorXd(double)>& candidate, std::span<const double> times);

}  // namespace otrom::rom
