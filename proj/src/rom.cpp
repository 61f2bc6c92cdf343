#include "otrom/rom.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "otrom/error.hpp"
#include "otrom/parallel.hpp"

namespace otrom::rom {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_domain(double t, double t0, double t_final) {
    const double tol = 1e-12 * std::max(1.0, std::abs(t_final));
    if (!(t >= t0 - tol && t <= t_final + tol)) {
        throw Error(ErrorCode::TimeOutOfDomain,
                    "time " + std::to_string(t) + " outside [" + std::to_string(t0) + ", " + std::to_string(t_final) + "]");
    }
}

double piecewise_linear(std::span<const double> xs, std::span<const double> ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const auto k = static_cast<std::size_t>(it - xs.begin());
    const double w = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
    return (1.0 - w) * ys[k - 1] + w * ys[k];
}

void check_checkpoint_times(const std::vector<double>& times) {
    if (times.size() < 2) throw Error(ErrorCode::InvalidCounts, "need at least two checkpoint times");
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (!(times[k] > times[k - 1])) throw Error(ErrorCode::InvalidArgument, "checkpoint times must increase");
    }
}

}  // namespace

CheckpointSet select_checkpoints(const measure::Trajectory& traj, std::size_t n_checkpoints) {
    if (n_checkpoints < 2) throw Error(ErrorCode::InvalidCounts, "need at least two checkpoints");
    const std::size_t n_t = traj.size();
    if (n_checkpoints > n_t) {
        throw Error(ErrorCode::TooFewSnapshots, std::to_string(n_checkpoints) + " checkpoints requested from " +
                                                    std::to_string(n_t) + " snapshots");
    }
    CheckpointSet cs;
    const std::size_t den = n_checkpoints - 1;
    for (std::size_t i = 0; i < n_checkpoints; ++i) {
        const std::size_t k = (2 * i * (n_t - 1) + den) / (2 * den);
        if (!cs.indices.empty() && k <= cs.indices.back()) {
            throw Error(ErrorCode::TooFewSnapshots, "checkpoint rounding produced duplicate indices");
        }
        cs.indices.push_back(k);
        cs.snapshots.push_back(traj[k]);
    }
    return cs;
}

std::size_t n_synth_for_total(std::size_t n_total, std::size_t n_checkpoints) {
    if (n_checkpoints < 2 || n_total < n_checkpoints) {
        throw Error(ErrorCode::InvalidCounts, "need N_tot >= N_c >= 2");
    }
    return (n_total - n_checkpoints) / (n_checkpoints - 1);
}

MappedTime linear_map_time(double t, double t_final, std::size_t n_checkpoints) {
    if (n_checkpoints < 2) throw Error(ErrorCode::InvalidCounts, "need at least two checkpoints");
    if (!(t_final > 0.0)) throw Error(ErrorCode::InvalidArgument, "t_final must be positive");
    check_domain(t, 0.0, t_final);
    const double dtc = t_final / static_cast<double>(n_checkpoints - 1);
    const double last = static_cast<double>(n_checkpoints - 2);
    const double fi = std::clamp(std::floor(t / dtc), 0.0, last);
    return {static_cast<std::size_t>(fi), std::clamp((t - fi * dtc) / dtc, 0.0, 1.0)};
}

MappedTime linear_map_time(double t, std::span<const double> times) {
    if (times.size() < 2) throw Error(ErrorCode::InvalidCounts, "need at least two checkpoints");
    check_domain(t, times.front(), times.back());
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t i = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
    i = std::min(i, times.size() - 2);
    return {i, std::clamp((t - times[i]) / (times[i + 1] - times[i]), 0.0, 1.0)};
}

std::string to_string(MappingKind k) { return k == MappingKind::Linear ? "linear" : "minl2"; }
std::string to_string(RegressionKind k) { return k == RegressionKind::Gpr ? "gpr" : "piecewise_linear"; }

Eigen::MatrixXd dictionary_residuals(const interp::SyntheticMatrix& dict, const Eigen::MatrixXd& snapshots) {
    if (dict.columns.cols() == 0) throw Error(ErrorCode::EmptyDictionary, "synthetic dictionary is empty");
    if (snapshots.rows() != dict.columns.rows()) {
        throw Error(ErrorCode::ShapeMismatch, "snapshot length does not match dictionary");
    }
    Eigen::MatrixXd r(snapshots.cols(), dict.columns.cols());
    for (Eigen::Index k = 0; k < snapshots.cols(); ++k)
        for (Eigen::Index c = 0; c < dict.columns.cols(); ++c) r(k, c) = (snapshots.col(k) - dict.columns.col(c)).norm();
    return r;
}

DictionaryMatch dictionary_argmin(const interp::SyntheticMatrix& dict, const Eigen::MatrixXd& snapshots) {
    const Eigen::MatrixXd r = dictionary_residuals(dict, snapshots);
    DictionaryMatch m;
    for (Eigen::Index k = 0; k < r.rows(); ++k) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < r.cols(); ++c)
            if (r(k, c) < r(k, best)) best = c;
        m.column.push_back(static_cast<std::size_t>(best));
        m.alpha_global.push_back(dict.entries[static_cast<std::size_t>(best)].alpha_global);
        m.residual.push_back(r(k, best));
    }
    return m;
}

TimeAlphaMapping TimeAlphaMapping::linear(std::vector<double> checkpoint_times) {
    check_checkpoint_times(checkpoint_times);
    TimeAlphaMapping m;
    m.kind_ = MappingKind::Linear;
    m.checkpoint_times_ = std::move(checkpoint_times);
    return m;
}

TimeAlphaMapping TimeAlphaMapping::minl2(std::vector<double> checkpoint_times, std::vector<double> train_times,
                                         std::vector<double> alpha_global, RegressionKind regression,
                                         const gpr::GprOptions& gpr_opts) {
    auto m = minl2_with(std::move(checkpoint_times), std::move(train_times), std::move(alpha_global),
                        RegressionKind::PiecewiseLinear, std::nullopt);
    if (regression == RegressionKind::Gpr) {
        std::vector<double> x(m.train_times_.size());
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = m.train_times_[k] / m.t_final();
        const auto fitted = gpr::gpr_fit(x, m.deviation_samples_, gpr_opts);
        return minl2_with(m.checkpoint_times_, m.train_times_, m.alpha_samples_, RegressionKind::Gpr,
                          fitted.hyperparameters());
    }
    return m;
}

TimeAlphaMapping TimeAlphaMapping::minl2_with(std::vector<double> checkpoint_times, std::vector<double> train_times,
                                              std::vector<double> alpha_global, RegressionKind regression,
                                              std::optional<gpr::Hyperparameters> hyper) {
    check_checkpoint_times(checkpoint_times);
    if (train_times.empty()) throw Error(ErrorCode::EmptyDictionary, "no training samples for the mapping");
    if (train_times.size() != alpha_global.size()) {
        throw Error(ErrorCode::ShapeMismatch, "training times and alpha samples differ in length");
    }
    for (std::size_t k = 1; k < train_times.size(); ++k)
        if (!(train_times[k] > train_times[k - 1])) throw Error(ErrorCode::InvalidArgument, "training times must increase");

    TimeAlphaMapping m = linear(std::move(checkpoint_times));
    m.kind_ = MappingKind::MinL2;
    m.regression_ = regression;
    m.train_times_ = std::move(train_times);
    m.alpha_samples_ = std::move(alpha_global);
    for (std::size_t k = 0; k < m.train_times_.size(); ++k) {
        const double t = m.train_times_[k];
        check_domain(t, m.checkpoint_times_.front(), m.t_final());
        m.deviation_samples_.push_back(m.alpha_samples_[k] - TimeAlphaMapping::linear(m.checkpoint_times_).alpha_global(t));
    }
    if (regression == RegressionKind::Gpr) {
        if (!hyper) throw Error(ErrorCode::InvalidArgument, "GPR mapping needs hyperparameters");
        std::vector<double> x(m.train_times_.size());
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = m.train_times_[k] / m.t_final();
        m.gpr_.emplace(std::move(x), m.deviation_samples_, *hyper);
    }
    m.bridge_.clear();
    for (double tc : m.checkpoint_times_) m.bridge_.push_back(m.deviation(tc));
    return m;
}

std::optional<gpr::Hyperparameters> TimeAlphaMapping::gpr_hyperparameters() const {
    if (!gpr_) return std::nullopt;
    return gpr_->hyperparameters();
}

double TimeAlphaMapping::deviation(double t) const {
    if (gpr_) return gpr_->predict_mean(t / t_final());
    return piecewise_linear(train_times_, deviation_samples_, t);
}

double TimeAlphaMapping::alpha_global(double t) const {
    const auto lin = linear_map_time(t, checkpoint_times_);
    const double denom = static_cast<double>(checkpoint_times_.size() - 1);
    const double base = (static_cast<double>(lin.interval) + lin.alpha) / denom;
    if (kind_ == MappingKind::Linear) return base;
    const double pinned = (1.0 - lin.alpha) * bridge_[lin.interval] + lin.alpha * bridge_[lin.interval + 1];
    return std::clamp(base + deviation(t) - pinned, 0.0, 1.0);
}

MappedTime TimeAlphaMapping::map(double t) const {
    if (kind_ == MappingKind::Linear) return linear_map_time(t, checkpoint_times_);
    const double last = static_cast<double>(checkpoint_times_.size() - 2);
    double v = alpha_global(t) * static_cast<double>(checkpoint_times_.size() - 1);
    if (std::abs(v - std::nearbyint(v)) <= 1e-9) v = std::nearbyint(v);
    const double i = std::min(std::floor(v), last);
    return {static_cast<std::size_t>(i), std::clamp(v - i, 0.0, 1.0)};
}

MappedTime map_time(const TimeAlphaMapping& m, double t) { return m.map(t); }

ResidualCorrector::ResidualCorrector(pod::PODBasis basis, std::vector<gpr::GprModel> regressors,
                                     std::vector<double> offsets, std::vector<double> scales, double t_final)
    : basis_(std::move(basis)),
      regressors_(std::move(regressors)),
      offsets_(std::move(offsets)),
      scales_(std::move(scales)),
      t_final_(t_final) {
    if (regressors_.size() != basis_.rank() || offsets_.size() != basis_.rank() || scales_.size() != basis_.rank()) {
        throw Error(ErrorCode::ShapeMismatch, "corrector needs one regressor per residual mode");
    }
    if (!(t_final_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "corrector t_final must be positive");
}

ResidualCorrector ResidualCorrector::fit(const Eigen::MatrixXd& residuals, std::span<const double> times,
                                         double t_final, double pod_threshold, const gpr::GprOptions& gpr_opts,
                                         unsigned threads) {
    if (static_cast<std::size_t>(residuals.cols()) != times.size()) {
        throw Error(ErrorCode::ShapeMismatch, "one residual column per training time expected");
    }
    auto basis = pod::compute_pod(residuals, pod::EnergyThreshold{pod_threshold});
    const Eigen::MatrixXd coeffs = basis.modes.transpose() * residuals;
    const std::size_t n_r = basis.rank();

    std::vector<double> x(times.size());
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = times[k] / t_final;

    std::vector<double> offsets(n_r), scales(n_r);
    std::vector<std::optional<gpr::GprModel>> fitted(n_r);
    parallel_for(n_r, threads, [&](std::size_t r) {
        const Eigen::VectorXd c = coeffs.row(static_cast<Eigen::Index>(r)).transpose();
        const double mean = c.mean();
        const double sd = std::sqrt((c.array() - mean).square().mean());
        offsets[r] = mean;
        scales[r] = sd > 0.0 ? sd : 1.0;
        std::vector<double> y(static_cast<std::size_t>(c.size()));
        for (std::size_t k = 0; k < y.size(); ++k) y[k] = (c[static_cast<Eigen::Index>(k)] - mean) / scales[r];
        fitted[r].emplace(gpr::gpr_fit(x, std::move(y), gpr_opts));
    });
    std::vector<gpr::GprModel> regressors;
    regressors.reserve(n_r);
    for (auto& f : fitted) regressors.push_back(std::move(*f));
    return ResidualCorrector(std::move(basis), std::move(regressors), std::move(offsets), std::move(scales), t_final);
}

Eigen::VectorXd ResidualCorrector::coefficients(double t) const {
    Eigen::VectorXd c(static_cast<Eigen::Index>(regressors_.size()));
    for (std::size_t r = 0; r < regressors_.size(); ++r)
        c[static_cast<Eigen::Index>(r)] = offsets_[r] + scales_[r] * regressors_[r].predict_mean(t / t_final_);
    return c;
}

Eigen::VectorXd ResidualCorrector::correction(double t) const { return basis_.modes * coefficients(t); }

RomModel::RomModel(interp::InterpolationModel interp, TimeAlphaMapping mapping,
                   std::optional<ResidualCorrector> corrector, RomMetadata meta)
    : interp_(std::move(interp)), mapping_(std::move(mapping)), corrector_(std::move(corrector)), meta_(std::move(meta)) {
    if (mapping_.n_checkpoints() != interp_.n_checkpoints()) {
        throw Error(ErrorCode::ShapeMismatch, "mapping and interpolation model disagree on checkpoint count");
    }
    if (corrector_ && corrector_->basis().dimension() != interp_.grid().size() && corrector_->basis().rank() > 0) {
        throw Error(ErrorCode::ShapeMismatch, "residual basis dimension does not match grid");
    }
}

RomModel train(const measure::Trajectory& traj, const TrainOptions& opts, TrainTimings* timings) {
    TrainTimings tm;
    auto start = Clock::now();
    auto cps = select_checkpoints(traj, opts.n_checkpoints);
    std::vector<double> cp_times;
    for (const auto& s : cps.snapshots) cp_times.push_back(s.time);
    tm.checkpoints = seconds_since(start);

    start = Clock::now();
    auto interp = interp::InterpolationModel::build(traj.grid(), cps.snapshots, opts.interp);
    tm.transport = seconds_since(start);

    start = Clock::now();
    std::vector<double> train_times;
    for (const auto& s : traj.snapshots()) train_times.push_back(s.time);
    std::optional<TimeAlphaMapping> mapping;
    if (opts.mapping == MappingKind::Linear) {
        mapping = TimeAlphaMapping::linear(cp_times);
    } else {
        const auto dict = interp::generate_synthetic_matrix(interp, opts.n_synth);
        const auto match = dictionary_argmin(dict, traj.matrix());
        mapping = TimeAlphaMapping::minl2(cp_times, train_times, match.alpha_global, opts.regression, opts.gpr);
    }
    tm.mapping = seconds_since(start);

    RomMetadata meta;
    meta.epsilon = opts.interp.epsilon;
    meta.epsilon_relative = opts.interp.epsilon_relative;
    meta.marginal_tol = opts.interp.sinkhorn.marginal_tol;
    meta.n_synth = opts.n_synth;
    meta.pod_threshold = opts.pod_threshold;
    meta.sign_strategy = opts.interp.sign_strategy;
    meta.dt = traj.dt();
    meta.checkpoint_indices = cps.indices;

    RomModel rom(std::move(interp), std::move(*mapping), std::nullopt, meta);
    if (!opts.correction) {
        if (timings) *timings = tm;
        return rom;
    }

    start = Clock::now();
    Eigen::MatrixXd residuals(static_cast<Eigen::Index>(traj.grid().size()), static_cast<Eigen::Index>(traj.size()));
    for (std::size_t k = 0; k < traj.size(); ++k)
        residuals.col(static_cast<Eigen::Index>(k)) = traj[k].values - infer(rom, traj[k].time).values;
    auto corrector = ResidualCorrector::fit(residuals, train_times, traj.t_final(), opts.pod_threshold, opts.gpr,
                                            opts.interp.threads);
    tm.correction = seconds_since(start);
    if (timings) *timings = tm;
    return RomModel(rom.interpolation(), rom.mapping(), std::move(corrector), meta);
}

measure::Snapshot infer(const RomModel& rom, double t) {
    const auto mt = rom.mapping().map(t);
    auto s = interp::synth_snapshot(rom.interpolation(), mt.interval, mt.alpha);
    s.time = t;
    return s;
}

measure::Snapshot infer_corrected(const RomModel& rom, double t) {
    if (!rom.corrector()) throw Error(ErrorCode::NoCorrector, "model was trained without residual correction");
    auto s = infer(rom, t);
    if (rom.corrector()->basis().rank() > 0) s.values += rom.corrector()->correction(t);
    return s;
}

std::string to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Disc: return "disc";
        case ErrorKind::Interp: return "interp";
        case ErrorKind::Gen: return "gen";
        case ErrorKind::Proj: return "proj";
    }
    return "unknown";
}

double relative_l2(const Eigen::VectorXd& reference, const Eigen::VectorXd& candidate) {
    if (reference.size() != candidate.size()) throw Error(ErrorCode::ShapeMismatch, "snapshot lengths differ");
    const double norm = reference.norm();
    if (!(norm > 0.0)) throw Error(ErrorCode::ZeroReferenceNorm, "reference snapshot has zero norm");
    return (reference - candidate).norm() / norm;
}

ErrorReport make_report(ErrorKind kind, std::vector<double> times, std::vector<double> errors) {
    if (times.size() != errors.size()) throw Error(ErrorCode::ShapeMismatch, "one error per time expected");
    ErrorReport r{kind, std::move(times), std::move(errors), 0.0};
    if (!r.errors.empty()) {
        r.mean = std::accumulate(r.errors.begin(), r.errors.end(), 0.0) / static_cast<double>(r.errors.size());
    }
    return r;
}

ErrorReport error_metrics(ErrorKind kind, const measure::Trajectory& reference,
                          const std::function<Eigen::VectorXd(double)>& candidate, std::span<const double> times) {
    std::vector<double> errors;
    errors.reserve(times.size());
    for (double t : times) {
        const auto k = reference.find_time(t);
        if (!k) throw Error(ErrorCode::TimeOutOfDomain, "no reference snapshot at time " + std::to_string(t));
        errors.push_back(relative_l2(reference[*k].values, candidate(t)));
    }
    return make_report(kind, {times.begin(), times.end()}, std::move(errors));
}

}  // namespace otrom::rom
