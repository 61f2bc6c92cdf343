#include "otrom/interpolation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "otrom/error.hpp"
#include "otrom/parallel.hpp"

namespace otrom::interp {

namespace {

using measure::DiscreteMeasure;
using measure::Grid;
using measure::Point;

void check_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::InvalidAlpha, "alpha must lie in [0, 1], got " + std::to_string(alpha));
    }
}

std::vector<Point> centers(const Grid& g, const std::vector<std::uint32_t>& support) {
    std::vector<Point> pts;
    pts.reserve(support.size());
    for (auto l : support) pts.push_back(g.cell_center(l));
    return pts;
}

struct AxisCells {
    std::size_t first;
    std::size_t second;
    bool tie;
};

// Nearest cell along one axis. A coordinate equidistant from two centers
// reports both.
AxisCells nearest_on_axis(double coord, double origin, double h, std::size_t n) {
    constexpr double tie_tol = 1e-9;
    const double u = (coord - origin) / h;
    const double last = static_cast<double>(n - 1);
    auto clamp_cell = [&](double c) { return static_cast<std::size_t>(std::clamp(c, 0.0, last)); };
    if (!std::isfinite(u)) return {0, 0, false};
    const double fl = std::floor(u);
    if (std::abs(u - fl - 0.5) <= tie_tol) return {clamp_cell(fl), clamp_cell(fl + 1.0), true};
    const std::size_t c = clamp_cell(std::nearbyint(u));
    return {c, c, false};
}

// Adds w to the nearest cell of p, splitting w equally among tied nearest cells.
void deposit(const Grid& g, Point p, double w, std::vector<double>& field) {
    const auto ax = nearest_on_axis(p.x, g.x0(), g.hx(), g.nx());
    const auto az = nearest_on_axis(p.z, g.z0(), g.hz(), g.nz());
    if (!ax.tie && !az.tie) {
        field[g.index(ax.first, az.first)] += w;
        return;
    }
    const double share = w / ((ax.tie ? 2.0 : 1.0) * (az.tie ? 2.0 : 1.0));
    for (std::size_t kx = 0; kx < (ax.tie ? 2u : 1u); ++kx)
        for (std::size_t kz = 0; kz < (az.tie ? 2u : 1u); ++kz)
            field[g.index(kx ? ax.second : ax.first, kz ? az.second : az.first)] += share;
}

// Adds scale * (projected displacement interpolant) into field.
void accumulate(const transport::TransportPlan& plan, std::span<const Point> src, std::span<const Point> dst,
                double alpha, const Grid& g, double scale, std::vector<double>& field) {
    const double total = plan.total_mass();
    if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "transport plan carries no mass");
    const double factor = scale / total;
    const double beta = 1.0 - alpha;
    plan.for_each([&](std::size_t i, std::size_t j, double v) {
        if (v == 0.0) return;
        deposit(g, {beta * src[i].x + alpha * dst[j].x, beta * src[i].z + alpha * dst[j].z}, factor * v, field);
    });
}

DiscreteMeasure uniform_on_nonzero(const Eigen::VectorXd& field) {
    std::vector<std::uint32_t> support;
    for (Eigen::Index l = 0; l < field.size(); ++l)
        if (field[l] != 0.0) support.push_back(static_cast<std::uint32_t>(l));
    std::vector<double> weights(support.size(), 1.0 / static_cast<double>(support.size()));
    return DiscreteMeasure(std::move(support), std::move(weights), 0.0);
}

SignPart make_part(const std::optional<DiscreteMeasure>& left, const std::optional<DiscreteMeasure>& right,
                   const Eigen::VectorXd& left_field, const Eigen::VectorXd& right_field, const Grid& g,
                   const InterpolationOptions& opts) {
    SignPart part;
    if (!left && !right) return part;

    const DiscreteMeasure mu = left ? *left : uniform_on_nonzero(left_field);
    const DiscreteMeasure nu = right ? *right : uniform_on_nonzero(right_field);
    part.mass_left = left ? left->mass() : 0.0;
    part.mass_right = right ? right->mass() : 0.0;
    part.src_support = mu.support();
    part.dst_support = nu.support();

    auto sopts = opts.sinkhorn;
    if (opts.epsilon) {
        sopts.epsilon = *opts.epsilon;
    } else {
        double scale = transport::mean_squared_distance(mu, nu, g);
        if (!(scale > 0.0)) scale = g.hx() * g.hx() + g.hz() * g.hz();
        sopts.epsilon = opts.epsilon_relative * scale;
    }
    part.plan = transport::sinkhorn_on_grid(mu, nu, g, sopts);
    return part;
}

}  // namespace

InterpolationModel::InterpolationModel(Grid grid, std::vector<measure::Snapshot> checkpoints,
                                       std::vector<IntervalModel> intervals)
    : grid_(grid), checkpoints_(std::move(checkpoints)), intervals_(std::move(intervals)) {
    if (checkpoints_.size() < 2) throw Error(ErrorCode::InvalidCounts, "need at least two checkpoints");
    if (intervals_.size() != checkpoints_.size() - 1) {
        throw Error(ErrorCode::ShapeMismatch, "interval count must be checkpoint count - 1");
    }
    for (const auto& c : checkpoints_) {
        if (static_cast<std::size_t>(c.values.size()) != grid_.size()) {
            throw Error(ErrorCode::ShapeMismatch, "checkpoint length does not match grid");
        }
    }
    for (const auto& iv : intervals_) {
        for (const SignPart* p : {&iv.positive, &iv.negative}) {
            if (!p->plan) continue;
            if (p->plan->rows() != p->src_support.size() || p->plan->cols() != p->dst_support.size()) {
                throw Error(ErrorCode::ShapeMismatch, "plan shape does not match its supports");
            }
            for (auto l : p->src_support)
                if (l >= grid_.size()) throw Error(ErrorCode::IndexOutOfGrid, "plan support outside grid");
            for (auto l : p->dst_support)
                if (l >= grid_.size()) throw Error(ErrorCode::IndexOutOfGrid, "plan support outside grid");
        }
    }
}

InterpolationModel InterpolationModel::build(const Grid& grid, std::vector<measure::Snapshot> checkpoints,
                                             const InterpolationOptions& opts) {
    if (checkpoints.size() < 2) throw Error(ErrorCode::InvalidCounts, "need at least two checkpoints");
    std::vector<measure::SignedDecomposition> parts;
    parts.reserve(checkpoints.size());
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        try {
            parts.push_back(measure::field_to_measures(checkpoints[k], opts.sign_strategy));
        } catch (const Error& e) {
            throw Error(e.code(), "checkpoint " + std::to_string(k) + ": " + e.what());
        }
    }

    const std::size_t n_intervals = checkpoints.size() - 1;
    std::vector<IntervalModel> intervals(n_intervals);
    parallel_for(2 * n_intervals, opts.threads, [&](std::size_t task) {
        const std::size_t i = task / 2;
        const bool positive = task % 2 == 0;
        const auto& l = positive ? parts[i].positive : parts[i].negative;
        const auto& r = positive ? parts[i + 1].positive : parts[i + 1].negative;
        const std::string where = "interval " + std::to_string(i) + (positive ? " (positive)" : " (negative)") + ": ";
        try {
            auto part = make_part(l, r, checkpoints[i].values, checkpoints[i + 1].values, grid, opts);
            (positive ? intervals[i].positive : intervals[i].negative) = std::move(part);
        } catch (const transport::NotConvergedError& e) {
            throw transport::NotConvergedError(where + e.what(), e.best_plan());
        } catch (const Error& e) {
            throw Error(e.code(), where + e.what());
        }
    });
    return InterpolationModel(grid, std::move(checkpoints), std::move(intervals));
}

double InterpolationModel::max_marginal_violation() const {
    double v = 0.0;
    for (const auto& iv : intervals_) {
        if (iv.positive.plan) v = std::max(v, iv.positive.plan->marginal_violation);
        if (iv.negative.plan) v = std::max(v, iv.negative.plan->marginal_violation);
    }
    return v;
}

std::vector<Atom> displacement_atoms(const transport::TransportPlan& plan, std::span<const Point> src,
                                     std::span<const Point> dst, double alpha) {
    check_alpha(alpha);
    if (src.size() != plan.rows() || dst.size() != plan.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "support sizes do not match plan");
    }
    std::vector<Atom> atoms;
    atoms.reserve(plan.stored_entries());
    const double beta = 1.0 - alpha;
    plan.for_each([&](std::size_t i, std::size_t j, double v) {
        if (v == 0.0) return;
        atoms.push_back({{beta * src[i].x + alpha * dst[j].x, beta * src[i].z + alpha * dst[j].z}, v});
    });
    return atoms;
}

DiscreteMeasure displacement_interpolate(const transport::TransportPlan& plan, std::span<const Point> src,
                                         std::span<const Point> dst, double alpha, const Grid& grid) {
    check_alpha(alpha);
    if (src.size() != plan.rows() || dst.size() != plan.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "support sizes do not match plan");
    }
    std::vector<double> density(grid.size(), 0.0);
    accumulate(plan, src, dst, alpha, grid, 1.0, density);
    auto m = DiscreteMeasure::from_density(density);
    return DiscreteMeasure(m->support(), m->weights(), 1.0);
}

measure::Snapshot synth_snapshot(const InterpolationModel& model, std::size_t interval, double alpha) {
    if (interval >= model.intervals().size()) {
        throw Error(ErrorCode::IntervalOutOfRange, "interval " + std::to_string(interval) + " out of range");
    }
    check_alpha(alpha);
    const auto& g = model.grid();
    const auto& iv = model.intervals()[interval];

    std::vector<double> pos(g.size(), 0.0);
    std::vector<double> neg(g.size(), 0.0);
    auto run = [&](const SignPart& part, std::vector<double>& out) {
        if (!part.plan) return;
        const double mass = (1.0 - alpha) * part.mass_left + alpha * part.mass_right;
        if (mass == 0.0) return;
        const auto src = centers(g, part.src_support);
        const auto dst = centers(g, part.dst_support);
        accumulate(*part.plan, src, dst, alpha, g, mass, out);
    };
    run(iv.positive, pos);
    run(iv.negative, neg);

    measure::Snapshot s{Eigen::VectorXd(static_cast<Eigen::Index>(g.size())), 0.0};
    for (std::size_t l = 0; l < g.size(); ++l) s.values[static_cast<Eigen::Index>(l)] = pos[l] - neg[l];
    return s;
}

SyntheticMatrix generate_synthetic_matrix(const InterpolationModel& model, std::size_t n_synth) {
    const std::size_t nc = model.n_checkpoints();
    const std::size_t total = n_synth * (nc - 1) + nc;
    const double denom = static_cast<double>(nc - 1);
    SyntheticMatrix out;
    out.columns.resize(static_cast<Eigen::Index>(model.grid().size()), static_cast<Eigen::Index>(total));
    out.entries.reserve(total);

    Eigen::Index col = 0;
    for (std::size_t i = 0; i + 1 < nc; ++i) {
        out.columns.col(col++) = model.checkpoints()[i].values;
        out.entries.push_back({i, 0, 0.0, static_cast<double>(i) / denom, true});
        for (std::size_t j = 1; j <= n_synth; ++j) {
            const double a = static_cast<double>(j) / static_cast<double>(n_synth + 1);
            out.columns.col(col++) = synth_snapshot(model, i, a).values;
            out.entries.push_back({i, j, a, (static_cast<double>(i) + a) / denom, false});
        }
    }
    out.columns.col(col++) = model.checkpoints().back().values;
    out.entries.push_back({nc - 2, n_synth + 1, 1.0, 1.0, true});
    return out;
}

}  // namespace otrom::interp
