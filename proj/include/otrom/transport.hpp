#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "otrom/error.hpp"
#include "otrom/measure.hpp"

namespace otrom::transport {

/// Dense n x m ground cost, row-major. C_ij = |x_i - y_j|^p.
struct CostMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    int p = 2;
    std::vector<double> entries;

    double operator()(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }
    double mean() const;
    CostMatrix transposed() const;
};

CostMatrix build_cost_matrix(std::span<const measure::Point> src, std::span<const measure::Point> dst, int p = 2);
CostMatrix build_cost_matrix(const measure::DiscreteMeasure& mu, const measure::DiscreteMeasure& nu,
                             const measure::Grid& g, int p = 2);

struct SinkhornOptions {
    double epsilon = 1.0;              // final regularization, cost units
    double eps_scaling_factor = 0.5;   // per-level multiplier in (0, 1)
    double eps_start_multiplier = 1000.0;
    int max_iters = 100000;            // per epsilon level
    double marginal_tol = 1e-9;        // L1, absolute
    double level_tol = 1e-3;           // early exit for intermediate levels
    int check_every = 10;
    std::size_t dense_limit = 4'000'000;  // n*m above this stores a truncated sparse plan
    double plan_truncation = 1e-12;       // relative to the largest entry

    void validate() const;
};

/// Coupling matrix. Dense row-major storage, or CSR when truncated.
class TransportPlan {
public:
    TransportPlan() = default;
    static TransportPlan dense(std::size_t rows, std::size_t cols, std::vector<double> entries);
    static TransportPlan sparse(std::size_t rows, std::size_t cols, std::vector<std::uint64_t> row_ptr,
                                std::vector<std::uint32_t> col_idx, std::vector<double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool is_sparse() const noexcept { return sparse_; }
    std::size_t stored_entries() const noexcept { return values_.size(); }

    double operator()(std::size_t i, std::size_t j) const;

    /// Calls f(i, j, value) for every stored entry in row-major order.
    template <class F>
    void for_each(F&& f) const {
        if (!sparse_) {
            for (std::size_t i = 0; i < rows_; ++i)
                for (std::size_t j = 0; j < cols_; ++j) f(i, j, values_[i * cols_ + j]);
            return;
        }
        for (std::size_t i = 0; i < rows_; ++i)
            for (auto k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) f(i, std::size_t{col_idx_[k]}, values_[k]);
    }

    std::vector<double> row_sums() const;
    std::vector<double> col_sums() const;
    double total_mass() const;
    /// max(|P 1 - a|_1, |P^T 1 - b|_1)
    double marginal_error(std::span<const double> a, std::span<const double> b) const;
    TransportPlan transposed() const;

    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<std::uint64_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<std::uint32_t>& col_idx() const noexcept { return col_idx_; }

    double epsilon_used = 0.0;
    int iterations = 0;
    double marginal_violation = 0.0;

    bool operator==(const TransportPlan&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    bool sparse_ = false;
    std::vector<double> values_;
    std::vector<std::uint64_t> row_ptr_;
    std::vector<std::uint32_t> col_idx_;
};

class NotConvergedError : public Error {
public:
    NotConvergedError(const std::string& message, TransportPlan best)
        : Error(ErrorCode::NotConverged, message), best_plan_(std::move(best)) {}

    const TransportPlan& best_plan() const noexcept { return best_plan_; }
    double violation() const noexcept { return best_plan_.marginal_violation; }

private:
    TransportPlan best_plan_;
};

/// Entropic OT in the log domain with epsilon scaling, general cost matrix.
TransportPlan sinkhorn(std::span<const double> a, std::span<const double> b, const CostMatrix& c,
                       const SinkhornOptions& opts);

/// Same solver for p = 2 costs between two measures on one grid. The Gibbs
/// kernel factorizes along x and z, so no n x m matrix is formed while iterating.
TransportPlan sinkhorn_on_grid(const measure::DiscreteMeasure& mu, const measure::DiscreteMeasure& nu,
                               const measure::Grid& g, const SinkhornOptions& opts);

/// Mean of |x_i - y_j|^2 over all support pairs, without forming C.
double mean_squared_distance(const measure::DiscreteMeasure& mu, const measure::DiscreteMeasure& nu,
                             const measure::Grid& g);

double transport_cost(const TransportPlan& p, const CostMatrix& c);

/// Number of sinkhorn / sinkhorn_on_grid solves started in this process.
std::uint64_t solve_count() noexcept;

struct LpSolution {
    std::vector<double> plan;  // row-major n x m
    double cost = 0.0;
};

/// Exact unregularized OT for desk-scale instances (n * m <= 64). Test oracle.
LpSolution exact_lp(std::span<const double> a, std::span<const double> b, const CostMatrix& c);

}  // namespace otrom::transport
