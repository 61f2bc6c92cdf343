#include "otrom/transport.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace otrom::transport {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::atomic<std::uint64_t> g_solve_count{0};

double log_sum_exp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

void check_weights(std::span<const double> w, const char* name) {
    double total = 0.0;
    for (double x : w) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw Error(ErrorCode::InvalidArgument, std::string(name) + " has negative or non-finite weights");
        }
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw Error(ErrorCode::InvalidArgument, std::string(name) + " weights must sum to one");
    }
}

std::vector<double> logs(std::span<const double> w) {
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] > 0.0 ? std::log(w[i]) : kNegInf;
    return out;
}

// Soft-min operator for an explicit cost matrix.
class DenseKernel {
public:
    explicit DenseKernel(const CostMatrix& c) : c_(c), buf_(std::max(c.rows, c.cols)) {}

    void set_epsilon(double eps) { inv_eps_ = 1.0 / eps; }

    // out_i = LSE_j(h_j - C_ij / eps)
    void to_rows(const std::vector<double>& h, std::vector<double>& out) {
        for (std::size_t i = 0; i < c_.rows; ++i) {
            const double* row = &c_.entries[i * c_.cols];
            for (std::size_t j = 0; j < c_.cols; ++j) buf_[j] = h[j] - row[j] * inv_eps_;
            out[i] = log_sum_exp({buf_.data(), c_.cols});
        }
    }

    // out_j = LSE_i(h_i - C_ij / eps)
    void to_cols(const std::vector<double>& h, std::vector<double>& out) {
        for (std::size_t j = 0; j < c_.cols; ++j) {
            for (std::size_t i = 0; i < c_.rows; ++i) buf_[i] = h[i] - c_.entries[i * c_.cols + j] * inv_eps_;
            out[j] = log_sum_exp({buf_.data(), c_.rows});
        }
    }

    double cost(std::size_t i, std::size_t j) const { return c_(i, j); }

private:
    const CostMatrix& c_;
    std::vector<double> buf_;
    double inv_eps_ = 1.0;
};

// Soft-min operator for squared Euclidean cost between cells of one grid.
// exp(-|x - y|^2 / eps) factorizes into an x-kernel and a z-kernel, so each
// LSE over the grid is two passes of 1D LSEs.
class GridKernel {
public:
    GridKernel(const measure::Grid& g, std::span<const std::uint32_t> src, std::span<const std::uint32_t> dst)
        : g_(g), src_(src.begin(), src.end()), dst_(dst.begin(), dst.end()),
          full_(g.size()), tmp_(g.size()), line_(std::max(g.nx(), g.nz())), ebuf_(std::max(g.nx(), g.nz())) {}

    void set_epsilon(double eps) {
        inv_eps_ = 1.0 / eps;
        build_axis(g_.nx(), g_.hx(), lkx_, kx_);
        build_axis(g_.nz(), g_.hz(), lkz_, kz_);
    }

    void to_rows(const std::vector<double>& h, std::vector<double>& out) { apply(dst_, h, src_, out); }
    void to_cols(const std::vector<double>& h, std::vector<double>& out) { apply(src_, h, dst_, out); }

    double cost(std::size_t i, std::size_t j) const {
        const auto a = src_[i];
        const auto b = dst_[j];
        const double dx = g_.hx() * (static_cast<double>(g_.ix(a)) - static_cast<double>(g_.ix(b)));
        const double dz = g_.hz() * (static_cast<double>(g_.iz(a)) - static_cast<double>(g_.iz(b)));
        return dx * dx + dz * dz;
    }

private:
    void build_axis(std::size_t n, double h, std::vector<double>& lk, std::vector<double>& k) const {
        lk.resize(n * n);
        k.resize(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double d = h * (static_cast<double>(i) - static_cast<double>(j));
                lk[i * n + j] = -d * d * inv_eps_;
                k[i * n + j] = std::exp(lk[i * n + j]);
            }
        }
    }

    // out[i] = LSE_j(in[j] + lk[i][j]) along one line of length n.
    void line_lse(std::size_t n, const double* in, std::ptrdiff_t in_stride, double* out, std::ptrdiff_t out_stride,
                  const std::vector<double>& lk, const std::vector<double>& k) {
        double m = kNegInf;
        for (std::size_t j = 0; j < n; ++j) m = std::max(m, in[static_cast<std::ptrdiff_t>(j) * in_stride]);
        if (m == kNegInf) {
            for (std::size_t i = 0; i < n; ++i) out[static_cast<std::ptrdiff_t>(i) * out_stride] = kNegInf;
            return;
        }
        for (std::size_t j = 0; j < n; ++j) ebuf_[j] = std::exp(in[static_cast<std::ptrdiff_t>(j) * in_stride] - m);
        for (std::size_t i = 0; i < n; ++i) {
            const double* krow = &k[i * n];
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += krow[j] * ebuf_[j];
            double r;
            if (s > 1e-250) {
                r = m + std::log(s);
            } else {
                // kernel underflow: exact log-domain reduction for this entry
                const double* lrow = &lk[i * n];
                for (std::size_t j = 0; j < n; ++j) line_[j] = in[static_cast<std::ptrdiff_t>(j) * in_stride] + lrow[j];
                r = log_sum_exp({line_.data(), n});
            }
            out[static_cast<std::ptrdiff_t>(i) * out_stride] = r;
        }
    }

    void apply(const std::vector<std::uint32_t>& in_support, const std::vector<double>& h,
               const std::vector<std::uint32_t>& out_support, std::vector<double>& out) {
        const std::size_t nx = g_.nx();
        const std::size_t nz = g_.nz();
        std::fill(full_.begin(), full_.end(), kNegInf);
        for (std::size_t a = 0; a < in_support.size(); ++a) full_[in_support[a]] = h[a];
        for (std::size_t iz = 0; iz < nz; ++iz) {
            line_lse(nx, &full_[iz * nx], 1, &tmp_[iz * nx], 1, lkx_, kx_);
        }
        for (std::size_t ix = 0; ix < nx; ++ix) {
            line_lse(nz, &tmp_[ix], static_cast<std::ptrdiff_t>(nx), &full_[ix], static_cast<std::ptrdiff_t>(nx), lkz_,
                     kz_);
        }
        for (std::size_t a = 0; a < out_support.size(); ++a) out[a] = full_[out_support[a]];
    }

    const measure::Grid& g_;
    std::vector<std::uint32_t> src_;
    std::vector<std::uint32_t> dst_;
    std::vector<double> full_;
    std::vector<double> tmp_;
    std::vector<double> line_;
    std::vector<double> ebuf_;
    std::vector<double> lkx_, kx_, lkz_, kz_;
    double inv_eps_ = 1.0;
};

struct Potentials {
    std::vector<double> f;
    std::vector<double> g;
    double epsilon = 0.0;
    int iterations = 0;
    double violation = std::numeric_limits<double>::infinity();
};

template <class Kernel>
TransportPlan extract_plan(const Kernel& k, const std::vector<double>& la, const std::vector<double>& lb,
                           const Potentials& pot, const SinkhornOptions& opts);

void rebalance(TransportPlan& plan, std::span<const double> a, std::span<const double> b, double tol);

// Log-domain Sinkhorn with geometric epsilon scaling and warm-started potentials.
// After an f-update the row marginals are exact, so the column error of the
// current (f, g) pair is read off from the next g-update for free.
template <class Kernel>
TransportPlan solve(Kernel& kernel, std::span<const double> a, std::span<const double> b,
                    const SinkhornOptions& opts) {
    opts.validate();
    g_solve_count.fetch_add(1, std::memory_order_relaxed);
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    const auto la = logs(a);
    const auto lb = logs(b);

    Potentials cur{std::vector<double>(n, 0.0), std::vector<double>(m, 0.0)};
    Potentials best;
    std::vector<double> h_row(n), h_col(m), g_new(m), lse(std::max(n, m));

    double eps = opts.epsilon * std::max(1.0, opts.eps_start_multiplier);
    int total_iters = 0;
    for (;;) {
        const bool final_level = eps <= opts.epsilon * (1.0 + 1e-12);
        if (final_level) eps = opts.epsilon;
        kernel.set_epsilon(eps);
        const double tol = final_level ? opts.marginal_tol : std::max(opts.level_tol, opts.marginal_tol);
        bool converged = false;

        for (int it = 1; it <= opts.max_iters; ++it) {
            ++total_iters;
            for (std::size_t j = 0; j < m; ++j) h_col[j] = lb[j] + cur.g[j] / eps;
            kernel.to_rows(h_col, lse);
            for (std::size_t i = 0; i < n; ++i) cur.f[i] = -eps * lse[i];

            for (std::size_t i = 0; i < n; ++i) h_row[i] = la[i] + cur.f[i] / eps;
            kernel.to_cols(h_row, lse);
            for (std::size_t j = 0; j < m; ++j) g_new[j] = -eps * lse[j];

            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite(cur.f[i])) throw Error(ErrorCode::NumericalOverflow, "sinkhorn potential f diverged");
            }
            for (std::size_t j = 0; j < m; ++j) {
                if (!std::isfinite(g_new[j])) throw Error(ErrorCode::NumericalOverflow, "sinkhorn potential g diverged");
            }

            if (it % opts.check_every == 0 || it == opts.max_iters) {
                double viol = 0.0;
                for (std::size_t j = 0; j < m; ++j) viol += b[j] * std::abs(std::expm1((cur.g[j] - g_new[j]) / eps));
                if (final_level && viol < best.violation) {
                    best = cur;
                    best.violation = viol;
                    best.epsilon = eps;
                    best.iterations = total_iters;
                }
                if (viol <= tol) {
                    converged = true;
                    break;
                }
            }
            cur.g.swap(g_new);
        }

        if (final_level) {
            if (!converged) {
                auto plan = extract_plan(kernel, la, lb, best, opts);
                plan.marginal_violation = plan.marginal_error(a, b);
                throw NotConvergedError("sinkhorn did not reach marginal_tol at final epsilon (violation " +
                                            std::to_string(best.violation) + ")",
                                        std::move(plan));
            }
            cur.epsilon = eps;
            cur.iterations = total_iters;
            auto plan = extract_plan(kernel, la, lb, cur, opts);
            rebalance(plan, a, b, opts.marginal_tol);
            if (plan.marginal_violation > opts.marginal_tol) {
                throw NotConvergedError("transport plan marginals drifted after truncation", std::move(plan));
            }
            return plan;
        }
        eps = std::max(eps * opts.eps_scaling_factor, opts.epsilon);
    }
}

template <class Kernel>
TransportPlan extract_plan(const Kernel& k, const std::vector<double>& la, const std::vector<double>& lb,
                           const Potentials& pot, const SinkhornOptions& opts) {
    const std::size_t n = la.size();
    const std::size_t m = lb.size();
    const double inv_eps = 1.0 / pot.epsilon;
    auto log_entry = [&](std::size_t i, std::size_t j) {
        return la[i] + lb[j] + (pot.f[i] + pot.g[j] - k.cost(i, j)) * inv_eps;
    };

    TransportPlan plan;
    if (n * m <= opts.dense_limit) {
        std::vector<double> entries(n * m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) entries[i * m + j] = std::exp(log_entry(i, j));
        plan = TransportPlan::dense(n, m, std::move(entries));
    } else {
        double lmax = kNegInf;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) lmax = std::max(lmax, log_entry(i, j));
        const double cutoff = lmax + std::log(opts.plan_truncation);
        std::vector<std::uint64_t> row_ptr(n + 1, 0);
        std::vector<std::uint32_t> cols;
        std::vector<double> vals;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const double v = log_entry(i, j);
                if (v >= cutoff) {
                    cols.push_back(static_cast<std::uint32_t>(j));
                    vals.push_back(std::exp(v));
                }
            }
            row_ptr[i + 1] = vals.size();
        }
        plan = TransportPlan::sparse(n, m, std::move(row_ptr), std::move(cols), std::move(vals));
    }
    plan.epsilon_used = pot.epsilon;
    plan.iterations = pot.iterations;
    return plan;
}

// Matrix scaling on the stored entries, ending with a row pass. Only needed
// when truncation or rounding moved the marginals past tol.
void rebalance(TransportPlan& plan, std::span<const double> a, std::span<const double> b, double tol) {
    plan.marginal_violation = plan.marginal_error(a, b);
    if (plan.marginal_violation <= tol) return;

    const double eps = plan.epsilon_used;
    const int iters = plan.iterations;
    const std::size_t n = plan.rows();
    const std::size_t m = plan.cols();
    std::vector<double> vals = plan.values();
    std::vector<std::uint64_t> row_ptr = plan.row_ptr();
    std::vector<std::uint32_t> col_idx = plan.col_idx();
    const bool sparse = plan.is_sparse();
    auto col_of = [&](std::size_t k) { return sparse ? std::size_t{col_idx[k]} : k % m; };
    auto row_begin = [&](std::size_t i) { return sparse ? row_ptr[i] : i * m; };
    auto row_end = [&](std::size_t i) { return sparse ? row_ptr[i + 1] : (i + 1) * m; };

    for (int pass = 0; pass < 1000; ++pass) {
        std::vector<double> cs(m, 0.0);
        for (std::size_t k = 0; k < vals.size(); ++k) cs[col_of(k)] += vals[k];
        for (std::size_t k = 0; k < vals.size(); ++k) {
            const auto j = col_of(k);
            if (cs[j] > 0.0) vals[k] *= b[j] / cs[j];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double rs = 0.0;
            for (auto k = row_begin(i); k < row_end(i); ++k) rs += vals[k];
            if (rs > 0.0) {
                for (auto k = row_begin(i); k < row_end(i); ++k) vals[k] *= a[i] / rs;
            }
        }
        TransportPlan next = sparse ? TransportPlan::sparse(n, m, row_ptr, col_idx, vals)
                                    : TransportPlan::dense(n, m, vals);
        next.epsilon_used = eps;
        next.iterations = iters;
        next.marginal_violation = next.marginal_error(a, b);
        plan = std::move(next);
        if (plan.marginal_violation <= tol) return;
    }
}

}  // namespace

double CostMatrix::mean() const {
    if (entries.empty()) return 0.0;
    return std::accumulate(entries.begin(), entries.end(), 0.0) / static_cast<double>(entries.size());
}

CostMatrix CostMatrix::transposed() const {
    CostMatrix t{cols, rows, p, std::vector<double>(entries.size())};
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) t.entries[j * rows + i] = entries[i * cols + j];
    return t;
}

CostMatrix build_cost_matrix(std::span<const measure::Point> src, std::span<const measure::Point> dst, int p) {
    if (p != 1 && p != 2) throw Error(ErrorCode::InvalidArgument, "cost exponent must be 1 or 2");
    CostMatrix c{src.size(), dst.size(), p, std::vector<double>(src.size() * dst.size())};
    for (std::size_t i = 0; i < src.size(); ++i) {
        for (std::size_t j = 0; j < dst.size(); ++j) {
            const double dx = src[i].x - dst[j].x;
            const double dz = src[i].z - dst[j].z;
            const double d2 = dx * dx + dz * dz;
            c.entries[i * dst.size() + j] = p == 2 ? d2 : std::sqrt(d2);
        }
    }
    return c;
}

CostMatrix build_cost_matrix(const measure::DiscreteMeasure& mu, const measure::DiscreteMeasure& nu,
                             const measure::Grid& g, int p) {
    const auto src = mu.points(g);
    const auto dst = nu.points(g);
    return build_cost_matrix(src, dst, p);
}

void SinkhornOptions::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
    if (!(marginal_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "marginal_tol must be > 0");
    if (!(eps_scaling_factor > 0.0 && eps_scaling_factor < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "eps_scaling_factor must lie in (0, 1)");
    }
    if (!(eps_start_multiplier >= 1.0)) throw Error(ErrorCode::InvalidArgument, "eps_start_multiplier must be >= 1");
    if (max_iters < 1 || check_every < 1) throw Error(ErrorCode::InvalidArgument, "iteration counts must be >= 1");
    if (!(plan_truncation >= 0.0 && plan_truncation < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "plan_truncation must lie in [0, 1)");
    }
}

TransportPlan TransportPlan::dense(std::size_t rows, std::size_t cols, std::vector<double> entries) {
    if (entries.size() != rows * cols) throw Error(ErrorCode::ShapeMismatch, "dense plan size mismatch");
    TransportPlan p;
    p.rows_ = rows;
    p.cols_ = cols;
    p.values_ = std::move(entries);
    return p;
}

TransportPlan TransportPlan::sparse(std::size_t rows, std::size_t cols, std::vector<std::uint64_t> row_ptr,
                                    std::vector<std::uint32_t> col_idx, std::vector<double> values) {
    if (row_ptr.size() != rows + 1 || col_idx.size() != values.size() || row_ptr.front() != 0 ||
        row_ptr.back() != values.size()) {
        throw Error(ErrorCode::ShapeMismatch, "sparse plan layout is inconsistent");
    }
    for (std::size_t i = 0; i < rows; ++i) {
        if (row_ptr[i] > row_ptr[i + 1]) throw Error(ErrorCode::ShapeMismatch, "sparse plan row pointers decrease");
        for (auto k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
            if (col_idx[k] >= cols || (k > row_ptr[i] && col_idx[k] <= col_idx[k - 1])) {
                throw Error(ErrorCode::ShapeMismatch, "sparse plan column indices invalid");
            }
        }
    }
    TransportPlan p;
    p.rows_ = rows;
    p.cols_ = cols;
    p.sparse_ = true;
    p.row_ptr_ = std::move(row_ptr);
    p.col_idx_ = std::move(col_idx);
    p.values_ = std::move(values);
    return p;
}

double TransportPlan::operator()(std::size_t i, std::size_t j) const {
    if (i >= rows_ || j >= cols_) throw Error(ErrorCode::ShapeMismatch, "plan index out of range");
    if (!sparse_) return values_[i * cols_ + j];
    const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(j));
    if (it == last || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

std::vector<double> TransportPlan::row_sums() const {
    std::vector<double> r(rows_, 0.0);
    for_each([&](std::size_t i, std::size_t, double v) { r[i] += v; });
    return r;
}

std::vector<double> TransportPlan::col_sums() const {
    std::vector<double> c(cols_, 0.0);
    for_each([&](std::size_t, std::size_t j, double v) { c[j] += v; });
    return c;
}

double TransportPlan::total_mass() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

double TransportPlan::marginal_error(std::span<const double> a, std::span<const double> b) const {
    if (a.size() != rows_ || b.size() != cols_) throw Error(ErrorCode::ShapeMismatch, "marginal size mismatch");
    const auto r = row_sums();
    const auto c = col_sums();
    double er = 0.0;
    double ec = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) er += std::abs(r[i] - a[i]);
    for (std::size_t j = 0; j < cols_; ++j) ec += std::abs(c[j] - b[j]);
    return std::max(er, ec);
}

TransportPlan TransportPlan::transposed() const {
    TransportPlan t;
    if (!sparse_) {
        std::vector<double> e(values_.size());
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) e[j * rows_ + i] = values_[i * cols_ + j];
        t = dense(cols_, rows_, std::move(e));
    } else {
        std::vector<std::uint64_t> ptr(cols_ + 1, 0);
        for (auto j : col_idx_) ++ptr[j + 1];
        for (std::size_t j = 0; j < cols_; ++j) ptr[j + 1] += ptr[j];
        std::vector<std::uint32_t> idx(values_.size());
        std::vector<double> val(values_.size());
        auto fill = ptr;
        for_each([&](std::size_t i, std::size_t j, double v) {
            const auto k = fill[j]++;
            idx[k] = static_cast<std::uint32_t>(i);
            val[k] = v;
        });
        t = sparse(cols_, rows_, std::move(ptr), std::move(idx), std::move(val));
    }
    t.epsilon_used = epsilon_used;
    t.iterations = iterations;
    t.marginal_violation = marginal_violation;
    return t;
}

TransportPlan sinkhorn(std::span<const double> a, std::span<const double> b, const CostMatrix& c,
                       const SinkhornOptions& opts) {
    if (c.rows != a.size() || c.cols != b.size()) throw Error(ErrorCode::ShapeMismatch, "cost matrix shape mismatch");
    if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidArgument, "empty marginal");
    check_weights(a, "source");
    check_weights(b, "target");
    for (double v : c.entries) {
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "cost matrix has non-finite entries");
    }
    DenseKernel kernel(c);
    return solve(kernel, a, b, opts);
}

TransportPlan sinkhorn_on_grid(const measure::DiscreteMeasure& mu, const measure::DiscreteMeasure& nu,
                               const measure::Grid& g, const SinkhornOptions& opts) {
    for (auto l : mu.support())
        if (l >= g.size()) throw Error(ErrorCode::IndexOutOfGrid, "source support outside grid");
    for (auto l : nu.support())
        if (l >= g.size()) throw Error(ErrorCode::IndexOutOfGrid, "target support outside grid");
    GridKernel kernel(g, mu.support(), nu.support());
    return solve(kernel, mu.weights(), nu.weights(), opts);
}

double mean_squared_distance(const measure::DiscreteMeasure& mu, const measure::DiscreteMeasure& nu,
                             const measure::Grid& g) {
    auto moments = [&](const measure::DiscreteMeasure& m) {
        double sx = 0.0, sz = 0.0, s2 = 0.0;
        for (auto l : m.support()) {
            const auto p = g.cell_center(l);
            sx += p.x;
            sz += p.z;
            s2 += p.x * p.x + p.z * p.z;
        }
        const double n = static_cast<double>(m.size());
        return std::array<double, 3>{sx / n, sz / n, s2 / n};
    };
    const auto u = moments(mu);
    const auto v = moments(nu);
    return std::max(0.0, u[2] + v[2] - 2.0 * (u[0] * v[0] + u[1] * v[1]));
}

double transport_cost(const TransportPlan& p, const CostMatrix& c) {
    if (p.rows() != c.rows || p.cols() != c.cols) throw Error(ErrorCode::ShapeMismatch, "plan and cost differ in shape");
    double total = 0.0;
    p.for_each([&](std::size_t i, std::size_t j, double v) { total += v * c(i, j); });
    return total;
}

std::uint64_t solve_count() noexcept { return g_solve_count.load(std::memory_order_relaxed); }

namespace {

// Transportation simplex (MODI) from a north-west-corner basis.
LpSolution transportation_simplex(std::span<const double> a, std::span<const double> b, const CostMatrix& c) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    std::vector<double> x(n * m, 0.0);
    std::vector<char> basic(n * m, 0);

    {
        std::vector<double> s(a.begin(), a.end());
        std::vector<double> d(b.begin(), b.end());
        std::size_t i = 0, j = 0;
        for (;;) {
            const double q = std::max(0.0, std::min(s[i], d[j]));
            x[i * m + j] = q;
            basic[i * m + j] = 1;
            const bool row_done = s[i] <= d[j];
            s[i] -= q;
            d[j] -= q;
            if (i == n - 1 && j == m - 1) break;
            if (i == n - 1) {
                ++j;
            } else if (j == m - 1) {
                ++i;
            } else if (row_done) {
                ++i;
            } else {
                ++j;
            }
        }
    }

    double cmax = 0.0;
    for (double v : c.entries) cmax = std::max(cmax, std::abs(v));
    const double rtol = 1e-12 * (1.0 + cmax);

    // tree nodes: rows 0..n-1, cols n..n+m-1
    const std::size_t nodes = n + m;
    std::vector<double> u(n), v(m);
    std::vector<int> parent(nodes), parent_cell(nodes);
    for (int iter = 0; iter < 10000; ++iter) {
        // duals by tree traversal from row 0
        std::vector<char> seen(nodes, 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        u[0] = 0.0;
        while (!stack.empty()) {
            const auto node = stack.back();
            stack.pop_back();
            if (node < n) {
                for (std::size_t j = 0; j < m; ++j) {
                    if (basic[node * m + j] && !seen[n + j]) {
                        v[j] = c(node, j) - u[node];
                        seen[n + j] = 1;
                        stack.push_back(n + j);
                    }
                }
            } else {
                const auto j = node - n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (basic[i * m + j] && !seen[i]) {
                        u[i] = c(i, j) - v[j];
                        seen[i] = 1;
                        stack.push_back(i);
                    }
                }
            }
        }

        std::size_t p = 0, q = 0;
        double best = -rtol;
        bool found = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (basic[i * m + j]) continue;
                const double r = c(i, j) - u[i] - v[j];
                if (r < best) {
                    best = r;
                    p = i;
                    q = j;
                    found = true;
                }
            }
        }
        if (!found) {
            LpSolution sol{x, 0.0};
            for (std::size_t k = 0; k < n * m; ++k) sol.cost += x[k] * c.entries[k];
            return sol;
        }

        // path in the basis tree from row p to column q
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(parent_cell.begin(), parent_cell.end(), -1);
        std::vector<char> vis(nodes, 0);
        std::vector<std::size_t> queue{p};
        vis[p] = 1;
        for (std::size_t head = 0; head < queue.size() && !vis[n + q]; ++head) {
            const auto node = queue[head];
            if (node < n) {
                for (std::size_t j = 0; j < m; ++j) {
                    if (basic[node * m + j] && !vis[n + j]) {
                        vis[n + j] = 1;
                        parent[n + j] = static_cast<int>(node);
                        parent_cell[n + j] = static_cast<int>(node * m + j);
                        queue.push_back(n + j);
                    }
                }
            } else {
                const auto j = node - n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (basic[i * m + j] && !vis[i]) {
                        vis[i] = 1;
                        parent[i] = static_cast<int>(node);
                        parent_cell[i] = static_cast<int>(i * m + j);
                        queue.push_back(i);
                    }
                }
            }
        }
        std::vector<std::size_t> path;  // cells from column q back to row p
        for (std::size_t node = n + q; node != p; node = static_cast<std::size_t>(parent[node])) {
            path.push_back(static_cast<std::size_t>(parent_cell[node]));
        }
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = path.front();
        for (std::size_t k = 0; k < path.size(); k += 2) {
            if (x[path[k]] < theta) {
                theta = x[path[k]];
                leave = path[k];
            }
        }
        x[p * m + q] += theta;
        for (std::size_t k = 0; k < path.size(); ++k) x[path[k]] += (k % 2 == 0) ? -theta : theta;
        x[leave] = 0.0;
        basic[p * m + q] = 1;
        basic[leave] = 0;
    }
    throw Error(ErrorCode::NotConverged, "transportation simplex exceeded its pivot budget");
}

}  // namespace

LpSolution exact_lp(std::span<const double> a, std::span<const double> b, const CostMatrix& c) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    if (c.rows != n || c.cols != m) throw Error(ErrorCode::ShapeMismatch, "cost matrix shape mismatch");
    if (n == 0 || m == 0) throw Error(ErrorCode::InvalidArgument, "empty marginal");
    if (n * m > 64) throw Error(ErrorCode::TooLarge, "exact_lp is limited to n * m <= 64");
    check_weights(a, "source");
    check_weights(b, "target");

    bool uniform_square = n == m;
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; uniform_square && i < n; ++i) {
        uniform_square = std::abs(a[i] - w) <= 1e-15 && std::abs(b[i] - w) <= 1e-15;
    }
    if (uniform_square) {
        // Birkhoff: some permutation matrix is optimal
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::vector<std::size_t> best_perm = perm;
        double best = std::numeric_limits<double>::infinity();
        do {
            double cost = 0.0;
            for (std::size_t i = 0; i < n; ++i) cost += c(i, perm[i]);
            if (cost < best) {
                best = cost;
                best_perm = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        LpSolution sol{std::vector<double>(n * m, 0.0), best * w};
        for (std::size_t i = 0; i < n; ++i) sol.plan[i * m + best_perm[i]] = w;
        return sol;
    }
    return transportation_simplex(a, b, c);
}

}  // namespace otrom::transport
