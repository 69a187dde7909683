#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lapin/common.hpp"
#include "lapin/detkit.hpp"
#include "lapin/model.hpp"
#include "lapin/parallel.hpp"
#include "lapin/partition.hpp"
#include "lapin/quadrature.hpp"
#include "lapin/renewal.hpp"
#include "lapin/rng.hpp"
#include "lapin/stats.hpp"
#include "lapin/transfer.hpp"

namespace lapin {

struct FreeEnergyEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::string method;
    double beta = 0.0;
    double eps = 0.0;
    int n = 0;
};

enum class FreeEnergyEstimator {
    ratio,  // (1/N) log Z^eps_N / Z^0_N
    slope   // least-squares slope of log Z^eps_k / Z^0_k over k in [N/2, N]
};

namespace detail {

/// log Z^{beta,0}_k for k = 1..n from the closed-form bracket, one pass.
inline std::vector<double> log_z_eps0_prefixes(std::span<const double> b) {
    const int n = static_cast<int>(b.size()) - 1;
    std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, total = 0.0, log_prod = 0.0;
    for (int j = 0; j <= n; ++j) {
        const double c = 1.0 / b[j];
        log_prod += std::log(b[j]);
        total += c * s2;
        s2 += 2.0 * s1 + s0 + c;
        s1 += s0 + c;
        s0 += c;
        if (j >= 1) out[j] = -0.5 * kLogTwoPi - 0.5 * (log_prod + std::log(total));
    }
    return out;
}

inline double estimate_from_prefixes(std::span<const double> log_num, std::span<const double> log_den, int n, FreeEnergyEstimator est) {
    if (est == FreeEnergyEstimator::ratio) return (log_num[n] - log_den[n]) / n;
    std::vector<double> x, y;
    for (int k = std::max(1, n / 2); k <= n; ++k) {
        x.push_back(k);
        y.push_back(log_num[k] - log_den[k]);
    }
    return stats::linear_fit(x, y).slope;
}

}  // namespace detail

/// Mean and standard error over disorder realizations of the finite-volume
/// adjusted free energy; numerator by the transfer operator, denominator by
/// the closed-form determinant. Realization i uses seed derive_seed(master_seed, i),
/// so sweeps in eps share their disorder.
inline FreeEnergyEstimate quenched_free_energy(double beta, double eps, int n, int n_samples, const GridSpec& grid,
                                               std::uint64_t master_seed, FreeEnergyEstimator est = FreeEnergyEstimator::ratio) {
    detail::require(beta >= 0.0 && eps >= 0.0, "quenched_free_energy: beta and eps must be >= 0");
    detail::require(n >= 2, "quenched_free_energy: n must be >= 2");
    detail::require(n_samples >= 2, "quenched_free_energy: need at least 2 samples");
    std::vector<double> slots(static_cast<std::size_t>(n_samples));
    parallel_for(slots.size(), [&](std::size_t i) {
        const auto d = sample_disorder(n, rng::derive_seed(master_seed, i));
        std::vector<double> b(d.omega.size());
        for (std::size_t j = 0; j < b.size(); ++j) b[j] = std::exp(beta * d.omega[j]);
        const auto den = detail::log_z_eps0_prefixes(b);
        if (eps == 0.0) {
            slots[i] = 0.0;
            return;
        }
        TransferOptions opts;
        opts.grid = grid;
        const auto num = transfer_all_prefixes(b, eps, opts);
        slots[i] = detail::estimate_from_prefixes(num.log_z, den, n, est);
    });
    const auto m = stats::mean_stderr(slots);
    return {m.mean, m.stderr_, est == FreeEnergyEstimator::ratio ? "quenched-transfer-ratio" : "quenched-transfer-slope", beta, eps, n};
}

/// (1/N) log E[Z^eps_N / Z^0_N], the finite-volume annealed counterpart of the
/// ratio used by quenched_free_energy. Delta-method standard error.
inline FreeEnergyEstimate annealed_ratio_free_energy(double beta, double eps, int n, int n_samples, const GridSpec& grid,
                                                     std::uint64_t master_seed) {
    detail::require(n >= 2 && n_samples >= 2, "annealed_ratio_free_energy: need n >= 2 and >= 2 samples");
    std::vector<double> logs(static_cast<std::size_t>(n_samples));
    parallel_for(logs.size(), [&](std::size_t i) {
        const auto d = sample_disorder(n, rng::derive_seed(master_seed, i));
        std::vector<double> b(d.omega.size());
        for (std::size_t j = 0; j < b.size(); ++j) b[j] = std::exp(beta * d.omega[j]);
        const auto den = detail::log_z_eps0_prefixes(b);
        TransferOptions opts;
        opts.grid = grid;
        logs[i] = transfer_all_prefixes(b, eps, opts).log_z[n] - den[n];
    });
    double mx = -INFINITY;
    for (double v : logs) mx = std::max(mx, v);
    std::vector<double> r(logs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) r[i] = std::exp(logs[i] - mx);
    const auto m = stats::mean_stderr(r);
    return {(mx + std::log(m.mean)) / n, m.stderr_ / m.mean / n, "annealed-ratio-mc", beta, eps, n};
}

/// Homogeneous free energy of the annealed potential from the growth of
/// log Z^{V_beta}_k (transfer operator, slope over k in [N/2, N]).
inline FreeEnergyEstimate annealed_free_energy_transfer(double beta, double eps, int n, const GridSpec& grid, int quad_order = 64) {
    detail::require(n >= 4, "annealed_free_energy_transfer: n must be >= 4");
    TransferOptions opts;
    opts.grid = grid;
    opts.potential = Potential::annealed;
    opts.beta = beta;
    opts.quad_order = quad_order;
    const std::vector<double> ones(static_cast<std::size_t>(n) + 1, 1.0);
    const auto num = transfer_all_prefixes(ones, eps, opts);
    const auto den = transfer_all_prefixes(ones, 0.0, opts);
    std::vector<double> x, y;
    for (int k = n / 2; k <= n; ++k) {
        x.push_back(k);
        y.push_back(num.log_z[k] - den.log_z[k]);
    }
    const auto fit = stats::linear_fit(x, y);
    return {fit.slope, fit.slope_stderr, "annealed-transfer-slope", beta, eps, n};
}

// ---------------------------------------------------------------------------
// Annealed renewal tables: average of per-realization adjusted coefficients.

struct AnnealedTable {
    double beta = 0.0;
    int n_max = 0;
    int n_samples = 0;
    std::uint64_t seed = 0;
    RenewalTable mean;
    std::vector<RenewalTable> batches;
};

/// Monte Carlo estimate of the no-double-return pieces of the annealed model
/// (their exact counterparts under the potential V_beta), n = 1..n_max.
inline AnnealedTable annealed_renewal_table(double beta, int n_max, int n_samples, std::uint64_t seed, int n_batches = 10) {
    detail::require(beta >= 0.0, "annealed_renewal_table: beta must be >= 0");
    detail::require(n_max >= 3, "annealed_renewal_table: n_max must be >= 3");
    detail::require(n_batches >= 2 && n_samples >= n_batches && n_samples % n_batches == 0,
                    "annealed_renewal_table: n_samples must be a positive multiple of n_batches");
    using Coef = std::vector<std::vector<double>>;
    std::vector<Coef> slots(static_cast<std::size_t>(n_samples));
    parallel_for(slots.size(), [&](std::size_t i) {
        const auto d = sample_disorder(n_max, rng::derive_seed(seed, i));
        std::vector<double> b(static_cast<std::size_t>(n_max));
        for (int j = 0; j < n_max; ++j) b[j] = std::exp(beta * d.omega[j]);
        const auto polys = no_double_return_polynomials(b, n_max);
        Coef c(static_cast<std::size_t>(n_max) + 1);
        for (int k = 1; k <= n_max; ++k) c[k] = polys[k].coef;
        slots[i] = std::move(c);
    });
    auto accumulate = [&](std::size_t from, std::size_t to) {
        Coef acc(static_cast<std::size_t>(n_max) + 1);
        for (std::size_t i = from; i < to; ++i)
            for (int k = 1; k <= n_max; ++k) {
                const auto& c = slots[i][k];
                if (acc[k].size() < c.size()) acc[k].resize(c.size(), 0.0);
                for (std::size_t l = 0; l < c.size(); ++l) acc[k][l] += c[l];
            }
        const double inv = 1.0 / static_cast<double>(to - from);
        for (auto& v : acc)
            for (double& x : v) x *= inv;
        acc[0] = {0.0};
        return RenewalTable(std::move(acc));
    };
    AnnealedTable t;
    t.beta = beta;
    t.n_max = n_max;
    t.n_samples = n_samples;
    t.seed = seed;
    t.mean = accumulate(0, slots.size());
    const std::size_t per = slots.size() / static_cast<std::size_t>(n_batches);
    for (int bidx = 0; bidx < n_batches; ++bidx) t.batches.push_back(accumulate(bidx * per, (bidx + 1) * per));
    return t;
}

inline FreeEnergyEstimate annealed_free_energy(double eps, const AnnealedTable& table, const RenewalOptions& opts = {}) {
    const double f = solve_free_energy(eps, table.mean, opts).f;
    std::vector<double> fb;
    for (const auto& b : table.batches) fb.push_back(solve_free_energy(eps, b, opts).f);
    const auto m = stats::mean_stderr(fb);
    // batch means of size n/B: the spread of batch values over sqrt(B) estimates the error of the pooled value
    return {f, m.stderr_, "annealed-renewal-mc", table.beta, eps, table.n_max};
}

struct AnnealedCriticalPoint {
    double eps_c = 0.0;
    double stat_error = 0.0;
    double tail_error = 0.0;
    double total_error = 0.0;
    CriticalPointResult detail;
};

inline AnnealedCriticalPoint annealed_critical_point(const AnnealedTable& table, const RenewalOptions& opts = {}) {
    AnnealedCriticalPoint r;
    r.detail = critical_point(table.mean, opts);
    r.eps_c = r.detail.eps_c;
    std::vector<double> eb;
    for (const auto& b : table.batches) eb.push_back(critical_point(b, opts).eps_c);
    r.stat_error = stats::mean_stderr(eb).stderr_;
    r.tail_error = r.detail.error;
    r.total_error = std::hypot(r.stat_error, r.tail_error);
    return r;
}

// ---------------------------------------------------------------------------

struct BisectionResult {
    double estimate = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    int evaluations = 0;
};

/// Bisection on the predicate F(eps) > max(k_sigma * stderr, floor). The
/// threshold biases the estimate upward; raising it raises the estimate.
inline BisectionResult critical_point_bisect(const std::function<FreeEnergyEstimate(double)>& free_energy, double lo, double hi,
                                             double tol, double floor = 1e-6, double k_sigma = 3.0) {
    detail::require(lo > 0.0 && hi > lo && tol > 0.0, "critical_point_bisect: need 0 < lo < hi and tol > 0");
    BisectionResult r;
    auto positive = [&](double eps) {
        ++r.evaluations;
        const auto fe = free_energy(eps);
        return fe.value > std::max(k_sigma * fe.stderr_, floor);
    };
    if (positive(lo) || !positive(hi)) throw NumericalError("critical_point_bisect: no sign change in the initial bracket");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (positive(mid) ? hi : lo) = mid;
    }
    r.lo = lo;
    r.hi = hi;
    r.estimate = 0.5 * (lo + hi);
    return r;
}

// ---------------------------------------------------------------------------
// Exact disorder averages at small n by tensor Gauss-Hermite quadrature.

namespace detail {

// Adjusted coefficients of Z_n for one weight vector, accumulated with weight w.
inline void accumulate_adjusted(std::span<const double> b, int n, double w, std::vector<double>& acc) {
    double half_log = 0.0;
    for (int i = 0; i <= n; ++i) half_log += 0.5 * std::log(b[i]);
    struct Walker {
        std::span<const double> b;
        int last;
        double half_log;
        double w;
        std::vector<double>& acc;
        void go(const BandedCursor& cur, int site, int l) {
            if (site > last) {
                acc[l] += w * std::exp(-0.5 * (l + 1) * kLogTwoPi + half_log - 0.5 * cur.log_det);
                return;
            }
            BandedCursor next = cur;
            next.push(b, site);
            go(next, site + 1, l);
            go(cur, site + 1, l + 1);
        }
    } walker{b, n - 1, half_log, w, acc};
    walker.go(BandedCursor{}, 1, 0);
}

}  // namespace detail

/// Coefficients (in eps) of E adjusted Z_n, exact up to quadrature error,
/// using an order-q Gauss-Hermite rule in each of the n+1 charges.
inline std::vector<double> expected_adjusted_partition_quadrature(double beta, int n, int order = 8) {
    detail::require(n >= 1 && n <= 8, "expected_adjusted_partition_quadrature: n must lie in [1, 8]");
    const auto& rule = gauss_hermite(order);
    const int dims = n + 1;
    std::size_t points = 1;
    for (int i = 0; i < dims; ++i) points *= static_cast<std::size_t>(order);
    // split the outermost coordinate across workers, reduce in index order
    std::vector<std::vector<double>> slots(static_cast<std::size_t>(order), std::vector<double>(static_cast<std::size_t>(n), 0.0));
    parallel_for(static_cast<std::size_t>(order), [&](std::size_t first) {
        std::vector<int> idx(static_cast<std::size_t>(dims), 0);
        idx[0] = static_cast<int>(first);
        std::vector<double> b(static_cast<std::size_t>(dims));
        const std::size_t inner = points / static_cast<std::size_t>(order);
        for (std::size_t p = 0; p < inner; ++p) {
            double w = 1.0;
            for (int i = 0; i < dims; ++i) {
                b[i] = std::exp(beta * rule.nodes[idx[i]]);
                w *= rule.weights[idx[i]];
            }
            detail::accumulate_adjusted(b, n, w, slots[first]);
            for (int i = dims - 1; i >= 1; --i) {
                if (++idx[i] < order) break;
                idx[i] = 0;
            }
        }
    });
    std::vector<double> coef(static_cast<std::size_t>(n), 0.0);
    for (const auto& s : slots)
        for (std::size_t l = 0; l < coef.size(); ++l) coef[l] += s[l];
    return coef;
}

inline double eval_poly(std::span<const double> c, double x) {
    double acc = 0.0;
    for (std::size_t l = c.size(); l-- > 0;) acc = acc * x + c[l];
    return acc;
}

struct PartitionBoundReport {
    int n = 0;
    double beta = 0.0;
    double eps = 0.0;
    double expected = 0.0;     // E adjusted Z_n
    double upper_bound = 0.0;  // M(beta/2)^2 Z^{0, eps M(beta/2)}_n
    double lower_bound = 0.0;  // M(-beta)^{-1} Z^{0, eps M(-beta)^{-1/2}}_n
    bool upper_ok = false;
    bool lower_ok = false;
};

inline PartitionBoundReport partition_bound_check(double beta, double eps, int n, int order = 8) {
    PartitionBoundReport r;
    r.n = n;
    r.beta = beta;
    r.eps = eps;
    r.expected = eval_poly(expected_adjusted_partition_quadrature(beta, n, order), eps);
    const auto z0 = partition_polynomials(std::vector<double>(static_cast<std::size_t>(n) + 1, 1.0), n)[n];
    const double mh = mgf(beta / 2.0), mb = mgf(-beta);
    r.upper_bound = mh * mh * z0.value(eps * mh);
    r.lower_bound = z0.value(eps / std::sqrt(mb)) / mb;
    const double slack = 1e-10 * r.expected;
    r.upper_ok = r.expected <= r.upper_bound + slack;
    r.lower_ok = r.expected >= r.lower_bound - slack;
    return r;
}

struct SandwichConfig {
    int n_max = 24;
    int n_samples = 2000;
    int n_batches = 10;
    std::uint64_t seed = 1;
    double k_sigma = 3.0;
    int bound_n = 6;
    double bound_eps = 0.5;
    int bound_order = 8;
};

struct SandwichReport {
    double beta = 0.0;
    double eps_c0 = 0.0;
    double eps_ca = 0.0;
    double eps_ca_stat_error = 0.0;
    double ratio = 0.0;
    double ratio_error = 0.0;
    double lower = 0.0;  // 1 / M(beta/2)
    double upper = 0.0;  // sqrt(M(-beta))
    bool lower_ok = false;
    bool upper_ok = false;
    PartitionBoundReport partition;
};

/// Critical-point sandwich 1/M(beta/2) <= eps_c^a / eps_c(0) <= sqrt(M(-beta)).
/// Both critical points come from renewal tables of the same size; the tail
/// uncertainty is propagated by shifting both tail constants together.
inline SandwichReport sandwich_check(double beta, const SandwichConfig& cfg = {}) {
    detail::require(beta >= 0.0, "sandwich_check: beta must be >= 0");
    SandwichReport r;
    r.beta = beta;
    r.lower = 1.0 / mgf(beta / 2.0);
    r.upper = std::sqrt(mgf(-beta));
    const auto t0 = RenewalTable::non_random(cfg.n_max);
    const auto cp0 = critical_point(t0);
    r.eps_c0 = cp0.eps_c;
    if (beta == 0.0) {
        r.eps_ca = r.eps_c0;
        r.ratio = 1.0;
    } else {
        const auto ta = annealed_renewal_table(beta, cfg.n_max, cfg.n_samples, cfg.seed, cfg.n_batches);
        const auto cpa = annealed_critical_point(ta);
        r.eps_ca = cpa.eps_c;
        r.eps_ca_stat_error = cpa.stat_error;
        r.ratio = r.eps_ca / r.eps_c0;
        const double tail_err = 0.5 * std::abs(cpa.detail.eps_hi / cp0.eps_hi - cpa.detail.eps_lo / cp0.eps_lo);
        r.ratio_error = std::hypot(r.ratio * cpa.stat_error / r.eps_ca, tail_err);
    }
    r.lower_ok = r.ratio + cfg.k_sigma * r.ratio_error >= r.lower;
    r.upper_ok = r.ratio - cfg.k_sigma * r.ratio_error <= r.upper;
    r.partition = partition_bound_check(beta, cfg.bound_eps, cfg.bound_n, cfg.bound_order);
    return r;
}

}  // namespace lapin
