#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lapin/common.hpp"
#include "lapin/detkit.hpp"
#include "lapin/model.hpp"
#include "lapin/parallel.hpp"

namespace lapin {

enum class Potential { gaussian, annealed };

/// Uniform grid x_j = (j - zero) h with zero = G/2, so 0 is a node.
struct TransferGrid {
    int G = 0;
    int zero = 0;
    double h = 0.0;
    double radius = 0.0;        // physical half-width
    double radius_sigma = 0.0;  // half-width in units of sigma_max
    double sigma_max = 0.0;

    double x(int j) const { return (j - zero) * h; }
};

struct GridSpec {
    int G = 512;
    double R = 8.0;  // half-width in units of the largest unpinned marginal standard deviation
};

inline TransferGrid make_transfer_grid(int G, double radius) {
    detail::require(G >= 64, "transfer grid: G must be >= 64");
    detail::require(radius > 0.0 && std::isfinite(radius), "transfer grid: radius must be > 0");
    TransferGrid g;
    g.G = G;
    g.zero = G / 2;
    g.h = radius / g.zero;
    g.radius = radius;
    return g;
}

namespace detail {

// Upper tail 2 P(N(0,1) > t).
inline double two_sided_tail(double t) { return std::erfc(t / std::sqrt(2.0)); }

}  // namespace detail

struct GridAudit {
    double sigma_max = 0.0;
    double boundary_bound = 0.0;  // sum_i P(|phi_i| > radius) under the unpinned chain
    double required_radius_sigma = 0.0;
    bool ok = false;
};

/// Gaussian-domination audit: pinning only narrows the marginals, so the
/// unpinned chain bounds the mass outside [-radius, radius].
inline GridAudit audit_grid(std::span<const double> sigmas, double radius, double tol = 1e-12) {
    GridAudit a;
    for (double s : sigmas) a.sigma_max = std::max(a.sigma_max, s);
    for (double s : sigmas) a.boundary_bound += detail::two_sided_tail(radius / s);
    a.ok = a.boundary_bound < tol;
    double r = 1.0;
    for (;; r += 0.1) {
        double m = 0.0;
        for (double s : sigmas) m += detail::two_sided_tail(r * a.sigma_max / s);
        if (m < tol || r > 60.0) break;
    }
    a.required_radius_sigma = r;
    return a;
}

struct TransferResult {
    std::vector<double> log_z;  // log Z_k for k = 1..n (index 0 unused)
    TransferGrid grid;
    GridAudit audit;
};

struct TransferOptions {
    GridSpec grid{};
    Potential potential = Potential::gaussian;
    double beta = 0.0;     // used by the annealed potential
    int quad_order = 64;   // Gauss-Hermite order for the annealed potential
    bool audit = true;
};

namespace detail {

inline std::vector<double> unpinned_sigmas(std::span<const double> b) {
    const auto var = marginal_variances(WeightSeq(std::vector<double>(b.begin(), b.end())));
    std::vector<double> s(var.size());
    for (std::size_t i = 0; i < var.size(); ++i) s[i] = std::sqrt(var[i]);
    return s;
}

inline void fill_kernel(std::vector<double>& K, const TransferGrid& g, double bm, const TransferOptions& opts) {
    const int off = 2 * (g.G - 1);
    K.resize(static_cast<std::size_t>(2 * off + 1));
    for (int k = -off; k <= off; ++k) {
        const double d = k * g.h;
        K[k + off] = opts.potential == Potential::gaussian ? std::exp(-0.5 * kLogTwoPi - 0.5 * bm * d * d)
                                                           : std::exp(-annealed_potential(d, opts.beta, opts.quad_order));
    }
}

}  // namespace detail

/// One transfer pass over the chain with bond weights b_0..b_n, returning
/// log Z_k for every prefix k = 1..n. The state is F(phi_{m-1}, phi_m); a step
/// integrates out phi_{m-1} against the bond kernel of Lap_m and applies the
/// site measure h + eps [phi = 0] of site m.
inline TransferResult transfer_all_prefixes(std::span<const double> b, double eps, const TransferOptions& opts = {}) {
    const int n = static_cast<int>(b.size()) - 1;
    detail::require(n >= 1, "transfer: need n >= 1");
    detail::require(eps >= 0.0 && std::isfinite(eps), "transfer: eps must be >= 0");
    detail::require(opts.grid.R > 0.0, "transfer: R must be > 0");
    TransferResult res;
    res.log_z.assign(static_cast<std::size_t>(n) + 1, 0.0);

    std::vector<double> sigmas;
    if (n >= 2) {
        if (opts.potential == Potential::gaussian) {
            sigmas = detail::unpinned_sigmas(b);
        } else {
            // heuristic spread for the mixture potential
            sigmas = detail::unpinned_sigmas(std::vector<double>(b.size(), std::exp(-3.0 * opts.beta)));
        }
    }
    double smax = 0.0;
    for (double s : sigmas) smax = std::max(smax, s);
    if (smax == 0.0) smax = 1.0;
    TransferGrid g = make_transfer_grid(opts.grid.G, opts.grid.R * smax);
    g.radius_sigma = opts.grid.R;
    g.sigma_max = smax;
    res.grid = g;
    if (!sigmas.empty()) {
        res.audit = audit_grid(sigmas, g.radius);
        if (opts.audit && !res.audit.ok)
            throw NumericalError("transfer grid inadequate: boundary mass bound " + std::to_string(res.audit.boundary_bound) +
                                 " >= 1e-12; need R >= " + std::to_string(res.audit.required_radius_sigma) + " sigma_max");
    } else {
        res.audit.ok = true;
    }

    const int G = g.G, z0 = g.zero, off = 2 * (G - 1);
    const std::size_t GG = static_cast<std::size_t>(G) * G;
    std::vector<double> F(GG, 0.0), next(GG, 0.0), K;
    F[static_cast<std::size_t>(z0) * G + z0] = 1.0;  // (phi_{-1}, phi_0) = (0, 0)
    double log_scale = 0.0;
    const double half_log_two_pi = 0.5 * kLogTwoPi;

    for (int m = 0; m <= n; ++m) {
        if (opts.potential == Potential::gaussian || m == 0) detail::fill_kernel(K, g, b[m], opts);
        if (m >= 1) {
            // close with phi_m = phi_{m+1} = 0
            const double* row = &F[static_cast<std::size_t>(z0) * G];
            double s = 0.0;
            for (int a = 0; a < G; ++a) s += row[a] * K[a - z0 + off];
            res.log_z[m] = half_log_two_pi + log_scale + std::log(s);
        }
        if (m == n) break;
        const double thresh = 1e-30;  // F is rescaled to max 1 after every step
        parallel_for(static_cast<std::size_t>(G), [&](std::size_t bi) {
            const int bb = static_cast<int>(bi);
            double mu;
            if (m == 0)
                mu = bb == z0 ? 1.0 : 0.0;
            else
                mu = g.h + (bb == z0 ? eps : 0.0);
            const double* row = &F[static_cast<std::size_t>(bb) * G];
            int lo = 0, hi = G - 1;
            while (lo <= hi && row[lo] <= thresh) ++lo;
            while (hi >= lo && row[hi] <= thresh) --hi;
            if (mu == 0.0 || lo > hi) {
                for (int c = 0; c < G; ++c) next[static_cast<std::size_t>(c) * G + bb] = 0.0;
                return;
            }
            for (int c = 0; c < G; ++c) {
                const double* kp = &K[c - 2 * bb + off];
                double s = 0.0;
                for (int a = lo; a <= hi; ++a) s += row[a] * kp[a];
                next[static_cast<std::size_t>(c) * G + bb] = mu * s;
            }
        });
        F.swap(next);
        double mx = 0.0;
        for (double v : F) mx = std::max(mx, v);
        if (!(mx > 0.0) || !std::isfinite(mx)) throw NumericalError("transfer: state vanished or overflowed");
        for (double& v : F) v /= mx;
        log_scale += std::log(mx);
    }
    return res;
}

/// log Z_n for the Gaussian chain with disorder (or the non-random chain when
/// `disorder` is empty), or for the homogeneous annealed potential.
inline double transfer_log_partition(const ModelParams& params, const std::optional<DisorderVector>& disorder,
                                     const TransferOptions& opts = {}) {
    params.validate();
    std::vector<double> b(static_cast<std::size_t>(params.n) + 1, 1.0);
    if (disorder && opts.potential == Potential::gaussian) {
        detail::require(disorder->n() == params.n, "transfer_log_partition: disorder must hold n+1 charges");
        for (int i = 0; i <= params.n; ++i) b[i] = std::exp(params.beta * disorder->omega[i]);
    }
    TransferOptions o = opts;
    if (o.potential == Potential::annealed) o.beta = params.beta;
    return transfer_all_prefixes(b, params.eps, o).log_z[params.n];
}

}  // namespace lapin
