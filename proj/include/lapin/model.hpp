#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lapin/common.hpp"
#include "lapin/quadrature.hpp"
#include "lapin/rng.hpp"

// Lattice convention used throughout the library.
//
// A chain of size n has heights phi_{-1}, phi_0, ..., phi_{n+1} with
// phi_{-1} = phi_0 = phi_n = phi_{n+1} = 0 and free interior sites 1..n-1.
// There are n+1 Laplacian terms
//     Lap_m = phi_{m+1} - 2 phi_m + phi_{m-1},   m = 0..n,
// each weighted by b_m = exp(beta * omega_m). Every interior site carries the
// measure eps * delta_0 + Lebesgue. The partition function is
//     Z_n = sum_S eps^|S| (2 pi)^{-(|S|+1)/2} det(B_{-S})^{-1/2},
// where S ranges over contact sets in {1..n-1} and B_{-S} is the bilaplacian
// quadratic form with the rows/columns of S deleted. Equivalently Z_n is
// sqrt(2 pi) times the integral of prod_m (2 pi)^{-1/2} exp(-b_m Lap_m^2 / 2);
// in particular Z_1 = (2 pi)^{-1/2} and Z_n(eps = 0) = (2 pi)^{-1/2} det(B)^{-1/2}.

namespace lapin {

struct ModelParams {
    double beta = 0.0;
    double eps = 0.0;
    int n = 1;

    void validate() const {
        detail::require(beta >= 0.0 && std::isfinite(beta), "ModelParams: beta must be finite and >= 0");
        detail::require(eps >= 0.0 && std::isfinite(eps), "ModelParams: eps must be finite and >= 0");
        detail::require(n >= 1, "ModelParams: n must be >= 1");
    }
};

/// One realization omega_0..omega_n of the Gaussian charges.
struct DisorderVector {
    std::vector<double> omega;
    std::uint64_t seed = 0;
    double mean_shift = 0.0;

    int n() const { return static_cast<int>(omega.size()) - 1; }
};

/// omega_i = mean_shift + N(0,1) draw i of stream `seed`.
inline DisorderVector sample_disorder(int n, std::uint64_t seed, double mean_shift = 0.0) {
    detail::require(n >= 1, "sample_disorder: n must be >= 1");
    DisorderVector d;
    d.seed = seed;
    d.mean_shift = mean_shift;
    d.omega.resize(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) d.omega[i] = mean_shift + rng::normal_at(seed, static_cast<std::uint64_t>(i));
    return d;
}

/// All charges zero: the non-random chain.
inline DisorderVector zero_disorder(int n) {
    DisorderVector d;
    d.omega.assign(static_cast<std::size_t>(n) + 1, 0.0);
    return d;
}

/// log M(t) for the standard normal moment generating function.
inline double log_mgf(double t) {
    detail::require(std::isfinite(t), "mgf: argument must be finite");
    return 0.5 * t * t;
}

/// M(t) = exp(t^2 / 2).
inline double mgf(double t) {
    const double l = log_mgf(t);
    if (l > 709.0) throw std::out_of_range("mgf: exp(t^2/2) overflows a double");
    return std::exp(l);
}

namespace detail {

// log E[ exp(beta w / 2) (2 pi)^{-1/2} exp(-exp(beta w) x^2 / 2) ]. With
// g(w) = beta w/2 - exp(beta w) x^2/2 - w^2/2 the integrand is concentrated
// near the mode w* of g, far in the normal tail when |x| is large, so the rule
// is recentred there: w = w* + s z with s = (-g''(w*))^{-1/2}.
inline double log_annealed_weight(double x, double beta, const GaussHermiteRule& rule) {
    const double x2 = x * x;
    auto g = [&](double w) { return 0.5 * beta * w - 0.5 * std::exp(beta * w) * x2 - 0.5 * w * w; };
    auto dg = [&](double w) { return 0.5 * beta - 0.5 * beta * std::exp(beta * w) * x2 - w; };
    double hi = 0.5 * beta, lo = hi - 1.0;  // dg(hi) <= 0 < dg(lo) after the search
    while (dg(lo) <= 0.0) lo -= 2.0 * (hi - lo);
    double w = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double d = dg(w);
        (d > 0.0 ? lo : hi) = w;
        const double d2 = -0.5 * beta * beta * std::exp(beta * w) * x2 - 1.0;
        double next = w - d / d2;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - w) <= 1e-15 * (1.0 + std::abs(w))) {
            w = next;
            break;
        }
        w = next;
    }
    const double s = 1.0 / std::sqrt(0.5 * beta * beta * std::exp(beta * w) * x2 + 1.0);
    double acc = -INFINITY;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double z = rule.nodes[i];
        acc = log_add(acc, std::log(rule.weights[i]) + g(w + s * z) + 0.5 * z * z);
    }
    return acc + std::log(s) - 0.5 * kLogTwoPi;
}

}  // namespace detail

struct AnnealedPotentialOptions {
    int max_order = 512;
    double rel_tol = 1e-10;
};

/// V_beta(x) = -log E[ exp(beta w/2) (2 pi)^{-1/2} exp(-exp(beta w) x^2/2) ], w ~ N(0,1),
/// by Gauss-Hermite quadrature centred on the mode of the integrand. The order starts at quad_order and doubles until
/// two successive values of exp(-V) agree to opts.rel_tol.
inline double annealed_potential(double x, double beta, int quad_order = 64, AnnealedPotentialOptions opts = {}) {
    detail::require(quad_order >= 8, "annealed_potential: quad_order must be >= 8");
    detail::require(beta >= 0.0, "annealed_potential: beta must be >= 0");
    if (beta == 0.0) return 0.5 * kLogTwoPi + 0.5 * x * x;
    int order = quad_order;
    double prev = detail::log_annealed_weight(x, beta, gauss_hermite(order));
    while (2 * order <= opts.max_order) {
        order *= 2;
        const double cur = detail::log_annealed_weight(x, beta, gauss_hermite(order));
        if (std::abs(std::expm1(cur - prev)) < opts.rel_tol) return -cur;
        prev = cur;
    }
    throw NumericalError("annealed_potential: quadrature did not converge (x=" + std::to_string(x) +
                         ", beta=" + std::to_string(beta) + ")");
}

}  // namespace lapin
