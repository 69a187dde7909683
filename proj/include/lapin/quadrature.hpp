#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "lapin/common.hpp"

namespace lapin {

/// Gauss-Hermite rule for expectations over a standard normal variable:
/// E f(W) ~ sum_i weights[i] * f(nodes[i]), weights sum to one.
struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    template <class F>
    double expect(F&& f) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
        return acc;
    }
};

namespace detail {

// Newton iteration on orthonormal physicists' Hermite polynomials with the
// classical asymptotic starting guesses, then rescaled to N(0,1).
inline GaussHermiteRule build_gauss_hermite(int order) {
    const int n = order;
    std::vector<double> z(n), w(n);
    const double pim4 = std::pow(std::numbers::pi, -0.25);
    const int m = (n + 1) / 2;
    double x = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0)
            x = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
        else if (i == 1)
            x -= 1.14 * std::pow(static_cast<double>(n), 0.426) / x;
        else if (i == 2)
            x = 1.86 * x - 0.86 * z[0];
        else if (i == 3)
            x = 1.91 * x - 0.91 * z[1];
        else
            x = 2.0 * x - z[i - 2];
        double pp = 0.0;
        bool converged = false;
        for (int it = 0; it < 100; ++it) {
            double p1 = pim4, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = x * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double step = p1 / pp;
            x -= step;
            if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) {
                converged = true;
                break;
            }
        }
        if (!converged) throw NumericalError("gauss_hermite: Newton iteration failed to converge");
        z[i] = x;
        z[n - 1 - i] = -x;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    GaussHermiteRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = std::numbers::sqrt2 * z[n - 1 - i];
        rule.weights[i] = w[n - 1 - i] * inv_sqrt_pi;
    }
    return rule;
}

}  // namespace detail

/// Cached rule of the given order (1 <= order <= 512).
inline const GaussHermiteRule& gauss_hermite(int order) {
    if (order < 1 || order > 512) throw std::invalid_argument("gauss_hermite: order must be in [1, 512]");
    static std::mutex mutex;
    static std::map<int, GaussHermiteRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, detail::build_gauss_hermite(order)).first;
    return it->second;
}

}  // namespace lapin
