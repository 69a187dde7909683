#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include "lapin/common.hpp"
#include "lapin/partition.hpp"
#include "lapin/stats.hpp"

namespace lapin {

/// Li_2(x) for x in [0, 1].
inline double dilog(double x) {
    detail::require(x >= 0.0 && x <= 1.0, "dilog: argument must lie in [0, 1]");
    constexpr double pi2_6 = std::numbers::pi * std::numbers::pi / 6.0;
    if (x == 1.0) return pi2_6;
    if (x > 0.5) return pi2_6 - std::log(x) * std::log1p(-x) - dilog(1.0 - x);
    double term = x, sum = 0.0;
    for (int k = 1; k < 200; ++k) {
        const double add = term / (static_cast<double>(k) * k);
        sum += add;
        if (add < 1e-18 * sum) break;
        term *= x;
    }
    return sum;
}

enum class TailModel { fitted, none };

struct RenewalOptions {
    TailModel tail = TailModel::fitted;
    double fit_fraction = 1.0 / 3.0;  // share of the largest computed n used for the tail fit
    double x_tol = 1e-14;
    double truncation_tol = 1e-12;
};

struct TailFit {
    double C = 0.0;             // n^2 a_n ~ C, i.e. no-double-return piece ~ C / (eps^2 n^2)
    double residual_rms = 0.0;  // spread of n^2 a_n around C over the fit window
    int n_lo = 0;
    int n_hi = 0;
};

/// No-double-return pieces as polynomials in eps, n = 1..n_max (entry 2 is 0).
/// Values are adjusted quantities, so an annealed table is just the average of
/// per-realization coefficients.
class RenewalTable {
public:
    RenewalTable() = default;
    explicit RenewalTable(std::vector<std::vector<double>> coef) : coef_(std::move(coef)) {
        detail::require(coef_.size() >= 4, "RenewalTable: need entries up to n >= 3");
        for (const auto& c : coef_)
            for (double v : c) detail::require(v >= 0.0 && std::isfinite(v), "RenewalTable: coefficients must be finite and >= 0");
    }

    static RenewalTable non_random(int n_max) {
        detail::require(n_max >= 3, "RenewalTable: n_max must be >= 3");
        const std::vector<double> ones(static_cast<std::size_t>(n_max), 1.0);
        const auto polys = no_double_return_polynomials(ones, n_max);
        std::vector<std::vector<double>> coef(static_cast<std::size_t>(n_max) + 1);
        for (int n = 1; n <= n_max; ++n) coef[n] = polys[n].coef;
        return RenewalTable(std::move(coef));
    }

    int n_max() const { return static_cast<int>(coef_.size()) - 1; }
    const std::vector<double>& coefficients(int n) const { return coef_.at(static_cast<std::size_t>(n)); }

    /// Value of the no-double-return piece of length n at eps.
    double zcheck(int n, double eps) const {
        const auto& c = coef_.at(static_cast<std::size_t>(n));
        double acc = 0.0;
        for (std::size_t l = c.size(); l-- > 0;) acc = acc * eps + c[l];
        return acc;
    }

    /// Renewal weight a_n at x = 1: eps * piece_1 for n = 1, eps^2 * piece_n otherwise.
    double a(int n, double eps) const { return n == 1 ? eps * zcheck(1, eps) : eps * eps * zcheck(n, eps); }

    /// Constant least-squares fit of n^2 a_n over the top share of n in [3, n_max].
    TailFit fit_tail(double eps, double fraction = 1.0 / 3.0) const {
        const int available = n_max() - 2;
        const int count = std::max(2, static_cast<int>(std::lround(fraction * available)));
        TailFit fit;
        fit.n_hi = n_max();
        fit.n_lo = std::max(3, n_max() - count + 1);
        std::vector<double> r;
        for (int n = fit.n_lo; n <= fit.n_hi; ++n) r.push_back(static_cast<double>(n) * n * a(n, eps));
        const auto m = stats::mean_stderr(r);
        fit.C = m.mean;
        double ss = 0.0;
        for (double v : r) ss += (v - m.mean) * (v - m.mean);
        fit.residual_rms = std::sqrt(ss / static_cast<double>(r.size()));
        return fit;
    }

private:
    std::vector<std::vector<double>> coef_;
};

namespace detail {

// sum_{n > N} x^n / n^2
inline double dilog_tail(double x, int N) {
    if (x == 1.0) return boost::math::trigamma(static_cast<double>(N) + 1.0);
    double head = 0.0, p = 1.0;
    for (int n = 1; n <= N; ++n) {
        p *= x;
        head += p / (static_cast<double>(n) * n);
    }
    return std::max(0.0, dilog(x) - head);
}

struct SeriesEvaluator {
    std::vector<double> a;  // a[n] at x = 1
    double C = 0.0;
    bool tail = false;

    double operator()(double x) const {
        double s = 0.0, p = 1.0;
        for (std::size_t n = 1; n < a.size(); ++n) {
            p *= x;
            s += a[n] * p;
        }
        if (tail) s += C * dilog_tail(x, static_cast<int>(a.size()) - 1);
        return s;
    }
};

inline SeriesEvaluator make_series(const RenewalTable& table, double eps, const RenewalOptions& opts, double C_shift = 0.0) {
    SeriesEvaluator ev;
    ev.a.assign(static_cast<std::size_t>(table.n_max()) + 1, 0.0);
    for (int n = 1; n <= table.n_max(); ++n) ev.a[n] = table.a(n, eps);
    if (opts.tail == TailModel::fitted) {
        ev.tail = true;
        ev.C = std::max(0.0, table.fit_tail(eps, opts.fit_fraction).C + C_shift);
    }
    return ev;
}

}  // namespace detail

struct FreeEnergyResult {
    double f = 0.0;
    double x = 1.0;               // root of the generating function (1 when f = 0)
    double series_at_one = 0.0;   // sum a_n including the tail
    TailFit tail;
};

/// f(eps) = -log x where sum_n a_n x^n = 1, or 0 when the series at x = 1 is <= 1.
inline FreeEnergyResult solve_free_energy(double eps, const RenewalTable& table, const RenewalOptions& opts = {}) {
    detail::require(eps > 0.0 && std::isfinite(eps), "solve_free_energy: eps must be > 0");
    const auto ev = detail::make_series(table, eps, opts);
    FreeEnergyResult out;
    if (opts.tail == TailModel::fitted) out.tail = table.fit_tail(eps, opts.fit_fraction);
    out.series_at_one = ev(1.0);
    if (out.series_at_one <= 1.0) {
        if (opts.tail == TailModel::none) {
            const int N = table.n_max();
            const double remainder = ev.a[N] * N;
            if (remainder > opts.truncation_tol)
                throw NumericalError("solve_free_energy: truncation error " + std::to_string(remainder) +
                                     " exceeds tolerance without a tail model");
        }
        return out;
    }
    double lo = 0.0, hi = 1.0;
    while (hi - lo > opts.x_tol) {
        const double mid = 0.5 * (lo + hi);
        (ev(mid) < 1.0 ? lo : hi) = mid;
    }
    out.x = 0.5 * (lo + hi);
    if (opts.tail == TailModel::none) {
        const int N = table.n_max();
        const double xn = std::pow(out.x, N);
        const double remainder = ev.a[N] * xn * std::min<double>(N, out.x / (1.0 - out.x));
        if (remainder > opts.truncation_tol)
            throw NumericalError("solve_free_energy: truncation error " + std::to_string(remainder) +
                                 " exceeds tolerance without a tail model");
    }
    out.f = -std::log(out.x);
    return out;
}

struct CriticalPointResult {
    double eps_c = 0.0;
    double error = 0.0;    // half-width from shifting the tail constant by its residual
    double eps_lo = 0.0;   // eps_c with C + residual
    double eps_hi = 0.0;   // eps_c with C - residual
    TailFit tail;          // fit at eps_c
};

namespace detail {

inline double critical_point_shifted(const RenewalTable& table, const RenewalOptions& opts, double shift_in_rms) {
    auto series = [&](double eps) {
        double shift = 0.0;
        if (opts.tail == TailModel::fitted && shift_in_rms != 0.0)
            shift = shift_in_rms * table.fit_tail(eps, opts.fit_fraction).residual_rms;
        return make_series(table, eps, opts, shift)(1.0);
    };
    double lo = 0.0, hi = 1.0;
    int grow = 0;
    while (series(hi) < 1.0) {
        lo = hi;
        hi *= 2.0;
        if (++grow > 60) throw NumericalError("critical_point: could not bracket the root");
    }
    while (hi - lo > 1e-14 * hi) {
        const double mid = 0.5 * (lo + hi);
        (series(mid) < 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// eps_c solving eps a-piece_1 + eps^2 sum_{n>=3} piece_n(eps) = 1 (the series at x = 1).
inline CriticalPointResult critical_point(const RenewalTable& table, const RenewalOptions& opts = {}) {
    CriticalPointResult r;
    r.eps_c = detail::critical_point_shifted(table, opts, 0.0);
    if (opts.tail == TailModel::fitted) {
        r.eps_lo = detail::critical_point_shifted(table, opts, 1.0);
        r.eps_hi = detail::critical_point_shifted(table, opts, -1.0);
        r.tail = table.fit_tail(r.eps_c, opts.fit_fraction);
    } else {
        r.eps_lo = r.eps_hi = r.eps_c;
    }
    r.error = 0.5 * (r.eps_hi - r.eps_lo);
    return r;
}

struct AsymptoteReport {
    double eps_c = 0.0;
    std::vector<double> deltas;
    std::vector<double> f;
    std::vector<double> ratios;        // f (-log delta) / delta
    std::vector<double> slopes;        // f / (eps - eps_c)
    double extrapolated_limit = 0.0;   // intercept of ratio vs 1 / (-log delta)
    double variation_coarse = 0.0;     // (max - min) / mean of ratios on the larger half of the grid
    double variation_fine = 0.0;       // same on the smaller half
    double c0_estimate = 0.0;          // right derivative of sum_{n>=3} eps piece_n at eps_c
    double c1_estimate = 0.0;          // (1 + eps_c^2 c0) / C
    std::string caveat;
};

/// Logarithmic delta grid, `count` points from lo to hi.
inline std::vector<double> log_grid(double lo, double hi, int count) {
    detail::require(lo > 0.0 && hi > lo && count >= 2, "log_grid: need 0 < lo < hi and count >= 2");
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
    return g;
}

inline AsymptoteReport asymptote_constant(const RenewalTable& table, std::span<const double> delta_grid, const RenewalOptions& opts = {}) {
    detail::require(delta_grid.size() >= 4, "asymptote_constant: need at least 4 grid points");
    for (double d : delta_grid) detail::require(d > 0.0 && d <= 0.3, "asymptote_constant: delta must lie in (0, 0.3]");
    AsymptoteReport rep;
    rep.eps_c = critical_point(table, opts).eps_c;
    std::vector<double> grid(delta_grid.begin(), delta_grid.end());
    std::sort(grid.begin(), grid.end());
    for (double d : grid) {
        const double eps = rep.eps_c * std::exp(d);
        const double f = solve_free_energy(eps, table, opts).f;
        rep.deltas.push_back(d);
        rep.f.push_back(f);
        rep.ratios.push_back(f * -std::log(d) / d);
        rep.slopes.push_back(f / (eps - rep.eps_c));
    }
    auto variation = [](std::span<const double> v) {
        const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        return (*mx - *mn) / mean;
    };
    const std::size_t half = rep.ratios.size() / 2;
    rep.variation_fine = variation(std::span<const double>(rep.ratios.data(), half));
    rep.variation_coarse = variation(std::span<const double>(rep.ratios.data() + half, rep.ratios.size() - half));
    std::vector<double> inv_log;
    for (double d : rep.deltas) inv_log.push_back(1.0 / -std::log(d));
    rep.extrapolated_limit = stats::linear_fit(inv_log, rep.ratios).intercept;

    const double h = 1e-6;
    auto s3 = [&](double eps) {
        const auto ev = detail::make_series(table, eps, opts);
        double s = 0.0;
        for (int n = 3; n <= table.n_max(); ++n) s += ev.a[n] / eps;
        if (ev.tail) s += ev.C / eps * detail::dilog_tail(1.0, table.n_max());
        return s;
    };
    rep.c0_estimate = (s3(rep.eps_c * (1.0 + h)) - s3(rep.eps_c)) / (rep.eps_c * h);
    const double C = table.fit_tail(rep.eps_c, opts.fit_fraction).C;
    rep.c1_estimate = C > 0.0 ? (1.0 + rep.eps_c * rep.eps_c * rep.c0_estimate) / C : 0.0;
    rep.caveat = "ratio converges only logarithmically in delta; the limit is an extrapolation, not a measurement";
    return rep;
}

struct RenewalLimitCheck {
    double u_last = 0.0;
    double predicted = 0.0;  // sum b_n / sum n a_n
    double relative_gap = 0.0;
};

/// Iterates u_n = b_n + sum_{i<n} a_i u_{n-i} at x = x^eps (with b_n the bare
/// pieces) and compares u_n with the renewal-theorem limit. Requires eps above
/// the critical point so the sequences decay geometrically.
inline RenewalLimitCheck renewal_limit_check(double eps, const RenewalTable& table, int n_iter = 4000, const RenewalOptions& opts = {}) {
    const auto fe = solve_free_energy(eps, table, opts);
    detail::require(fe.x < 1.0, "renewal_limit_check: eps must lie above the critical point");
    const auto ev = detail::make_series(table, eps, opts);
    const int N = table.n_max();
    std::vector<double> a(static_cast<std::size_t>(n_iter) + 1, 0.0), b(a.size(), 0.0);
    double p = 1.0;
    for (int n = 1; n <= n_iter; ++n) {
        p *= fe.x;
        if (n <= N) {
            a[n] = ev.a[n] * p;
            b[n] = table.zcheck(n, eps) * p;
        } else if (ev.tail) {
            a[n] = ev.C * p / (static_cast<double>(n) * n);
            b[n] = a[n] / (eps * eps);
        }
    }
    std::vector<double> u(a.size(), 0.0);
    for (int n = 1; n <= n_iter; ++n) {
        double s = b[n];
        for (int i = 1; i < n; ++i) s += a[i] * u[n - i];
        u[n] = s;
    }
    double sb = 0.0, sna = 0.0;
    for (int n = 1; n <= n_iter; ++n) {
        sb += b[n];
        sna += n * a[n];
    }
    RenewalLimitCheck out;
    out.u_last = u[n_iter];
    out.predicted = sb / sna;
    out.relative_gap = std::abs(out.u_last - out.predicted) / out.predicted;
    return out;
}

// ---------------------------------------------------------------------------
// Discrete renewal pinning with reward e^h per contact.

struct PinningKernel {
    enum class Kind { power_law, geometric, tabulated };

    Kind kind = Kind::power_law;
    double alpha = 0.5;
    double c_K = 0.0;
    double q = 0.0;
    double mass = 1.0;
    std::vector<double> table;  // table[n-1] = K(n)

    /// K(n) = mass n^{-(1+alpha)} / zeta(1+alpha).
    static PinningKernel power_law(double alpha, double mass = 1.0) {
        detail::require(alpha > 0.0 && std::isfinite(alpha), "PinningKernel: alpha must be > 0 (divergent kernel otherwise)");
        detail::require(mass > 0.0 && mass <= 1.0, "PinningKernel: mass must lie in (0, 1]");
        PinningKernel k;
        k.kind = Kind::power_law;
        k.alpha = alpha;
        k.mass = mass;
        k.c_K = mass / boost::math::zeta(1.0 + alpha);
        return k;
    }
    /// K(n) = (1-q) q^{n-1}.
    static PinningKernel geometric(double q) {
        detail::require(q > 0.0 && q < 1.0, "PinningKernel: q must lie in (0, 1)");
        PinningKernel k;
        k.kind = Kind::geometric;
        k.q = q;
        k.alpha = std::numeric_limits<double>::infinity();
        return k;
    }
    static PinningKernel tabulated(std::vector<double> K) {
        detail::require(!K.empty(), "PinningKernel: empty table");
        double s = 0.0;
        for (double v : K) {
            detail::require(v >= 0.0 && std::isfinite(v), "PinningKernel: entries must be finite and >= 0");
            s += v;
        }
        detail::require(s <= 1.0 + 1e-12, "PinningKernel: total mass exceeds 1 (divergent kernel)");
        PinningKernel k;
        k.kind = Kind::tabulated;
        k.table = std::move(K);
        k.mass = s;
        k.alpha = std::numeric_limits<double>::infinity();
        return k;
    }

    double K(long n) const {
        if (n < 1) return 0.0;
        switch (kind) {
            case Kind::power_law: return c_K * std::pow(static_cast<double>(n), -(1.0 + alpha));
            case Kind::geometric: return (1.0 - q) * std::pow(q, static_cast<double>(n - 1));
            default: return n <= static_cast<long>(table.size()) ? table[n - 1] : 0.0;
        }
    }

    double total_mass() const { return kind == Kind::geometric ? 1.0 : mass; }

    /// sum_n n K(n); infinite for power laws with alpha <= 1.
    double mean() const {
        switch (kind) {
            case Kind::power_law:
                if (alpha <= 1.0) return std::numeric_limits<double>::infinity();
                return c_K * boost::math::zeta(alpha);
            case Kind::geometric: return 1.0 / (1.0 - q);
            default: {
                double s = 0.0;
                for (std::size_t i = 0; i < table.size(); ++i) s += static_cast<double>(i + 1) * table[i];
                return s;
            }
        }
    }

    /// sum_n K(n) (1 - exp(-f n)), increasing from 0 at f = 0 to total_mass.
    double laplace_deficit(double f) const;
};

namespace detail {

// D_s(z) = int_1^inf t^{-s} (1 - e^{-z t}) dt for s > 1, z > 0, built upward
// from E_1 (integer s) or E_{s - floor(s)} with the stable recurrence
// D_{s+1} = (1 - e^{-z} + z E_s) / s.
inline double deficit_integral(double s, double z) {
    const double whole = std::floor(s);
    double sigma, E;
    if (s == whole) {
        sigma = 1.0;
        E = boost::math::expint(1, z);
    } else {
        sigma = s - whole;
        E = std::pow(z, sigma - 1.0) * boost::math::tgamma(1.0 - sigma, z);
    }
    double D = 0.0;
    while (sigma + 0.5 < s) {
        D = (-std::expm1(-z) + z * E) / sigma;
        sigma += 1.0;
        E = 1.0 / (sigma - 1.0) - D;
    }
    return D;
}

}  // namespace detail

inline double PinningKernel::laplace_deficit(double f) const {
    if (f <= 0.0) return 0.0;
    switch (kind) {
        case Kind::geometric: return -std::expm1(-f) / (1.0 - q * std::exp(-f));
        case Kind::tabulated: {
            double s = 0.0;
            for (std::size_t i = 0; i < table.size(); ++i) s += table[i] * -std::expm1(-f * static_cast<double>(i + 1));
            return s;
        }
        default: break;
    }
    // head sum, then Euler-Maclaurin for n > N0 with the integral in closed form
    constexpr long N0 = 1000;
    const double s = 1.0 + alpha;
    double head = 0.0;
    for (long n = 1; n <= N0; ++n) head += std::pow(static_cast<double>(n), -s) * -std::expm1(-f * static_cast<double>(n));
    const double a = static_cast<double>(N0);
    const double z = f * a;
    const double integral = std::pow(a, 1.0 - s) * detail::deficit_integral(s, z);
    const double ga = std::pow(a, -s) * -std::expm1(-z);
    const double dga = -s * std::pow(a, -s - 1.0) * -std::expm1(-z) + std::pow(a, -s) * f * std::exp(-z);
    return c_K * (head + integral - 0.5 * ga - dga / 12.0);
}

/// h_c = -log sum K.
inline double pinning_critical_point(const PinningKernel& kernel) { return -std::log(kernel.total_mass()); }

/// Root of sum K(n) e^{-f n} = e^{-h}; 0 for h <= h_c.
inline double pinning_free_energy(const PinningKernel& kernel, double h) {
    detail::require(std::isfinite(h), "pinning_free_energy: h must be finite");
    const double hc = pinning_critical_point(kernel);
    if (h <= hc) return 0.0;
    const double target = -kernel.total_mass() * std::expm1(-(h - hc));  // total_mass - e^{-h}
    double lo = 0.0, hi = h - hc;
    for (int it = 0; it < 4000 && hi - lo > 2.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (kernel.laplace_deficit(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// f = log(q + (1-q) e^h) for the geometric kernel.
inline double geometric_free_energy(double q, double h) {
    if (h <= 0.0) return 0.0;
    return std::log1p((1.0 - q) * std::expm1(h));
}

struct ExponentFit {
    double exponent = 0.0;
    double constant = 0.0;
    double exponent_stderr = 0.0;
    double log_constant_stderr = 0.0;
    std::vector<double> h;
    std::vector<double> f;
};

/// Log-log regression of f(h) against h - h_c.
inline ExponentFit exponent_fit(const PinningKernel& kernel, std::span<const double> h_offsets) {
    detail::require(h_offsets.size() >= 2, "exponent_fit: need at least 2 grid points");
    ExponentFit out;
    std::vector<double> lx, ly;
    const double hc = pinning_critical_point(kernel);
    for (double d : h_offsets) {
        detail::require(d > 0.0 && d <= 0.1, "exponent_fit: offsets h - h_c must lie in (0, 0.1]");
        const double f = pinning_free_energy(kernel, hc + d);
        if (!(f > 0.0)) throw NumericalError("exponent_fit: free energy vanished on the grid");
        out.h.push_back(d);
        out.f.push_back(f);
        lx.push_back(std::log(d));
        ly.push_back(std::log(f));
    }
    const auto fit = stats::linear_fit(lx, ly);
    out.exponent = fit.slope;
    out.constant = std::exp(fit.intercept);
    out.exponent_stderr = fit.slope_stderr;
    out.log_constant_stderr = fit.intercept_stderr;
    return out;
}

}  // namespace lapin
