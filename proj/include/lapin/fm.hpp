#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lapin/common.hpp"
#include "lapin/model.hpp"
#include "lapin/parallel.hpp"
#include "lapin/partition.hpp"
#include "lapin/rng.hpp"
#include "lapin/stats.hpp"

// Fractional moments are taken of the closed partition function Zc_N: the
// renewal configurations that start with the zero pair (-1, 0) and end with
// the zero pair (N-1, N), carrying eps per pinned site including the pinned
// sites of the closing pair (Zc_0 = 1, Zc_1 = eps * piece_1). It is a pure
// renewal in the no-double-return pieces with weights a_1 = eps piece_1 and
// a_n = eps^2 piece_n, and factors over disjoint blocks of bonds. All values
// are adjusted by prod exp(beta omega_m / 2) over the bonds 0..N-1.

namespace lapin {

inline constexpr int kMaxMomentSize = 20;
inline constexpr double kGaussianCM = 0.5;  // half the max of (log M)'' over |t| <= 1

struct FMParams {
    double beta = 0.0;
    double c = 0.0;
    double Delta = 0.0;
    long k = 0;
    double lambda = 0.0;
    double gamma = 0.0;

    double sign_margin() const { return Delta - beta * lambda / 2.0; }
};

/// Delta = c beta^2 / L^2, k = floor(L^2 / (c beta^2)), lambda = sqrt(c) beta / L^2,
/// gamma = 1 - 1/log k, with L = log(1 + 1/beta).
inline FMParams choose_params(double beta, double c) {
    detail::require(beta > 0.0 && std::isfinite(beta), "choose_params: beta must be > 0 (no disorder, no gap to certify)");
    detail::require(c > 0.0 && std::isfinite(c), "choose_params: c must be > 0");
    const double L = std::log1p(1.0 / beta);
    FMParams p;
    p.beta = beta;
    p.c = c;
    p.Delta = c * beta * beta / (L * L);
    const double kk = std::floor(L * L / (c * beta * beta));
    detail::require(kk >= 3.0, "choose_params: k = " + std::to_string(kk) + " < 3");
    detail::require(kk < 1e15, "choose_params: k overflows");
    p.k = static_cast<long>(kk);
    p.lambda = std::sqrt(c) * beta / (L * L);
    p.gamma = 1.0 - 1.0 / std::log(static_cast<double>(p.k));
    if (!(p.sign_margin() < 0.0))
        throw std::invalid_argument("choose_params: Delta - beta lambda / 2 = " + std::to_string(p.sign_margin()) +
                                    " is not negative (requires c < 1/4)");
    return p;
}

struct MomentEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

namespace detail {

inline std::vector<double> bond_weights(double beta, std::uint64_t seed, int bonds, double shift = 0.0) {
    const auto d = sample_disorder(std::max(1, bonds - 1), seed, shift);
    std::vector<double> b(static_cast<std::size_t>(bonds));
    for (int j = 0; j < bonds; ++j) b[j] = std::exp(beta * d.omega[j]);
    return b;
}

/// Adjusted closed partition functions Zc_0..Zc_smax for one weight vector.
inline std::vector<double> closed_partitions(std::span<const double> b, int smax, double eps) {
    std::vector<double> out(static_cast<std::size_t>(smax) + 1, 0.0);
    out[0] = 1.0;
    if (smax >= 1) {
        const auto ren = renewal_partition_polynomials(b, smax);
        out[1] = eps * ren[1].adjusted(eps);
        for (int s = 2; s <= smax; ++s) out[s] = eps * eps * ren[s].adjusted(eps);
    }
    return out;
}

inline std::uint64_t stream(std::uint64_t seed, std::uint64_t salt) { return rng::derive_seed(seed, salt); }

}  // namespace detail

/// A_s = E Zc_s^gamma for s = 0..smax by Monte Carlo (one enumeration per
/// realization serves every s).
inline std::vector<MomentEstimate> fractional_moments(int smax, double gamma, double beta, double eps, int n_samples,
                                                      std::uint64_t seed) {
    detail::require(smax >= 0 && smax <= kMaxMomentSize, "fractional_moment: s must lie in [0, 20]");
    detail::require(gamma > 0.0 && gamma <= 1.0, "fractional_moment: gamma must lie in (0, 1]");
    detail::require(n_samples >= 2, "fractional_moment: need at least 2 samples");
    std::vector<std::vector<double>> slots(static_cast<std::size_t>(n_samples));
    parallel_for(slots.size(), [&](std::size_t i) {
        const auto b = detail::bond_weights(beta, detail::stream(seed, i), std::max(smax, 1));
        auto z = detail::closed_partitions(b, smax, eps);
        for (double& v : z) v = std::pow(v, gamma);
        slots[i] = std::move(z);
    });
    std::vector<MomentEstimate> out(static_cast<std::size_t>(smax) + 1);
    std::vector<double> col(slots.size());
    for (int s = 0; s <= smax; ++s) {
        for (std::size_t i = 0; i < slots.size(); ++i) col[i] = slots[i][s];
        const auto m = stats::mean_stderr(col);
        out[s] = {m.mean, m.stderr_};
    }
    return out;
}

inline MomentEstimate fractional_moment(int s, double gamma, double beta, double eps, int n_samples, std::uint64_t seed) {
    return fractional_moments(s, gamma, beta, eps, n_samples, seed)[s];
}

struct TiltedEstimate {
    MomentEstimate reweighted;     // base law with the explicit Radon-Nikodym weight
    MomentEstimate shifted;        // charges drawn with mean -lambda
    MomentEstimate normalization;  // E[weight] under the base law
    bool consistent = false;       // the two estimators agree within 3 combined sigma
};

/// E~ Zc_s under dP~/dP = exp(-lambda sum_{i<s} omega_i) / M(-lambda)^s, the
/// tilt acting on the s charges that Zc_s depends on.
inline TiltedEstimate tilted_expectation(int s, double lambda, double beta, double eps, int n_samples, std::uint64_t seed) {
    detail::require(s >= 1 && s <= kMaxMomentSize, "tilted_expectation: s must lie in [1, 20]");
    detail::require(n_samples >= 2, "tilted_expectation: need at least 2 samples");
    std::vector<double> a(static_cast<std::size_t>(n_samples)), w(a.size()), sh(a.size());
    const double log_norm = s * log_mgf(-lambda);
    parallel_for(a.size(), [&](std::size_t i) {
        const auto sa = detail::stream(seed, 2 * i);
        const auto d = sample_disorder(s, sa);
        std::vector<double> b(static_cast<std::size_t>(s));
        double sum = 0.0;
        for (int j = 0; j < s; ++j) {
            b[j] = std::exp(beta * d.omega[j]);
            sum += d.omega[j];
        }
        w[i] = std::exp(-lambda * sum - log_norm);
        a[i] = detail::closed_partitions(b, s, eps)[s] * w[i];
        const auto bs = detail::bond_weights(beta, detail::stream(seed, 2 * i + 1), s, -lambda);
        sh[i] = detail::closed_partitions(bs, s, eps)[s];
    });
    TiltedEstimate t;
    const auto ma = stats::mean_stderr(a), ms = stats::mean_stderr(sh), mw = stats::mean_stderr(w);
    t.reweighted = {ma.mean, ma.stderr_};
    t.shifted = {ms.mean, ms.stderr_};
    t.normalization = {mw.mean, mw.stderr_};
    t.consistent = std::abs(ma.mean - ms.mean) <= 3.0 * std::hypot(ma.stderr_, ms.stderr_);
    return t;
}

inline TiltedEstimate tilted_expectation(int s, const FMParams& p, double eps, int n_samples, std::uint64_t seed) {
    return tilted_expectation(s, p.lambda, p.beta, eps, n_samples, seed);
}

struct HolderReport {
    int s = 0;
    double prefactor = 0.0;  // (E~[(dP/dP~)^{1/(1-gamma)}])^{1-gamma}
    double prefactor_formula = 0.0;  // exp(gamma s log M(-lambda) + (1-gamma) s log M(lambda gamma/(1-gamma)))
    MomentEstimate lhs;   // A_s
    MomentEstimate rhs;   // prefactor * (E~ Zc_s)^gamma
    bool holds = false;   // lhs - 3 sigma <= rhs + 3 sigma
};

/// Hoelder bound A_s <= (E~[(dP/dP~)^{1/(1-gamma)}])^{1-gamma} (E~ Zc_s)^gamma.
inline HolderReport holder_bound_check(int s, const FMParams& p, double eps, int n_samples, std::uint64_t seed) {
    const double t = p.lambda * p.gamma / (1.0 - p.gamma);
    if (!(std::abs(t) <= 1.0))
        throw std::invalid_argument("holder_bound_check: |lambda gamma / (1 - gamma)| = " + std::to_string(std::abs(t)) +
                                    " > 1, outside the proviso");
    HolderReport r;
    r.s = s;
    r.prefactor = std::exp(s * p.lambda * p.lambda * p.gamma / (2.0 * (1.0 - p.gamma)));
    r.prefactor_formula = std::exp(p.gamma * s * log_mgf(-p.lambda) + (1.0 - p.gamma) * s * log_mgf(t));
    const auto A = fractional_moment(s, p.gamma, p.beta, eps, n_samples, detail::stream(seed, 0xA5));
    const auto tilt = tilted_expectation(s, p.lambda, p.beta, eps, n_samples, detail::stream(seed, 0x7E));
    r.lhs = A;
    const double e = tilt.shifted.value;
    r.rhs.value = r.prefactor * std::pow(e, p.gamma);
    r.rhs.stderr_ = r.prefactor * p.gamma * std::pow(e, p.gamma - 1.0) * tilt.shifted.stderr_;
    r.holds = r.lhs.value - 3.0 * r.lhs.stderr_ <= r.rhs.value + 3.0 * r.rhs.stderr_;
    return r;
}

// ---------------------------------------------------------------------------

struct SubadditivityReport {
    MomentEstimate lhs;  // E (sum_S t_S)^gamma
    MomentEstimate rhs;  // sum_S E t_S^gamma
    bool holds = false;
};

/// Fractional subadditivity on the contact-set decomposition of the adjusted
/// chain partition function of size n.
inline SubadditivityReport fractional_subadditivity_check(int n, double gamma, double beta, double eps, int n_samples,
                                                          std::uint64_t seed) {
    detail::require(n >= 2 && n <= 16, "fractional_subadditivity_check: n must lie in [2, 16]");
    std::vector<double> lhs(static_cast<std::size_t>(n_samples)), rhs(lhs.size());
    parallel_for(lhs.size(), [&](std::size_t i) {
        const auto d = sample_disorder(n, detail::stream(seed, i));
        std::vector<double> b(d.omega.size());
        double half_log = 0.0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            b[j] = std::exp(beta * d.omega[j]);
            half_log += 0.5 * beta * d.omega[j];
        }
        double total = 0.0, powsum = 0.0;
        const std::uint64_t count = std::uint64_t{1} << (n - 1);
        std::vector<int> pins;
        for (std::uint64_t mask = 0; mask < count; ++mask) {
            pins.clear();
            for (int s = 0; s < n - 1; ++s)
                if (mask >> s & 1u) pins.push_back(s + 1);
            const int l = static_cast<int>(pins.size());
            const double term = std::pow(eps, l) * std::exp(-0.5 * (l + 1) * kLogTwoPi + half_log -
                                                            0.5 * detail::log_det_range(b, 1, n - 1, pins));
            total += term;
            powsum += std::pow(term, gamma);
        }
        lhs[i] = std::pow(total, gamma);
        rhs[i] = powsum;
    });
    SubadditivityReport r;
    const auto ml = stats::mean_stderr(lhs), mr = stats::mean_stderr(rhs);
    r.lhs = {ml.mean, ml.stderr_};
    r.rhs = {mr.mean, mr.stderr_};
    r.holds = r.lhs.value - 3.0 * r.lhs.stderr_ <= r.rhs.value + 3.0 * r.rhs.stderr_;
    return r;
}

struct RecursionRow {
    int N = 0;
    int k = 0;
    MomentEstimate lhs;  // A_N
    MomentEstimate rhs;  // sum_{n=k+1}^N A_{N-n} sum_{s=0}^k (E a_{n-s})^gamma A_s
    bool holds = false;
};

/// Checks A_N <= sum_{n=k+1}^N A_{N-n} sum_{s=0}^k (E a_{n-s})^gamma A_s for
/// k < N <= Nmax, with a_1 = eps piece_1, a_m = eps^2 piece_m. Both sides come
/// from the same Monte Carlo samples; errors are propagated to first order.
inline std::vector<RecursionRow> recursion_check(int Nmax, const std::vector<int>& ks, double gamma, double beta, double eps,
                                                 int n_samples, std::uint64_t seed) {
    detail::require(Nmax >= 2 && Nmax <= 16, "recursion_check: Nmax must lie in [2, 16]");
    const auto A = fractional_moments(Nmax, gamma, beta, eps, n_samples, detail::stream(seed, 1));
    // E a_m by Monte Carlo over the piece's own bonds
    std::vector<std::vector<double>> slots(static_cast<std::size_t>(n_samples));
    parallel_for(slots.size(), [&](std::size_t i) {
        const auto b = detail::bond_weights(beta, detail::stream(detail::stream(seed, 2), i), Nmax);
        const auto p = no_double_return_polynomials(b, Nmax);
        std::vector<double> a(static_cast<std::size_t>(Nmax) + 1, 0.0);
        for (int m = 1; m <= Nmax; ++m) a[m] = (m == 1 ? eps : eps * eps) * p[m].adjusted(eps);
        slots[i] = std::move(a);
    });
    std::vector<MomentEstimate> Ea(static_cast<std::size_t>(Nmax) + 1);
    std::vector<double> col(slots.size());
    for (int m = 1; m <= Nmax; ++m) {
        for (std::size_t i = 0; i < slots.size(); ++i) col[i] = slots[i][m];
        const auto e = stats::mean_stderr(col);
        Ea[m] = {e.mean, e.stderr_};
    }
    std::vector<RecursionRow> rows;
    for (int k : ks) {
        for (int N = k + 1; N <= Nmax; ++N) {
            RecursionRow row;
            row.N = N;
            row.k = k;
            row.lhs = A[N];
            double val = 0.0, var = 0.0;
            for (int n = k + 1; n <= N; ++n)
                for (int s = 0; s <= k; ++s) {
                    const int m = n - s;
                    if (m < 1 || Ea[m].value <= 0.0) continue;
                    const double am = std::pow(Ea[m].value, gamma);
                    const double term = A[N - n].value * am * A[s].value;
                    val += term;
                    const double da = gamma * am / Ea[m].value * Ea[m].stderr_;
                    var += std::pow(A[s].value * am * A[N - n].stderr_, 2) + std::pow(A[N - n].value * am * A[s].stderr_, 2) +
                           std::pow(A[N - n].value * A[s].value * da, 2);
                }
            row.rhs = {val, std::sqrt(var)};
            row.holds = row.lhs.value - 3.0 * row.lhs.stderr_ <= row.rhs.value + 3.0 * row.rhs.stderr_;
            rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------

struct CBetaFit {
    double C = 0.0;
    double residual_rms = 0.0;
    int m_lo = 10;
    int m_hi = 20;
};

/// C_beta as the mean of (m+1)^2 E piece_m over m in [m_lo, m_hi] (adjusted pieces, Monte Carlo).
inline CBetaFit fit_c_beta(double beta, double eps, int n_samples, std::uint64_t seed, int m_lo = 10, int m_hi = 20) {
    detail::require(3 <= m_lo && m_lo < m_hi && m_hi <= kMaxNoDoubleReturnSize, "fit_c_beta: invalid window");
    std::vector<std::vector<double>> slots(static_cast<std::size_t>(n_samples));
    parallel_for(slots.size(), [&](std::size_t i) {
        const auto b = detail::bond_weights(beta, detail::stream(seed, i), m_hi);
        const auto p = no_double_return_polynomials(b, m_hi);
        std::vector<double> v;
        for (int m = m_lo; m <= m_hi; ++m) v.push_back(p[m].adjusted(eps));
        slots[i] = std::move(v);
    });
    std::vector<double> r;
    for (int m = m_lo; m <= m_hi; ++m) {
        double s = 0.0;
        for (const auto& v : slots) s += v[m - m_lo];
        r.push_back((m + 1.0) * (m + 1.0) * s / static_cast<double>(slots.size()));
    }
    CBetaFit f;
    f.m_lo = m_lo;
    f.m_hi = m_hi;
    const auto m = stats::mean_stderr(r);
    f.C = m.mean;
    double ss = 0.0;
    for (double v : r) ss += (v - m.mean) * (v - m.mean);
    f.residual_rms = std::sqrt(ss / static_cast<double>(r.size()));
    return f;
}

namespace detail {

// sum_{m >= M} m^{-p} for p > 1: direct head plus Euler-Maclaurin remainder.
inline double power_tail(double p, long M) {
    constexpr long head = 2000;
    double s = 0.0;
    for (long m = M; m < M + head; ++m) s += std::pow(static_cast<double>(m), -p);
    const double a = static_cast<double>(M + head);
    s += std::pow(a, 1.0 - p) / (p - 1.0) + 0.5 * std::pow(a, -p) + p * std::pow(a, -p - 1.0) / 12.0 -
         p * (p + 1.0) * (p + 2.0) * std::pow(a, -p - 3.0) / 720.0;
    return s;
}

}  // namespace detail

struct RhoEstimate {
    double rho = 0.0;
    double stderr_ = 0.0;
};

/// rho = eps^{2 gamma} sum_{n>k} sum_{s=0}^k (C / (n-s+1)^2)^gamma A_s.
inline RhoEstimate rho_estimate(const FMParams& p, double eps, double C, double C_err, const std::vector<MomentEstimate>& A) {
    if (!(2.0 * p.gamma > 1.0))
        throw std::invalid_argument("rho_estimate: 2 gamma = " + std::to_string(2.0 * p.gamma) + " <= 1 (k too small)");
    detail::require(static_cast<long>(A.size()) >= p.k + 1, "rho_estimate: A table must cover s = 0..k");
    detail::require(C > 0.0, "rho_estimate: C must be > 0");
    const double q = 2.0 * p.gamma;
    const double pre = std::pow(eps, q) * std::pow(C, p.gamma);
    double rho = 0.0, var = 0.0;
    for (long s = 0; s <= p.k; ++s) {
        const double tail = detail::power_tail(q, p.k + 2 - s);
        rho += pre * tail * A[s].value;
        var += std::pow(pre * tail * A[s].stderr_, 2);
    }
    var += std::pow(p.gamma * rho * C_err / C, 2);
    return {rho, std::sqrt(var)};
}

/// Iterates B_N = eps^{2 gamma} sum_{n=k+1}^N B_{N-n} sum_s (C/(n-s+1)^2)^gamma A_s
/// from B_s = A_s (s <= k), the upper-bound recursion that rho controls.
inline std::vector<double> iterate_bound_recursion(const FMParams& p, double eps, double C, const std::vector<MomentEstimate>& A, int Nmax) {
    detail::require(static_cast<long>(A.size()) >= p.k + 1, "iterate_bound_recursion: A table must cover s = 0..k");
    std::vector<double> B(static_cast<std::size_t>(Nmax) + 1, 0.0);
    for (long s = 0; s <= p.k && s <= Nmax; ++s) B[s] = A[s].value;
    const double pre = std::pow(eps, 2.0 * p.gamma) * std::pow(C, p.gamma);
    for (long N = p.k + 1; N <= Nmax; ++N) {
        double acc = 0.0;
        for (long n = p.k + 1; n <= N; ++n) {
            double inner = 0.0;
            for (long s = 0; s <= p.k; ++s) inner += std::pow(static_cast<double>(n - s + 1), -2.0 * p.gamma) * A[s].value;
            acc += B[N - n] * inner;
        }
        B[N] = pre * acc;
    }
    return B;
}

struct FMBudget {
    int n_samples = 400;
    std::uint64_t seed = 1;
};

struct GapCertificate {
    double beta = 0.0;
    double c = 0.0;
    FMParams params;
    double eps_c_annealed = 0.0;
    double eps = 0.0;  // eps_c^a e^Delta
    CBetaFit c_beta;
    RhoEstimate rho;
    std::vector<MomentEstimate> A;
    std::string verdict;  // certified | not_certified | inconclusive
    std::string reason;
};

/// Runs the fractional-moment pipeline at eps = eps_c^a e^Delta. The verdict is
/// certified only if rho + 3 sigma <= 1; tables beyond the enumeration reach
/// (k > 20) give an inconclusive verdict.
inline GapCertificate certify_gap(double beta, double c, double eps_c_annealed, const FMBudget& budget = {}) {
    detail::require(eps_c_annealed > 0.0, "certify_gap: annealed critical point must be > 0");
    GapCertificate g;
    g.beta = beta;
    g.c = c;
    g.params = choose_params(beta, c);
    g.eps_c_annealed = eps_c_annealed;
    g.eps = eps_c_annealed * std::exp(g.params.Delta);
    if (g.params.k > kMaxMomentSize) {
        g.verdict = "inconclusive";
        g.reason = "k = " + std::to_string(g.params.k) + " exceeds the enumeration reach of 20";
        return g;
    }
    if (!(2.0 * g.params.gamma > 1.0)) {
        g.verdict = "inconclusive";
        g.reason = "2 gamma <= 1: the n-sum in rho diverges";
        return g;
    }
    g.A = fractional_moments(static_cast<int>(g.params.k), g.params.gamma, beta, g.eps, budget.n_samples, detail::stream(budget.seed, 11));
    g.c_beta = fit_c_beta(beta, g.eps, budget.n_samples, detail::stream(budget.seed, 12));
    g.rho = rho_estimate(g.params, g.eps, g.c_beta.C, g.c_beta.residual_rms, g.A);
    if (g.rho.rho + 3.0 * g.rho.stderr_ <= 1.0) {
        g.verdict = "certified";
        g.reason = "rho + 3 sigma <= 1";
    } else {
        g.verdict = "not_certified";
        g.reason = "rho + 3 sigma > 1";
    }
    return g;
}

}  // namespace lapin
