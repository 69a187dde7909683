#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lapin/common.hpp"
#include "lapin/detkit.hpp"
#include "lapin/model.hpp"
#include "lapin/parallel.hpp"

namespace lapin {

inline constexpr int kMaxEnumerationSize = 24;
inline constexpr int kMaxNoDoubleReturnSize = 40;

struct PartitionValue {
    double log_value = 0.0;
    int n = 0;
    double beta = 0.0;
    double eps = 0.0;
    std::uint64_t seed = 0;
};

/// A partition function as a polynomial in eps. Coefficients are stored for the
/// adjusted quantity (multiplied by prod exp(beta omega_m / 2) over the bonds),
/// which keeps them O(1) for any disorder; log_adjust is the log of that factor.
struct PartitionPolynomial {
    std::vector<double> coef;
    double log_adjust = 0.0;

    /// log of the adjusted value sum_l coef[l] eps^l.
    double log_adjusted(double eps) const {
        if (eps == 0.0) return coef.empty() || coef[0] <= 0.0 ? -INFINITY : std::log(coef[0]);
        const double le = std::log(eps);
        double acc = -INFINITY;
        for (std::size_t l = 0; l < coef.size(); ++l)
            if (coef[l] > 0.0) acc = detail::log_add(acc, std::log(coef[l]) + static_cast<double>(l) * le);
        return acc;
    }
    double log_value(double eps) const { return log_adjusted(eps) - log_adjust; }
    double adjusted(double eps) const { return std::exp(log_adjusted(eps)); }
    double value(double eps) const { return std::exp(log_value(eps)); }
};

enum class EnumerationMethod { incremental, recompute };

namespace detail {

struct DfsNode {
    BandedCursor cur;
    int depth = 0;  // sites 1..depth are decided
    int l = 0;      // number of pinned sites
    bool last_pinned = false;
};

using CoefTable = std::vector<std::vector<double>>;

// Depth-first walk over contact sets with shared prefixes: each node adds one
// site to the LDL^T cursor, so every node costs O(1). A node at depth d is a
// contact set of the chain of size d + 1.
//   full mode: node contributes to Z_{d+1}
//   no-double-return mode: pins are never adjacent, site 1 is never pinned,
//   and a node whose last site is free contributes to the renewal piece of
//   length d + 2 (one extra (2 pi)^{-1/2} for the closing bond).
template <bool NoDoubleReturn>
class PrefixEnumerator {
public:
    PrefixEnumerator(std::span<const double> b, int max_site) : b_(b), max_site_(max_site) {
        half_log_prefix_.assign(b.size() + 1, 0.0);
        for (std::size_t i = 0; i < b.size(); ++i) half_log_prefix_[i + 1] = half_log_prefix_[i] + 0.5 * std::log(b[i]);
        const int extra = NoDoubleReturn ? 2 : 1;
        pow_.resize(static_cast<std::size_t>(max_site) + 2);
        for (std::size_t l = 0; l < pow_.size(); ++l) pow_[l] = std::exp(-0.5 * (static_cast<double>(l) + extra) * kLogTwoPi);
    }

    int table_size() const { return max_site_ + (NoDoubleReturn ? 3 : 2); }
    CoefTable empty_table() const {
        return CoefTable(static_cast<std::size_t>(table_size()), std::vector<double>(static_cast<std::size_t>(max_site_) + 1, 0.0));
    }
    double half_log_prefix(int k) const { return half_log_prefix_[k]; }

    void record(const DfsNode& nd, CoefTable& t) const {
        if constexpr (NoDoubleReturn) {
            if (nd.depth < 1 || nd.last_pinned) return;
        }
        const int bonds = nd.depth + 2;
        const double term = pow_[nd.l] * std::exp(half_log_prefix_[bonds] - 0.5 * nd.cur.log_det);
        t[NoDoubleReturn ? nd.depth + 2 : nd.depth + 1][nd.l] += term;
    }

    bool may_pin(const DfsNode& nd) const {
        if constexpr (NoDoubleReturn) return nd.depth + 1 != 1 && !nd.last_pinned;
        return true;
    }

    void descend(const DfsNode& nd, CoefTable& t) const {
        record(nd, t);
        if (nd.depth == max_site_) return;
        const int next = nd.depth + 1;
        DfsNode free_child = nd;
        free_child.cur.push(b_, next);
        free_child.depth = next;
        free_child.last_pinned = false;
        descend(free_child, t);
        if (may_pin(nd)) {
            DfsNode pinned = nd;
            pinned.depth = next;
            pinned.l += 1;
            pinned.last_pinned = true;
            descend(pinned, t);
        }
    }

    // Expands the top `split` levels serially, recording their nodes into t,
    // and returns the frontier subtrees in a fixed order.
    void collect(const DfsNode& nd, int split, CoefTable& t, std::vector<DfsNode>& frontier) const {
        if (nd.depth == split || nd.depth == max_site_) {
            frontier.push_back(nd);
            return;
        }
        record(nd, t);
        const int next = nd.depth + 1;
        DfsNode free_child = nd;
        free_child.cur.push(b_, next);
        free_child.depth = next;
        free_child.last_pinned = false;
        collect(free_child, split, t, frontier);
        if (may_pin(nd)) {
            DfsNode pinned = nd;
            pinned.depth = next;
            pinned.l += 1;
            pinned.last_pinned = true;
            collect(pinned, split, t, frontier);
        }
    }

    /// Full table; the split depth is fixed so the summation order does not
    /// depend on the worker count.
    CoefTable run() const {
        CoefTable total = empty_table();
        std::vector<DfsNode> frontier;
        collect(DfsNode{}, std::min(max_site_, 10), total, frontier);
        std::vector<CoefTable> slots(frontier.size());
        parallel_for(frontier.size(), [&](std::size_t i) {
            slots[i] = empty_table();
            descend(frontier[i], slots[i]);
        });
        for (const auto& s : slots)
            for (std::size_t k = 0; k < s.size(); ++k)
                for (std::size_t l = 0; l < s[k].size(); ++l) total[k][l] += s[k][l];
        return total;
    }

private:
    std::span<const double> b_;
    int max_site_;
    std::vector<double> half_log_prefix_;
    std::vector<double> pow_;
};

inline void trim(std::vector<double>& c) {
    while (c.size() > 1 && c.back() == 0.0) c.pop_back();
}

inline std::vector<double> weights_of(double beta, const DisorderVector& d) {
    std::vector<double> b(d.omega.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::exp(beta * d.omega[i]);
    return b;
}

}  // namespace detail

/// Z_1..Z_nmax for the prefixes of one weight sequence (b must hold at least
/// nmax + 1 entries). Entry k of the result is Z_k; entry 0 is empty.
inline std::vector<PartitionPolynomial> partition_polynomials(std::span<const double> b, int nmax) {
    detail::require(nmax >= 1, "partition_polynomials: nmax must be >= 1");
    detail::require(static_cast<int>(b.size()) >= nmax + 1, "partition_polynomials: not enough weights");
    if (nmax > kMaxEnumerationSize)
        throw std::out_of_range("partition_polynomials: n = " + std::to_string(nmax) + " exceeds the enumeration cap " +
                                std::to_string(kMaxEnumerationSize));
    detail::PrefixEnumerator<false> en(b, nmax - 1);
    auto table = en.run();
    std::vector<PartitionPolynomial> out(static_cast<std::size_t>(nmax) + 1);
    for (int k = 1; k <= nmax; ++k) {
        out[k].coef = table[k];
        detail::trim(out[k].coef);
        out[k].log_adjust = en.half_log_prefix(k + 1);
    }
    return out;
}

/// Renewal pieces without double returns, entries 1..nmax (entry 0 empty).
/// Piece N runs from the zero pair (-1, 0) to the zero pair (N-1, N) over the
/// bonds b_0..b_{N-1} and has no other pair of adjacent zeros; piece 2 is 0
/// and piece 1 is (2 pi)^{-1/2}.
inline std::vector<PartitionPolynomial> no_double_return_polynomials(std::span<const double> b, int nmax) {
    detail::require(nmax >= 1, "no_double_return_polynomials: nmax must be >= 1");
    detail::require(static_cast<int>(b.size()) >= nmax, "no_double_return_polynomials: not enough weights");
    if (nmax > kMaxNoDoubleReturnSize)
        throw std::out_of_range("no_double_return_polynomials: n = " + std::to_string(nmax) + " exceeds the cap " +
                                std::to_string(kMaxNoDoubleReturnSize));
    std::vector<PartitionPolynomial> out(static_cast<std::size_t>(nmax) + 1);
    out[1].coef = {std::exp(-0.5 * kLogTwoPi + 0.5 * std::log(b[0]))};
    out[1].log_adjust = 0.5 * std::log(b[0]);
    if (nmax >= 2) {
        out[2].coef = {0.0};
        out[2].log_adjust = 0.5 * (std::log(b[0]) + std::log(b[1]));
    }
    if (nmax >= 3) {
        detail::PrefixEnumerator<true> en(b, nmax - 2);
        auto table = en.run();
        for (int k = 3; k <= nmax; ++k) {
            out[k].coef = table[k];
            detail::trim(out[k].coef);
            out[k].log_adjust = en.half_log_prefix(k);
        }
    }
    return out;
}

/// Full-chain renewal partition function from the zero pair (-1, 0) to the
/// zero pair (N-1, N) over bonds b_0..b_{N-1}, for N = 1..nmax.
inline std::vector<PartitionPolynomial> renewal_partition_polynomials(std::span<const double> b, int nmax) {
    detail::require(nmax >= 1, "renewal_partition_polynomials: nmax must be >= 1");
    detail::require(static_cast<int>(b.size()) >= nmax, "renewal_partition_polynomials: not enough weights");
    std::vector<PartitionPolynomial> out(static_cast<std::size_t>(nmax) + 1);
    out[1].coef = {std::exp(-0.5 * kLogTwoPi + 0.5 * std::log(b[0]))};
    out[1].log_adjust = 0.5 * std::log(b[0]);
    if (nmax >= 2) {
        const auto z = partition_polynomials(b, nmax - 1);
        const double s = std::exp(-0.5 * kLogTwoPi);
        for (int k = 2; k <= nmax; ++k) {
            out[k] = z[k - 1];
            for (double& c : out[k].coef) c *= s;
        }
    }
    return out;
}

namespace detail {

inline PartitionPolynomial enumerate_recompute(std::span<const double> b, int n) {
    PartitionPolynomial p;
    p.coef.assign(static_cast<std::size_t>(n), 0.0);
    double half_log = 0.0;
    for (int i = 0; i <= n; ++i) half_log += 0.5 * std::log(b[i]);
    p.log_adjust = half_log;
    const int sites = n - 1;
    const std::uint64_t count = std::uint64_t{1} << sites;
    std::vector<int> pins;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        pins.clear();
        for (int s = 0; s < sites; ++s)
            if (mask >> s & 1u) pins.push_back(s + 1);
        const double ld = log_det_range(b, 1, n - 1, pins);
        const int l = static_cast<int>(pins.size());
        p.coef[l] += std::exp(-0.5 * (l + 1) * kLogTwoPi + half_log - 0.5 * ld);
    }
    trim(p.coef);
    return p;
}

inline void check_disorder(const ModelParams& params, const DisorderVector& disorder) {
    params.validate();
    if (disorder.n() != params.n)
        throw std::invalid_argument("disorder has " + std::to_string(disorder.omega.size()) + " charges, expected n+1 = " +
                                    std::to_string(params.n + 1));
    if (params.n > kMaxEnumerationSize)
        throw std::out_of_range("partition_enumerate: n = " + std::to_string(params.n) + " exceeds the enumeration cap " +
                                std::to_string(kMaxEnumerationSize));
}

inline PartitionPolynomial chain_polynomial(const ModelParams& params, const DisorderVector& disorder, EnumerationMethod method) {
    check_disorder(params, disorder);
    const auto b = weights_of(params.beta, disorder);
    if (method == EnumerationMethod::recompute) return enumerate_recompute(b, params.n);
    return partition_polynomials(b, params.n)[params.n];
}

}  // namespace detail

/// Exact Z_n by enumeration of all contact sets (n <= 24).
inline PartitionValue partition_enumerate(const ModelParams& params, const DisorderVector& disorder,
                                          EnumerationMethod method = EnumerationMethod::incremental) {
    const auto poly = detail::chain_polynomial(params, disorder, method);
    return {poly.log_value(params.eps), params.n, params.beta, params.eps, disorder.seed};
}

/// Adjusted partition function prod exp(beta omega_i / 2) * Z_n.
inline PartitionValue adjusted_partition(const ModelParams& params, const DisorderVector& disorder,
                                         EnumerationMethod method = EnumerationMethod::incremental) {
    const auto poly = detail::chain_polynomial(params, disorder, method);
    return {poly.log_adjusted(params.eps), params.n, params.beta, params.eps, disorder.seed};
}

/// Non-random no-double-return piece of length n (see no_double_return_polynomials).
inline PartitionValue partition_no_double_return(double eps, int n) {
    detail::require(eps >= 0.0, "partition_no_double_return: eps must be >= 0");
    detail::require(n >= 1, "partition_no_double_return: n must be >= 1");
    if (n > kMaxNoDoubleReturnSize)
        throw std::out_of_range("partition_no_double_return: n exceeds the cap " + std::to_string(kMaxNoDoubleReturnSize));
    const std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
    const auto p = no_double_return_polynomials(ones, n);
    return {p[n].log_value(eps), n, 0.0, eps, 0};
}

struct RenewalIdentityReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;  // |lhs - rhs| / lhs
};

/// Decomposes the renewal partition function of length n at its first double
/// return after the left boundary. b holds bonds b_0..b_{n-1}; an empty span
/// means the non-random chain. Pieces to the right use the shifted bonds.
inline RenewalIdentityReport renewal_identity_check(double eps, int n, std::span<const double> b = {}) {
    detail::require(n >= 3, "renewal_identity_check: n must be >= 3");
    detail::require(n <= 20, "renewal_identity_check: n must be <= 20");
    detail::require(eps >= 0.0, "renewal_identity_check: eps must be >= 0");
    std::vector<double> w(b.begin(), b.end());
    if (w.empty()) w.assign(static_cast<std::size_t>(n), 1.0);
    detail::require(static_cast<int>(w.size()) >= n, "renewal_identity_check: need n bond weights");
    const auto zc = no_double_return_polynomials(w, n);
    auto z_from = [&](int chi) {  // renewal partition function over bonds chi..n-1
        std::span<const double> tail(w.data() + chi, static_cast<std::size_t>(n - chi));
        return renewal_partition_polynomials(tail, n - chi)[n - chi].value(eps);
    };
    RenewalIdentityReport rep;
    rep.lhs = renewal_partition_polynomials(w, n)[n].value(eps);
    double rhs = zc[n].value(eps) + zc[1].value(eps) * eps * z_from(1);
    for (int chi = 3; chi <= n - 2; ++chi) rhs += zc[chi].value(eps) * eps * eps * z_from(chi);
    rhs += zc[n - 1].value(eps) * eps * z_from(n - 1);
    rep.rhs = rhs;
    rep.residual = std::abs(rep.lhs - rep.rhs) / rep.lhs;
    return rep;
}

struct TnReport {
    double normalized = 0.0;  // (n+1)^{-2} T_n
    double bracket_ratio = 0.0;
    bool bracket_within_bounds = false;  // T_n <= bracket <= n^2 T_n
};

/// T_n = sum_{0<=i<j<=n} exp(-beta w_i) exp(-beta w_j), normalized by (n+1)^2,
/// and the position of the closed-form determinant bracket relative to it.
inline TnReport tn_statistic(double beta, int n, const DisorderVector& disorder) {
    detail::require(n >= 1, "tn_statistic: n must be >= 1");
    detail::require(disorder.n() >= n, "tn_statistic: disorder too short");
    std::vector<double> c(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) c[i] = std::exp(-beta * disorder.omega[i]);
    double running = 0.0, tn = 0.0;
    for (double v : c) {
        tn += v * running;
        running += v;
    }
    const double bracket = closed_form_bracket(c);
    TnReport rep;
    rep.normalized = tn / ((n + 1.0) * (n + 1.0));
    rep.bracket_ratio = bracket / tn;
    const double nn = static_cast<double>(n) * n;
    rep.bracket_within_bounds = rep.bracket_ratio >= 1.0 - 1e-12 && rep.bracket_ratio <= nn * (1.0 + 1e-12);
    return rep;
}

/// CSV header and row: n, eps, beta, seed, log Z, log adjusted Z, log no-double-return piece.
inline std::string partition_csv_header() { return "n,eps,beta,seed,log_Z,log_Z_adjusted,log_Z_nodr"; }

inline std::string partition_csv_row(const ModelParams& params, const DisorderVector& disorder) {
    detail::check_disorder(params, disorder);
    const auto b = detail::weights_of(params.beta, disorder);
    const auto poly = partition_polynomials(b, params.n)[params.n];
    const auto nodr = no_double_return_polynomials(b, params.n)[params.n];
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << params.n << ',' << params.eps << ',' << params.beta << ',' << disorder.seed << ',' << poly.log_value(params.eps) << ','
       << poly.log_adjusted(params.eps) << ',' << nodr.log_value(params.eps);
    return os.str();
}

}  // namespace lapin
