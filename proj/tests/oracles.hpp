#pragma once

// Independent reference implementations used only by the tests.

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;
template <class T>
using MatrixT = std::vector<std::vector<T>>;

/// Precision matrix of the free sites 1..n-1 assembled as D^T diag(b) D, where
/// row m of D is the second difference at site m (m = 0..n) with
/// phi_{-1} = phi_0 = phi_n = phi_{n+1} = 0. Pinned sites are dropped.
template <class T = double>
inline MatrixT<T> laplacian_precision(const std::vector<double>& b, const std::vector<int>& pins = {}) {
    const int n = static_cast<int>(b.size()) - 1;
    std::vector<int> free_sites;
    for (int s = 1; s <= n - 1; ++s) {
        bool pinned = false;
        for (int p : pins) pinned |= p == s;
        if (!pinned) free_sites.push_back(s);
    }
    const std::size_t d = free_sites.size();
    MatrixT<T> D(static_cast<std::size_t>(n) + 1, std::vector<T>(d, T(0)));
    for (std::size_t c = 0; c < d; ++c) {
        const int s = free_sites[c];
        for (int m = 0; m <= n; ++m) {
            if (m == s) D[m][c] = -2.0;
            if (m == s - 1 || m == s + 1) D[m][c] = 1.0;
        }
    }
    MatrixT<T> B(d, std::vector<T>(d, T(0)));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            for (int m = 0; m <= n; ++m) B[i][j] += D[m][i] * static_cast<T>(b[m]) * D[m][j];
    return B;
}

/// log |det A| and its sign by LU with partial pivoting, carried out in the
/// scalar type of the matrix (long double for ill-conditioned checks).
template <class T>
inline std::pair<double, int> dense_log_det(MatrixT<T> A) {
    const std::size_t d = A.size();
    T log_abs = 0;
    int sign = 1;
    for (std::size_t k = 0; k < d; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < d; ++i)
            if (std::abs(A[i][k]) > std::abs(A[piv][k])) piv = i;
        if (A[piv][k] == 0) return {-INFINITY, 0};
        if (piv != k) {
            std::swap(A[piv], A[k]);
            sign = -sign;
        }
        if (A[k][k] < 0) sign = -sign;
        log_abs += std::log(std::abs(A[k][k]));
        for (std::size_t i = k + 1; i < d; ++i) {
            const T f = A[i][k] / A[k][k];
            if (f == 0) continue;
            for (std::size_t j = k; j < d; ++j) A[i][j] -= f * A[k][j];
        }
    }
    return {static_cast<double>(log_abs), sign};
}

using boost::multiprecision::cpp_int;

/// Exact determinant of an integer matrix (Bareiss fraction-free elimination).
inline cpp_int bareiss_det(std::vector<std::vector<cpp_int>> A) {
    const std::size_t d = A.size();
    if (d == 0) return 1;
    cpp_int prev = 1;
    int sign = 1;
    for (std::size_t k = 0; k + 1 < d; ++k) {
        if (A[k][k] == 0) {
            std::size_t r = k + 1;
            while (r < d && A[r][k] == 0) ++r;
            if (r == d) return 0;
            std::swap(A[r], A[k]);
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < d; ++i)
            for (std::size_t j = k + 1; j < d; ++j) A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) / prev;
        prev = A[k][k];
    }
    return sign * A[d - 1][d - 1];
}

/// Exact integer precision matrix of the unpinned non-random chain of size n.
inline std::vector<std::vector<cpp_int>> integer_precision(int n) {
    const auto B = laplacian_precision(std::vector<double>(static_cast<std::size_t>(n) + 1, 1.0));
    std::vector<std::vector<cpp_int>> out(B.size(), std::vector<cpp_int>(B.size()));
    for (std::size_t i = 0; i < B.size(); ++i)
        for (std::size_t j = 0; j < B.size(); ++j) out[i][j] = static_cast<long long>(std::llround(B[i][j]));
    return out;
}

inline const double kLog2Pi = std::log(2.0 * 3.14159265358979323846);

/// Z_n = sum_S eps^|S| (2 pi)^{-(|S|+1)/2} det(B_{-S})^{-1/2} by brute force.
inline double brute_partition(const std::vector<double>& b, double eps) {
    const int n = static_cast<int>(b.size()) - 1;
    const int sites = n - 1;
    double z = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << sites); ++mask) {
        std::vector<int> pins;
        for (int s = 0; s < sites; ++s)
            if (mask >> s & 1u) pins.push_back(s + 1);
        const int l = static_cast<int>(pins.size());
        const auto B = laplacian_precision(b, pins);
        const double ld = B.empty() ? 0.0 : dense_log_det(B).first;
        z += std::pow(eps, l) * std::exp(-0.5 * (l + 1) * kLog2Pi - 0.5 * ld);
    }
    return z;
}

/// Renewal piece of length N without double returns, over bonds b_0..b_{N-1}:
/// (2 pi)^{-1/2} times the chain of size N-1 restricted to contact sets with no
/// two adjacent pins, site 1 free, and site N-2 free.
inline double brute_no_double_return(const std::vector<double>& b, int N, double eps) {
    if (N == 1) return std::exp(-0.5 * kLog2Pi);
    if (N == 2) return 0.0;
    const int n = N - 1;
    std::vector<double> w(b.begin(), b.begin() + N);
    const int sites = n - 1;
    double z = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << sites); ++mask) {
        if (mask & (mask >> 1)) continue;
        if (mask & 1u) continue;
        if (mask >> (sites - 1) & 1u) continue;
        std::vector<int> pins;
        for (int s = 0; s < sites; ++s)
            if (mask >> s & 1u) pins.push_back(s + 1);
        const int l = static_cast<int>(pins.size());
        const auto B = laplacian_precision(w, pins);
        const double ld = B.empty() ? 0.0 : dense_log_det(B).first;
        z += std::pow(eps, l) * std::exp(-0.5 * (l + 2) * kLog2Pi - 0.5 * ld);
    }
    return z;
}

}  // namespace oracle
