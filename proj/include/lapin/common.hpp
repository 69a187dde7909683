#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lapin {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline const double kLogTwoPi = std::log(kTwoPi);

/// A numerical precondition failed (grid audit, pivot breakdown, bracketing).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An internal cross-check between two independent routes disagreed.
class ConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
    if (a == -INFINITY) return b;
    if (b == -INFINITY) return a;
    const double hi = a > b ? a : b;
    const double lo = a > b ? b : a;
    return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace detail
}  // namespace lapin
