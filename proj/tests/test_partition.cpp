#include <gtest/gtest.h>

#include <random>

#include "lapin/parallel.hpp"
#include "lapin/partition.hpp"
#include "oracles.hpp"

using namespace lapin;

namespace {

std::vector<double> weights(const DisorderVector& d, double beta) {
    std::vector<double> b(d.omega.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::exp(beta * d.omega[i]);
    return b;
}

}  // namespace

TEST(Partition, MatchesBruteForce) {
    for (int n = 1; n <= 10; ++n) {
        for (double beta : {0.0, 0.6}) {
            const auto d = sample_disorder(n, 100 + n);
            const auto b = weights(d, beta);
            for (double eps : {0.0, 0.3, 1.0, 2.5}) {
                const double ref = oracle::brute_partition(b, eps);
                const auto z = partition_enumerate({beta, eps, n}, d);
                EXPECT_NEAR(std::exp(z.log_value), ref, 1e-11 * ref) << "n=" << n << " eps=" << eps;
            }
        }
    }
}

TEST(Partition, IncrementalEqualsRecompute) {
    const int n = 14;
    const auto d = sample_disorder(n, 7);
    for (double eps : {0.2, 1.0, 3.0}) {
        const ModelParams p{0.8, eps, n};
        const double a = partition_enumerate(p, d, EnumerationMethod::incremental).log_value;
        const double r = partition_enumerate(p, d, EnumerationMethod::recompute).log_value;
        EXPECT_NEAR(a, r, 1e-12 * std::abs(r) + 1e-12);
    }
}

TEST(Partition, ZeroEpsIsClosedForm) {
    for (int n : {2, 5, 12, 20}) {
        const auto d = sample_disorder(n, 9);
        const auto b = weights(d, 0.5);
        const double expected = -0.5 * kLogTwoPi - 0.5 * log_det_closed_form(WeightSeq(b));
        EXPECT_NEAR(partition_enumerate({0.5, 0.0, n}, d).log_value, expected, 1e-12 * std::abs(expected));
    }
}

TEST(Partition, AdjustedEqualsValueTimesHalfProduct) {
    const int n = 9;
    const auto d = sample_disorder(n, 3);
    const ModelParams p{1.0, 0.7, n};
    double half = 0.0;
    for (double w : d.omega) half += 0.5 * w;
    EXPECT_NEAR(adjusted_partition(p, d).log_value, partition_enumerate(p, d).log_value + half, 1e-12);
}

TEST(Partition, NoDoubleReturnMatchesBruteForce) {
    const auto d = sample_disorder(14, 21);
    const auto b = weights(d, 0.7);
    const auto polys = no_double_return_polynomials(b, 14);
    for (int N = 1; N <= 14; ++N)
        for (double eps : {0.5, 1.2}) {
            const double ref = oracle::brute_no_double_return(b, N, eps);
            if (N == 2) {
                EXPECT_EQ(polys[N].value(eps), 0.0);
                continue;
            }
            EXPECT_NEAR(polys[N].value(eps), ref, 1e-11 * ref) << "N=" << N;
        }
}

TEST(Partition, RenewalSeedsAreExact) {
    const double s = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);
    EXPECT_NEAR(std::exp(partition_no_double_return(0.7, 1).log_value), s, 1e-16);
    EXPECT_EQ(partition_no_double_return(0.7, 2).log_value, -INFINITY);
    const std::vector<double> ones(2, 1.0);
    EXPECT_NEAR(renewal_partition_polynomials(ones, 2)[2].value(1.0), s * s, 1e-16);
}

TEST(Partition, RenewalIdentityHoldsWithDisorder) {
    for (int n = 3; n <= 16; ++n) {
        const auto d = sample_disorder(n, 40 + n);
        const auto b = weights(d, 0.9);
        for (double eps : {0.1, 1.0, 2.0}) {
            EXPECT_LT(renewal_identity_check(eps, n).residual, 1e-12);
            EXPECT_LT(renewal_identity_check(eps, n, std::span<const double>(b.data(), static_cast<std::size_t>(n))).residual, 1e-12);
        }
    }
}

TEST(Partition, ThreadCountDoesNotChangeBits) {
    const auto d = sample_disorder(18, 5);
    const auto b = weights(d, 1.0);
    set_thread_count(1);
    const auto one = partition_polynomials(b, 18);
    set_thread_count(4);
    const auto four = partition_polynomials(b, 18);
    set_thread_count(0);
    for (int k = 1; k <= 18; ++k) EXPECT_EQ(one[k].coef, four[k].coef);
}

TEST(Partition, CapsAreEnforced) {
    const std::vector<double> b(60, 1.0);
    EXPECT_THROW(partition_polynomials(b, kMaxEnumerationSize + 1), std::out_of_range);
    EXPECT_THROW(no_double_return_polynomials(b, kMaxNoDoubleReturnSize + 1), std::out_of_range);
    EXPECT_THROW(partition_no_double_return(1.0, kMaxNoDoubleReturnSize + 1), std::out_of_range);
    EXPECT_THROW(partition_enumerate({0.0, -1.0, 4}, zero_disorder(4)), std::invalid_argument);
}

TEST(Partition, TnStatistic) {
    const int n = 1000;
    const auto flat = tn_statistic(0.0, n, zero_disorder(n));
    EXPECT_NEAR(flat.normalized, 0.5 * n / (n + 1.0), 1e-12);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = tn_statistic(0.8, n, sample_disorder(n, seed));
        EXPECT_TRUE(r.bracket_within_bounds) << r.bracket_ratio;
    }
}

TEST(Partition, CsvRowRoundTrips) {
    const auto d = sample_disorder(6, 2);
    const ModelParams p{0.5, 1.25, 6};
    const auto row = partition_csv_row(p, d);
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 6);
    const double logz = std::stod(row.substr(row.find(',', row.find(',', row.find(',', row.find(',') + 1) + 1) + 1) + 1));
    EXPECT_EQ(logz, partition_enumerate(p, d).log_value);
}
