#include <gtest/gtest.h>

#include <random>

#include "lapin/detkit.hpp"
#include "oracles.hpp"

using namespace lapin;

namespace {

std::vector<double> random_weights(std::mt19937_64& rng, int n, double beta) {
    std::normal_distribution<double> g;
    std::vector<double> b(static_cast<std::size_t>(n) + 1);
    for (double& v : b) v = std::exp(beta * g(rng));
    return b;
}

std::vector<int> random_pins(std::mt19937_64& rng, int n, double p) {
    std::bernoulli_distribution coin(p);
    std::vector<int> pins;
    for (int s = 1; s <= n - 1; ++s)
        if (coin(rng)) pins.push_back(s);
    return pins;
}

}  // namespace

TEST(Detkit, BandedMatrixMatchesAssembledLaplacian) {
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 3 + rep;
        const auto b = random_weights(rng, n, 0.8);
        const auto pins = random_pins(rng, n, 0.3);
        const auto M = build_matrix(WeightSeq(b), PinnedPattern{pins});
        const auto ref = oracle::laplacian_precision(b, pins);
        ASSERT_EQ(static_cast<std::size_t>(M.dim), ref.size());
        for (int i = 0; i < M.dim; ++i)
            for (int j = 0; j < M.dim; ++j) EXPECT_NEAR(M(i, j), ref[i][j], 1e-12 * (1.0 + std::abs(ref[i][j])));
    }
}

TEST(Detkit, BandedDeterminantMatchesDenseLU) {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 60; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 60);
        const auto b = random_weights(rng, n, 1.0);
        const auto pins = random_pins(rng, n, 0.25);
        const auto ref = oracle::dense_log_det(oracle::laplacian_precision<long double>(b, pins));
        ASSERT_EQ(ref.second, 1);
        EXPECT_NEAR(log_det_banded(WeightSeq(b), PinnedPattern{pins}), ref.first, 1e-10 * std::max(1.0, std::abs(ref.first)));
    }
}

TEST(Detkit, ClosedFormMatchesDenseAndReference) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 40; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 120);
        const auto b = random_weights(rng, n, 1.0);
        const WeightSeq w(b);
        const double ref = oracle::dense_log_det(oracle::laplacian_precision<long double>(b)).first;
        EXPECT_NEAR(log_det_closed_form(w), ref, 1e-11 * std::abs(ref) + 1e-11);
        EXPECT_NEAR(std::log(det_closed_form_reference(w)), ref, 1e-10 * std::abs(ref) + 1e-10);
    }
}

TEST(Detkit, NonRandomDeterminantIsExactInteger) {
    for (int n = 1; n <= 50; ++n) {
        const long long expected = static_cast<long long>(n) * (n + 1) * (n + 1) * (n + 2) / 12;
        EXPECT_EQ(oracle::bareiss_det(oracle::integer_precision(n)), oracle::cpp_int(expected)) << "n=" << n;
        EXPECT_EQ(std::llround(det_closed_form(WeightSeq::ones(n))), expected) << "n=" << n;
        EXPECT_EQ(std::llround(det_banded(WeightSeq::ones(n))), expected) << "n=" << n;
    }
}

TEST(Detkit, SplitMatchesBanded) {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 40; ++rep) {
        const int n = 3 + static_cast<int>(rng() % 25);
        const auto b = random_weights(rng, n, 0.7);
        auto pins = random_pins(rng, n, 0.3);
        if (pins.empty()) pins.push_back(1 + static_cast<int>(rng() % (n - 1)));
        const PinnedPattern pat{pins};
        const double ref = det_banded(WeightSeq(b), pat);
        EXPECT_NEAR(det_split(WeightSeq(b), pat), ref, 1e-9 * ref);
    }
}

TEST(Detkit, DegreeAndAffinity) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 29);
        const auto b = random_weights(rng, n, 1.0);
        const PinnedPattern pat{random_pins(rng, n, 0.3)};
        const auto rep_ = structure_check(WeightSeq(b), pat);
        EXPECT_EQ(rep_.expected_degree, n - 1 - pat.r());
        EXPECT_TRUE(rep_.degree_ok);
        EXPECT_TRUE(rep_.multilinear) << rep_.max_affinity_deviation;
    }
}

TEST(Detkit, MarginalVariancesMatchDenseInverse) {
    std::mt19937_64 rng(6);
    for (int n : {3, 5, 9, 17}) {
        const auto b = random_weights(rng, n, 0.8);
        auto A = oracle::laplacian_precision(b);
        EXPECT_THROW(det_split(WeightSeq(b), PinnedPattern{}), std::invalid_argument);
        const std::size_t d = A.size();
        // Gauss-Jordan inverse
        oracle::Matrix inv(d, std::vector<double>(d, 0.0));
        for (std::size_t i = 0; i < d; ++i) inv[i][i] = 1.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double p = A[k][k];
            for (std::size_t j = 0; j < d; ++j) {
                A[k][j] /= p;
                inv[k][j] /= p;
            }
            for (std::size_t i = 0; i < d; ++i) {
                if (i == k) continue;
                const double f = A[i][k];
                for (std::size_t j = 0; j < d; ++j) {
                    A[i][j] -= f * A[k][j];
                    inv[i][j] -= f * inv[k][j];
                }
            }
        }
        const auto var = marginal_variances(WeightSeq(b));
        ASSERT_EQ(var.size(), d);
        for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(var[i], inv[i][i], 1e-10 * inv[i][i]);
    }
}

TEST(Detkit, ClosedFormBracketMatchesDoubleSum) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    std::vector<double> c(40);
    for (double& v : c) v = u(rng);
    double ref = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j) ref += double((j - i) * (j - i)) * c[i] * c[j];
    EXPECT_NEAR(closed_form_bracket(c), ref, 1e-12 * ref);
}

TEST(Detkit, RejectsInvalidInput) {
    EXPECT_THROW(WeightSeq({1.0, -1.0, 1.0}), std::invalid_argument);
    EXPECT_THROW(WeightSeq({1.0, 0.0}), std::invalid_argument);
    EXPECT_THROW(PinnedPattern{{0}}.validate(5), std::out_of_range);
    EXPECT_THROW(PinnedPattern{{5}}.validate(5), std::out_of_range);
    const PinnedPattern unsorted{{3, 2}};
    EXPECT_THROW(unsorted.validate(5), std::invalid_argument);
}
