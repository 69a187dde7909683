#include <gtest/gtest.h>

#include "lapin/partition.hpp"
#include "lapin/quenched.hpp"
#include "lapin/transfer.hpp"

using namespace lapin;

TEST(Transfer, NonRandomZeroEpsMatchesClosedForm) {
    const int n = 10;
    const std::vector<double> b(n + 1, 1.0);
    TransferOptions opts;
    opts.grid = {512, 8.0};
    const auto res = transfer_all_prefixes(b, 0.0, opts);
    EXPECT_TRUE(res.audit.ok);
    for (int k = 2; k <= n; ++k) {
        const double expected = -0.5 * kLogTwoPi - 0.5 * log_det_closed_form(WeightSeq::ones(k));
        EXPECT_NEAR(res.log_z[k], expected, 1e-12) << k;
    }
}

TEST(Transfer, MatchesEnumerationWithDisorder) {
    const int n = 7;
    const auto d = sample_disorder(n, 17);
    std::vector<double> b(n + 1);
    for (int i = 0; i <= n; ++i) b[i] = std::exp(0.7 * d.omega[i]);
    TransferOptions opts;
    opts.grid = {256, 8.0};
    const auto polys = partition_polynomials(b, n);
    for (double eps : {0.0, 0.6, 1.9}) {
        const auto res = transfer_all_prefixes(b, eps, opts);
        for (int k = 1; k <= n; ++k) EXPECT_NEAR(res.log_z[k], polys[k].log_value(eps), 1e-9) << k << ' ' << eps;
    }
}

TEST(Transfer, AuditRefusesNarrowGrid) {
    const std::vector<double> b(9, 1.0);
    TransferOptions opts;
    opts.grid = {256, 3.0};
    EXPECT_THROW(transfer_all_prefixes(b, 1.0, opts), NumericalError);
    opts.audit = false;
    const auto res = transfer_all_prefixes(b, 1.0, opts);
    EXPECT_FALSE(res.audit.ok);
    EXPECT_GT(res.audit.required_radius_sigma, 3.0);
}

TEST(Transfer, RejectsInvalidGrid) {
    const std::vector<double> b(5, 1.0);
    TransferOptions opts;
    opts.grid = {32, 8.0};
    EXPECT_THROW(transfer_all_prefixes(b, 1.0, opts), std::invalid_argument);
    opts.grid = {256, -1.0};
    EXPECT_THROW(transfer_all_prefixes(b, 1.0, opts), std::invalid_argument);
}

TEST(Transfer, AnnealedPotentialMatchesDisorderQuadrature) {
    const double beta = 0.5;
    for (int n : {2, 3, 4}) {
        const auto coef = expected_adjusted_partition_quadrature(beta, n, 10);
        for (double eps : {0.0, 0.8}) {
            TransferOptions opts;
            opts.potential = Potential::annealed;
            opts.beta = beta;
            opts.grid = {256, 8.0};
            const std::vector<double> b(static_cast<std::size_t>(n) + 1, 1.0);
            const double lz = transfer_all_prefixes(b, eps, opts).log_z[n];
            EXPECT_NEAR(lz, std::log(eval_poly(coef, eps)), 1e-7) << n << ' ' << eps;
        }
    }
}

TEST(Transfer, AnnealedAtZeroBetaIsGaussian) {
    const std::vector<double> b(7, 1.0);
    TransferOptions g;
    g.grid = {256, 8.0};
    TransferOptions a = g;
    a.potential = Potential::annealed;
    a.beta = 0.0;
    const auto rg = transfer_all_prefixes(b, 1.1, g), ra = transfer_all_prefixes(b, 1.1, a);
    for (int k = 1; k <= 6; ++k) EXPECT_NEAR(rg.log_z[k], ra.log_z[k], 1e-10);
}
