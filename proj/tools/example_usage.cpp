// Walks through the main library entry points on a small instance.

#include <cstdio>

#include "lapin/detkit.hpp"
#include "lapin/fm.hpp"
#include "lapin/partition.hpp"
#include "lapin/quenched.hpp"
#include "lapin/renewal.hpp"
#include "lapin/transfer.hpp"

using namespace lapin;

int main() {
    const int n = 12;
    const double beta = 0.5, eps = 1.2;
    const auto disorder = sample_disorder(n, 42);
    const auto b = WeightSeq::from_disorder(beta, disorder);

    // determinant of the chain with no contacts, two ways
    std::printf("log det: closed form %.12f, banded LDL %.12f\n", log_det_closed_form(b), log_det_banded(b));

    // exact partition function by contact-set enumeration, and the same by the transfer operator
    const auto exact = partition_enumerate({beta, eps, n}, disorder);
    TransferOptions opts;
    opts.grid = {256, 8.0};
    const auto grid = transfer_all_prefixes(b.values(), eps, opts);
    std::printf("log Z_%d: enumeration %.10f, transfer operator %.10f\n", n, exact.log_value, grid.log_z[n]);

    // non-random critical point and free energy from the renewal equation
    const auto table = RenewalTable::non_random(20);
    const auto cp = critical_point(table);
    std::printf("eps_c(0) = %.6f +- %.1e\n", cp.eps_c, cp.error);
    const auto fe = solve_free_energy(1.5, table);
    std::printf("f(eps = 1.5) = %.6f\n", fe.f);

    // fractional-moment parameters for a given disorder strength
    const auto p = choose_params(beta, 0.1);
    std::printf("fractional moments at beta = %.2f: k = %ld, gamma = %.4f, lambda = %.4f\n", beta, p.k, p.gamma, p.lambda);

    const bool ok = std::abs(exact.log_value - grid.log_z[n]) < 1e-6 && cp.eps_c > 0.0 && fe.f > 0.0;
    return ok ? 0 : 1;
}
