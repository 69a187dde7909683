#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lapin/detkit.hpp"
#include "lapin/fm.hpp"
#include "lapin/partition.hpp"
#include "lapin/quenched.hpp"
#include "lapin/renewal.hpp"
#include "lapin/transfer.hpp"

// Cross-checks between independent routes through the library. Each check
// compares two computations that share no code path beyond the inputs.

namespace lapin {

struct SelfTestResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

inline std::vector<double> test_weights(int n, double beta, std::uint64_t seed) {
    const auto d = sample_disorder(n, seed);
    std::vector<double> b(d.omega.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::exp(beta * d.omega[i]);
    return b;
}

}  // namespace detail

inline std::vector<SelfTestResult> run_selftest(bool quick = false) {
    std::vector<SelfTestResult> out;
    auto check = [&](const std::string& name, const std::function<SelfTestResult()>& body) {
        try {
            auto r = body();
            r.name = name;
            out.push_back(r);
        } catch (const std::exception& e) {
            out.push_back({name, false, std::string("exception: ") + e.what()});
        }
    };
    const int reps = quick ? 20 : 100;

    check("det closed form vs banded LDLT vs O(n^2) sum", [&] {
        double worst = 0.0;
        for (int i = 0; i < reps; ++i) {
            const int n = 2 + (i * 37) % 120;
            const WeightSeq b(detail::test_weights(n, 0.8, 1000 + i));
            const double cf = log_det_closed_form(b);
            worst = std::max(worst, std::abs(cf - log_det_banded(b)) / std::max(1.0, std::abs(cf)));
            worst = std::max(worst, std::abs(cf - std::log(det_closed_form_reference(b))) / std::max(1.0, std::abs(cf)));
        }
        return SelfTestResult{"", worst < 1e-9, "max relative log deviation " + detail::fmt(worst)};
    });

    check("det non-random integer formula n <= 50", [&] {
        bool ok = true;
        for (int n = 1; n <= 50; ++n) {
            const long long expected = static_cast<long long>(n) * (n + 1) * (n + 1) * (n + 2) / 12;
            ok &= std::llround(det_closed_form(WeightSeq::ones(n))) == expected;
            ok &= std::llround(det_banded(WeightSeq::ones(n))) == expected;
        }
        return SelfTestResult{"", ok, ok ? "exact" : "mismatch"};
    });

    check("det Schur split vs banded, degree and affinity", [&] {
        double worst = 0.0;
        bool structure = true;
        for (int i = 0; i < reps; ++i) {
            const int n = 3 + (i * 13) % 28;
            const WeightSeq b(detail::test_weights(n, 0.7, 2000 + i));
            PinnedPattern p;
            for (int s = 1; s <= n - 1; ++s)
                if (rng::uniform_at(3000 + i, s) < 0.3) p.pins.push_back(s);
            if (p.pins.empty()) p.pins.push_back(1);
            const double ref = det_banded(b, p);
            worst = std::max(worst, std::abs(det_split(b, p) - ref) / ref);
            const auto rep = structure_check(b, p);
            structure &= rep.degree_ok && rep.multilinear;
        }
        return SelfTestResult{"", worst < 1e-9 && structure, "split deviation " + detail::fmt(worst)};
    });

    check("enumeration incremental vs recompute, eps = 0 vs closed form", [&] {
        const int n = quick ? 12 : 16;
        const auto d = sample_disorder(n, 11);
        const ModelParams p{0.6, 1.3, n};
        const double a = partition_enumerate(p, d, EnumerationMethod::incremental).log_value;
        const double r = partition_enumerate(p, d, EnumerationMethod::recompute).log_value;
        const auto b = WeightSeq::from_disorder(0.6, d);
        const double z0 = partition_enumerate({0.6, 0.0, n}, d).log_value;
        const double cf = -0.5 * kLogTwoPi - 0.5 * log_det_closed_form(b);
        const double dev = std::max(std::abs(a - r), std::abs(z0 - cf));
        return SelfTestResult{"", dev < 1e-11, "deviation " + detail::fmt(dev)};
    });

    check("renewal identity and seeds", [&] {
        double worst = 0.0;
        const int nmax = quick ? 12 : 20;
        for (int n = 3; n <= nmax; ++n)
            for (double eps : {0.1, 0.5, 1.0, 2.0}) worst = std::max(worst, renewal_identity_check(eps, n).residual);
        const auto seeds = no_double_return_polynomials(std::vector<double>(2, 1.0), 2);
        const bool seeds_ok = seeds[1].value(1.0) == std::exp(-0.5 * kLogTwoPi) && seeds[2].value(1.0) == 0.0;
        return SelfTestResult{"", worst < 1e-12 && seeds_ok, "max residual " + detail::fmt(worst)};
    });

    check("transfer operator vs enumeration", [&] {
        const int n = 6;
        const auto b = detail::test_weights(n, 0.5, 21);
        TransferOptions opts;
        opts.grid = {quick ? 128 : 256, 8.0};
        const auto polys = partition_polynomials(b, n);
        const auto res = transfer_all_prefixes(b, 1.2, opts);
        double worst = 0.0;
        for (int k = 1; k <= n; ++k) worst = std::max(worst, std::abs(res.log_z[k] - polys[k].log_value(1.2)));
        return SelfTestResult{"", worst < 1e-4, "max log deviation " + detail::fmt(worst)};
    });

    check("pinning solver vs geometric closed form", [&] {
        const auto k = PinningKernel::geometric(0.3);
        double worst = 0.0;
        for (double h : {1e-4, 0.01, 0.5, 2.0}) {
            const double ref = geometric_free_energy(0.3, h);
            worst = std::max(worst, std::abs(pinning_free_energy(k, h) - ref) / ref);
        }
        return SelfTestResult{"", worst < 1e-10, "relative deviation " + detail::fmt(worst)};
    });

    check("disorder quadrature within partition bounds", [&] {
        const auto r = partition_bound_check(0.5, 0.5, quick ? 3 : 5, 8);
        return SelfTestResult{"", r.upper_ok && r.lower_ok,
                              detail::fmt(r.lower_bound) + " <= " + detail::fmt(r.expected) + " <= " + detail::fmt(r.upper_bound)};
    });

    check("annealed potential transfer vs disorder quadrature", [&] {
        const int n = 3;
        const double beta = 0.5, eps = 0.8;
        TransferOptions opts;
        opts.potential = Potential::annealed;
        opts.beta = beta;
        opts.grid = {quick ? 128 : 256, 8.0};
        const double lz = transfer_all_prefixes(std::vector<double>(n + 1, 1.0), eps, opts).log_z[n];
        const double ref = std::log(eval_poly(expected_adjusted_partition_quadrature(beta, n, 8), eps));
        const double dev = std::abs(lz - ref);
        return SelfTestResult{"", dev < 1e-4, "log deviation " + detail::fmt(dev)};
    });

    check("fractional-moment parameters and tilted estimators", [&] {
        const auto p = choose_params(0.5, 0.1);
        const auto t = tilted_expectation(6, 0.2, 0.5, 1.0, quick ? 400 : 2000, 7);
        const bool ok = p.k == 48 && p.sign_margin() < 0.0 && t.consistent;
        return SelfTestResult{"", ok, "tilted a/b " + detail::fmt(t.reweighted.value) + " / " + detail::fmt(t.shifted.value)};
    });

    return out;
}

}  // namespace lapin
