// Batch front end: every subcommand writes one CSV or JSON artifact that
// embeds its effective configuration, so a run can be replayed bit for bit.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "lapin/detkit.hpp"
#include "lapin/fm.hpp"
#include "lapin/parallel.hpp"
#include "lapin/partition.hpp"
#include "lapin/quenched.hpp"
#include "lapin/renewal.hpp"
#include "lapin/selftest.hpp"
#include "lapin/transfer.hpp"

using json = nlohmann::ordered_json;
using namespace lapin;

namespace {

// ---------------------------------------------------------------- output

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
    template <class... T>
    void row(const T&... cells) {
        std::vector<std::string> r;
        (r.push_back(cell(cells)), ...);
        rows_.push_back(std::move(r));
    }
    std::string csv(const json& config, const std::string& command) const {
        std::ostringstream os;
        os << "# " << command << ' ' << config.dump() << '\n';
        for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << header_[i];
        os << '\n';
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
            os << '\n';
        }
        return os.str();
    }
    json to_json() const {
        json arr = json::array();
        for (const auto& r : rows_) {
            json o;
            for (std::size_t i = 0; i < r.size(); ++i) {
                const auto& s = r[i];
                char* end = nullptr;
                const double v = std::strtod(s.c_str(), &end);
                if (!s.empty() && end && *end == '\0')
                    o[header_[i]] = std::isfinite(v) ? json(v) : json(nullptr);
                else
                    o[header_[i]] = s;
            }
            arr.push_back(o);
        }
        return arr;
    }

private:
    static std::string cell(double v) { return num(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(std::uint64_t v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "true" : "false"; }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct Sink {
    std::string out;
    std::string format = "csv";

    void write(const std::string& command, const json& config, const Table& table, const json& summary = json::object()) const {
        std::string text;
        if (format == "json") {
            json doc;
            doc["command"] = command;
            doc["config"] = config;
            if (!summary.empty()) doc["summary"] = summary;
            doc["rows"] = table.to_json();
            text = doc.dump(2) + "\n";
        } else {
            text = table.csv(config, command);
            if (!summary.empty()) text += "# summary " + summary.dump() + "\n";
        }
        emit(text);
    }
    void emit(const std::string& text) const {
        if (out.empty() || out == "-") {
            std::cout << text;
            return;
        }
        std::ofstream f(out, std::ios::binary);
        if (!f) throw std::invalid_argument("cannot open output file " + out);
        f << text;
    }
};

// ---------------------------------------------------------------- grids

std::vector<double> parse_grid(const std::string& text, bool logarithmic) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw std::invalid_argument("grid '" + text + "' must be lo:hi:count");
    double lo = 0.0, hi = 0.0;
    long count = 0;
    try {
        lo = std::stod(parts[0]);
        hi = std::stod(parts[1]);
        count = std::stol(parts[2]);
    } catch (const std::exception&) {
        throw std::invalid_argument("grid '" + text + "' is not numeric");
    }
    if (count < 1 || count > 100000) throw std::invalid_argument("grid count must lie in [1, 100000]");
    if (!(hi >= lo)) throw std::invalid_argument("grid needs lo <= hi");
    if (logarithmic && !(lo > 0.0)) throw std::invalid_argument("logarithmic grid needs lo > 0");
    std::vector<double> g;
    for (long i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        g.push_back(logarithmic ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))) : lo + t * (hi - lo));
    }
    return g;
}

// ---------------------------------------------------------------- config file

// Applies keys of a JSON config object to the options of the selected
// subcommand that were not given on the command line.
void apply_config(CLI::App* app, CLI::App* sub, const json& cfg) {
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        if (it.key() == "command") continue;
        if (it.key() == "config") throw std::invalid_argument("config files cannot nest");
        CLI::Option* opt = sub->get_option_no_throw("--" + it.key());
        if (!opt) opt = app->get_option_no_throw("--" + it.key());
        if (!opt) throw std::invalid_argument("config key '" + it.key() + "' is not an option of " + sub->get_name());
        if (opt->count() > 0) continue;  // flags override the file
        std::vector<std::string> values;
        if (it->is_array()) {
            for (const auto& v : *it) values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        } else if (it->is_boolean()) {
            values.push_back(it->get<bool>() ? "true" : "false");
        } else {
            values.push_back(it->is_string() ? it->get<std::string>() : it->dump());
        }
        opt->clear();
        for (const auto& v : values) opt->add_result(v);
        opt->run_callback();
    }
}

json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot read config file " + path);
    json cfg;
    try {
        cfg = json::parse(f);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!cfg.is_object()) throw std::invalid_argument("config file must hold a JSON object");
    return cfg;
}

// ---------------------------------------------------------------- commands

struct DetVerify {
    int instances = 200, nmax = 200, structure_instances = 500, structure_nmax = 30;
    double beta_max = 1.0;
    std::uint64_t seed = 1;
    json config() const {
        return {{"instances", instances}, {"nmax", nmax}, {"beta-max", beta_max}, {"structure-instances", structure_instances},
                {"structure-nmax", structure_nmax}, {"seed", seed}};
    }
    int run(const Sink& sink) const {
        detail::require(instances >= 1 && nmax >= 1 && structure_instances >= 0 && structure_nmax >= 2, "det-verify: invalid sizes");
        detail::require(beta_max >= 0.0, "det-verify: beta-max must be >= 0");
        Table t({"instance", "n", "beta", "log_det_closed_form", "log_det_banded", "log_det_reference", "rel_dev", "method"});
        double worst = 0.0;
        for (int i = 0; i < instances; ++i) {
            const int n = 1 + static_cast<int>(rng::uniform_at(seed, 2 * i) * nmax) % nmax;
            const double beta = beta_max * rng::uniform_at(seed, 2 * i + 1);
            const auto b = WeightSeq::from_disorder(beta, sample_disorder(n, rng::derive_seed(seed, i)));
            const double cf = log_det_closed_form(b), bd = log_det_banded(b), ref = std::log(det_closed_form_reference(b));
            const double dev = std::max(std::abs(std::expm1(cf - bd)), std::abs(std::expm1(cf - ref)));
            worst = std::max(worst, dev);
            t.row(i, n, beta, cf, bd, ref, dev, "closed-form|banded-ldlt|pairwise-sum");
        }
        bool integer_ok = true;
        for (int n = 1; n <= 50; ++n) {
            const long long expected = static_cast<long long>(n) * (n + 1) * (n + 1) * (n + 2) / 12;
            integer_ok &= std::llround(det_closed_form(WeightSeq::ones(n))) == expected;
        }
        int degree_ok = 0, affine_ok = 0;
        double worst_affinity = 0.0;
        for (int i = 0; i < structure_instances; ++i) {
            const std::uint64_t key = rng::derive_seed(seed ^ 0x5157, i);
            const int n = 2 + static_cast<int>(rng::uniform_at(key, 0) * (structure_nmax - 1)) % (structure_nmax - 1);
            const auto b = WeightSeq::from_disorder(rng::uniform_at(key, 1), sample_disorder(n, key));
            PinnedPattern p;
            for (int s = 1; s <= n - 1; ++s)
                if (rng::uniform_at(key, 10 + s) < 0.3) p.pins.push_back(s);
            const auto rep = structure_check(b, p);
            degree_ok += rep.degree_ok;
            affine_ok += rep.multilinear;
            worst_affinity = std::max(worst_affinity, rep.max_affinity_deviation);
        }
        const bool ok = worst < 1e-10 && integer_ok && degree_ok == structure_instances && affine_ok == structure_instances;
        json summary = {{"max_rel_dev", worst},
                        {"integer_formula_exact", integer_ok},
                        {"structure_degree_ok", degree_ok},
                        {"structure_affine_ok", affine_ok},
                        {"max_affinity_deviation", worst_affinity},
                        {"passed", ok}};
        sink.write("det-verify", config(), t, summary);
        if (!ok) throw ConsistencyError("det-verify: determinant routes disagree");
        return 0;
    }
};

struct PartitionCmd {
    int n = 10;
    double beta = 0.0, eps = 1.0;
    std::uint64_t seed = 1;
    json config() const { return {{"n", n}, {"beta", beta}, {"eps", eps}, {"seed", seed}}; }
    int run(const Sink& sink) const {
        ModelParams{beta, eps, n}.validate();
        if (n > kMaxEnumerationSize) throw std::out_of_range("partition: n exceeds the enumeration cap 24");
        const auto d = beta == 0.0 ? zero_disorder(n) : sample_disorder(n, seed);
        const auto b = WeightSeq::from_disorder(beta, d);
        const auto polys = partition_polynomials(b.values(), n);
        const auto nodr = no_double_return_polynomials(b.values(), n);
        Table t({"k", "log_Z", "log_Z_adjusted", "log_Z_no_double_return", "method"});
        for (int k = 1; k <= n; ++k)
            t.row(k, polys[k].log_value(eps), polys[k].log_adjusted(eps), nodr[k].log_value(eps), "enumeration-dfs-ldlt");
        sink.write("partition", config(), t);
        return 0;
    }
};

struct RenewalCmd {
    std::string eps_grid = "0.5:2.0:50", delta_grid = "1e-3:1e-1:9";
    int nmax = 20, samples = 1000, batches = 10;
    double beta = 0.0;
    std::uint64_t seed = 1;
    bool asymptote = false;
    json config() const {
        return {{"eps-grid", eps_grid}, {"nmax", nmax}, {"beta", beta}, {"samples", samples}, {"batches", batches},
                {"seed", seed}, {"asymptote", asymptote}, {"delta-grid", delta_grid}};
    }
    int run(const Sink& sink) const {
        detail::require(nmax >= 3, "renewal: nmax must be >= 3");
        detail::require(beta >= 0.0, "renewal: beta must be >= 0");
        if (nmax > kMaxNoDoubleReturnSize) throw std::out_of_range("renewal: nmax exceeds the cap 40");
        const auto grid = parse_grid(eps_grid, false);
        for (double e : grid) detail::require(e >= 0.0, "renewal: eps must be >= 0");
        std::optional<AnnealedTable> at;
        RenewalTable table;
        std::string method = "renewal-nonrandom";
        if (beta > 0.0) {
            at = annealed_renewal_table(beta, nmax, samples, seed, batches);
            table = at->mean;
            method = "renewal-annealed-mc";
        } else {
            table = RenewalTable::non_random(nmax);
        }
        json summary;
        double ec = 0.0, ec_err = 0.0;
        if (at) {
            const auto cp = annealed_critical_point(*at);
            ec = cp.eps_c;
            ec_err = cp.total_error;
            summary["eps_c"] = ec;
            summary["eps_c_stat_error"] = cp.stat_error;
            summary["eps_c_tail_error"] = cp.tail_error;
        } else {
            const auto cp = critical_point(table);
            ec = cp.eps_c;
            ec_err = cp.error;
            summary["eps_c"] = ec;
            summary["eps_c_tail_error"] = cp.error;
        }
        summary["eps_c_error"] = ec_err;
        Table t({"eps", "f", "x", "stat_error", "method"});
        for (double e : grid) {
            if (at) {
                const auto fe = annealed_free_energy(e, *at);
                const auto full = solve_free_energy(e, table);
                t.row(e, fe.value, full.x, fe.stderr_, method);
            } else {
                const auto fe = solve_free_energy(e, table);
                t.row(e, fe.f, fe.x, 0.0, method);
            }
        }
        if (asymptote) {
            const auto dg = parse_grid(delta_grid, true);
            const auto rep = asymptote_constant(table, dg);
            json a;
            a["deltas"] = rep.deltas;
            a["f"] = rep.f;
            a["ratios"] = rep.ratios;
            a["right_slopes"] = rep.slopes;
            a["extrapolated_limit"] = rep.extrapolated_limit;
            a["variation_coarse"] = rep.variation_coarse;
            a["variation_fine"] = rep.variation_fine;
            a["c0_estimate"] = rep.c0_estimate;
            a["c1_estimate"] = rep.c1_estimate;
            a["caveat"] = rep.caveat;
            summary["asymptote"] = a;
        }
        sink.write("renewal", config(), t, summary);
        return 0;
    }
};

struct PinningCmd {
    std::vector<double> alphas = {0.5, 1.0, 2.0};
    double q = 0.0;
    std::string h_grid = "1e-4:1e-2:9";
    json config() const { return {{"alpha", alphas}, {"q", q}, {"h-grid", h_grid}}; }
    int run(const Sink& sink) const {
        const auto hs = parse_grid(h_grid, true);
        detail::require(hs.size() >= 2, "pinning: need at least 2 grid points");
        std::vector<std::pair<std::string, PinningKernel>> kernels;
        for (double a : alphas) kernels.emplace_back("power-law", PinningKernel::power_law(a));
        if (q > 0.0) kernels.emplace_back("geometric", PinningKernel::geometric(q));
        Table t({"kernel", "alpha", "h_minus_hc", "f", "method"});
        json fits = json::array();
        for (const auto& [name, k] : kernels) {
            const auto fit = exponent_fit(k, hs);
            for (std::size_t i = 0; i < fit.h.size(); ++i) t.row(name, k.alpha, fit.h[i], fit.f[i], "laplace-deficit-bisection");
            json j = {{"kernel", name}, {"alpha", jnum(k.alpha)}, {"exponent", fit.exponent}, {"exponent_stderr", fit.exponent_stderr},
                      {"constant", fit.constant}};
            if (k.kind == PinningKernel::Kind::power_law && k.alpha < 1.0) j["expected_exponent"] = 1.0 / k.alpha;
            if (std::isfinite(k.mean())) j["expected_slope"] = 1.0 / k.mean();
            if (k.kind == PinningKernel::Kind::power_law && k.alpha == 1.0) {
                const double h = hs.front();
                const double f = pinning_free_energy(k, pinning_critical_point(k) + h);
                j["log_corrected_ratio"] = f * std::abs(std::log(h)) / h;
                j["expected_ratio"] = 1.0 / k.c_K;
            }
            fits.push_back(j);
        }
        sink.write("pinning", config(), t, {{"fits", fits}});
        return 0;
    }
};

struct FreeEnergyCmd {
    double beta = 0.5, eps = 1.5;
    int n = 16, samples = 16, G = 256, annealed_nmax = 20, annealed_samples = 1000;
    double R = 8.0;
    std::string estimator = "ratio";
    std::uint64_t seed = 1;
    json config() const {
        return {{"beta", beta}, {"eps", eps}, {"n", n}, {"samples", samples}, {"G", G}, {"R", R}, {"estimator", estimator},
                {"annealed-nmax", annealed_nmax}, {"annealed-samples", annealed_samples}, {"seed", seed}};
    }
    int run(const Sink& sink) const {
        detail::require(estimator == "ratio" || estimator == "slope", "free-energy: estimator must be ratio or slope");
        const auto est = estimator == "ratio" ? FreeEnergyEstimator::ratio : FreeEnergyEstimator::slope;
        const GridSpec grid{G, R};
        Table t({"method", "value", "stderr", "beta", "eps", "n", "seed"});
        const auto q = quenched_free_energy(beta, eps, n, samples, grid, seed, est);
        t.row(q.method, q.value, q.stderr_, beta, eps, n, seed);
        // Jensen comparator on an independent disorder stream
        const std::uint64_t jseed = rng::derive_seed(seed, 0x4A454E53);
        const auto a = annealed_ratio_free_energy(beta, eps, n, samples, grid, jseed);
        t.row(a.method, a.value, a.stderr_, beta, eps, n, jseed);
        if (beta > 0.0) {
            const auto tab = annealed_renewal_table(beta, annealed_nmax, annealed_samples, seed, 10);
            const auto r = annealed_free_energy(eps, tab);
            t.row(r.method, r.value, r.stderr_, beta, eps, annealed_nmax, seed);
        }
        sink.write("free-energy", config(), t);
        return 0;
    }
};

struct PhaseCmd {
    std::vector<double> betas = {0.25, 0.5, 1.0};
    int nmax = 24, samples = 2000, batches = 10, bound_n = 6;
    double bound_eps = 0.5;
    std::uint64_t seed = 1;
    json config() const {
        return {{"beta", betas}, {"nmax", nmax}, {"samples", samples}, {"batches", batches}, {"bound-n", bound_n},
                {"bound-eps", bound_eps}, {"seed", seed}};
    }
    int run(const Sink& sink) const {
        Table t({"beta", "eps_c0", "eps_ca", "eps_ca_stat_error", "ratio", "ratio_error", "lower", "upper", "inside", "E_Z", "Z_upper",
                 "Z_lower", "bounds_hold", "method"});
        for (double b : betas) {
            SandwichConfig cfg;
            cfg.n_max = nmax;
            cfg.n_samples = samples;
            cfg.n_batches = batches;
            cfg.seed = seed;
            cfg.bound_n = bound_n;
            cfg.bound_eps = bound_eps;
            const auto r = sandwich_check(b, cfg);
            t.row(b, r.eps_c0, r.eps_ca, r.eps_ca_stat_error, r.ratio, r.ratio_error, r.lower, r.upper, r.lower_ok && r.upper_ok,
                  r.partition.expected, r.partition.upper_bound, r.partition.lower_bound, r.partition.upper_ok && r.partition.lower_ok,
                  "renewal-annealed-mc|gauss-hermite");
        }
        sink.write("phase", config(), t);
        return 0;
    }
};

json certificate_json(const GapCertificate& g) {
    json a = json::array();
    for (const auto& m : g.A) a.push_back({{"value", m.value}, {"stderr", m.stderr_}});
    return {{"beta", g.beta},
            {"c", g.c},
            {"gamma", g.params.gamma},
            {"k", g.params.k},
            {"Delta", g.params.Delta},
            {"lambda", g.params.lambda},
            {"eps_c_annealed", g.eps_c_annealed},
            {"eps", g.eps},
            {"C_beta", g.c_beta.C},
            {"C_beta_error", g.c_beta.residual_rms},
            {"rho", g.rho.rho},
            {"rho_error", g.rho.stderr_},
            {"verdict", g.verdict},
            {"reason", g.reason},
            {"A", a}};
}

struct FmCmd {
    std::vector<double> betas = {0.5};
    std::vector<double> cs = {0.1};
    double eps_ca = 0.0;
    int samples = 400, annealed_nmax = 24, annealed_samples = 1000;
    std::uint64_t seed = 1;
    json config() const {
        return {{"beta", betas}, {"c", cs}, {"eps-ca", eps_ca}, {"samples", samples}, {"annealed-nmax", annealed_nmax},
                {"annealed-samples", annealed_samples}, {"seed", seed}};
    }
    int run(const Sink& sink) const {
        Table t({"beta", "c", "k", "gamma", "Delta", "lambda", "eps", "C_beta", "C_beta_error", "rho", "rho_error", "verdict"});
        json certs = json::array();
        for (double b : betas) {
            detail::require(b > 0.0, "fm-certify: beta must be > 0 (no disorder, no gap to certify)");
            double ec = eps_ca;
            if (!(ec > 0.0)) ec = annealed_critical_point(annealed_renewal_table(b, annealed_nmax, annealed_samples, seed)).eps_c;
            for (double c : cs) {
                GapCertificate g;
                try {
                    g = certify_gap(b, c, ec, {samples, seed});
                } catch (const std::invalid_argument& e) {
                    if (betas.size() * cs.size() == 1) throw;
                    g.beta = b;
                    g.c = c;
                    g.eps_c_annealed = ec;
                    g.verdict = "rejected";
                    g.reason = e.what();
                }
                t.row(b, c, g.params.k, g.params.gamma, g.params.Delta, g.params.lambda, g.eps, g.c_beta.C, g.c_beta.residual_rms, g.rho.rho,
                      g.rho.stderr_, g.verdict);
                certs.push_back(certificate_json(g));
            }
        }
        int certified = 0;
        for (const auto& c : certs) certified += c["verdict"] == "certified";
        sink.write("fm-certify", config(), t, {{"certified_count", certified}, {"certificates", certs}});
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Laplacian pinning model toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Sink sink;
    unsigned threads = 0;
    std::string config_path;
    app.add_option("--threads", threads, "worker cap (0: $LAPIN_THREADS or all cores)");
    app.add_option("--config", config_path, "JSON file with option defaults; flags override it");
    app.add_option("--out", sink.out, "artifact path (default stdout)");
    app.add_option("--format", sink.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

    DetVerify det;
    auto* s_det = app.add_subcommand("det-verify", "determinant property suite");
    s_det->add_option("--instances", det.instances);
    s_det->add_option("--nmax", det.nmax);
    s_det->add_option("--beta-max", det.beta_max);
    s_det->add_option("--structure-instances", det.structure_instances);
    s_det->add_option("--structure-nmax", det.structure_nmax);
    s_det->add_option("--seed", det.seed);

    PartitionCmd part;
    auto* s_part = app.add_subcommand("partition", "enumeration dump of every prefix");
    s_part->add_option("--n", part.n);
    s_part->add_option("--beta", part.beta);
    s_part->add_option("--eps", part.eps);
    s_part->add_option("--seed", part.seed);

    RenewalCmd ren;
    auto* s_ren = app.add_subcommand("renewal", "free-energy curve, critical point, asymptote ratios");
    s_ren->add_option("--eps-grid", ren.eps_grid, "lo:hi:count");
    s_ren->add_option("--nmax", ren.nmax);
    s_ren->add_option("--beta", ren.beta, "0: non-random chain; > 0: annealed Monte Carlo table");
    s_ren->add_option("--samples", ren.samples);
    s_ren->add_option("--batches", ren.batches);
    s_ren->add_option("--seed", ren.seed);
    s_ren->add_flag("--asymptote", ren.asymptote);
    s_ren->add_option("--delta-grid", ren.delta_grid, "logarithmic lo:hi:count");

    PinningCmd pin;
    auto* s_pin = app.add_subcommand("pinning", "renewal pinning curves and exponent fits");
    s_pin->add_option("--alpha", pin.alphas)->delimiter(',');
    s_pin->add_option("--q", pin.q, "also run the geometric kernel with this q");
    s_pin->add_option("--h-grid", pin.h_grid, "logarithmic lo:hi:count of h - h_c");

    FreeEnergyCmd fe;
    auto* s_fe = app.add_subcommand("free-energy", "quenched and annealed free-energy estimates");
    s_fe->add_option("--beta", fe.beta);
    s_fe->add_option("--eps", fe.eps);
    s_fe->add_option("--n", fe.n);
    s_fe->add_option("--samples", fe.samples);
    s_fe->add_option("--G", fe.G);
    s_fe->add_option("--R", fe.R, "grid half-width in units of the largest marginal standard deviation");
    s_fe->add_option("--estimator", fe.estimator);
    s_fe->add_option("--annealed-nmax", fe.annealed_nmax);
    s_fe->add_option("--annealed-samples", fe.annealed_samples);
    s_fe->add_option("--seed", fe.seed);

    PhaseCmd ph;
    auto* s_ph = app.add_subcommand("phase", "critical points and sandwich report");
    s_ph->add_option("--beta", ph.betas)->delimiter(',');
    s_ph->add_option("--nmax", ph.nmax);
    s_ph->add_option("--samples", ph.samples);
    s_ph->add_option("--batches", ph.batches);
    s_ph->add_option("--bound-n", ph.bound_n);
    s_ph->add_option("--bound-eps", ph.bound_eps);
    s_ph->add_option("--seed", ph.seed);

    FmCmd fm;
    auto* s_fm = app.add_subcommand("fm-certify", "fractional-moment gap certificates");
    s_fm->add_option("--beta", fm.betas)->delimiter(',');
    s_fm->add_option("--c", fm.cs)->delimiter(',');
    s_fm->add_option("--eps-ca", fm.eps_ca, "annealed critical point (0: estimate it)");
    s_fm->add_option("--samples", fm.samples);
    s_fm->add_option("--annealed-nmax", fm.annealed_nmax);
    s_fm->add_option("--annealed-samples", fm.annealed_samples);
    s_fm->add_option("--seed", fm.seed);

    bool quick = false;
    auto* s_self = app.add_subcommand("selftest", "oracle cross-check suite");
    s_self->add_flag("--quick", quick);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        if (!config_path.empty()) {
            const auto cfg = load_config(config_path);
            if (cfg.contains("command") && cfg["command"] != sub->get_name())
                throw std::invalid_argument("config is for command " + cfg["command"].dump());
            apply_config(&app, sub, cfg);
        }
        set_thread_count(threads);
        const std::string name = sub->get_name();
        if (name == "det-verify") return det.run(sink);
        if (name == "partition") return part.run(sink);
        if (name == "renewal") return ren.run(sink);
        if (name == "pinning") return pin.run(sink);
        if (name == "free-energy") return fe.run(sink);
        if (name == "phase") return ph.run(sink);
        if (name == "fm-certify") return fm.run(sink);
        if (name == "selftest") {
            const auto results = run_selftest(quick);
            bool ok = true;
            std::ostringstream os;
            for (const auto& r : results) {
                os << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
                ok &= r.passed;
            }
            os << (ok ? "selftest: all checks passed\n" : "selftest: FAILED\n");
            sink.emit(os.str());
            return ok ? 0 : 3;
        }
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return 1;
    } catch (const std::out_of_range& e) {
        std::cerr << "invalid configuration: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical precondition failed: " << e.what() << '\n';
        return 2;
    } catch (const ConsistencyError& e) {
        std::cerr << "consistency check failed: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
