// Acceptance suite: one pass/fail line per criterion. Run all criteria or a
// single one with --criterion N.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trapcert/certify.hpp"
#include "trapcert/magnetic2d.hpp"
#include "trapcert/observables.hpp"
#include "trapcert/oracle.hpp"
#include "trapcert/report.hpp"

using namespace trapcert;

namespace {

struct Outcome {
    bool passed = true;
    std::vector<std::string> details;

    void check(bool ok, const std::string& what) {
        if (!ok) passed = false;
        details.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct CorpusEntry {
    std::string name;
    PotentialSpec spec;
};

std::vector<CorpusEntry> corpus() {
    return {{"harmonic", PotentialSpec::quartic_family(0.0)},
            {"quartic 0.1", PotentialSpec::quartic_family(0.1)},
            {"quartic 0.5", PotentialSpec::quartic_family(0.5)},
            {"quartic 1", PotentialSpec::quartic_family(1.0)},
            {"double-well a=2", PotentialSpec::double_well(2.0)},
            {"box", PotentialSpec::infinite_well(M_PI)}};
}

// Gating verdicts must pass; non-gating ones are listed as not applicable.
void require_verdict(Outcome& o, const Certificate& c, const std::string& corpus_name,
                     const std::string& verdict) {
    const Verdict* v = c.find(verdict);
    if (!v) {
        o.check(false, corpus_name + ": verdict " + verdict + " missing");
        return;
    }
    if (!v->gating) {
        o.details.push_back("n/a  " + corpus_name + ": " + verdict + " (" + v->note + ")");
        return;
    }
    o.check(v->passed, corpus_name + ": " + verdict + " lhs " + num(v->lhs) + " rhs " + num(v->rhs));
}

ElementResult synthetic_elements(const std::vector<double>& g, const std::vector<double>& w) {
    ElementResult r;
    r.elements.truncation = g.size();
    r.elements.gaps = g;
    for (double v : w) r.elements.magnitudes.push_back(std::sqrt(v));
    r.gaps = classify_gaps(g, w, 1e-10);
    return r;
}

MagneticSetup fock_darwin_setup() {
    MagneticSetup s;
    s.B = 1.0;
    s.potential = PotentialSpec::quadratic_2d(1.0, 1.0);
    s.grid = Grid2D::square(5.0, 80);
    return s;
}

Outcome harmonic_saturation() {
    Outcome o;
    Stopwatch t;
    const auto c = certify_1d(PotentialSpec::quartic_family(0.0));
    const double secs = t.seconds();
    const auto& v = c.values;
    o.check(std::abs(v.var_x - 0.5) < 1e-6, "Var0(x) = " + num(v.var_x));
    o.check(std::abs(v.bound_x - 0.5) < 1e-6, "bound = " + num(v.bound_x));
    o.check(std::abs(v.epsilon) < 1e-6, "|epsilon| = " + num(std::abs(v.epsilon)));
    for (std::size_t k = 0; k < 4; ++k)
        o.check(std::abs(v.battery[k]) < 1e-6, "equality diagnostic " + std::to_string(k + 1) + " = " +
                                                   num(v.battery[k]));
    o.check(secs < 2.0, "runtime " + num(secs) + " s");
    return o;
}

Outcome trk_closure() {
    Outcome o;
    Stopwatch t;
    for (const auto& e : corpus()) {
        const auto c = certify_1d(e.spec);
        const double res = std::abs(c.values.s_spectral_x - 0.5);
        const double tol = std::max(1e-5, c.allowance.s_spectral_x);
        o.check(c.K >= 32 && res < tol,
                e.name + ": |S - 1/2| = " + num(res) + " at K = " + std::to_string(c.K));
    }
    o.check(t.seconds() < 10.0, "runtime " + num(t.seconds()) + " s");
    return o;
}

Outcome rigidity_suite() {
    Outcome o;
    Stopwatch t;
    for (const auto& e : corpus()) {
        const auto c = certify_1d(e.spec);
        for (const char* name : {"d1", "d2_tail", "d2_eta", "d3"}) require_verdict(o, c, e.name, name);
        // UV: eps >= (hbar^4 / 4 m^2) g^2 / (Delta^3 (Delta + Lambda)) wherever a
        // tail exists and the force deviation is finite.
        const Verdict* uv = c.find("uv_window_closed_form");
        if (!uv || !std::isfinite(uv->rhs)) {
            o.details.push_back("n/a  " + e.name + ": UV window (" +
                                (uv ? uv->note : std::string("no tail channel")) + ")");
        } else {
            o.check(uv->passed, e.name + ": UV eps " + num(uv->lhs) + " >= " + num(uv->rhs));
        }
    }
    const double delta = 1.3, gamma = 0.9, w1 = 0.4, w2 = 0.03;
    const auto x = synthetic_elements({0.0, delta, delta + gamma}, {0.0, w1, w2});
    TrkSummary s;
    s.s_direct = delta * w1 + (delta + gamma) * w2;
    s.eta_trk = 1.0 - delta * w1 / s.s_direct;
    const double eps = exact_deficit_decomposition(x);
    const auto r = rigidity_d1_d2(s, delta, gamma, eps, tail_weight(x));
    o.check(std::abs(r.d1_rhs - eps) < 1e-12, "synthetic two-level D1 gap " + num(std::abs(r.d1_rhs - eps)));
    o.check(t.seconds() < 5.0, "runtime " + num(t.seconds()) + " s");
    return o;
}

Outcome corridor() {
    Outcome o;
    for (int k = 0; k <= 10; ++k) {
        const double lambda = 0.1 * k;
        const auto c = certify_1d(PotentialSpec::quartic_family(lambda));
        const auto& v = c.values;
        const Verdict* cv = c.find("corridor");
        const double lower = v.gamma / (v.delta + v.gamma) * v.eta_trk;
        const double tol = cv ? cv->tolerance : 0.0;
        o.check(v.eta_tilde >= lower - tol && v.eta_tilde <= v.eta_trk + tol,
                "lambda " + num(lambda) + ": " + num(lower) + " <= " + num(v.eta_tilde) + " <= " +
                    num(v.eta_trk));
    }
    const double delta = 0.8, gamma = 1.7, w1 = 0.35, w2 = 0.07;
    TrkSummary s;
    s.s_direct = delta * w1 + (delta + gamma) * w2;
    s.eta_trk = 1.0 - delta * w1 / s.s_direct;
    s.eta_tilde = 1.0 - delta * (w1 + w2) / s.s_direct;
    const auto r = trk_corridor_weights(s, delta, gamma, 1e-12);
    o.check(std::abs(r.eta_tilde - r.lower_edge) < 1e-12,
            "single-level tail sits on the lower edge to " + num(std::abs(r.eta_tilde - r.lower_edge)));
    return o;
}

Outcome deficit_scaling() {
    Outcome o;
    Stopwatch t;
    std::vector<double> eps;
    for (double lambda : {0.005, 0.01, 0.02}) eps.push_back(certify_1d(PotentialSpec::quartic_family(lambda)).values.epsilon);
    const double r1 = eps[1] / eps[0], r2 = eps[2] / eps[1];
    o.check(r1 >= 3.5 && r1 <= 4.5, "eps(0.01) / eps(0.005) = " + num(r1));
    o.check(r2 >= 3.5 && r2 <= 4.5, "eps(0.02) / eps(0.01) = " + num(r2));
    o.check(t.seconds() < 10.0, "runtime " + num(t.seconds()) + " s");
    return o;
}

Outcome polarizability_chain() {
    Outcome o;
    for (const auto& e : corpus()) {
        const auto c = certify_1d(e.spec);
        require_verdict(o, c, e.name, "polarizability_sum");
        require_verdict(o, c, e.name, "polarizability_bound");
        if (e.name == "harmonic") {
            o.check(std::abs(c.values.alpha0 - c.values.alpha_mid) < 1e-6, "harmonic first link saturated");
            o.check(std::abs(c.values.alpha_mid - c.values.alpha_bound) < 1e-6, "harmonic second link saturated");
        }
    }
    return o;
}

Outcome momentum_corridor() {
    Outcome o;
    for (const auto& e : corpus()) {
        const auto c = certify_1d(e.spec);
        require_verdict(o, c, e.name, "momentum_upper");
        require_verdict(o, c, e.name, "momentum_floor");
        const Verdict* lb = c.find("momentum_lower");
        o.check(lb != nullptr, e.name + ": lower bound reported, applicable = " +
                                   (c.values.lb_applicable ? std::string("yes") : std::string("no")));
        if (e.name == "harmonic") {
            o.check(std::abs(c.values.varp - c.values.varp_ub) < 1e-6, "harmonic saturates the upper bound");
            o.check(std::abs(c.values.varp - c.values.varp_floor) < 1e-6, "harmonic saturates the floor");
        }
    }
    return o;
}

Outcome sweep_reproduction() {
    Outcome o;
    Stopwatch t;
    nlohmann::json doc = {{"mode", "sweep-1d"},
                          {"potential", {{"kind", "quartic-family"}, {"lambda", 0.0}}},
                          {"sweep", {{"parameter", "lambda"}, {"values", nlohmann::json::array()}}}};
    for (int k = 0; k <= 10; ++k) doc["sweep"]["values"].push_back(0.1 * k);
    const auto config = parse_run_config(doc);
    const auto dir = std::filesystem::temp_directory_path() / "trapcert_acceptance";
    std::filesystem::create_directories(dir);
    const auto result = run_sweep(config, dir / "sweep.csv");
    o.check(result.exit_code == kExitPass, "sweep exit status " + std::to_string(result.exit_code));

    std::ifstream in(dir / "sweep.csv");
    std::string line;
    std::getline(in, line);
    std::map<std::string, std::size_t> col;
    {
        std::stringstream ss(line);
        std::string name;
        for (std::size_t k = 0; std::getline(ss, name, ','); ++k) col[name] = k;
    }
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        rows.push_back(f);
    }
    o.check(rows.size() == 11, std::to_string(rows.size()) + " rows");
    if (rows.size() != 11) return o;
    auto at = [&](std::size_t r, const char* name) { return std::stod(rows[r][col.at(name)]); };

    bool nonneg = true, increasing = true, below = true;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (at(r, "epsilon") < -at(r, "epsilon_allowance")) nonneg = false;
        if (r > 0 && !(at(r, "epsilon") > at(r - 1, "epsilon"))) increasing = false;
        if (r > 0 && !(at(r, "varp") / at(r, "varp_ub") < 1.0)) below = false;
    }
    o.check(nonneg, "epsilon >= 0 within its discretization allowance (eps(0) = " + num(at(0, "epsilon")) +
                        ", allowance " + num(at(0, "epsilon_allowance")) + ")");
    o.check(std::abs(at(0, "epsilon")) < 1e-6, "eps(0) = " + num(at(0, "epsilon")));
    o.check(increasing, "epsilon strictly increasing");
    const double ratio0 = at(0, "varp") / at(0, "varp_ub");
    o.check(std::abs(ratio0 - 1.0) < 1e-6, "varp / varp_ub at lambda = 0: " + num(ratio0));
    o.check(below, "varp / varp_ub < 1 for lambda > 0 (lambda = 1: " + num(at(10, "varp") / at(10, "varp_ub")) + ")");
    o.check(t.seconds() < 60.0, "runtime " + num(t.seconds()) + " s");
    return o;
}

Outcome transverse_suite() {
    Outcome o;
    Stopwatch t;
    auto s = fock_darwin_setup();
    const std::size_t K = 12;
    const auto run = solve_magnetic(s, K);
    const auto exact = fock_darwin_oracle(1.0, 1.0, K);
    double worst = 0.0;
    for (std::size_t k = 0; k < K; ++k)
        worst = std::max(worst, std::abs(run.richardson_energies[k] - exact[k]) / exact[k]);
    o.check(worst < 1e-3, "max relative energy error " + num(worst));
    const double target = s.ell_B_sq() * s.ell_B_sq() * s.mass() * 1.0 / 2.0;
    for (double angle : {0.0, 0.9}) {
        s.u = {std::cos(angle), std::sin(angle)};
        const auto c = certify_magnetic(run, s, K, 1e-10);
        const std::string tag = "u angle " + num(angle) + ": ";
        o.check(std::abs(c.s_spectral - target) / c.s_direct < 1e-2,
                tag + "|S_spectral - l_B^4 m w0^2 / 2| / S_direct = " + num(std::abs(c.s_spectral - target) / c.s_direct));
        const Verdict* vb = c.find("variance_bound_Ru");
        o.check(vb && vb->passed, tag + "Var0(R_u) " + num(c.var_Ru) + " <= " + num(c.bound));
        for (const char* name : {"d1_Ru", "d2_Ru"}) {
            const Verdict* v = c.find(name);
            o.check(v && v->passed, tag + name);
        }
    }
    o.check(t.seconds() < 120.0, "runtime " + num(t.seconds()) + " s");
    return o;
}

Outcome multi_d_nofield() {
    Outcome o;
    MagneticSetup s;
    s.potential = PotentialSpec::quadratic_2d(1.0, 2.0);
    s.grid = Grid2D::square(5.0, 120);
    const auto run = solve_magnetic(s, 10);
    for (const auto& u : {std::array<double, 2>{1.0, 0.0}, std::array<double, 2>{0.0, 1.0}}) {
        s.u = u;
        const auto c = certify_direction(run, s, 10, 1e-10);
        const double gap = std::abs(c.bound_extrapolated - c.var_extrapolated) / c.bound_extrapolated;
        o.check(c.extrapolated && gap < 1e-4,
                "axis (" + num(u[0]) + ", " + num(u[1]) + "): relative gap to the bound " + num(gap));
    }
    s.u = {std::sqrt(0.5), std::sqrt(0.5)};
    const auto d = certify_direction(run, s, 10, 1e-10);
    const double gap = (d.bound_extrapolated - d.var_extrapolated) / d.bound_extrapolated;
    o.check(d.all_pass() && gap > 1e-2, "diagonal: relative gap " + num(gap));
    return o;
}

Outcome appendix_self_check() {
    Outcome o;
    for (const auto& e : corpus()) {
        const auto c = certify_1d(e.spec);
        for (const char* name : {"spectral_identity_x", "spectral_identity_p", "spectral_identity_x2"})
            require_verdict(o, c, e.name, name);
    }
    return o;
}

Outcome brute_force() {
    Outcome o;
    for (double lambda : {0.0, 1.0}) {
        const auto spec = PotentialSpec::quartic_family(lambda);
        const Grid1D g(-8.0, 8.0, 514);
        const auto it = solve_lowest(build_hamiltonian_1d(spec, g), 12);
        const auto dn = dense_brute_force(spec, g, 12);
        double worst = 0.0;
        for (std::size_t k = 0; k < 12; ++k) worst = std::max(worst, std::abs(it.energies[k] - dn.energies[k]));
        o.check(worst < 1e-10, "1D lambda " + num(lambda) + ", 512 points: max |dE| " + num(worst));
    }
    MagneticSetup s;
    s.B = 1.0;
    s.potential = PotentialSpec::quadratic_2d(1.0, 1.0);
    s.grid = Grid2D::square(4.0, 40);
    const auto it = solve_lowest_2d(build_hamiltonian_2d(s), 10);
    const auto dn = dense_brute_force_2d(s, 10);
    double worst = 0.0;
    for (std::size_t k = 0; k < 10; ++k) worst = std::max(worst, std::abs(it.energies[k] - dn.energies[k]));
    o.check(worst < 1e-8, "2D Fock-Darwin 40x40: max |dE| " + num(worst));
    return o;
}

struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> list{
        {1, "harmonic saturation", harmonic_saturation},
        {2, "TRK closure on the corpus", trk_closure},
        {3, "rigidity suite D1/D2/D3/UV", rigidity_suite},
        {4, "TRK tail corridor", corridor},
        {5, "deficit scaling law", deficit_scaling},
        {6, "polarizability chain", polarizability_chain},
        {7, "momentum corridor and floor", momentum_corridor},
        {8, "lambda sweep behavior", sweep_reproduction},
        {9, "transverse magnetic suite", transverse_suite},
        {10, "multi-d bound without field", multi_d_nofield},
        {11, "resolution-of-identity self-check", appendix_self_check},
        {12, "brute-force equivalence", brute_force},
    };
    return list;
}

bool report(const Criterion& c, bool verbose) {
    Outcome o;
    Stopwatch t;
    try {
        o = c.run();
    } catch (const std::exception& e) {
        o.check(false, std::string("exception: ") + e.what());
    }
    std::printf("criterion %2d %s: %s (%.1f s)\n", c.id, o.passed ? "PASS" : "FAIL", c.title, t.seconds());
    if (verbose || !o.passed)
        for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    return o.passed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    int only = 0;
    bool verbose = false;
    app.add_option("--criterion", only, "Run a single criterion (1-12)")->check(CLI::Range(1, 12));
    app.add_flag("-v,--verbose", verbose, "Print every check");
    CLI11_PARSE(app, argc, argv);

    bool all = true;
    for (const auto& c : criteria())
        if (only == 0 || only == c.id) all = report(c, verbose || only != 0) && all;
    return all ? 0 : 1;
}
