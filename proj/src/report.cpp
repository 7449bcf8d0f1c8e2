#include "trapcert/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "trapcert/errors.hpp"

namespace trapcert {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void malformed(const std::string& what) {
    throw TrapError(ErrorKind::MalformedSpec, what);
}

void check_keys(const nlohmann::json& j, const std::string& block,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) malformed("'" + block + "' must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : j.items())
        if (!ok.count(item.key())) malformed("unexpected key '" + item.key() + "' in '" + block + "'");
}

double get_number(const nlohmann::json& j, const char* key, const std::string& block) {
    if (!j.at(key).is_number()) malformed("'" + block + "." + key + "' must be a number");
    const double v = j.at(key).get<double>();
    if (!std::isfinite(v)) malformed("'" + block + "." + key + "' must be finite");
    return v;
}

std::size_t get_count(const nlohmann::json& j, const char* key, const std::string& block) {
    if (!j.at(key).is_number_unsigned()) malformed("'" + block + "." + key + "' must be a positive integer");
    return j.at(key).get<std::size_t>();
}

std::string get_string(const nlohmann::json& j, const char* key, const std::string& block) {
    if (!j.at(key).is_string()) malformed("'" + block + "." + key + "' must be a string");
    return j.at(key).get<std::string>();
}

RunMode parse_mode(const std::string& s) {
    if (s == "certify-1d") return RunMode::Certify1D;
    if (s == "sweep-1d") return RunMode::Sweep1D;
    if (s == "certify-2d") return RunMode::Certify2D;
    if (s == "spectro") return RunMode::Spectro;
    malformed("unknown mode '" + s + "'");
}

SolverBlock parse_solver(const nlohmann::json& j) {
    check_keys(j, "solver", {"K", "rtol", "tail_tol", "tau"});
    SolverBlock s;
    if (j.contains("K")) s.K = get_count(j, "K", "solver");
    if (j.contains("rtol")) s.rtol = get_number(j, "rtol", "solver");
    if (j.contains("tail_tol")) s.tail_tol = get_number(j, "tail_tol", "solver");
    if (j.contains("tau")) s.tau = get_number(j, "tau", "solver");
    if (s.K < 3) malformed("solver.K must be at least 3");
    if (!(s.rtol > 0.0) || !(s.tail_tol > 0.0) || !(s.tau >= 0.0))
        malformed("solver tolerances must be positive");
    return s;
}

Axis parse_axis(const nlohmann::json& j, const char* key, std::size_t n_interior) {
    if (!j.at(key).is_array() || j.at(key).size() != 2) malformed(std::string("grid.") + key + " must be [lo, hi]");
    return Axis(j.at(key)[0].get<double>(), j.at(key)[1].get<double>(), n_interior + 2);
}

MagneticSetup parse_setup(const nlohmann::json& j) {
    check_keys(j, "setup", {"B", "q", "potential", "grid", "direction_u"});
    MagneticSetup s;
    if (j.contains("B")) s.B = get_number(j, "B", "setup");
    if (j.contains("q")) s.q = get_number(j, "q", "setup");
    if (!j.contains("potential")) malformed("setup needs a 'potential' block");
    s.potential = parse_potential_spec(j.at("potential"));
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        check_keys(g, "setup.grid", {"n", "half_width", "nx", "ny", "x", "y"});
        if (g.contains("n")) {
            const double hw = g.contains("half_width") ? get_number(g, "half_width", "setup.grid") : 5.0;
            s.grid = Grid2D::square(hw, get_count(g, "n", "setup.grid"));
        } else if (g.contains("nx") && g.contains("ny") && g.contains("x") && g.contains("y")) {
            s.grid = Grid2D(parse_axis(g, "x", get_count(g, "nx", "setup.grid")),
                            parse_axis(g, "y", get_count(g, "ny", "setup.grid")));
        } else {
            malformed("setup.grid needs either n (and half_width) or nx, ny, x, y");
        }
    }
    if (j.contains("direction_u")) {
        const auto& u = j.at("direction_u");
        if (!u.is_array() || u.size() != 2) malformed("setup.direction_u must be [ux, uy]");
        const double ux = u[0].get<double>(), uy = u[1].get<double>();
        const double n = std::hypot(ux, uy);
        if (!(n > 0.0) || !std::isfinite(n)) malformed("setup.direction_u must be a nonzero vector");
        s.u = {ux / n, uy / n};
    }
    s.validate();
    return s;
}

SpectroBlock parse_spectro(const nlohmann::json& j) {
    check_keys(j, "spectro", {"delta", "gamma", "hbar", "mass", "density"});
    SpectroBlock s;
    s.delta = get_number(j, "delta", "spectro");
    if (!(s.delta > 0.0)) malformed("spectro.delta must be positive");
    if (j.contains("gamma")) {
        s.gamma = get_number(j, "gamma", "spectro");
        if (!(*s.gamma > 0.0)) malformed("spectro.gamma must be positive");
    }
    if (j.contains("hbar")) s.units.hbar = get_number(j, "hbar", "spectro");
    if (j.contains("mass")) s.units.mass = get_number(j, "mass", "spectro");
    if (!(s.units.hbar > 0.0) || !(s.units.mass > 0.0)) malformed("spectro hbar and mass must be positive");
    if (!j.contains("density")) malformed("spectro needs a 'density' block");
    const auto& d = j.at("density");
    check_keys(d, "spectro.density", {"x0", "dx", "values"});
    s.x0 = get_number(d, "x0", "spectro.density");
    s.dx = get_number(d, "dx", "spectro.density");
    if (!(s.dx > 0.0)) malformed("spectro.density.dx must be positive");
    if (!d.at("values").is_array()) malformed("spectro.density.values must be an array");
    for (const auto& v : d.at("values")) {
        if (!v.is_number()) malformed("spectro.density.values must hold numbers");
        s.rho.push_back(v.get<double>());
    }
    return s;
}

OutputBlock parse_output(const nlohmann::json& j) {
    check_keys(j, "output", {"certificate", "summary", "csv", "plot_data"});
    OutputBlock o;
    if (j.contains("certificate")) o.certificate = get_string(j, "certificate", "output");
    if (j.contains("summary")) o.summary = get_string(j, "summary", "output");
    if (j.contains("csv")) o.csv = get_string(j, "csv", "output");
    if (j.contains("plot_data")) o.plot_data = get_string(j, "plot_data", "output");
    return o;
}

PotentialSpec substitute(const nlohmann::json& fragment, const std::string& parameter, double value) {
    nlohmann::json f = fragment;
    f[parameter] = value;
    return parse_potential_spec(f);
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

ojson number(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson verdicts_json(const std::vector<Verdict>& verdicts) {
    ojson a = ojson::array();
    for (const auto& v : verdicts) {
        ojson e;
        e["name"] = v.name;
        e["passed"] = v.passed;
        e["gating"] = v.gating;
        e["lhs"] = number(v.lhs);
        e["rhs"] = number(v.rhs);
        e["tolerance"] = number(v.tolerance);
        e["note"] = v.note;
        a.push_back(std::move(e));
    }
    return a;
}

ojson numbers(const std::vector<double>& v) {
    ojson a = ojson::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

ojson core_json(CertificateCore core) {
    ojson j;
    core.for_each_scalar([&](const char* name, double& v) { j[name] = number(v); });
    return j;
}

std::string verdict_lines(const std::vector<Verdict>& verdicts) {
    std::string s;
    for (const auto& v : verdicts)
        s += fmt::format("  {:<28} {}{}  lhs {:.6g}  rhs {:.6g}{}\n", v.name, v.passed ? "PASS" : "FAIL",
                         v.gating ? "" : " (informational)", v.lhs, v.rhs,
                         v.note.empty() ? "" : "  " + v.note);
    return s;
}

std::string error_kind_of(const std::exception& e) {
    if (const auto* t = dynamic_cast<const TrapError*>(&e)) return std::string(to_string(t->kind()));
    return "Error";
}

// Trapezoid moments of the samples with stride `step`.
std::array<double, 3> moments(const SpectroBlock& b, std::size_t step) {
    const std::size_t n = (b.rho.size() - 1) / step * step + 1;
    const double h = b.dx * static_cast<double>(step);
    std::array<double, 3> m{};
    for (std::size_t i = 0; i < n; i += step) {
        const double w = (i == 0 || i == n - 1) ? 0.5 * h : h;
        const double x = b.x0 + b.dx * static_cast<double>(i);
        m[0] += w * b.rho[i];
        m[1] += w * b.rho[i] * x;
        m[2] += w * b.rho[i] * x * x;
    }
    return m;
}

}  // namespace

std::string_view to_string(RunMode mode) {
    switch (mode) {
        case RunMode::Certify1D: return "certify-1d";
        case RunMode::Sweep1D: return "sweep-1d";
        case RunMode::Certify2D: return "certify-2d";
        case RunMode::Spectro: return "spectro";
    }
    return "unknown";
}

RunConfig parse_run_config(const nlohmann::json& doc) {
    check_keys(doc, "config", {"mode", "potential", "setup", "solver", "sweep", "output", "spectro"});
    if (!doc.contains("mode")) malformed("config needs a 'mode'");
    RunConfig c;
    c.mode = parse_mode(get_string(doc, "mode", "config"));
    if (doc.contains("solver")) c.solver = parse_solver(doc.at("solver"));
    if (doc.contains("output")) c.output = parse_output(doc.at("output"));

    switch (c.mode) {
        case RunMode::Certify1D:
        case RunMode::Sweep1D:
            if (!doc.contains("potential")) malformed("mode needs a 'potential' block");
            c.potential_fragment = doc.at("potential");
            c.potential = parse_potential_spec(c.potential_fragment);
            if (c.potential->dimension() != 1) malformed("1D modes need a 1D potential");
            break;
        case RunMode::Certify2D:
            if (!doc.contains("setup")) malformed("certify-2d needs a 'setup' block");
            c.setup = parse_setup(doc.at("setup"));
            break;
        case RunMode::Spectro:
            if (!doc.contains("spectro")) malformed("spectro needs a 'spectro' block");
            c.spectro = parse_spectro(doc.at("spectro"));
            break;
    }

    if (c.mode == RunMode::Sweep1D) {
        if (!doc.contains("sweep")) malformed("sweep-1d needs a 'sweep' block");
        const auto& s = doc.at("sweep");
        check_keys(s, "sweep", {"parameter", "values"});
        if (s.contains("parameter")) c.sweep.parameter = get_string(s, "parameter", "sweep");
        if (c.sweep.parameter != "lambda") malformed("only 'lambda' can be swept");
        if (c.potential->kind() != PotentialKind::QuarticFamily)
            malformed("sweeping lambda needs a quartic-family potential");
        if (!s.contains("values") || !s.at("values").is_array() || s.at("values").empty())
            malformed("sweep.values must be a non-empty array");
        std::set<double> seen;
        for (const auto& v : s.at("values")) {
            if (!v.is_number() || !std::isfinite(v.get<double>())) malformed("sweep values must be finite numbers");
            const double x = v.get<double>();
            if (!seen.insert(x).second) {
                c.warnings.push_back(fmt::format("duplicate sweep value {} dropped", format_double(x)));
                continue;
            }
            // Validates every point up front, so a negative lambda is reported before solving.
            substitute(c.potential_fragment, c.sweep.parameter, x);
            c.sweep.values.push_back(x);
        }
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) malformed("cannot open config " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        malformed("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_run_config(doc);
}

void apply_overrides(RunConfig& config, const Overrides& o) {
    if (o.K) {
        if (*o.K < 3) malformed("--k must be at least 3");
        config.solver.K = *o.K;
    }
    if (o.rtol) {
        if (!(*o.rtol > 0.0)) malformed("--rtol must be positive");
        config.solver.rtol = *o.rtol;
    }
    if (o.tau) {
        if (!(*o.tau >= 0.0)) malformed("--tau must be non-negative");
        config.solver.tau = *o.tau;
    }
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", v);
}

namespace {

void dump(const ojson& j, int indent, std::string& out) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    if (j.is_object()) {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        std::size_t k = 0;
        for (auto it = j.begin(); it != j.end(); ++it, ++k) {
            out += inner + ojson(it.key()).dump() + ": ";
            dump(it.value(), indent + 1, out);
            out += k + 1 < j.size() ? ",\n" : "\n";
        }
        out += pad + "}";
    } else if (j.is_array()) {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t k = 0; k < j.size(); ++k) {
            out += inner;
            dump(j[k], indent + 1, out);
            out += k + 1 < j.size() ? ",\n" : "\n";
        }
        out += pad + "]";
    } else if (j.is_number_float()) {
        out += format_double(j.get<double>());
    } else {
        out += j.dump();
    }
}

}  // namespace

std::string serialize(const ojson& doc) {
    std::string out;
    dump(doc, 0, out);
    out += "\n";
    return out;
}

ojson certificate_json(const Certificate& c, const PotentialSpec& spec) {
    ojson j;
    j["potential"] = ojson::parse(to_json(spec).dump());
    j["all_pass"] = c.all_pass();
    j["K"] = c.K;
    j["tau"] = c.tau;
    j["extrapolated"] = c.extrapolated;
    j["values"] = core_json(c.values);
    j["allowance"] = core_json(c.allowance);
    ojson flags;
    flags["active_x"] = c.values.active_x;
    flags["active_p"] = c.values.active_p;
    flags["active_x2"] = c.values.active_x2;
    flags["has_gamma_active"] = c.values.has_gamma_active;
    flags["has_tail"] = c.values.has_tail;
    flags["uv_applicable"] = c.values.uv_applicable;
    flags["lb_applicable"] = c.values.lb_applicable;
    flags["threshold_sensitive_x"] = c.values.threshold_sensitive_x;
    flags["d3_available"] = c.values.d3_available;
    flags["ground_positive"] = c.values.ground_positive;
    flags["nodes_ok"] = c.values.nodes_ok;
    flags["degenerate"] = c.values.degenerate;
    j["flags"] = flags;
    j["verdicts"] = verdicts_json(c.verdicts);
    ojson notes = ojson::array();
    for (const auto& n : c.notes) notes.push_back(n);
    for (const auto* n : {&c.values.uv_note, &c.values.momentum_note, &c.values.d3_note})
        if (!n->empty()) notes.push_back(*n);
    j["notes"] = notes;
    ojson conv;
    conv["grid"] = {c.grid.x_min(), c.grid.x_max()};
    conv["n_points"] = c.provenance.n_points;
    conv["h_used"] = c.provenance.h_used;
    conv["refinements"] = c.provenance.refinements;
    conv["rtol"] = c.provenance.rtol;
    conv["last_relative_change"] = number(c.provenance.last_relative_change);
    conv["boundary_amplitude"] = number(c.provenance.boundary_amplitude);
    conv["richardson_energies"] = numbers(c.provenance.richardson_energies);
    conv["energy_error_estimate"] = numbers(c.provenance.energy_error_estimate);
    j["convergence"] = conv;
    return j;
}

std::string certificate_summary(const Certificate& c) {
    const auto& v = c.values;
    std::string s;
    s += fmt::format("potential: {}\n", c.potential_kind);
    s += fmt::format("result: {}\n", c.all_pass() ? "ALL PASS" : "VERDICT FAILURE");
    s += fmt::format("K = {}, grid points = {}, extrapolated = {}\n", c.K, c.provenance.n_points,
                     c.extrapolated ? "yes" : "no");
    s += fmt::format("E0 = {:.12g}  E1 = {:.12g}  E2 = {:.12g}\n", v.E0, v.E1, v.E2);
    s += fmt::format("Delta = {:.12g}  Gamma = {:.12g}\n", v.delta, v.gamma);
    s += fmt::format("Var0(x) = {:.12g}  bound = {:.12g}  epsilon = {:.6g}\n", v.var_x, v.bound_x, v.epsilon);
    s += fmt::format("Var0(p) = {:.12g}  upper = {:.12g}  floor = {:.12g}\n", v.varp, v.varp_ub, v.varp_floor);
    s += "verdicts:\n" + verdict_lines(c.verdicts);
    for (const auto& n : c.notes) s += "note: " + n + "\n";
    return s;
}

const std::vector<std::string>& SweepTable::columns() {
    static const std::vector<std::string> cols{
        "lambda", "E0", "E1", "E2", "Delta", "Gamma", "var_x", "bound_x", "epsilon", "T",
        "eta_trk", "eta_tilde", "d1_rhs", "d3_rhs", "g_norm_sq", "alpha0", "alpha_bound", "g_xx",
        "varp", "varp_ub", "varp_lb", "varp_floor", "all_pass", "lb_applicable", "uv_applicable",
        "failed_verdicts", "convergence_error", "epsilon_allowance", "status"};
    return cols;
}

std::string SweepTable::csv() const {
    std::string s;
    const auto& cols = columns();
    for (std::size_t k = 0; k < cols.size(); ++k) s += (k ? "," : "") + cols[k];
    s += "\n";
    for (const auto& r : rows) {
        std::vector<std::string> f{format_double(r.value)};
        if (r.certificate) {
            const auto& c = *r.certificate;
            const auto& v = c.values;
            for (double x : {v.E0, v.E1, v.E2, v.delta, v.gamma, v.var_x, v.bound_x, v.epsilon, v.T,
                             v.eta_trk, v.eta_tilde, v.d1_rhs, v.d3_rhs, v.g_norm_sq, v.alpha0,
                             v.alpha_bound, v.g_xx, v.varp, v.varp_ub, v.varp_lb, v.varp_floor})
                f.push_back(format_double(x));
            f.push_back(c.all_pass() ? "1" : "0");
            f.push_back(v.lb_applicable ? "1" : "0");
            f.push_back(v.uv_applicable ? "1" : "0");
            std::string failed;
            for (const auto& vd : c.verdicts)
                if (vd.gating && !vd.passed) failed += (failed.empty() ? "" : ";") + vd.name;
            f.push_back(failed);
            double err = 0.0;
            for (double e : c.provenance.energy_error_estimate) err = std::max(err, std::abs(e));
            f.push_back(format_double(err));
            f.push_back(format_double(c.allowance.epsilon));
        } else {
            f.resize(cols.size() - 1);
        }
        f.push_back(r.status);
        for (std::size_t k = 0; k < f.size(); ++k) s += (k ? "," : "") + f[k];
        s += "\n";
    }
    return s;
}

std::string SweepTable::plot_csv() const {
    std::string s = parameter + ",epsilon\n";
    for (const auto& r : rows)
        if (r.certificate) s += format_double(r.value) + "," + format_double(r.certificate->values.epsilon) + "\n";
    s += "\n" + parameter + ",varp,varp_ub,varp_lb\n";
    for (const auto& r : rows)
        if (r.certificate) {
            const auto& v = r.certificate->values;
            s += fmt::format("{},{},{},{}\n", format_double(r.value), format_double(v.varp),
                             format_double(v.varp_ub), format_double(v.varp_lb));
        }
    s += "\n" + parameter + ",varp_over_varp_ub\n";
    for (const auto& r : rows)
        if (r.certificate) {
            const auto& v = r.certificate->values;
            s += format_double(r.value) + "," + format_double(v.varp / v.varp_ub) + "\n";
        }
    return s;
}

std::size_t sweep_workers() {
    if (const char* env = std::getenv("TRAPCERT_WORKERS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

SweepTable compute_sweep(const RunConfig& config, std::size_t workers) {
    SweepTable t;
    t.parameter = config.sweep.parameter;
    t.rows.resize(config.sweep.values.size());
    CertifyOptions opt;
    opt.K = config.solver.K;
    opt.rtol = config.solver.rtol;
    opt.tail_tol = config.solver.tail_tol;
    opt.tau = config.solver.tau;

    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next++; k < t.rows.size(); k = next++) {
            auto& row = t.rows[k];
            row.value = config.sweep.values[k];
            try {
                row.certificate = certify_1d(substitute(config.potential_fragment, t.parameter, row.value), opt);
            } catch (const std::exception& e) {
                row.status = error_kind_of(e);
            }
        }
    };
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, t.rows.size()));
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    return t;
}

RunResult run_certify_1d(const RunConfig& config, const fs::path& out_dir) {
    if (!config.potential) malformed("certify-1d needs a potential");
    CertifyOptions opt;
    opt.K = config.solver.K;
    opt.rtol = config.solver.rtol;
    opt.tail_tol = config.solver.tail_tol;
    opt.tau = config.solver.tau;
    const auto cert = certify_1d(*config.potential, opt);
    RunResult r;
    r.files = {out_dir / config.output.certificate, out_dir / config.output.summary};
    write_file(r.files[0], serialize(certificate_json(cert, *config.potential)));
    write_file(r.files[1], certificate_summary(cert));
    r.exit_code = cert.all_pass() ? kExitPass : kExitVerdict;
    r.messages.push_back(cert.all_pass() ? "all verdicts pass" : "verdict failure");
    return r;
}

RunResult run_sweep(const RunConfig& config, const fs::path& csv_path) {
    if (config.mode != RunMode::Sweep1D) malformed("run_sweep needs a sweep-1d config");
    RunResult r;
    r.messages = config.warnings;
    const auto table = compute_sweep(config, sweep_workers());
    write_file(csv_path, table.csv());
    r.files.push_back(csv_path);
    if (!config.output.plot_data.empty()) {
        const fs::path plot = csv_path.parent_path() / config.output.plot_data;
        write_file(plot, table.plot_csv());
        r.files.push_back(plot);
    }
    bool failed = false, errored = false;
    for (const auto& row : table.rows) {
        if (!row.certificate) {
            errored = true;
            r.messages.push_back(fmt::format("{} = {}: {}", table.parameter, format_double(row.value), row.status));
        } else if (!row.certificate->all_pass()) {
            failed = true;
        }
    }
    r.exit_code = errored ? kExitError : failed ? kExitVerdict : kExitPass;
    return r;
}

RunResult run_certify_2d(const RunConfig& config, const fs::path& out_dir) {
    if (!config.setup) malformed("certify-2d needs a setup");
    const auto& setup = *config.setup;
    const std::size_t K = config.solver.K;
    const auto run = solve_magnetic(setup, K);

    ojson j;
    j["B"] = setup.B;
    j["q"] = setup.q;
    j["potential"] = ojson::parse(to_json(setup.potential).dump());
    j["grid"] = {{"nx", setup.grid.nx()}, {"ny", setup.grid.ny()},
                 {"x", {setup.grid.x_axis().lo(), setup.grid.x_axis().hi()}},
                 {"y", {setup.grid.y_axis().lo(), setup.grid.y_axis().hi()}}};
    j["direction_u"] = {setup.u[0], setup.u[1]};
    j["K"] = K;
    j["energies"] = numbers(run.fine.energies);
    j["richardson_energies"] = numbers(run.richardson_energies);
    j["max_residual"] = run.fine.max_residual;
    j["coarse_grid_used"] = static_cast<bool>(run.coarse);

    std::string summary = fmt::format("2D trap, B = {}, grid {}x{}\n", format_double(setup.B),
                                      setup.grid.nx(), setup.grid.ny());
    bool pass = true;
    std::vector<std::string> notes;
    if (setup.B != 0.0) {
        const auto c = certify_magnetic(run, setup, K, config.solver.tau);
        pass = c.all_pass();
        ojson t;
        t["var_Ru"] = number(c.var_Ru);
        t["s_direct"] = number(c.s_direct);
        t["s_spectral"] = number(c.s_spectral);
        t["s_spectral_raw"] = number(c.s_spectral_raw);
        t["extrapolated"] = c.extrapolated;
        t["delta"] = number(c.delta);
        t["gamma"] = c.has_gamma ? number(c.gamma) : ojson(nullptr);
        t["bound"] = number(c.bound);
        t["epsilon_u"] = number(c.epsilon_u);
        t["eta_trk"] = number(c.eta_trk);
        t["T"] = number(c.T);
        t["d1_rhs"] = number(c.d1_rhs);
        t["d2_rhs"] = number(c.d2_rhs);
        t["alpha0"] = number(c.alpha0);
        t["alpha_mid"] = number(c.alpha_mid);
        t["alpha_bound"] = number(c.alpha_bound);
        t["g_RR"] = number(c.g_RR);
        t["g_RR_bound"] = number(c.g_RR_bound);
        t["commutator_pi_x"] = number(c.commutator_pi_x);
        t["commutator_pi_y"] = number(c.commutator_pi_y);
        t["omega_transverse"] = number(c.omega_transverse);
        j["transverse"] = t;
        j["verdicts"] = verdicts_json(c.verdicts);
        notes = c.notes;
        summary += fmt::format("Var0(R_u) = {:.12g}  bound = {:.12g}  epsilon_u = {:.6g}\n", c.var_Ru,
                               c.bound, c.epsilon_u);
        summary += "verdicts:\n" + verdict_lines(c.verdicts);
    } else {
        const auto c = certify_direction(run, setup, K, config.solver.tau);
        pass = c.all_pass();
        ojson d;
        d["var"] = number(c.var);
        d["bound"] = number(c.bound);
        d["epsilon"] = number(c.epsilon);
        d["delta"] = number(c.delta);
        d["s_spectral"] = number(c.s_spectral);
        d["active_channels"] = c.active_channels;
        d["var_extrapolated"] = number(c.var_extrapolated);
        d["bound_extrapolated"] = number(c.bound_extrapolated);
        d["s_extrapolated"] = number(c.s_extrapolated);
        d["extrapolated"] = c.extrapolated;
        j["direction"] = d;
        notes = run.notes;
        j["verdicts"] = verdicts_json(c.verdicts);
        summary += fmt::format("Var0(x_u) = {:.12g}  bound = {:.12g}  epsilon = {:.6g}\n",
                               c.var_extrapolated, c.bound_extrapolated,
                               c.bound_extrapolated - c.var_extrapolated);
        summary += "verdicts:\n" + verdict_lines(c.verdicts);
    }
    j["all_pass"] = pass;
    ojson n = ojson::array();
    for (const auto& s : notes) n.push_back(s);
    j["notes"] = n;
    for (const auto& s : notes) summary += "note: " + s + "\n";
    summary.insert(0, fmt::format("result: {}\n", pass ? "ALL PASS" : "VERDICT FAILURE"));

    RunResult r;
    r.files = {out_dir / config.output.certificate, out_dir / config.output.summary};
    write_file(r.files[0], serialize(j));
    write_file(r.files[1], summary);
    r.exit_code = pass ? kExitPass : kExitVerdict;
    return r;
}

SpectroResult analyze_spectro(const SpectroBlock& b) {
    if (b.rho.size() < 5) throw TrapError(ErrorKind::BadDensity, "need at least 5 density samples");
    for (double v : b.rho)
        if (!std::isfinite(v) || v < 0.0)
            throw TrapError(ErrorKind::BadDensity, "density samples must be finite and non-negative");
    if (!(b.delta > 0.0)) throw TrapError(ErrorKind::MalformedSpec, "Delta must be positive");
    const auto fine = moments(b, 1), coarse = moments(b, 2);
    if (!(fine[0] > 0.0) || !std::isfinite(fine[0]) || !(coarse[0] > 0.0))
        throw TrapError(ErrorKind::BadDensity, "density is not normalizable");
    auto variance = [](const std::array<double, 3>& m) {
        const double mean = m[1] / m[0];
        return m[2] / m[0] - mean * mean;
    };
    SpectroResult r;
    r.norm = fine[0];
    r.mean = fine[1] / fine[0];
    r.var_x = variance(fine);
    r.quadrature_error = std::abs(r.var_x - variance(coarse));
    const double hb = b.units.hbar, m = b.units.mass;
    r.bound_x = hb * hb / (2.0 * m * b.delta);
    r.epsilon = r.bound_x - r.var_x;
    r.consistent = r.epsilon >= -(r.quadrature_error + 1e-12 * r.bound_x);
    if (b.gamma && r.consistent) {
        const double S = hb * hb / (2.0 * m), G = *b.gamma, eps = std::max(r.epsilon, 0.0);
        r.T_max = b.delta / G * eps;
        r.eta_max = b.delta * (b.delta + G) / (S * G) * eps;
    }
    return r;
}

RunResult run_spectro(const RunConfig& config, const fs::path& out_dir) {
    if (!config.spectro) malformed("spectro needs a spectro block");
    const auto& b = *config.spectro;
    const auto s = analyze_spectro(b);
    ojson j;
    j["verdict"] = s.consistent ? "CONSISTENT" : "INCONSISTENT";
    j["delta"] = b.delta;
    j["gamma"] = b.gamma ? ojson(*b.gamma) : ojson(nullptr);
    j["norm"] = s.norm;
    j["mean"] = s.mean;
    j["var_x"] = s.var_x;
    j["quadrature_error"] = s.quadrature_error;
    j["bound_x"] = s.bound_x;
    j["epsilon"] = s.epsilon;
    ojson tail;
    tail["status"] = "bounded, not computed";
    tail["T_max"] = s.T_max ? ojson(*s.T_max) : ojson(nullptr);
    tail["eta_trk_max"] = s.eta_max ? ojson(*s.eta_max) : ojson(nullptr);
    j["tail"] = tail;

    std::string summary = fmt::format("verdict: {}\n", s.consistent ? "CONSISTENT" : "INCONSISTENT");
    summary += fmt::format("Var0(x) = {:.12g} from samples (norm {:.12g})\n", s.var_x, s.norm);
    summary += fmt::format("bound = {:.12g}  epsilon = {:.6g}\n", s.bound_x, s.epsilon);
    if (!s.consistent)
        summary += "the variance exceeds the sharp bound, so the data cannot come from a confining trap\n";
    else if (s.T_max)
        summary += fmt::format("tail weight <= {:.6g}, TRK tail fraction <= {:.6g} (bounded, not computed)\n",
                               *s.T_max, *s.eta_max);

    RunResult r;
    r.files = {out_dir / config.output.certificate, out_dir / config.output.summary};
    write_file(r.files[0], serialize(j));
    write_file(r.files[1], summary);
    r.exit_code = s.consistent ? kExitPass : kExitVerdict;
    return r;
}

RunResult run(const RunConfig& config, const fs::path& target) {
    try {
        switch (config.mode) {
            case RunMode::Certify1D: return run_certify_1d(config, target);
            case RunMode::Sweep1D: return run_sweep(config, target);
            case RunMode::Certify2D: return run_certify_2d(config, target);
            case RunMode::Spectro: return run_spectro(config, target);
        }
    } catch (const std::exception& e) {
        RunResult r;
        r.exit_code = kExitError;
        r.messages.push_back(error_kind_of(e) + ": " + e.what());
        return r;
    }
    return {kExitError, {}, {"unknown mode"}};
}

}  // namespace trapcert
