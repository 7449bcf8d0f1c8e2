#include "trapcert/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trapcert/errors.hpp"

namespace trapcert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sq(double v) { return v * v; }

}  // namespace

PositionBound certify_position_bound(const Spectrum1D& s, const ElementResult& x) {
    if (!x.gaps.defined)
        throw TrapError(ErrorKind::MalformedSpec, "position has no active transition");
    PositionBound b;
    b.var_x = variance_ground(s, x.elements).direct;
    b.bound_x = s.hbar * s.hbar / (2.0 * s.mass * x.gaps.delta);
    b.epsilon = b.bound_x - b.var_x;
    return b;
}

double exact_deficit_decomposition(const ElementResult& x) {
    const double delta = x.gaps.delta;
    double acc = 0.0;
    for (std::size_t n = 1; n < x.elements.truncation; ++n)
        acc += (x.elements.gaps[n] - delta) * x.elements.weight(n);
    return acc / delta;
}

double tail_weight(const ElementResult& r) {
    double total = 0.0;
    for (std::size_t n = 1; n < r.elements.truncation; ++n) {
        if (std::find(r.gaps.active_cluster.begin(), r.gaps.active_cluster.end(), n) !=
            r.gaps.active_cluster.end())
            continue;
        total += r.elements.weight(n);
    }
    return total;
}

RigidityD1D2 rigidity_d1_d2(const TrkSummary& summary, double delta, std::optional<double> gamma,
                            double epsilon, double T) {
    RigidityD1D2 r;
    r.T = T;
    if (!gamma || !(*gamma > 0.0)) {
        r.single_channel = true;
        r.d1_rhs = 0.0;
        r.d2_T_rhs = kInf;
        r.d2_eta_rhs = kInf;
        return r;
    }
    const double S = summary.s_direct, G = *gamma;
    r.d1_rhs = S * G / (delta * (delta + G)) * summary.eta_trk;
    r.d2_T_rhs = delta / G * epsilon;
    r.d2_eta_rhs = delta * (delta + G) / (S * G) * epsilon;
    return r;
}

double force_deviation_sq(const Spectrum1D& s, double delta) {
    const auto& pot = *s.potential;
    if (pot.hard_walls()) return kInf;
    const double omega = delta / s.hbar;
    const double k = s.mass * omega * omega;
    const double mean = ground_expectation(s, [](double x) { return x; });
    return ground_expectation(s, [&](double x) {
        return sq(pot.derivatives(x).first - k * (x - mean));
    });
}

RigidityD3 rigidity_d3(const Spectrum1D& s, const ElementResult& x, double delta, double gamma) {
    if (!s.potential->curvature_exact())
        throw TrapError(ErrorKind::CurvatureUnavailable,
                        "force of a tabulated potential is only interpolated");
    RigidityD3 r;
    r.T = tail_weight(x);
    r.g_norm_sq = force_deviation_sq(s, delta);
    const double h4m2 = std::pow(s.hbar, 4) / sq(s.mass);
    r.d3_rhs = std::isfinite(r.g_norm_sq) ? h4m2 * r.g_norm_sq / sq(gamma * (2.0 * delta + gamma))
                                          : kInf;
    return r;
}

UvWindow uv_window_bound(const ElementResult& x, double epsilon, double g_norm_sq, double hbar,
                         double mass, double closure_tol) {
    (void)epsilon;
    UvWindow u;
    const double delta = x.gaps.delta;
    if (x.gaps.tail_indices.empty()) {
        u.note = "no tail channel; window undefined";
        return u;
    }
    double max_gap = 0.0;
    for (std::size_t n : x.gaps.tail_indices) max_gap = std::max(max_gap, x.elements.gaps[n]);
    const double lam = max_gap - delta;
    u.lambda_window = lam;
    const double h4m2 = std::pow(hbar, 4) / sq(mass);
    for (std::size_t n = 1; n < x.elements.truncation; ++n)
        u.phi_truncated += sq(sq(x.elements.gaps[n]) - sq(delta)) * x.elements.weight(n);
    u.phi_direct = h4m2 * g_norm_sq;
    u.uv_rhs = 0.25 * h4m2 * g_norm_sq / (std::pow(delta, 3) * (delta + lam));
    u.uv_rhs_window = h4m2 * g_norm_sq / (delta * lam * sq(2.0 * delta + lam));
    if (!std::isfinite(g_norm_sq)) {
        u.note = "force deviation is unbounded (hard walls)";
        return u;
    }
    const double closure = std::abs(u.phi_truncated - u.phi_direct);
    if (closure > closure_tol * u.phi_direct) {
        u.note = "tail sum does not close on the force deviation within the truncation";
        return u;
    }
    u.applicable = true;
    return u;
}

std::array<double, 4> equality_battery(const PositionBound& bound, const ElementResult& x,
                                       double eta_trk, double g_norm_sq, double hbar,
                                       double mass) {
    const double omega = x.gaps.delta / hbar;
    return {bound.epsilon / bound.bound_x, 1.0 - x.gaps.active_weight / bound.var_x, eta_trk,
            g_norm_sq / (sq(mass) * std::pow(omega, 4) * bound.var_x)};
}

Polarizability polarizability(const ElementResult& x, double var_x, double hbar, double mass) {
    Polarizability p;
    for (std::size_t n = 1; n < x.elements.truncation; ++n)
        p.alpha0 += 2.0 * x.elements.weight(n) / x.elements.gaps[n];
    p.alpha_mid = 2.0 * var_x / x.gaps.delta;
    p.alpha_bound = sq(hbar) / (mass * sq(x.gaps.delta));
    return p;
}

QuantumMetric quantum_metric(double var_x, double delta, double hbar, double mass) {
    return {var_x / sq(hbar), 1.0 / (2.0 * mass * delta)};
}

QuantumMetric metric_bound(double var_a, double s_a, double delta_a, double hbar) {
    return {var_a / sq(hbar), s_a / (sq(hbar) * delta_a)};
}

MomentumCorridor momentum_corridor(const Spectrum1D& s, const ElementResult& p,
                                   const TrkSummary& p_summary, double delta,
                                   std::optional<double> gamma) {
    MomentumCorridor c;
    c.varp = variance_ground(s, p.elements).direct;
    c.varp_floor = 0.5 * s.mass * delta;
    const double S = p_summary.s_direct;
    c.varp_ub = S / delta;
    c.varp_lb = gamma ? S / (delta + *gamma) : 0.0;
    c.max_contributing_gap = p.gaps.defined ? p.gaps.delta : 0.0;
    for (std::size_t n : p.gaps.tail_indices)
        c.max_contributing_gap = std::max(c.max_contributing_gap, p.elements.gaps[n]);
    if (!std::isfinite(S)) {
        c.note = "curvature is singular at hard walls; upper and lower bounds are infinite";
        c.lb_applicable = false;
    } else if (!gamma) {
        c.note = "second gap unavailable";
    } else {
        c.lb_applicable = c.max_contributing_gap <= (delta + *gamma) * (1.0 + 1e-9);
        if (!c.lb_applicable)
            c.note = "momentum couples above Delta + Gamma; lower bound is informational";
    }
    return c;
}

CertificateCore compute_core(const Spectrum1D& s, std::size_t K, double tau, double quad_tol) {
    (void)quad_tol;
    CertificateCore c;
    const auto x = matrix_elements_position(s, K, tau);
    const auto p = matrix_elements_momentum(s, K, tau);
    const auto f2 = matrix_elements_general(s, power_observable(2), K, tau);
    const auto tx = trk_sum(s, x);
    const auto tp = trk_sum(s, p);
    const auto tf = trk_sum(s, f2);

    c.E0 = s.energies[0];
    c.E1 = s.energies[1];
    c.E2 = K > 2 ? s.energies[2] : 0.0;
    const auto bound = certify_position_bound(s, x);
    c.delta = x.gaps.delta;
    const std::size_t a = x.gaps.active_index;
    c.gamma = a + 1 < s.size() ? s.energies[a + 1] - s.energies[a] : 0.0;
    c.has_gamma_active = x.gaps.gamma.has_value();
    c.gamma_active = x.gaps.gamma.value_or(0.0);
    c.has_tail = !x.gaps.tail_indices.empty();
    c.active_x = a;
    c.threshold_sensitive_x = x.gaps.threshold_sensitive;

    c.var_x = bound.var_x;
    c.var_x_spectral = x.elements.total_weight();
    c.bound_x = bound.bound_x;
    c.epsilon = bound.epsilon;
    c.epsilon_spectral = exact_deficit_decomposition(x);
    c.s_spectral_x = tx.s_spectral;
    c.s_lattice_x = tx.s_lattice;
    c.eta_trk = tx.eta_trk;
    c.eta_tilde = tx.eta_tilde;

    const auto r12 = rigidity_d1_d2(tx, c.delta, c.gamma, c.epsilon, tail_weight(x));
    c.T = r12.T;
    c.d1_rhs = r12.d1_rhs;
    c.d2_T_rhs = r12.d2_T_rhs;
    c.d2_eta_rhs = r12.d2_eta_rhs;

    c.g_norm_sq = force_deviation_sq(s, c.delta);
    try {
        c.d3_rhs = rigidity_d3(s, x, c.delta, c.gamma).d3_rhs;
    } catch (const TrapError& e) {
        if (e.kind() != ErrorKind::CurvatureUnavailable) throw;
        c.d3_available = false;
        c.d3_note = e.what();
        c.d3_rhs = kInf;
    }
    if (s.potential->hard_walls()) c.d3_note = "force deviation is unbounded at hard walls";

    const auto uv = uv_window_bound(x, c.epsilon, c.g_norm_sq, s.hbar, s.mass);
    c.uv_applicable = uv.applicable;
    c.uv_note = uv.note;
    c.lambda_window = uv.lambda_window.value_or(0.0);
    c.uv_rhs = uv.lambda_window ? uv.uv_rhs : 0.0;
    c.uv_rhs_window = uv.lambda_window ? uv.uv_rhs_window : 0.0;
    c.phi_truncated = uv.phi_truncated;
    c.phi_direct = uv.phi_direct;

    c.battery = equality_battery(bound, x, c.eta_trk, c.g_norm_sq, s.hbar, s.mass);
    const auto pol = polarizability(x, c.var_x, s.hbar, s.mass);
    c.alpha0 = pol.alpha0;
    c.alpha_mid = pol.alpha_mid;
    c.alpha_bound = pol.alpha_bound;
    const auto qm = quantum_metric(c.var_x, c.delta, s.hbar, s.mass);
    c.g_xx = qm.g_xx;
    c.g_xx_bound = qm.g_xx_bound;

    const auto mc = momentum_corridor(s, p, tp, c.delta, c.gamma);
    c.varp = mc.varp;
    c.varp_spectral = p.elements.total_weight();
    c.s_p_direct = tp.s_direct;
    c.s_p_spectral = tp.s_spectral;
    c.varp_ub = mc.varp_ub;
    c.varp_lb = mc.varp_lb;
    c.varp_floor = mc.varp_floor;
    c.lb_applicable = mc.lb_applicable;
    c.max_p_gap = mc.max_contributing_gap;
    c.momentum_note = mc.note;
    c.active_p = p.gaps.active_index;

    const auto v2 = variance_ground(s, f2.elements);
    c.var_x2 = v2.direct;
    c.var_x2_spectral = v2.spectral;
    c.s_x2_direct = tf.s_direct;
    c.s_x2_spectral = tf.s_spectral;
    c.delta_x2 = f2.gaps.delta;
    c.active_x2 = f2.gaps.active_index;

    c.degenerate = static_cast<int>(s.degenerate_pairs.size());
    double vmax = 0.0;
    for (double v : s.wavefunctions[0]) vmax = std::max(vmax, std::abs(v));
    for (double v : s.wavefunctions[0])
        if (v < -1e-12 * vmax) c.ground_positive = false;
    for (std::size_t n = 0; n < K; ++n)
        if (count_nodes(s.wavefunctions[n]) != static_cast<int>(n)) c.nodes_ok = false;
    return c;
}

bool Certificate::all_pass() const {
    for (const auto& v : verdicts)
        if (v.gating && !v.passed) return false;
    return true;
}

const Verdict* Certificate::find(const std::string& name) const {
    for (const auto& v : verdicts)
        if (v.name == name) return &v;
    return nullptr;
}

namespace {

bool same_structure(const CertificateCore& a, const CertificateCore& b) {
    return a.active_x == b.active_x && a.active_p == b.active_p && a.active_x2 == b.active_x2 &&
           a.has_gamma_active == b.has_gamma_active && a.has_tail == b.has_tail;
}

// Applicability tests sit on thresholds that the two levels may straddle;
// when they disagree the test is repeated on the extrapolated scalars.
void reassess_applicability(const CertificateCore& fine, const CertificateCore& coarse,
                            CertificateCore& v) {
    if (fine.uv_applicable != coarse.uv_applicable) {
        v.uv_applicable = std::isfinite(v.phi_direct) &&
                          std::abs(v.phi_truncated - v.phi_direct) <= 1e-3 * v.phi_direct;
        v.uv_note = v.uv_applicable
                        ? "window closure decided on extrapolated values"
                        : "tail sum does not close on the force deviation within the truncation";
    }
    if (fine.lb_applicable != coarse.lb_applicable) {
        v.lb_applicable = v.max_p_gap <= (v.delta + v.gamma) * (1.0 + 1e-9);
        v.momentum_note = v.lb_applicable
                              ? ""
                              : "momentum couples above Delta + Gamma; lower bound is informational";
    }
}

// Field-wise extrapolation; non-finite values are passed through unchanged.
void extrapolate(const CertificateCore& fine, const CertificateCore& coarse,
                 CertificateCore& value, CertificateCore& allowance) {
    value = fine;
    allowance = CertificateCore{};
    std::vector<double> c;
    CertificateCore coarse_copy = coarse;
    coarse_copy.for_each_scalar([&](const char*, double& v) { c.push_back(v); });
    std::vector<double*> vals, allows;
    value.for_each_scalar([&](const char*, double& v) { vals.push_back(&v); });
    allowance.for_each_scalar([&](const char*, double& v) { allows.push_back(&v); });
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double f = *vals[i];
        if (std::isfinite(f) && std::isfinite(c[i])) {
            *vals[i] = richardson(f, c[i]);
            *allows[i] = richardson_allowance(f, c[i]);
        }
    }
}

}  // namespace

Certificate certify_spectrum(const Spectrum1D& s, std::size_t K, double tau, double quad_tol) {
    Certificate cert;
    cert.potential_kind = std::string(to_string(s.potential->kind()));
    cert.K = K;
    cert.tau = tau;
    cert.provenance = s.convergence;
    cert.grid = s.grid;

    const CertificateCore fine = compute_core(s, K, tau, quad_tol);
    if (s.coarser && s.coarser->size() >= K) {
        const CertificateCore coarse = compute_core(*s.coarser, K, tau, quad_tol);
        if (same_structure(fine, coarse)) {
            extrapolate(fine, coarse, cert.values, cert.allowance);
            reassess_applicability(fine, coarse, cert.values);
            cert.extrapolated = true;
        } else {
            cert.values = fine;
            cert.notes.push_back(
                "gap classification differs between the two finest grids; values are not "
                "extrapolated");
        }
    } else {
        cert.values = fine;
        cert.notes.push_back("no coarser level available; values are not extrapolated");
    }

    const CertificateCore& v = cert.values;
    const CertificateCore& al = cert.allowance;
    const double kin = s.hbar * s.hbar / (2.0 * s.mass);
    const double res_x = std::abs(v.s_spectral_x - kin);
    const double res_p = std::abs(v.s_p_spectral - v.s_p_direct);
    const double res_x2 = std::abs(v.s_x2_spectral - v.s_x2_direct);
    const double base = quad_tol + res_x;

    auto add = [&](std::string name, bool passed, double lhs, double rhs, double tol,
                   std::string note = {}, bool gating = true) {
        cert.verdicts.push_back({std::move(name), passed, gating, lhs, rhs, tol, std::move(note)});
    };
    // lhs <= rhs within tol.
    auto leq = [&](std::string name, double lhs, double rhs, double tol, std::string note = {},
                   bool gating = true) {
        const bool ok = !std::isfinite(rhs) ? (rhs > 0.0) : lhs <= rhs + tol;
        add(std::move(name), ok, lhs, rhs, tol, std::move(note), gating);
    };

    add("nondegenerate_spectrum", v.degenerate == 0, v.degenerate, 0.0, 0.0);
    add("ground_state_positive", v.ground_positive, v.ground_positive ? 1.0 : 0.0, 1.0, 0.0);
    add("node_count", v.nodes_ok, v.nodes_ok ? 1.0 : 0.0, 1.0, 0.0);
    add("threshold_robust_x", !v.threshold_sensitive_x, 0.0, 0.0, 0.0,
        v.threshold_sensitive_x ? "ThresholdSensitive" : "");

    leq("position_bound", v.var_x, v.bound_x, base + al.var_x + al.bound_x);
    {
        const double tol = quad_tol + res_x / v.delta + std::abs(v.var_x - v.var_x_spectral) +
                           al.epsilon + al.epsilon_spectral;
        const double diff = std::abs(v.epsilon - v.epsilon_spectral);
        add("deficit_decomposition", diff <= tol, v.epsilon, v.epsilon_spectral, tol);
    }
    {
        const double tol = std::max(1e-5, al.s_spectral_x);
        add("trk_closure_x", res_x < tol, v.s_spectral_x, kin, tol);
    }
    leq("parseval_x", v.var_x_spectral, v.var_x, quad_tol + al.var_x + al.var_x_spectral);

    const bool single = !v.has_gamma_active;
    const std::string single_note = single ? "single active channel" : "";
    add("d1", v.epsilon >= v.d1_rhs - (base + al.epsilon + al.d1_rhs), v.epsilon, v.d1_rhs,
        base + al.epsilon + al.d1_rhs, single_note);
    leq("d2_tail", v.T, v.d2_T_rhs, base + al.T + al.d2_T_rhs, single_note);
    leq("d2_eta", v.eta_trk, v.d2_eta_rhs, base / kin + al.eta_trk + al.d2_eta_rhs, single_note);
    if (v.d3_available) {
        leq("d3", v.T, v.d3_rhs, base + al.T + al.d3_rhs, v.d3_note);
    } else {
        add("d3", true, v.T, v.d3_rhs, 0.0, v.d3_note, false);
    }

    if (v.uv_applicable) {
        const double tol = base + al.epsilon + al.uv_rhs_window;
        add("uv_window", v.epsilon >= v.uv_rhs_window - tol, v.epsilon, v.uv_rhs_window, tol,
            "window bound from the tail sum");
    } else {
        add("uv_window", true, v.epsilon, v.uv_rhs_window, 0.0,
            v.uv_note.empty() ? "not applicable" : "not applicable: " + v.uv_note, false);
    }
    if (v.has_tail && !std::isfinite(v.g_norm_sq)) {
        add("uv_window_closed_form", true, v.epsilon, v.uv_rhs, 0.0,
            "not applicable: force deviation is unbounded (hard walls)", false);
    } else if (v.has_tail) {
        const double tol = base + al.epsilon + al.uv_rhs;
        add("uv_window_closed_form", v.epsilon >= v.uv_rhs - tol, v.epsilon, v.uv_rhs, tol,
            "closed-form window expression; reported, not gating", false);
    }

    {
        const double tol = base / kin + al.eta_trk + al.eta_tilde;
        const double lower = v.gamma / (v.delta + v.gamma) * v.eta_trk;
        const bool ok = v.eta_tilde >= lower - tol && v.eta_tilde <= v.eta_trk + tol;
        if (!ok)
            throw TrapError(ErrorKind::CorridorViolation,
                            "eta_tilde " + std::to_string(v.eta_tilde) + " outside [" +
                                std::to_string(lower) + ", " + std::to_string(v.eta_trk) + "]");
        add("corridor", ok, v.eta_tilde, v.eta_trk, tol,
            "lower edge " + std::to_string(lower));
    }

    leq("polarizability_sum", v.alpha0, v.alpha_mid, base + al.alpha0 + al.alpha_mid);
    leq("polarizability_bound", v.alpha_mid, v.alpha_bound, base + al.alpha_mid + al.alpha_bound);
    leq("metric_bound_x", v.g_xx, v.g_xx_bound, base + al.g_xx + al.g_xx_bound);

    const double tol_p = quad_tol + res_p + al.varp + al.varp_ub;
    leq("momentum_upper", v.varp, v.varp_ub, tol_p, v.momentum_note);
    add("momentum_floor", v.varp >= v.varp_floor - (quad_tol + al.varp + al.varp_floor), v.varp,
        v.varp_floor, quad_tol + al.varp + al.varp_floor);
    if (!std::isfinite(v.varp_lb)) {
        add("momentum_lower", true, v.varp, v.varp_lb, 0.0, "not applicable: " + v.momentum_note,
            false);
    } else {
        const double tol = quad_tol + res_p + al.varp + al.varp_lb;
        const bool ok = v.varp >= v.varp_lb - tol;
        add("momentum_lower", ok, v.varp, v.varp_lb, tol,
            v.lb_applicable ? "" : (v.momentum_note.empty() ? "informational" : v.momentum_note),
            v.lb_applicable);
    }

    {
        const double tol = quad_tol + res_x2 + al.var_x2 + al.s_x2_direct;
        leq("master_inequality_x2", v.var_x2, v.s_x2_direct / v.delta_x2, tol);
        const auto m = metric_bound(v.var_x2, v.s_x2_direct, v.delta_x2, s.hbar);
        leq("metric_bound_x2", m.g_xx, m.g_xx_bound, tol / (s.hbar * s.hbar));
    }

    // Resolution-of-identity self-checks: direct double commutator against
    // twice the spectral sum.
    auto identity = [&](const std::string& name, double direct, double spectral, double al_d,
                        double al_s) {
        if (!std::isfinite(direct)) {
            add(name, true, 2.0 * direct, 2.0 * spectral, 0.0,
                "not applicable: double commutator is singular at hard walls", false);
            return;
        }
        const double tol = std::max({1e-5, 1e-5 * std::abs(direct), al_d + al_s});
        add(name, std::abs(direct - spectral) <= tol, 2.0 * direct, 2.0 * spectral, 2.0 * tol);
    };
    identity("spectral_identity_x", kin, v.s_spectral_x, 0.0, al.s_spectral_x);
    identity("spectral_identity_p", v.s_p_direct, v.s_p_spectral, al.s_p_direct, al.s_p_spectral);
    identity("spectral_identity_x2", v.s_x2_direct, v.s_x2_spectral, al.s_x2_direct,
             al.s_x2_spectral);

    if (!s.potential->curvature_exact())
        cert.notes.push_back("curvature comes from a spline; force-based quantities are approximate");
    return cert;
}

Certificate certify_1d(const PotentialSpec& spec, const CertifyOptions& o) {
    if (o.K < 3) throw TrapError(ErrorKind::MalformedSpec, "certification needs K >= 3");
    std::size_t K = o.K;
    const double kin = spec.hbar() * spec.hbar() / (2.0 * spec.mass());
    for (;;) {
        ConvergeOptions co;
        co.tail_tol = o.tail_tol;
        const Spectrum1D s = converge(spec, K, o.rtol, co);
        // Truncation-only residuals of the observables with a lattice double
        // commutator; the worst one decides whether K grows.
        const auto x = matrix_elements_position(s, K, o.tau);
        const auto t = trk_sum(s, x);
        const auto t2 = trk_sum(s, matrix_elements_general(s, power_observable(2), K, o.tau));
        const double truncation = std::max(std::abs(t.s_spectral - t.s_lattice) / kin,
                                           std::abs(t2.s_spectral - t2.s_lattice) / t2.s_lattice);
        if (truncation <= o.trk_target || 2 * K > o.K_max) {
            Certificate cert = certify_spectrum(s, K, o.tau, o.quad_tol);
            if (truncation > o.trk_target)
                cert.notes.push_back("truncation residual above target at maximum K");
            return cert;
        }
        K *= 2;
    }
}

}  // namespace trapcert
