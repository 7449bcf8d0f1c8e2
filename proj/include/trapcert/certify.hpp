#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "trapcert/observables.hpp"
#include "trapcert/solver1d.hpp"

namespace trapcert {

struct Verdict {
    std::string name;
    bool passed = true;
    // Non-gating verdicts are reported but do not decide the certificate.
    bool gating = true;
    double lhs = 0.0;
    double rhs = 0.0;
    double tolerance = 0.0;
    std::string note;
};

struct PositionBound {
    double var_x = 0.0;
    double bound_x = 0.0;
    double epsilon = 0.0;
};

struct RigidityD1D2 {
    double T = 0.0;
    double d1_rhs = 0.0;
    double d2_T_rhs = 0.0;
    double d2_eta_rhs = 0.0;
    bool single_channel = false;
};

struct RigidityD3 {
    double T = 0.0;
    double d3_rhs = 0.0;
    double g_norm_sq = 0.0;
};

struct UvWindow {
    bool applicable = false;
    std::optional<double> lambda_window;
    // Closed form (hbar^4 / 4m^2) g^2 / (Delta^3 (Delta + Lambda)).
    double uv_rhs = 0.0;
    // Window bound obtained from the tail sum itself:
    // hbar^4 g^2 / (m^2 Delta Lambda (2 Delta + Lambda)^2).
    double uv_rhs_window = 0.0;
    // Truncated sum of (g_n^2 - Delta^2)^2 |x_n0|^2 against hbar^4 g^2 / m^2.
    double phi_truncated = 0.0;
    double phi_direct = 0.0;
    std::string note;
};

struct Polarizability {
    double alpha0 = 0.0;
    double alpha_mid = 0.0;    // 2 Var0(x) / Delta
    double alpha_bound = 0.0;  // hbar^2 / (m Delta^2)
};

struct QuantumMetric {
    double g_xx = 0.0;
    double g_xx_bound = 0.0;
};

struct MomentumCorridor {
    double varp = 0.0;
    double varp_ub = 0.0;
    double varp_lb = 0.0;
    bool lb_applicable = false;
    double varp_floor = 0.0;
    double max_contributing_gap = 0.0;
    std::string note;
};

PositionBound certify_position_bound(const Spectrum1D& spectrum, const ElementResult& x);

// Deficit rebuilt from the tail of the position spectrum.
double exact_deficit_decomposition(const ElementResult& x);

// Tail weight beyond the active cluster.
double tail_weight(const ElementResult& result);

RigidityD1D2 rigidity_d1_d2(const TrkSummary& summary, double delta, std::optional<double> gamma,
                            double epsilon, double T);

// Throws CurvatureUnavailable for tabulated potentials.
RigidityD3 rigidity_d3(const Spectrum1D& spectrum, const ElementResult& x, double delta,
                       double gamma);

// ||V' - m w^2 (x - <x>)||^2 in the ground density, w = delta / hbar.
double force_deviation_sq(const Spectrum1D& spectrum, double delta);

UvWindow uv_window_bound(const ElementResult& x, double epsilon, double g_norm_sq, double hbar,
                         double mass, double closure_tol = 1e-3);

// (1) eps/bound, (2) overlap defect, (3) eta_trk, (4) force-linearity defect.
std::array<double, 4> equality_battery(const PositionBound& bound, const ElementResult& x,
                                       double eta_trk, double g_norm_sq, double hbar,
                                       double mass);

Polarizability polarizability(const ElementResult& x, double var_x, double hbar, double mass);

QuantumMetric quantum_metric(double var_x, double delta, double hbar, double mass);
// Generic metric bound: Var0(A)/hbar^2 <= S_A / (hbar^2 Delta_A).
QuantumMetric metric_bound(double var_a, double s_a, double delta_a, double hbar);

MomentumCorridor momentum_corridor(const Spectrum1D& spectrum, const ElementResult& p,
                                   const TrkSummary& p_summary, double delta,
                                   std::optional<double> gamma);

struct CertifyOptions {
    std::size_t K = 32;
    std::size_t K_max = 256;
    double rtol = 1e-8;
    double tail_tol = 1e-10;
    double tau = 1e-10;
    // Relative truncation-only residual of the x and x^2 sum rules that stops
    // the growth of K.
    double trk_target = 5e-6;
    double quad_tol = 1e-10;
};

// Every scalar evaluated on one grid level.
struct CertificateCore {
    double E0 = 0, E1 = 0, E2 = 0;
    double delta = 0, gamma = 0, gamma_active = 0;
    double var_x = 0, var_x_spectral = 0, bound_x = 0, epsilon = 0, epsilon_spectral = 0;
    double T = 0, s_spectral_x = 0, s_lattice_x = 0, eta_trk = 0, eta_tilde = 0;
    double d1_rhs = 0, d2_T_rhs = 0, d2_eta_rhs = 0;
    double g_norm_sq = 0, d3_rhs = 0;
    double lambda_window = 0, uv_rhs = 0, uv_rhs_window = 0, phi_truncated = 0, phi_direct = 0;
    double alpha0 = 0, alpha_mid = 0, alpha_bound = 0;
    double g_xx = 0, g_xx_bound = 0;
    double varp = 0, varp_spectral = 0, s_p_direct = 0, s_p_spectral = 0;
    double varp_ub = 0, varp_lb = 0, varp_floor = 0, max_p_gap = 0;
    double var_x2 = 0, var_x2_spectral = 0, s_x2_direct = 0, s_x2_spectral = 0, delta_x2 = 0;
    std::array<double, 4> battery{};

    // Discrete structure that must agree between levels for extrapolation.
    std::size_t active_x = 0, active_p = 0, active_x2 = 0;
    bool has_gamma_active = false, has_tail = false;
    bool uv_applicable = false, lb_applicable = false;
    bool threshold_sensitive_x = false;
    bool d3_available = true;
    std::string uv_note, momentum_note, d3_note;
    int degenerate = 0;
    bool ground_positive = true;
    bool nodes_ok = true;

    template <class F>
    void for_each_scalar(F&& f) {
        f("E0", E0); f("E1", E1); f("E2", E2);
        f("delta", delta); f("gamma", gamma); f("gamma_active", gamma_active);
        f("var_x", var_x); f("var_x_spectral", var_x_spectral); f("bound_x", bound_x);
        f("epsilon", epsilon); f("epsilon_spectral", epsilon_spectral);
        f("T", T); f("s_spectral_x", s_spectral_x); f("s_lattice_x", s_lattice_x);
        f("eta_trk", eta_trk); f("eta_tilde", eta_tilde);
        f("d1_rhs", d1_rhs); f("d2_T_rhs", d2_T_rhs); f("d2_eta_rhs", d2_eta_rhs);
        f("g_norm_sq", g_norm_sq); f("d3_rhs", d3_rhs);
        f("lambda_window", lambda_window); f("uv_rhs", uv_rhs); f("uv_rhs_window", uv_rhs_window);
        f("phi_truncated", phi_truncated); f("phi_direct", phi_direct);
        f("alpha0", alpha0); f("alpha_mid", alpha_mid); f("alpha_bound", alpha_bound);
        f("g_xx", g_xx); f("g_xx_bound", g_xx_bound);
        f("varp", varp); f("varp_spectral", varp_spectral);
        f("s_p_direct", s_p_direct); f("s_p_spectral", s_p_spectral);
        f("varp_ub", varp_ub); f("varp_lb", varp_lb); f("varp_floor", varp_floor);
        f("max_p_gap", max_p_gap);
        f("var_x2", var_x2); f("var_x2_spectral", var_x2_spectral);
        f("s_x2_direct", s_x2_direct); f("s_x2_spectral", s_x2_spectral); f("delta_x2", delta_x2);
        f("battery_1", battery[0]); f("battery_2", battery[1]);
        f("battery_3", battery[2]); f("battery_4", battery[3]);
    }
};

CertificateCore compute_core(const Spectrum1D& spectrum, std::size_t K, double tau,
                             double quad_tol);

struct Certificate {
    std::string potential_kind;
    std::size_t K = 0;
    double tau = 0.0;
    CertificateCore values;      // extrapolated where possible
    CertificateCore allowance;   // per-scalar discretization allowance
    bool extrapolated = false;
    std::vector<Verdict> verdicts;
    std::vector<std::string> notes;
    ConvergenceRecord provenance;
    Grid1D grid{0.0, 1.0, 64};

    bool all_pass() const;
    const Verdict* find(const std::string& name) const;
};

// Builds the certificate from a converged spectrum that carries its coarser
// level, then evaluates every verdict with the tolerance stack.
Certificate certify_spectrum(const Spectrum1D& spectrum, std::size_t K, double tau,
                             double quad_tol = 1e-10);

// Full pipeline: adaptive truncation, convergence, certification.
Certificate certify_1d(const PotentialSpec& spec, const CertifyOptions& options = {});

}  // namespace trapcert
