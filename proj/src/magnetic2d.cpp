#include "trapcert/magnetic2d.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "trapcert/errors.hpp"

namespace trapcert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sgn(double v) { return v < 0.0 ? -1.0 : 1.0; }

double sq(double v) { return v * v; }

}  // namespace

Axis::Axis(double lo, double hi, std::size_t n_points) : lo_(lo), hi_(hi), n_(n_points) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
        throw TrapError(ErrorKind::MalformedSpec, "axis needs finite lo < hi");
    if (n_points < 10) throw TrapError(ErrorKind::MalformedSpec, "axis needs at least 10 points");
}

Grid2D Grid2D::square(double half_width, std::size_t n_interior) {
    const Axis axis(-half_width, half_width, n_interior + 2);
    return {axis, axis};
}

double MagneticSetup::ell_B_sq() const {
    if (B == 0.0) return kInf;
    return hbar() / (std::abs(q) * std::abs(B));
}

double MagneticSetup::ell_B() const { return std::sqrt(ell_B_sq()); }

void MagneticSetup::validate() const {
    if (potential.dimension() != 2)
        throw TrapError(ErrorKind::MalformedSpec, "magnetic setup needs a 2D potential");
    if (std::abs(std::hypot(u[0], u[1]) - 1.0) > 1e-12)
        throw TrapError(ErrorKind::MalformedSpec, "direction u must be a unit vector");
    if (q == 0.0 || !std::isfinite(q) || !std::isfinite(B))
        throw TrapError(ErrorKind::MalformedSpec, "charge must be finite and non-zero");
}

void HermitianOperator2D::apply(const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) const {
    const std::size_t nx = grid.nx(), ny = grid.ny();
    out.resize(in.rows(), in.cols());
    for (Eigen::Index c = 0; c < in.cols(); ++c) {
        const cplx* a = in.col(c).data();
        cplx* r = out.col(c).data();
        for (std::size_t j = 0; j < ny; ++j) {
            const cplx ux = link_x[j];
            const cplx uxc = std::conj(ux);
            for (std::size_t i = 0; i < nx; ++i) {
                const std::size_t k = j * nx + i;
                cplx hop_x = 0.0, hop_y = 0.0;
                if (i + 1 < nx) hop_x += ux * a[k + 1];
                if (i > 0) hop_x += uxc * a[k - 1];
                if (j + 1 < ny) hop_y += link_y[i] * a[k + nx];
                if (j > 0) hop_y += std::conj(link_y[i]) * a[k - nx];
                r[k] = diagonal[k] * a[k] - tx * hop_x - ty * hop_y;
            }
        }
    }
}

std::pair<double, double> HermitianOperator2D::spectral_bounds() const {
    const double off = 2.0 * tx + 2.0 * ty;
    const auto [lo, hi] = std::minmax_element(diagonal.begin(), diagonal.end());
    return {*lo - off, *hi + off};
}

namespace {

// Quarter of the harmonic length of the steepest principal curvature at the
// grid minimum of V; infinite when V is flat there.
double trap_length(const MagneticSetup& s) {
    const auto& g = s.grid;
    double vmin = kInf, xm = 0.0, ym = 0.0;
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const double v = s.potential.value(g.x(i), g.y(j));
            if (v < vmin) {
                vmin = v;
                xm = g.x(i);
                ym = g.y(j);
            }
        }
    const auto d = s.potential.derivatives(xm, ym);
    const double mean = 0.5 * (d.vxx + d.vyy);
    const double kmax = mean + std::sqrt(sq(0.5 * (d.vxx - d.vyy)) + sq(d.vxy));
    if (!(kmax > 0.0) || !std::isfinite(kmax)) return kInf;
    const double omega = std::sqrt(kmax / s.mass());
    return std::sqrt(s.hbar() / (s.mass() * omega));
}

}  // namespace

HermitianOperator2D build_hamiltonian_2d(const MagneticSetup& s) {
    s.validate();
    const auto& g = s.grid;
    const double h = std::max(g.hx(), g.hy());
    if (s.B != 0.0 && h > 0.25 * s.ell_B())
        throw TrapError(ErrorKind::GridTooCoarse,
                        "grid spacing exceeds a quarter of the magnetic length");
    if (h > 0.25 * trap_length(s))
        throw TrapError(ErrorKind::GridTooCoarse, "grid spacing exceeds a quarter of the trap length");

    HermitianOperator2D op{g, {}, {}, {}, 0.0, 0.0, 0.0};
    const double hb = s.hbar(), m = s.mass();
    op.tx = hb * hb / (2.0 * m * g.hx() * g.hx());
    op.ty = hb * hb / (2.0 * m * g.hy() * g.hy());
    op.diagonal.resize(g.size());
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const double v = s.potential.value(g.x(i), g.y(j));
            if (!std::isfinite(v))
                throw TrapError(ErrorKind::MalformedSpec, "potential is not finite inside the box");
            op.diagonal[g.index(i, j)] = v;
        }
    op.energy_offset = *std::min_element(op.diagonal.begin(), op.diagonal.end());
    for (double& d : op.diagonal) d += 2.0 * op.tx + 2.0 * op.ty - op.energy_offset;

    const double qb = s.q * s.B / (2.0 * hb);
    op.link_x.resize(g.ny());
    for (std::size_t j = 0; j < g.ny(); ++j) op.link_x[j] = std::polar(1.0, qb * g.y(j) * g.hx());
    op.link_y.resize(g.nx());
    for (std::size_t i = 0; i < g.nx(); ++i) op.link_y[i] = std::polar(1.0, -qb * g.x(i) * g.hy());
    return op;
}

namespace {

Eigen::MatrixXcd orthonormalize(const Eigen::MatrixXcd& X) {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(X);
    return qr.householderQ() * Eigen::MatrixXcd::Identity(X.rows(), X.cols());
}

// Scaled Chebyshev filter damping [a, b] and amplifying below a; a0 is an
// estimate of the lowest eigenvalue used only for scaling.
Eigen::MatrixXcd chebyshev_filter(const HermitianOperator2D& op, const Eigen::MatrixXcd& X,
                                  int degree, double a, double b, double a0) {
    const double e = 0.5 * (b - a), c = 0.5 * (b + a);
    double sigma = e / (a0 - c);
    const double tau = 2.0 / sigma;
    Eigen::MatrixXcd prev = X, cur, next, hx;
    op.apply(prev, hx);
    cur = (hx - c * prev) * (sigma / e);
    for (int i = 2; i <= degree; ++i) {
        const double sigma_new = 1.0 / (tau - sigma);
        op.apply(cur, hx);
        next = (hx - c * cur) * (2.0 * sigma_new / e) - (sigma * sigma_new) * prev;
        prev = std::move(cur);
        cur = std::move(next);
        sigma = sigma_new;
    }
    return cur;
}

}  // namespace

Spectrum2D solve_lowest_2d(const HermitianOperator2D& op, std::size_t K,
                           const Solve2DOptions& o) {
    const std::size_t n = op.size();
    const std::size_t p = K + (o.extra > 0 ? o.extra : std::max<std::size_t>(8, K / 2));
    if (K == 0 || 2 * p > n)
        throw TrapError(ErrorKind::MalformedSpec, "K is too large for the 2D grid");
    const auto [lo, hi] = op.spectral_bounds();
    const double scale = std::max(std::abs(lo), std::abs(hi));

    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXcd X(n, static_cast<Eigen::Index>(p));
    for (Eigen::Index c = 0; c < X.cols(); ++c)
        for (Eigen::Index r = 0; r < X.rows(); ++r) X(r, c) = cplx(gauss(rng), gauss(rng));

    Eigen::MatrixXcd HX;
    Eigen::VectorXd theta;
    double max_res = kInf;
    int it = 0;
    auto rayleigh_ritz = [&]() {
        X = orthonormalize(X);
        op.apply(X, HX);
        Eigen::MatrixXcd G = X.adjoint() * HX;
        G = 0.5 * (G + G.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
        if (es.info() != Eigen::Success)
            throw TrapError(ErrorKind::EigensolverFailure, "Rayleigh-Ritz step failed");
        theta = es.eigenvalues();
        X = X * es.eigenvectors();
        HX = HX * es.eigenvectors();
        max_res = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            max_res = std::max(max_res, (HX.col(kk) - theta(kk) * X.col(kk)).norm());
        }
    };
    rayleigh_ritz();
    for (it = 1; it <= o.max_iterations && max_res > o.tolerance * scale; ++it) {
        const double cut = theta(theta.size() - 1);
        if (!(cut < hi))
            throw TrapError(ErrorKind::EigensolverFailure, "filter interval collapsed");
        X = chebyshev_filter(op, X, o.degree, cut, hi, theta(0));
        rayleigh_ritz();
    }
    if (max_res > o.tolerance * scale)
        throw TrapError(ErrorKind::EigensolverFailure,
                        "subspace iteration stalled at residual " + std::to_string(max_res));

    Spectrum2D s{op.grid, {}, X.leftCols(static_cast<Eigen::Index>(K)), max_res, it, {}};
    for (std::size_t k = 0; k < K; ++k) {
        s.energies.push_back(theta(static_cast<Eigen::Index>(k)) + op.energy_offset);
        // Fix the global phase: largest component real and positive.
        auto col = s.wavefunctions.col(static_cast<Eigen::Index>(k));
        Eigen::Index arg = 0;
        col.cwiseAbs().maxCoeff(&arg);
        col *= std::conj(col(arg)) / std::abs(col(arg));
    }
    const double spread = K > 1 ? s.energies.back() - s.energies.front() : 1.0;
    for (std::size_t k = 1; k < K; ++k)
        if (s.energies[k] - s.energies[k - 1] <= kDegeneracyTol2D * spread)
            s.degenerate_pairs.emplace_back(k - 1, k);
    return s;
}

Eigen::VectorXcd apply_pi(const MagneticSetup& s, int axis, const Eigen::VectorXcd& psi) {
    const auto& g = s.grid;
    const std::size_t nx = g.nx(), ny = g.ny();
    const double qb = s.q * s.B / (2.0 * s.hbar());
    const cplx pref(0.0, -s.hbar() / (2.0 * (axis == 0 ? g.hx() : g.hy())));
    Eigen::VectorXcd out(psi.size());
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t k = g.index(i, j);
            cplx d = 0.0;
            if (axis == 0) {
                const cplx link = std::polar(1.0, qb * g.y(j) * g.hx());
                if (i + 1 < nx) d += link * psi(k + 1);
                if (i > 0) d -= std::conj(link) * psi(k - 1);
            } else {
                const cplx link = std::polar(1.0, -qb * g.x(i) * g.hy());
                if (j + 1 < ny) d += link * psi(k + nx);
                if (j > 0) d -= std::conj(link) * psi(k - nx);
            }
            out(k) = pref * d;
        }
    return out;
}

Eigen::VectorXcd apply_guiding_center(const MagneticSetup& s, const Eigen::VectorXcd& psi) {
    if (s.B == 0.0)
        throw TrapError(ErrorKind::ZeroField, "guiding center is undefined at zero field");
    const auto& g = s.grid;
    const auto w = s.w();
    const double c = -sgn(s.q * s.B) * s.ell_B_sq() / s.hbar();
    Eigen::VectorXcd out = c * (w[0] * apply_pi(s, 0, psi) + w[1] * apply_pi(s, 1, psi));
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i)
            out(g.index(i, j)) += (s.u[0] * g.x(i) + s.u[1] * g.y(j)) * psi(g.index(i, j));
    return out;
}

namespace {

ElementResult project_2d(const Spectrum2D& sp, Eigen::VectorXcd applied, std::size_t K,
                         double tau, double cluster_width, std::string name) {
    if (K < 2 || K > sp.size())
        throw TrapError(ErrorKind::MalformedSpec, "truncation K must lie in [2, #states]");
    const Eigen::VectorXcd psi0 = sp.wavefunctions.col(0);
    const double mean = psi0.dot(applied).real();
    applied -= mean * psi0;
    ElementResult r;
    r.elements.observable = ObservableKind::Position;
    r.elements.name = std::move(name);
    r.elements.tau = tau;
    r.elements.truncation = K;
    r.elements.magnitudes.assign(K, 0.0);
    r.elements.gaps.assign(K, 0.0);
    std::vector<double> weights(K, 0.0);
    for (std::size_t n = 1; n < K; ++n) {
        const auto nn = static_cast<Eigen::Index>(n);
        r.elements.magnitudes[n] = std::abs(sp.wavefunctions.col(nn).dot(applied));
        r.elements.gaps[n] = sp.energies[n] - sp.energies[0];
        weights[n] = r.elements.weight(n);
    }
    const double width = cluster_width * (sp.energies[K - 1] - sp.energies[0]);
    r.gaps = classify_gaps(r.elements.gaps, weights, tau, width);
    r.gaps.threshold_sensitive = !threshold_robust(r.elements.gaps, weights, width);
    return r;
}

Eigen::VectorXcd centered(const Spectrum2D& sp, Eigen::VectorXcd v) {
    const Eigen::VectorXcd psi0 = sp.wavefunctions.col(0);
    v -= psi0.dot(v).real() * psi0;
    return v;
}

double w_hessian(const MagneticSetup& s, double x, double y) {
    const auto d = s.potential.derivatives(x, y);
    const auto w = s.w();
    return w[0] * w[0] * d.vxx + 2.0 * w[0] * w[1] * d.vxy + w[1] * w[1] * d.vyy;
}

}  // namespace

double ground_expectation_2d(const Spectrum2D& sp, const Eigen::VectorXd& f) {
    return (sp.wavefunctions.col(0).cwiseAbs2().array() * f.array()).sum();
}

ElementResult guiding_center_elements(const Spectrum2D& sp, const MagneticSetup& s, std::size_t K,
                                      double tau, double cluster_width) {
    return project_2d(sp, apply_guiding_center(s, sp.wavefunctions.col(0)), K, tau, cluster_width,
                      "R_u");
}

ElementResult position_direction_elements(const Spectrum2D& sp, const MagneticSetup& s,
                                          std::size_t K, double tau, double cluster_width) {
    const auto& g = s.grid;
    Eigen::VectorXcd v(g.size());
    const Eigen::VectorXcd psi0 = sp.wavefunctions.col(0);
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i)
            v(g.index(i, j)) = (s.u[0] * g.x(i) + s.u[1] * g.y(j)) * psi0(g.index(i, j));
    return project_2d(sp, std::move(v), K, tau, cluster_width, "x_u");
}

TrkSummary transverse_trk(const Spectrum2D& sp, const MagneticSetup& s, const ElementResult& r) {
    TrkSummary t;
    const auto& el = r.elements;
    for (std::size_t n = 1; n < el.truncation; ++n) t.s_spectral += el.gaps[n] * el.weight(n);
    t.s_lattice = std::numeric_limits<double>::quiet_NaN();
    if (s.potential.hard_walls()) {
        t.s_direct = kInf;
    } else {
        const auto& g = s.grid;
        Eigen::VectorXd f(g.size());
        for (std::size_t j = 0; j < g.ny(); ++j)
            for (std::size_t i = 0; i < g.nx(); ++i) f(g.index(i, j)) = w_hessian(s, g.x(i), g.y(j));
        t.s_direct = 0.5 * sq(s.ell_B_sq()) * ground_expectation_2d(sp, f);
    }
    t.residual = std::abs(t.s_direct - t.s_spectral);
    t.f_weights.assign(el.truncation, 0.0);
    if (std::isfinite(t.s_direct) && t.s_direct > 0.0 && r.gaps.defined) {
        double total = 0.0;
        for (std::size_t n = 1; n < el.truncation; ++n) {
            t.f_weights[n] = el.gaps[n] * el.weight(n) / t.s_direct;
            total += el.weight(n);
        }
        t.eta_trk = std::clamp(1.0 - r.gaps.delta * r.gaps.active_weight / t.s_direct, 0.0, 1.0);
        t.eta_tilde = 1.0 - r.gaps.delta * total / t.s_direct;
    } else {
        t.eta_trk = t.eta_tilde = std::numeric_limits<double>::quiet_NaN();
    }
    return t;
}

bool TransverseCertificate::all_pass() const {
    for (const auto& v : verdicts)
        if (v.gating && !v.passed) return false;
    return true;
}

const Verdict* TransverseCertificate::find(const std::string& name) const {
    for (const auto& v : verdicts)
        if (v.name == name) return &v;
    return nullptr;
}

bool DirectionCertificate::all_pass() const {
    for (const auto& v : verdicts)
        if (v.gating && !v.passed) return false;
    return true;
}

TransverseCertificate certify_transverse(const Spectrum2D& sp, const MagneticSetup& s,
                                         const ElementResult& r, const TrkSummary& t) {
    TransverseCertificate c;
    const double hb = s.hbar();
    const Eigen::VectorXcd psi0 = sp.wavefunctions.col(0);
    const Eigen::VectorXcd Rpsi = centered(sp, apply_guiding_center(s, psi0));
    c.var_Ru = Rpsi.squaredNorm();
    c.s_direct = t.s_direct;
    c.s_spectral = t.s_spectral;
    c.s_spectral_raw = t.s_spectral;
    c.delta = r.gaps.delta;
    c.has_gamma = r.gaps.next_level_gap.has_value();
    c.gamma = r.gaps.next_level_gap.value_or(0.0);
    c.bound = c.s_direct / c.delta;
    c.epsilon_u = c.bound - c.var_Ru;
    c.eta_trk = t.eta_trk;
    c.T = tail_weight(r);
    for (std::size_t n = 1; n < r.elements.truncation; ++n)
        c.alpha0 += 2.0 * r.elements.weight(n) / r.elements.gaps[n];
    c.alpha_mid = 2.0 * c.var_Ru / c.delta;
    c.alpha_bound = 2.0 * c.s_direct / sq(c.delta);
    c.g_RR = c.var_Ru / sq(hb);
    c.g_RR_bound = c.s_direct / (sq(hb) * c.delta);
    if (std::isfinite(c.s_direct)) c.omega_transverse = std::sqrt(2.0 * c.s_direct / (sq(s.ell_B_sq()) * s.mass()));

    for (int axis = 0; axis < 2; ++axis) {
        const Eigen::VectorXcd a = apply_pi(s, axis, apply_guiding_center(s, psi0));
        const Eigen::VectorXcd b = apply_guiding_center(s, apply_pi(s, axis, psi0));
        (axis == 0 ? c.commutator_pi_x : c.commutator_pi_y) = std::abs(psi0.dot(a - b)) / hb;
    }

    const double quad = 1e-10;
    const double res = std::isfinite(t.s_direct) ? t.residual : 0.0;
    auto add = [&](std::string name, bool ok, double lhs, double rhs, double tol,
                   std::string note = {}, bool gating = true) {
        c.verdicts.push_back({std::move(name), ok, gating, lhs, rhs, tol, std::move(note)});
    };

    if (!std::isfinite(c.s_direct)) {
        c.notes.push_back("hard walls: the transverse double commutator is unbounded");
        add("trk_closure_Ru", true, c.s_spectral, c.s_direct, 0.0, "not applicable", false);
        add("variance_bound_Ru", true, c.var_Ru, c.bound, 0.0, "not applicable", false);
    } else {
        const double rel = res / c.s_direct;
        add("trk_closure_Ru", rel < 1e-2, rel, 1e-2, 0.0, "relative residual");
        const double tol = quad + res / c.delta;
        add("variance_bound_Ru", c.var_Ru <= c.bound + tol, c.var_Ru, c.bound, tol);
        if (c.has_gamma) {
            c.d1_rhs = c.s_direct * c.gamma / (c.delta * (c.delta + c.gamma)) * c.eta_trk;
            c.d2_rhs = c.delta / c.gamma * c.epsilon_u;
            const double tol_d1 = tol + res * c.gamma / (c.delta * (c.delta + c.gamma));
            add("d1_Ru", c.epsilon_u >= c.d1_rhs - tol_d1, c.epsilon_u, c.d1_rhs, tol_d1);
            const double tol_d2 = quad + c.delta / c.gamma * tol;
            add("d2_Ru", c.T <= c.d2_rhs + tol_d2, c.T, c.d2_rhs, tol_d2);
        } else {
            add("d1_Ru", true, c.epsilon_u, 0.0, 0.0, "single channel", false);
            add("d2_Ru", true, c.T, 0.0, 0.0, "single channel", false);
        }
        add("polarizability_sum_Ru", c.alpha0 <= c.alpha_mid + quad, c.alpha0, c.alpha_mid, quad);
        add("polarizability_bound_Ru", c.alpha_mid <= c.alpha_bound + 2.0 * tol / c.delta,
            c.alpha_mid, c.alpha_bound, 2.0 * tol / c.delta);
        add("metric_bound_Ru", c.g_RR <= c.g_RR_bound + tol / sq(hb), c.g_RR, c.g_RR_bound,
            tol / sq(hb));
        add("saturation_diagnostic", true, c.epsilon_u / c.bound, c.delta / (hb * c.omega_transverse),
            0.0, "lhs: eps_u / bound; rhs: Delta_R / (hbar Omega)", false);
    }
    const double h2 = sq(std::max(s.grid.hx(), s.grid.hy()));
    const double comm_tol = h2 / s.ell_B_sq() + 1e-10;
    add("commutator_pi_x_Ru", c.commutator_pi_x <= comm_tol, c.commutator_pi_x, 0.0, comm_tol,
        "O(h^2) on the lattice");
    add("commutator_pi_y_Ru", c.commutator_pi_y <= comm_tol, c.commutator_pi_y, 0.0, comm_tol,
        "O(h^2) on the lattice");
    if (r.gaps.threshold_sensitive) c.notes.push_back("ThresholdSensitive: gap classification");
    return c;
}

DirectionCertificate certify_direction(const Spectrum2D& sp, const MagneticSetup& s, std::size_t K,
                                       double tau) {
    DirectionCertificate c;
    c.u = s.u;
    const auto r = position_direction_elements(sp, s, K, tau, kDegeneracyTol2D);
    const double kin = sq(s.hbar()) / (2.0 * s.mass());
    const auto& g = s.grid;
    Eigen::VectorXcd v(g.size());
    const Eigen::VectorXcd psi0 = sp.wavefunctions.col(0);
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i)
            v(g.index(i, j)) = (s.u[0] * g.x(i) + s.u[1] * g.y(j)) * psi0(g.index(i, j));
    c.var = centered(sp, v).squaredNorm();
    c.delta = r.gaps.delta;
    c.bound = kin / c.delta;
    c.epsilon = c.bound - c.var;
    for (std::size_t n = 1; n < r.elements.truncation; ++n)
        c.s_spectral += r.elements.gaps[n] * r.elements.weight(n);
    std::size_t clusters = 0;
    if (r.gaps.defined) {
        clusters = 1;
        double last = -1.0;
        for (std::size_t n : r.gaps.tail_indices) {
            if (r.elements.gaps[n] - last > kDegeneracyTol2D * (sp.energies[K - 1] - sp.energies[0]))
                ++clusters;
            last = r.elements.gaps[n];
        }
    }
    c.active_channels = clusters;
    c.var_extrapolated = c.var;
    c.bound_extrapolated = c.bound;
    c.s_extrapolated = c.s_spectral;
    const double res = std::abs(c.s_spectral - kin);
    const double tol = 1e-10 + res / c.delta;
    c.verdicts.push_back({"direction_bound", c.var <= c.bound + tol, true, c.var, c.bound, tol, {}});
    c.verdicts.push_back({"direction_trk_raw", res / kin < 1e-2, false, c.s_spectral, kin,
                          1e-2 * kin, "fine grid only, O(h^2)"});
    return c;
}

MagneticRun solve_magnetic(const MagneticSetup& setup, std::size_t K, const Solve2DOptions& o) {
    MagneticRun run{solve_lowest_2d(build_hamiltonian_2d(setup), K, o), nullptr, {}, {}};
    run.richardson_energies = run.fine.energies;
    const auto& g = setup.grid;
    const std::size_t cx = g.nx() / 2, cy = g.ny() / 2;
    MagneticSetup coarse = setup;
    try {
        coarse.grid = Grid2D(Axis(g.x_axis().lo(), g.x_axis().hi(), cx + 2),
                             Axis(g.y_axis().lo(), g.y_axis().hi(), cy + 2));
        run.coarse =
            std::make_shared<const Spectrum2D>(solve_lowest_2d(build_hamiltonian_2d(coarse), K, o));
    } catch (const TrapError& e) {
        if (e.kind() != ErrorKind::GridTooCoarse && e.kind() != ErrorKind::MalformedSpec) throw;
        run.notes.push_back(std::string("no Richardson extrapolation: ") + e.what());
        return run;
    }
    const double r2 = sq(coarse.grid.hx() / g.hx());
    for (std::size_t k = 0; k < K; ++k) {
        const double f = run.fine.energies[k], c = run.coarse->energies[k];
        run.richardson_energies[k] = f + (f - c) / (r2 - 1.0);
    }
    return run;
}

TransverseCertificate certify_magnetic(const MagneticRun& run, const MagneticSetup& setup,
                                       std::size_t K, double tau) {
    const auto r = guiding_center_elements(run.fine, setup, K, tau, kDegeneracyTol2D);
    auto t = transverse_trk(run.fine, setup, r);
    const double raw = t.s_spectral;
    bool extrapolated = false;
    std::string skipped;
    if (run.coarse) {
        MagneticSetup coarse = setup;
        coarse.grid = run.coarse->grid;
        const auto rc = guiding_center_elements(*run.coarse, coarse, K, tau, kDegeneracyTol2D);
        if (rc.gaps.defined && r.gaps.defined && rc.gaps.active_index == r.gaps.active_index) {
            const double sc = transverse_trk(*run.coarse, coarse, rc).s_spectral;
            const double r2 = sq(coarse.grid.hx() / setup.grid.hx());
            t.s_spectral = raw + (raw - sc) / (r2 - 1.0);
            t.residual = std::abs(t.s_direct - t.s_spectral);
            extrapolated = true;
        } else {
            skipped = "coarse grid has a different active channel; S_spectral not extrapolated";
        }
    } else {
        skipped = "no coarse grid; S_spectral not extrapolated";
    }
    auto c = certify_transverse(run.fine, setup, r, t);
    c.s_spectral_raw = raw;
    c.extrapolated = extrapolated;
    if (!skipped.empty()) c.notes.push_back(skipped);
    if (std::isfinite(c.s_direct)) {
        const double rel = std::abs(raw - c.s_direct) / c.s_direct;
        c.verdicts.push_back({"trk_closure_Ru_raw", rel < 1e-2, false, rel, 1e-2, 0.0,
                              "fine grid only, O(h^2)"});
    }
    for (const auto& n : run.notes) c.notes.push_back(n);
    return c;
}

DirectionCertificate certify_direction(const MagneticRun& run, const MagneticSetup& setup,
                                       std::size_t K, double tau) {
    auto c = certify_direction(run.fine, setup, K, tau);
    if (!run.coarse) return c;
    MagneticSetup coarse = setup;
    coarse.grid = run.coarse->grid;
    const auto cc = certify_direction(*run.coarse, coarse, K, tau);
    const double r2 = sq(coarse.grid.hx() / setup.grid.hx());
    auto rich = [r2](double f, double co) { return f + (f - co) / (r2 - 1.0); };
    c.var_extrapolated = rich(c.var, cc.var);
    c.bound_extrapolated = rich(c.bound, cc.bound);
    c.s_extrapolated = rich(c.s_spectral, cc.s_spectral);
    c.extrapolated = true;
    const double kin = sq(setup.hbar()) / (2.0 * setup.mass());
    const double rel = std::abs(c.s_extrapolated - kin) / kin;
    c.verdicts.push_back({"direction_trk", rel < 1e-2, true, c.s_extrapolated, kin, 1e-2 * kin,
                          "relative residual, extrapolated"});
    return c;
}

}  // namespace trapcert
