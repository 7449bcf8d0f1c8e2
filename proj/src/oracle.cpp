#include "trapcert/oracle.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <complex>

#include "trapcert/errors.hpp"

namespace trapcert {

namespace {

void check_units(const UnitSystem& u) {
    if (!(u.hbar > 0.0) || !(u.mass > 0.0))
        throw TrapError(ErrorKind::MalformedSpec, "hbar and mass must be positive");
}

}  // namespace

ReferenceBundle harmonic_reference(double omega, UnitSystem units, std::size_t levels) {
    check_units(units);
    if (!(omega > 0.0) || !std::isfinite(omega))
        throw TrapError(ErrorKind::MalformedSpec, "omega must be positive");
    if (levels < 2) throw TrapError(ErrorKind::MalformedSpec, "need at least two levels");
    const double hb = units.hbar, m = units.mass;
    ReferenceBundle r;
    r.case_id = "harmonic";
    for (std::size_t n = 0; n < levels; ++n) r.energies.push_back(hb * omega * (n + 0.5));
    r.delta = hb * omega;
    r.var_x = hb / (2.0 * m * omega);
    r.var_p = m * hb * omega / 2.0;
    r.alpha0 = 1.0 / (m * omega * omega);
    r.x_elements.assign(levels, 0.0);
    r.p_elements.assign(levels, 0.0);
    r.x_elements[1] = r.var_x;
    r.p_elements[1] = r.var_p;
    r.mean_vpp = m * omega * omega;
    r.g_norm_sq = 0.0;
    return r;
}

ReferenceBundle box_reference(double width, UnitSystem units, std::size_t levels) {
    check_units(units);
    if (!(width > 0.0) || !std::isfinite(width))
        throw TrapError(ErrorKind::MalformedSpec, "width must be positive");
    if (levels < 2) throw TrapError(ErrorKind::MalformedSpec, "need at least two levels");
    const double hb = units.hbar, m = units.mass, L = width, pi2 = M_PI * M_PI;
    ReferenceBundle r;
    r.case_id = "box";
    for (std::size_t n = 0; n < levels; ++n) {
        const double k = static_cast<double>(n + 1);
        r.energies.push_back(hb * hb * pi2 * k * k / (2.0 * m * L * L));
    }
    r.delta = r.energies[1] - r.energies[0];
    r.var_x = L * L * (1.0 / 12.0 - 1.0 / (2.0 * pi2));
    r.var_p = hb * hb * pi2 / (L * L);
    r.x_elements.assign(levels, 0.0);
    r.p_elements.assign(levels, 0.0);
    // States sin(k pi x / L) on [0, L]: <k|x|1> = -8 L k / (pi^2 (k^2 - 1)^2) for even k.
    for (std::size_t n = 1; n < levels; ++n) {
        const double k = static_cast<double>(n + 1);
        if ((n + 1) % 2 != 0) continue;
        const double x = 8.0 * L * k / (pi2 * (k * k - 1.0) * (k * k - 1.0));
        r.x_elements[n] = x * x;
        const double gap = r.energies[n] - r.energies[0];
        r.p_elements[n] = m * m * gap * gap / (hb * hb) * r.x_elements[n];
        r.alpha0 += 2.0 * r.x_elements[n] / gap;
    }
    return r;
}

ReferenceBundle quartic_pt_reference(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 0.05))
        throw TrapError(ErrorKind::OutOfValidity, "first-order expansion needs 0 <= lambda <= 0.05");
    ReferenceBundle r;
    r.case_id = "quartic-pt";
    // <0|x^4|0> = 3/4 and <1|x^4|1> = 15/4 in oscillator units.
    r.energies = {0.5 + 0.75 * lambda, 1.5 + 3.75 * lambda};
    r.delta = 1.0 + 3.0 * lambda;
    r.var_x = 0.5 - 1.5 * lambda;
    r.var_p = 0.5 + 1.5 * lambda;
    r.mean_vpp = 1.0 + 6.0 * lambda;
    r.g_norm_sq = 12.0 * lambda * lambda;
    r.alpha0 = 1.0 - 6.0 * lambda;
    r.x_elements = {0.0, 0.5 - 1.5 * lambda};
    r.p_elements = {0.0, 0.5 + 1.5 * lambda};
    r.error_bar = lambda * lambda;
    return r;
}

std::pair<double, double> fock_darwin_modes(double omega0, double omega_c) {
    if (!(omega0 > 0.0) || !(omega_c >= 0.0))
        throw TrapError(ErrorKind::MalformedSpec, "need omega0 > 0 and omega_c >= 0");
    const double root = std::sqrt(omega_c * omega_c + 4.0 * omega0 * omega0);
    return {0.5 * (root + omega_c), 0.5 * (root - omega_c)};
}

std::vector<double> fock_darwin_oracle(double omega0, double omega_c, std::size_t K) {
    const auto [op, om] = fock_darwin_modes(omega0, omega_c);
    // Every level below E_K has n_+ + n_- <= K, so a K x K table suffices.
    std::vector<double> e;
    for (std::size_t a = 0; a <= K; ++a)
        for (std::size_t b = 0; b <= K; ++b) e.push_back(op * (a + 0.5) + om * (b + 0.5));
    std::sort(e.begin(), e.end());
    e.resize(K);
    return e;
}

Spectrum1D dense_brute_force(const PotentialSpec& spec, const Grid1D& grid, std::size_t K) {
    const std::size_t n = grid.interior();
    if (n > kDenseMax1D) throw TrapError(ErrorKind::TooLarge, "dense 1D oracle is limited to 2048 points");
    if (K == 0 || K > n) throw TrapError(ErrorKind::MalformedSpec, "K must lie in [1, interior]");
    const double h = grid.h();
    const double kin = spec.hbar() * spec.hbar() / (spec.mass() * h * h);
    std::vector<double> a(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = spec.value(grid.x_min() + h * static_cast<double>(i + 1));
        if (!std::isfinite(v))
            throw TrapError(ErrorKind::MalformedSpec, "potential is not finite inside the box");
        a[i * n + i] = kin + v;
        if (i + 1 < n) a[(i + 1) * n + i] = a[i * n + i + 1] = -0.5 * kin;
    }
    std::vector<double> w(n), z(n * K);
    std::vector<lapack_int> support(2 * K);
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dsyevr(
        LAPACK_COL_MAJOR, 'V', 'I', 'U', static_cast<lapack_int>(n), a.data(),
        static_cast<lapack_int>(n), 0.0, 0.0, 1, static_cast<lapack_int>(K), 0.0, &found, w.data(),
        z.data(), static_cast<lapack_int>(n), support.data());
    if (info != 0 || found != static_cast<lapack_int>(K))
        throw TrapError(ErrorKind::EigensolverFailure, "dsyevr failed");

    Spectrum1D s{grid, {}, {}, {}, {}, spec.hbar(), spec.mass(),
                 std::make_shared<const PotentialSpec>(spec), nullptr};
    const double scale = 1.0 / std::sqrt(h);
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> v(z.begin() + static_cast<long>(k * n),
                              z.begin() + static_cast<long>((k + 1) * n));
        double vmax = 0.0;
        for (double x : v) vmax = std::max(vmax, std::abs(x));
        double sign = 1.0;
        for (double x : v)
            if (std::abs(x) > 1e-6 * vmax) {
                sign = x < 0.0 ? -1.0 : 1.0;
                break;
            }
        for (double& x : v) x *= sign * scale;
        s.energies.push_back(w[k]);
        s.wavefunctions.push_back(std::move(v));
    }
    s.convergence.h_used = h;
    s.convergence.n_points = grid.n_points();
    s.convergence.richardson_energies = s.energies;
    s.convergence.energy_error_estimate.assign(K, 0.0);
    return s;
}

Spectrum2D dense_brute_force_2d(const MagneticSetup& setup, std::size_t K) {
    setup.validate();
    const auto& g = setup.grid;
    const std::size_t n = g.size();
    if (n > kDenseMax2D) throw TrapError(ErrorKind::TooLarge, "dense 2D oracle is limited to 48x48");
    if (K == 0 || K > n) throw TrapError(ErrorKind::MalformedSpec, "K must lie in [1, size]");
    using cd = std::complex<double>;
    const double hb = setup.hbar(), m = setup.mass();
    const double tx = hb * hb / (2.0 * m * g.hx() * g.hx());
    const double ty = hb * hb / (2.0 * m * g.hy() * g.hy());
    const double phase = setup.q * setup.B / (2.0 * hb);
    // Column-major, upper triangle filled: H(r, c) at a[c * n + r].
    std::vector<cd> a(n * n, cd(0.0, 0.0));
    auto at = [&](std::size_t r, std::size_t c) -> cd& { return a[c * n + r]; };
    for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
            const std::size_t k = j * g.nx() + i;
            const double v = setup.potential.value(g.x(i), g.y(j));
            if (!std::isfinite(v))
                throw TrapError(ErrorKind::MalformedSpec, "potential is not finite inside the box");
            at(k, k) = 2.0 * tx + 2.0 * ty + v;
            if (i + 1 < g.nx()) at(k, k + 1) = -tx * std::polar(1.0, phase * g.y(j) * g.hx());
            if (j + 1 < g.ny())
                at(k, k + g.nx()) = -ty * std::polar(1.0, -phase * g.x(i) * g.hy());
        }
    std::vector<double> w(n);
    std::vector<cd> z(n * K);
    std::vector<lapack_int> support(2 * K);
    lapack_int found = 0;
    const lapack_int info = LAPACKE_zheevr(
        LAPACK_COL_MAJOR, 'V', 'I', 'U', static_cast<lapack_int>(n),
        reinterpret_cast<lapack_complex_double*>(a.data()), static_cast<lapack_int>(n), 0.0, 0.0, 1,
        static_cast<lapack_int>(K), 0.0, &found, w.data(),
        reinterpret_cast<lapack_complex_double*>(z.data()), static_cast<lapack_int>(n),
        support.data());
    if (info != 0 || found != static_cast<lapack_int>(K))
        throw TrapError(ErrorKind::EigensolverFailure, "zheevr failed");

    Spectrum2D s{g, {}, Eigen::MatrixXcd(n, K), 0.0, 0, {}};
    for (std::size_t k = 0; k < K; ++k) {
        s.energies.push_back(w[k]);
        auto col = s.wavefunctions.col(static_cast<Eigen::Index>(k));
        for (std::size_t r = 0; r < n; ++r) col(static_cast<Eigen::Index>(r)) = z[k * n + r];
        Eigen::Index arg = 0;
        col.cwiseAbs().maxCoeff(&arg);
        col *= std::conj(col(arg)) / std::abs(col(arg));
    }
    return s;
}

}  // namespace trapcert
