#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "trapcert/errors.hpp"
#include "trapcert/magnetic2d.hpp"

using namespace trapcert;

namespace {

MagneticSetup fock_darwin(std::size_t n, double half_width, double B = 1.0) {
    MagneticSetup s;
    s.B = B;
    s.potential = PotentialSpec::quadratic_2d(1.0, 1.0);
    s.grid = Grid2D::square(half_width, n);
    return s;
}

std::vector<double> fock_darwin_levels(double wc, std::size_t K) {
    const double root = std::sqrt(wc * wc + 4.0);
    const double op = 0.5 * (root + wc), om = 0.5 * (root - wc);
    std::vector<double> e;
    for (int a = 0; a < 12; ++a)
        for (int b = 0; b < 12; ++b) e.push_back(op * (a + 0.5) + om * (b + 0.5));
    std::sort(e.begin(), e.end());
    e.resize(K);
    return e;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < b.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]) / std::abs(b[k]));
    return m;
}

}  // namespace

TEST_CASE("axes reject degenerate input") {
    CHECK_THROWS_AS(Axis(0.0, 1.0, 9), TrapError);
    CHECK_THROWS_AS(Axis(1.0, 1.0, 20), TrapError);
    const auto g = Grid2D::square(2.0, 19);
    CHECK(g.size() == 361);
    CHECK(g.hx() == doctest::Approx(0.2));
    CHECK(g.x(0) == doctest::Approx(-1.8));
    CHECK(g.index(3, 2) == 41);
}

TEST_CASE("Peierls operator is Hermitian") {
    const auto s = fock_darwin(20, 2.0, 1.7);
    const auto op = build_hamiltonian_2d(s);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    Eigen::MatrixXcd a(op.size(), 1), b(op.size(), 1), ha, hb;
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
        a(k) = {nd(rng), nd(rng)};
        b(k) = {nd(rng), nd(rng)};
    }
    op.apply(a, ha);
    op.apply(b, hb);
    const cplx lhs = a.col(0).dot(hb.col(0));
    const cplx rhs = std::conj(b.col(0).dot(ha.col(0)));
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::abs(lhs));
}

TEST_CASE("zero field reduces to the tensor product of 1D lattices") {
    MagneticSetup s;
    s.potential = PotentialSpec::quadratic_2d(1.0, 2.0);
    s.grid = Grid2D::square(4.0, 48);
    const auto sp = solve_lowest_2d(build_hamiltonian_2d(s), 10);
    // Dense 1D lattices with the same spacing.
    const double h = s.grid.hx();
    auto levels = [&](double k) {
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(48, 48);
        for (int i = 0; i < 48; ++i) {
            const double x = -4.0 + (i + 1) * h;
            H(i, i) = 1.0 / (h * h) + 0.5 * k * x * x;
            if (i > 0) H(i, i - 1) = H(i - 1, i) = -0.5 / (h * h);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        return es.eigenvalues();
    };
    const auto ex = levels(1.0), ey = levels(4.0);
    std::vector<double> tp;
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) tp.push_back(ex(a) + ey(b));
    std::sort(tp.begin(), tp.end());
    tp.resize(10);
    CHECK(max_rel(sp.energies, tp) < 1e-9);
}

TEST_CASE("Fock-Darwin levels converge at second order") {
    const auto coarse = solve_lowest_2d(build_hamiltonian_2d(fock_darwin(40, 4.0)), 8);
    const auto fine = solve_lowest_2d(build_hamiltonian_2d(fock_darwin(60, 4.0)), 8);
    const auto exact = fock_darwin_levels(1.0, 8);
    const double ec = max_rel(coarse.energies, exact), ef = max_rel(fine.energies, exact);
    CHECK(ec < 2e-2);
    CHECK(ef < ec);
    const double ratio = std::pow(coarse.grid.hx() / fine.grid.hx(), 2);
    CHECK(ec / ef == doctest::Approx(ratio).epsilon(0.15));
}

TEST_CASE("field reversal leaves an isotropic spectrum unchanged") {
    const auto up = solve_lowest_2d(build_hamiltonian_2d(fock_darwin(40, 4.0, 1.0)), 8);
    const auto down = solve_lowest_2d(build_hamiltonian_2d(fock_darwin(40, 4.0, -1.0)), 8);
    CHECK(max_rel(up.energies, down.energies) < 1e-9);
}

TEST_CASE("guiding center couples to the slow mode and closes its sum rule") {
    auto s = fock_darwin(60, 4.0);
    const auto sp = solve_lowest_2d(build_hamiltonian_2d(s), 12);
    const double om = 0.5 * (std::sqrt(5.0) - 1.0);
    for (double angle : {0.0, 0.9}) {
        s.u = {std::cos(angle), std::sin(angle)};
        const auto r = guiding_center_elements(sp, s, 12, 1e-10, kDegeneracyTol2D);
        REQUIRE(r.gaps.defined);
        CHECK(r.gaps.delta == doctest::Approx(om).epsilon(5e-3));
        const auto t = transverse_trk(sp, s, r);
        CHECK(t.s_direct == doctest::Approx(0.5).epsilon(1e-3));
        CHECK(std::abs(t.s_spectral - t.s_direct) / t.s_direct < 3e-2);
        const auto c = certify_transverse(sp, s, r, t);
        CHECK(c.var_Ru <= c.bound);
        CHECK(c.commutator_pi_x < std::pow(s.grid.hx(), 2));
        CHECK(c.commutator_pi_y < std::pow(s.grid.hx(), 2));
        const Verdict* d2 = c.find("d2_Ru");
        REQUIRE(d2 != nullptr);
        CHECK(d2->passed);
    }
}

TEST_CASE("extrapolation tightens the transverse sum rule") {
    const auto s = fock_darwin(80, 5.0);
    const auto run = solve_magnetic(s, 12);
    REQUIRE(run.coarse);
    const auto c = certify_magnetic(run, s, 12, 1e-10);
    CHECK(c.extrapolated);
    const double raw = std::abs(c.s_spectral_raw - c.s_direct);
    const double ext = std::abs(c.s_spectral - c.s_direct);
    CHECK(ext < 0.2 * raw);
    CHECK(c.all_pass());
    CHECK(max_rel(run.richardson_energies, fock_darwin_levels(1.0, 12)) <
          0.1 * max_rel(run.fine.energies, fock_darwin_levels(1.0, 12)));
}

TEST_CASE("a rejected coarse grid is reported, not extrapolated") {
    const auto s = fock_darwin(60, 4.0);
    const auto run = solve_magnetic(s, 8);
    CHECK_FALSE(run.coarse);
    CHECK(run.richardson_energies == run.fine.energies);
    const auto c = certify_magnetic(run, s, 8, 1e-10);
    CHECK_FALSE(c.extrapolated);
    CHECK(c.s_spectral == c.s_spectral_raw);
    CHECK(c.notes.size() >= 2);
}

TEST_CASE("zero field has no guiding center") {
    MagneticSetup s;
    s.potential = PotentialSpec::quadratic_2d(1.0, 1.0);
    s.grid = Grid2D::square(4.0, 40);
    const auto sp = solve_lowest_2d(build_hamiltonian_2d(s), 6);
    try {
        guiding_center_elements(sp, s, 6, 1e-10, kDegeneracyTol2D);
        FAIL("expected ZeroField");
    } catch (const TrapError& e) {
        CHECK(e.kind() == ErrorKind::ZeroField);
    }
}

TEST_CASE("coarse grids are rejected") {
    auto s = fock_darwin(12, 5.0);
    try {
        build_hamiltonian_2d(s);
        FAIL("expected GridTooCoarse");
    } catch (const TrapError& e) {
        CHECK(e.kind() == ErrorKind::GridTooCoarse);
    }
}

TEST_CASE("anisotropic trap saturates along a principal axis only") {
    MagneticSetup s;
    s.potential = PotentialSpec::quadratic_2d(1.0, 2.0);
    s.grid = Grid2D::square(4.0, 48);
    const auto sp = solve_lowest_2d(build_hamiltonian_2d(s), 10);
    s.u = {1.0, 0.0};
    const auto ax = certify_direction(sp, s, 10, 1e-10);
    CHECK(ax.all_pass());
    CHECK(ax.epsilon / ax.bound < 2e-2);
    s.u = {std::sqrt(0.5), std::sqrt(0.5)};
    const auto diag = certify_direction(sp, s, 10, 1e-10);
    CHECK(diag.all_pass());
    CHECK(diag.epsilon / diag.bound > 0.2);
}

TEST_CASE("extrapolated direction certificate saturates the axes") {
    MagneticSetup s;
    s.potential = PotentialSpec::quadratic_2d(1.0, 2.0);
    s.grid = Grid2D::square(5.0, 120);
    const auto run = solve_magnetic(s, 10);
    REQUIRE(run.coarse);
    for (const auto& u : {std::array<double, 2>{1.0, 0.0}, std::array<double, 2>{0.0, 1.0}}) {
        s.u = u;
        const auto c = certify_direction(run, s, 10, 1e-10);
        CHECK(c.extrapolated);
        CHECK(c.all_pass());
        CHECK(std::abs(c.bound_extrapolated - c.var_extrapolated) / c.bound_extrapolated < 2e-4);
    }
}

TEST_CASE("hard-wall box leaves the transverse bound vacuous") {
    MagneticSetup s;
    s.B = 1.0;
    s.grid = Grid2D::square(2.0, 30);
    const auto sp = solve_lowest_2d(build_hamiltonian_2d(s), 8);
    const auto r = guiding_center_elements(sp, s, 8, 1e-10, kDegeneracyTol2D);
    const auto t = transverse_trk(sp, s, r);
    CHECK(std::isinf(t.s_direct));
    const auto c = certify_transverse(sp, s, r, t);
    const Verdict* v = c.find("variance_bound_Ru");
    REQUIRE(v != nullptr);
    CHECK_FALSE(v->gating);
}
