#include "doctest.h"

#include <cmath>

#include "trapcert/errors.hpp"
#include "trapcert/solver1d.hpp"

using namespace trapcert;

namespace {

double inner(const Grid1D& g, const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * g.h();
}

}  // namespace

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(Grid1D(1.0, 0.0, 100), TrapError);
    CHECK_THROWS_AS(Grid1D(0.0, 1.0, 10), TrapError);
    const Grid1D g(-1.0, 1.0, 101);
    CHECK(g.h() == doctest::Approx(0.02));
    CHECK(g.refined().n_points() == 201);
    CHECK(g.refined().h() == doctest::Approx(0.01));
}

TEST_CASE("tridiagonal assembly") {
    const auto flat = PotentialSpec::infinite_well(99.0, 49.5);
    const auto op = build_hamiltonian_1d(flat, Grid1D(0.0, 99.0, 100));
    for (double d : op.diagonal) CHECK(d == doctest::Approx(1.0));
    for (double e : op.off_diagonal) CHECK(e == doctest::Approx(-0.5));

    const Grid1D g(-5.0, 5.0, 201);
    const auto harm = build_hamiltonian_1d(PotentialSpec::quartic_family(0.0), g);
    // x = 0 is the middle interior node; the minimum on the grid is 0 there.
    CHECK(harm.energy_offset == 0.0);
    CHECK(harm.diagonal[99] == doctest::Approx(1.0 / (g.h() * g.h())));
}

TEST_CASE("box spectrum matches the exact lattice eigenvalues") {
    const double L = M_PI;
    const Grid1D g(-L / 2, L / 2, 513);
    const auto s = solve_lowest(build_hamiltonian_1d(PotentialSpec::infinite_well(L), g), 10);
    const double h = g.h();
    const double N = static_cast<double>(g.n_points() - 1);
    for (std::size_t n = 0; n < 10; ++n) {
        const double exact = (1.0 - std::cos((n + 1) * M_PI / N)) / (h * h);
        CHECK(std::abs(s.energies[n] - exact) <= 1e-10 * exact);
        CHECK(s.energies[n] == doctest::Approx((n + 1) * (n + 1) / 2.0).epsilon(1e-3));
    }
}

TEST_CASE("eigenvectors: orthonormal, signed, node counts") {
    const auto spec = PotentialSpec::quartic_family(0.5);
    const Grid1D g(-7.0, 7.0, 2001);
    const auto s = solve_lowest(build_hamiltonian_1d(spec, g), 12);
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(count_nodes(s.wavefunctions[i]) == static_cast<int>(i));
        for (std::size_t j = 0; j <= i; ++j)
            CHECK(std::abs(inner(g, s.wavefunctions[i], s.wavefunctions[j]) - (i == j ? 1.0 : 0.0)) <
                  1e-10);
    }
    double vmax = 0.0;
    for (double v : s.wavefunctions[0]) vmax = std::max(vmax, v);
    for (double v : s.wavefunctions[0]) CHECK(v > -1e-12 * vmax);
    CHECK(s.degenerate_pairs.empty());

    const auto one = solve_lowest(build_hamiltonian_1d(spec, g), 1);
    CHECK(one.size() == 1);
    CHECK(one.energies[0] == doctest::Approx(s.energies[0]).epsilon(1e-13));
}

TEST_CASE("O(h^2) convergence and box monotonicity") {
    const auto spec = PotentialSpec::quartic_family(0.3);
    std::vector<double> e0;
    Grid1D g(-6.0, 6.0, 257);
    for (int level = 0; level < 4; ++level, g = g.refined())
        e0.push_back(solve_lowest(build_hamiltonian_1d(spec, g), 3).energies[2]);
    for (int level = 0; level + 2 < 4; ++level) {
        const double ratio = (e0[level] - e0[level + 1]) / (e0[level + 1] - e0[level + 2]);
        CHECK(ratio == doctest::Approx(4.0).epsilon(0.2));
    }

    // Same spacing, growing box: Dirichlet energies cannot increase.
    double last = 1e300;
    for (double half : {2.0, 2.5, 3.0, 4.0, 6.0}) {
        const std::size_t n = static_cast<std::size_t>(std::lround(2 * half / 0.01)) + 1;
        const double e = solve_lowest(build_hamiltonian_1d(spec, Grid1D(-half, half, n)), 2).energies[1];
        CHECK(e <= last + 1e-12);
        last = e;
    }
}

TEST_CASE("auto_domain sizing") {
    const auto harmonic = PotentialSpec::quartic_family(0.0);
    const Grid1D gh = auto_domain(harmonic, 8, 1e-8);
    CHECK(gh.x_min() <= -8.0);
    CHECK(gh.x_max() >= 8.0);

    const Grid1D gq = auto_domain(PotentialSpec::quartic_family(1.0), 8, 1e-8);
    CHECK(gq.x_max() - gq.x_min() < gh.x_max() - gh.x_min());

    const Grid1D gd = auto_domain(PotentialSpec::double_well(2.0), 4, 1e-8);
    CHECK(gd.x_min() < -3.0);
    CHECK(gd.x_max() > 3.0);

    const auto s = solve_lowest(build_hamiltonian_1d(harmonic, gh.refined()), 8);
    CHECK(edge_amplitude(s.wavefunctions.front()) < 1e-8);
    CHECK(edge_amplitude(s.wavefunctions.back()) < 1e-8);
}

TEST_CASE("converge: harmonic oracle, quartic first order, unreachable tolerance") {
    const auto s = converge(PotentialSpec::quartic_family(0.0), 6, 1e-8);
    CHECK(std::abs(s.convergence.richardson_energies[0] - 0.5) < 1e-7);
    CHECK(std::abs(s.energies[0] - 0.5) < 1e-6);
    for (std::size_t n = 0; n < 6; ++n)
        CHECK(std::abs(s.convergence.richardson_energies[n] - (n + 0.5)) < 1e-6);
    CHECK(s.convergence.var_x_richardson == doctest::Approx(0.5).epsilon(1e-8));
    REQUIRE(s.coarser);
    CHECK(s.coarser->grid.h() == doctest::Approx(2 * s.grid.h()));

    const auto q = converge(PotentialSpec::quartic_family(0.1), 6, 1e-8);
    // First order gives 0.575; the second-order correction is about -0.026.
    CHECK(std::abs(q.convergence.richardson_energies[0] - 0.575) < 0.03);
    CHECK(q.convergence.richardson_energies[0] < 0.575);

    try {
        converge(PotentialSpec::quartic_family(0.0), 6, 1e-15);
        FAIL("unreachable tolerance accepted");
    } catch (const TrapError& e) {
        CHECK(e.kind() == ErrorKind::NoConvergence);
    }
}
