#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "trapcert/magnetic2d.hpp"
#include "trapcert/potential.hpp"
#include "trapcert/solver1d.hpp"

namespace trapcert {

// Closed-form reference values for one case. Element lists hold |A_n0|^2
// with entry 0 unused. Perturbative bundles carry an error bar that scales
// as lambda^2.
struct ReferenceBundle {
    std::string case_id;
    std::vector<double> energies;
    double delta = 0.0;
    double var_x = 0.0;
    double var_p = 0.0;
    double alpha0 = 0.0;               // summed over the listed levels for the box
    std::vector<double> x_elements;
    std::vector<double> p_elements;
    std::optional<double> mean_vpp;    // <V''>_0
    std::optional<double> g_norm_sq;   // squared force deviation
    double error_bar = 0.0;            // absolute, for perturbative entries
};

// E_n = hbar omega (n + 1/2) for n < levels. Throws MalformedSpec unless omega > 0.
ReferenceBundle harmonic_reference(double omega, UnitSystem units = {}, std::size_t levels = 8);

// Box of width L: E_n = hbar^2 pi^2 (n+1)^2 / (2 m L^2) and exact x elements.
ReferenceBundle box_reference(double width, UnitSystem units = {}, std::size_t levels = 8);

// First order in lambda for V = x^2/2 + lambda x^4 with hbar = m = omega = 1.
// Throws OutOfValidity outside 0 <= lambda <= 0.05.
ReferenceBundle quartic_pt_reference(double lambda);

// Lowest K levels Omega_+ (n_+ + 1/2) + Omega_- (n_- + 1/2), hbar = m = q = 1.
std::vector<double> fock_darwin_oracle(double omega0, double omega_c, std::size_t K);
// {Omega_+, Omega_-}.
std::pair<double, double> fock_darwin_modes(double omega0, double omega_c);

inline constexpr std::size_t kDenseMax1D = 2048;
inline constexpr std::size_t kDenseMax2D = 48 * 48;

// Full dense diagonalization of the three-point Hamiltonian, assembled
// independently of build_hamiltonian_1d. Throws TooLarge above kDenseMax1D
// interior points.
Spectrum1D dense_brute_force(const PotentialSpec& spec, const Grid1D& grid, std::size_t K);

// Dense Peierls Hamiltonian; throws TooLarge above kDenseMax2D unknowns.
Spectrum2D dense_brute_force_2d(const MagneticSetup& setup, std::size_t K);

}  // namespace trapcert
