#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "trapcert/potential.hpp"

namespace trapcert {

// Uniform grid including both Dirichlet endpoints; unknowns live on the
// n_points - 2 interior nodes.
class Grid1D {
public:
    Grid1D(double x_min, double x_max, std::size_t n_points);

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    std::size_t n_points() const { return n_points_; }
    std::size_t interior() const { return n_points_ - 2; }
    double h() const { return (x_max_ - x_min_) / static_cast<double>(n_points_ - 1); }
    double x(std::size_t i) const { return x_min_ + h() * static_cast<double>(i); }
    // Coordinate of interior unknown k (grid node k + 1).
    double interior_x(std::size_t k) const { return x(k + 1); }
    // Same box with the interval count doubled (h halved exactly).
    Grid1D refined() const { return {x_min_, x_max_, 2 * n_points_ - 1}; }

    bool operator==(const Grid1D&) const = default;

private:
    double x_min_;
    double x_max_;
    std::size_t n_points_;
};

struct TridiagonalOperator {
    Grid1D grid;
    std::vector<double> diagonal;      // size interior()
    std::vector<double> off_diagonal;  // size interior() - 1
    double energy_offset = 0.0;        // added back to every eigenvalue
    double hbar = 1.0;
    double mass = 1.0;
    std::shared_ptr<const PotentialSpec> potential;
};

struct ConvergenceRecord {
    double h_used = 0.0;
    std::size_t n_points = 0;
    int refinements = 0;
    double rtol = 0.0;
    std::vector<double> richardson_energies;
    std::vector<double> energy_error_estimate;
    double var_x = 0.0;
    double var_x_richardson = 0.0;
    double last_relative_change = 0.0;
    double boundary_amplitude = 0.0;
};

struct Spectrum1D {
    Grid1D grid;
    std::vector<double> energies;
    // Interior samples, normalized so that h * sum(psi^2) = 1.
    std::vector<std::vector<double>> wavefunctions;
    ConvergenceRecord convergence;
    std::vector<std::pair<std::size_t, std::size_t>> degenerate_pairs;
    double hbar = 1.0;
    double mass = 1.0;
    std::shared_ptr<const PotentialSpec> potential;
    // Spectrum on the grid with twice the spacing, kept for extrapolation.
    std::shared_ptr<const Spectrum1D> coarser;

    std::size_t size() const { return energies.size(); }
};

struct DomainOptions {
    std::size_t n_points = 1025;
    int max_doublings = 10;
    double max_half_width = 1e6;
};

struct ConvergeOptions {
    double tail_tol = 1e-10;
    std::size_t base_intervals = 1024;
    int max_doublings = 6;
    // Skip automatic box sizing when set.
    std::optional<std::pair<double, double>> box;
};

// Box such that the lowest K states have decayed below tail_tol * max|psi|
// near both walls.
Grid1D auto_domain(const PotentialSpec& spec, std::size_t K, double tail_tol,
                   const DomainOptions& options = {});

TridiagonalOperator build_hamiltonian_1d(const PotentialSpec& spec, const Grid1D& grid);

// Lowest K eigenpairs by Sturm-count bisection and inverse iteration.
Spectrum1D solve_lowest(const TridiagonalOperator& op, std::size_t K);

// Doubles the grid until the extrapolated energies and Var0(x) settle to rtol.
Spectrum1D converge(const PotentialSpec& spec, std::size_t K, double rtol,
                    const ConvergeOptions& options = {});

// Number of sign changes, ignoring samples below `floor` times max|psi|.
int count_nodes(const std::vector<double>& psi, double floor = 1e-7);

// Largest |psi| over the outer `fraction` of the interior on either side,
// relative to max|psi|.
double edge_amplitude(const std::vector<double>& psi, double fraction = 0.01);

// h-squared extrapolation of a quantity sampled at spacing h and 2h.
inline double richardson(double fine, double coarse) { return fine + (fine - coarse) / 3.0; }
inline double richardson_allowance(double fine, double coarse) {
    return (fine > coarse ? fine - coarse : coarse - fine) / 3.0;
}

}  // namespace trapcert
