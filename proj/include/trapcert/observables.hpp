#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "trapcert/solver1d.hpp"

namespace trapcert {

enum class ObservableKind { Position, Momentum, Multiplicative };

struct MultiplicativeObservable {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> df;
};

// f(x) = x^k with its exact derivative.
MultiplicativeObservable power_observable(int k);

struct MatrixElementSet {
    ObservableKind observable = ObservableKind::Position;
    std::string name;
    // Index n runs over 0..K-1; entry 0 belongs to the ground state itself and
    // is zero because observables are centered.
    std::vector<double> magnitudes;
    std::vector<double> gaps;  // E_n - E_0
    double tau = 1e-10;
    std::size_t truncation = 0;
    std::shared_ptr<const MultiplicativeObservable> function;

    double weight(std::size_t n) const { return magnitudes[n] * magnitudes[n]; }
    double total_weight() const;
};

struct GapInfo {
    bool defined = false;           // false when every element is classified zero
    double delta = 0.0;             // active gap
    std::optional<double> gamma;    // increment to the next active channel
    std::size_t active_index = 0;   // lowest level of the active cluster
    std::vector<std::size_t> active_cluster;
    std::vector<std::size_t> tail_indices;
    double active_weight = 0.0;
    // Spectral gap from the active level to the next level, active or not.
    std::optional<double> next_level_gap;
    bool threshold_sensitive = false;
};

struct ElementResult {
    MatrixElementSet elements;
    GapInfo gaps;
};

// Relative-threshold classification over energy clusters. Levels whose gaps
// differ by at most cluster_width are pooled before thresholding.
GapInfo classify_gaps(const std::vector<double>& gaps, const std::vector<double>& weights,
                      double tau, double cluster_width = 0.0);

// True when (delta, gamma, active_index) agree for every tau in `taus`.
bool threshold_robust(const std::vector<double>& gaps, const std::vector<double>& weights,
                      double cluster_width = 0.0,
                      const std::vector<double>& taus = {1e-12, 1e-10, 1e-8});

ElementResult matrix_elements_position(const Spectrum1D& spectrum, std::size_t K, double tau);
ElementResult matrix_elements_momentum(const Spectrum1D& spectrum, std::size_t K, double tau);
ElementResult matrix_elements_general(const Spectrum1D& spectrum,
                                      const MultiplicativeObservable& observable, std::size_t K,
                                      double tau);

struct VarianceReport {
    double direct = 0.0;    // quadrature on the ground state
    double spectral = 0.0;  // truncated sum of squared elements
    double difference = 0.0;
};

VarianceReport variance_ground(const Spectrum1D& spectrum, const MatrixElementSet& elements);

struct TrkSummary {
    double s_spectral = 0.0;
    double s_direct = 0.0;  // continuum double commutator, infinite at hard walls
    double residual = 0.0;
    // Double commutator of the lattice operator itself; isolates truncation
    // from discretization. NaN when not available.
    double s_lattice = 0.0;
    double eta_trk = 0.0;
    double eta_tilde = 0.0;
    std::vector<double> f_weights;  // index n as in MatrixElementSet
};

TrkSummary trk_sum(const Spectrum1D& spectrum, const ElementResult& result);

struct CorridorResult {
    double eta_trk = 0.0;
    double eta_tilde = 0.0;
    double lower_edge = 0.0;
    double upper_edge = 0.0;
    bool single_channel = false;
};

// Tail-distribution corridor for the position observable. Throws
// CorridorViolation when eta_tilde leaves the corridor by more than `tol`.
CorridorResult trk_corridor_weights(const TrkSummary& summary, double delta,
                                    std::optional<double> gamma, double tol);

// Ground-state expectation of g(x) by trapezoid quadrature.
double ground_expectation(const Spectrum1D& spectrum, const std::function<double(double)>& g);

}  // namespace trapcert
