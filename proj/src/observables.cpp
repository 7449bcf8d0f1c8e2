#include "trapcert/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trapcert/errors.hpp"

namespace trapcert {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_truncation(const Spectrum1D& s, std::size_t K) {
    if (K < 2 || K > s.size())
        throw TrapError(ErrorKind::MalformedSpec, "truncation K must lie in [2, #states]");
}

double inner(const Spectrum1D& s, const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc * s.grid.h();
}

ElementResult project(const Spectrum1D& s, const std::vector<double>& applied, std::size_t K,
                      double tau, ObservableKind kind, std::string name) {
    ElementResult r;
    r.elements.observable = kind;
    r.elements.name = std::move(name);
    r.elements.tau = tau;
    r.elements.truncation = K;
    r.elements.magnitudes.assign(K, 0.0);
    r.elements.gaps.assign(K, 0.0);
    std::vector<double> weights(K, 0.0);
    for (std::size_t n = 1; n < K; ++n) {
        r.elements.magnitudes[n] = std::abs(inner(s, s.wavefunctions[n], applied));
        r.elements.gaps[n] = s.energies[n] - s.energies[0];
        weights[n] = r.elements.weight(n);
    }
    r.gaps = classify_gaps(r.elements.gaps, weights, tau);
    r.gaps.threshold_sensitive = !threshold_robust(r.elements.gaps, weights);
    return r;
}

// f(x) - <f>_0 applied to psi_0.
std::vector<double> centered_multiply(const Spectrum1D& s, const std::function<double(double)>& f) {
    const auto& psi = s.wavefunctions[0];
    const double mean = ground_expectation(s, f);
    std::vector<double> out(psi.size());
    for (std::size_t k = 0; k < psi.size(); ++k)
        out[k] = (f(s.grid.interior_x(k)) - mean) * psi[k];
    return out;
}

// Central difference of psi_0 with Dirichlet zeros beyond the interior.
std::vector<double> ground_derivative(const Spectrum1D& s) {
    const auto& psi = s.wavefunctions[0];
    const std::size_t n = psi.size();
    const double inv = 1.0 / (2.0 * s.grid.h());
    std::vector<double> d(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double right = k + 1 < n ? psi[k + 1] : 0.0;
        const double left = k > 0 ? psi[k - 1] : 0.0;
        d[k] = (right - left) * inv;
    }
    return d;
}

}  // namespace

MultiplicativeObservable power_observable(int k) {
    if (k == 1) return {"x", [](double x) { return x; }, [](double) { return 1.0; }};
    const double e = static_cast<double>(k);
    return {"x^" + std::to_string(k), [e](double x) { return std::pow(x, e); },
            [e](double x) { return e == 0.0 ? 0.0 : e * std::pow(x, e - 1.0); }};
}

double MatrixElementSet::total_weight() const {
    double s = 0.0;
    for (std::size_t n = 1; n < magnitudes.size(); ++n) s += weight(n);
    return s;
}

GapInfo classify_gaps(const std::vector<double>& gaps, const std::vector<double>& weights,
                      double tau, double cluster_width) {
    GapInfo info;
    const std::size_t K = gaps.size();
    double total = 0.0;
    for (std::size_t n = 1; n < K; ++n) total += weights[n];
    if (!(total > 0.0)) return info;

    // Consecutive levels closer than cluster_width form one cluster.
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t n = 1; n < K; ++n) {
        if (!clusters.empty() && gaps[n] - gaps[clusters.back().back()] <= cluster_width)
            clusters.back().push_back(n);
        else
            clusters.push_back({n});
    }
    bool seen_active = false;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        double w = 0.0;
        for (std::size_t n : clusters[c]) w += weights[n];
        if (w < tau * total) continue;
        if (!seen_active) {
            seen_active = true;
            info.defined = true;
            info.active_index = clusters[c].front();
            info.active_cluster = clusters[c];
            info.delta = gaps[info.active_index];
            info.active_weight = w;
            if (c + 1 < clusters.size())
                info.next_level_gap = gaps[clusters[c + 1].front()] - info.delta;
        } else {
            if (!info.gamma) info.gamma = gaps[clusters[c].front()] - info.delta;
            for (std::size_t n : clusters[c]) info.tail_indices.push_back(n);
        }
    }
    return info;
}

bool threshold_robust(const std::vector<double>& gaps, const std::vector<double>& weights,
                      double cluster_width, const std::vector<double>& taus) {
    std::optional<GapInfo> ref;
    for (double tau : taus) {
        const GapInfo g = classify_gaps(gaps, weights, tau, cluster_width);
        if (!ref) {
            ref = g;
            continue;
        }
        if (g.defined != ref->defined || g.active_index != ref->active_index ||
            g.gamma.has_value() != ref->gamma.has_value())
            return false;
        if (g.gamma && *g.gamma != *ref->gamma) return false;
    }
    return true;
}

double ground_expectation(const Spectrum1D& s, const std::function<double(double)>& g) {
    const auto& psi = s.wavefunctions[0];
    double acc = 0.0;
    for (std::size_t k = 0; k < psi.size(); ++k) acc += g(s.grid.interior_x(k)) * psi[k] * psi[k];
    return acc * s.grid.h();
}

ElementResult matrix_elements_position(const Spectrum1D& s, std::size_t K, double tau) {
    check_truncation(s, K);
    auto r = project(s, centered_multiply(s, [](double x) { return x; }), K, tau,
                     ObservableKind::Position, "x");
    return r;
}

ElementResult matrix_elements_momentum(const Spectrum1D& s, std::size_t K, double tau) {
    check_truncation(s, K);
    auto d = ground_derivative(s);
    for (double& v : d) v *= s.hbar;
    return project(s, d, K, tau, ObservableKind::Momentum, "p");
}

ElementResult matrix_elements_general(const Spectrum1D& s, const MultiplicativeObservable& obs,
                                      std::size_t K, double tau) {
    check_truncation(s, K);
    auto r = project(s, centered_multiply(s, obs.f), K, tau, ObservableKind::Multiplicative,
                     obs.name);
    r.elements.function = std::make_shared<const MultiplicativeObservable>(obs);
    return r;
}

VarianceReport variance_ground(const Spectrum1D& s, const MatrixElementSet& elements) {
    VarianceReport v;
    switch (elements.observable) {
        case ObservableKind::Position: {
            const auto c = centered_multiply(s, [](double x) { return x; });
            v.direct = inner(s, c, c);
            break;
        }
        case ObservableKind::Momentum: {
            // <p> vanishes for a real ground state.
            const auto d = ground_derivative(s);
            v.direct = s.hbar * s.hbar * inner(s, d, d);
            break;
        }
        case ObservableKind::Multiplicative: {
            if (!elements.function)
                throw TrapError(ErrorKind::MalformedSpec, "multiplicative set lacks its function");
            const auto c = centered_multiply(s, elements.function->f);
            v.direct = inner(s, c, c);
            break;
        }
    }
    v.spectral = elements.total_weight();
    v.difference = v.direct - v.spectral;
    return v;
}

TrkSummary trk_sum(const Spectrum1D& s, const ElementResult& r) {
    const auto& el = r.elements;
    const auto& psi = s.wavefunctions[0];
    const double h = s.grid.h();
    const double kin = s.hbar * s.hbar / (2.0 * s.mass);
    TrkSummary t;
    for (std::size_t n = 1; n < el.truncation; ++n) t.s_spectral += el.gaps[n] * el.weight(n);

    // Lattice double commutator: only nearest-neighbour links contribute.
    auto lattice_sum = [&](const std::function<double(double)>& f) {
        double acc = 0.0;
        for (std::size_t k = 0; k + 1 < psi.size(); ++k) {
            const double df = (f(s.grid.interior_x(k + 1)) - f(s.grid.interior_x(k))) / h;
            acc += psi[k] * psi[k + 1] * df * df;
        }
        return kin * acc * h;
    };

    switch (el.observable) {
        case ObservableKind::Position:
            t.s_direct = kin;
            t.s_lattice = lattice_sum([](double x) { return x; });
            break;
        case ObservableKind::Momentum: {
            const auto& pot = *s.potential;
            if (pot.hard_walls()) {
                t.s_direct = kInf;
            } else {
                const double curv =
                    ground_expectation(s, [&](double x) { return pot.derivatives(x).second; });
                t.s_direct = 0.5 * s.hbar * s.hbar * curv;
            }
            t.s_lattice = kNaN;
            break;
        }
        case ObservableKind::Multiplicative: {
            const auto& fn = *el.function;
            t.s_direct = kin * ground_expectation(s, [&](double x) {
                const double d = fn.df(x);
                return d * d;
            });
            t.s_lattice = lattice_sum(fn.f);
            break;
        }
    }
    t.residual = std::abs(t.s_direct - t.s_spectral);

    t.f_weights.assign(el.truncation, 0.0);
    if (std::isfinite(t.s_direct) && t.s_direct > 0.0) {
        double inv_sum = 0.0;
        for (std::size_t n = 1; n < el.truncation; ++n) {
            t.f_weights[n] = el.gaps[n] * el.weight(n) / t.s_direct;
            inv_sum += el.weight(n);
        }
        if (r.gaps.defined) {
            t.eta_trk =
                std::clamp(1.0 - r.gaps.delta * r.gaps.active_weight / t.s_direct, 0.0, 1.0);
            t.eta_tilde = 1.0 - r.gaps.delta * inv_sum / t.s_direct;
        }
    } else {
        t.eta_trk = kNaN;
        t.eta_tilde = kNaN;
    }
    return t;
}

CorridorResult trk_corridor_weights(const TrkSummary& summary, double delta,
                                    std::optional<double> gamma, double tol) {
    CorridorResult c;
    c.eta_trk = summary.eta_trk;
    c.eta_tilde = summary.eta_tilde;
    c.upper_edge = summary.eta_trk;
    if (!gamma) {
        c.single_channel = true;
        c.lower_edge = 0.0;
    } else {
        c.lower_edge = *gamma / (delta + *gamma) * summary.eta_trk;
    }
    if (c.eta_tilde < c.lower_edge - tol || c.eta_tilde > c.upper_edge + tol)
        throw TrapError(ErrorKind::CorridorViolation,
                        "eta_tilde " + std::to_string(c.eta_tilde) + " outside [" +
                            std::to_string(c.lower_edge) + ", " + std::to_string(c.upper_edge) +
                            "]");
    return c;
}

}  // namespace trapcert
