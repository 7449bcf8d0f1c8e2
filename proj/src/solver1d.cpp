#include "trapcert/solver1d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "trapcert/errors.hpp"

namespace trapcert {

Grid1D::Grid1D(double x_min, double x_max, std::size_t n_points)
    : x_min_(x_min), x_max_(x_max), n_points_(n_points) {
    if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max))
        throw TrapError(ErrorKind::MalformedSpec, "grid needs finite x_min < x_max");
    if (n_points < 64) throw TrapError(ErrorKind::MalformedSpec, "grid needs at least 64 points");
}

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Number of eigenvalues strictly below each shift (LDL^T inertia).
void sturm_counts(const std::vector<double>& d, const std::vector<double>& e2,
                  const std::vector<double>& shifts, double pivmin, std::vector<double>& q,
                  std::vector<std::size_t>& counts) {
    const std::size_t m = shifts.size();
    q.assign(m, 0.0);
    counts.assign(m, 0);
    for (std::size_t j = 0; j < m; ++j) {
        q[j] = d[0] - shifts[j];
        if (std::abs(q[j]) < pivmin) q[j] = -pivmin;
        counts[j] += q[j] < 0.0;
    }
    for (std::size_t i = 1; i < d.size(); ++i) {
        const double di = d[i], ei = e2[i - 1];
        for (std::size_t j = 0; j < m; ++j) {
            double v = (di - shifts[j]) - ei / q[j];
            if (std::abs(v) < pivmin) v = -pivmin;
            q[j] = v;
            counts[j] += v < 0.0;
        }
    }
}

// LU factorization of (T - sigma I) with partial pivoting, reused across
// inverse-iteration sweeps.
class ShiftedLU {
public:
    ShiftedLU(const std::vector<double>& d, const std::vector<double>& e, double sigma,
              double tiny)
        : n_(d.size()), dl_(e), dd_(d), du_(e), du2_(n_ > 1 ? n_ - 2 : 0, 0.0), swap_(n_, false) {
        for (double& v : dd_) v -= sigma;
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            if (std::abs(dd_[i]) >= std::abs(dl_[i])) {
                if (dd_[i] == 0.0) dd_[i] = tiny;
                const double fact = dl_[i] / dd_[i];
                dl_[i] = fact;
                dd_[i + 1] -= fact * du_[i];
            } else {
                const double fact = dd_[i] / dl_[i];
                dd_[i] = dl_[i];
                dl_[i] = fact;
                const double temp = du_[i];
                du_[i] = dd_[i + 1];
                dd_[i + 1] = temp - fact * dd_[i + 1];
                if (i + 2 < n_) {
                    du2_[i] = du_[i + 1];
                    du_[i + 1] = -fact * du_[i + 1];
                }
                swap_[i] = true;
            }
        }
        for (double& v : dd_)
            if (std::abs(v) < tiny) v = v < 0.0 ? -tiny : tiny;
    }

    void solve(std::vector<double>& b) const {
        for (std::size_t i = 0; i + 1 < n_; ++i) {
            if (!swap_[i]) {
                b[i + 1] -= dl_[i] * b[i];
            } else {
                const double temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - dl_[i] * b[i];
            }
        }
        b[n_ - 1] /= dd_[n_ - 1];
        if (n_ > 1) b[n_ - 2] = (b[n_ - 2] - du_[n_ - 2] * b[n_ - 1]) / dd_[n_ - 2];
        for (std::size_t k = n_ - 2; k-- > 0;)
            b[k] = (b[k] - du_[k] * b[k + 1] - du2_[k] * b[k + 2]) / dd_[k];
    }

private:
    std::size_t n_;
    std::vector<double> dl_, dd_, du_, du2_;
    std::vector<bool> swap_;
};

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double residual_norm(const std::vector<double>& d, const std::vector<double>& e,
                     const std::vector<double>& v, double lambda) {
    const std::size_t n = d.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = (d[i] - lambda) * v[i];
        if (i > 0) r += e[i - 1] * v[i - 1];
        if (i + 1 < n) r += e[i] * v[i + 1];
        acc += r * r;
    }
    return std::sqrt(acc);
}

double ground_variance(const Grid1D& grid, const std::vector<double>& psi) {
    const double h = grid.h();
    double mean = 0.0;
    for (std::size_t k = 0; k < psi.size(); ++k) mean += grid.interior_x(k) * psi[k] * psi[k];
    mean *= h;
    double var = 0.0;
    for (std::size_t k = 0; k < psi.size(); ++k) {
        const double dx = grid.interior_x(k) - mean;
        var += dx * dx * psi[k] * psi[k];
    }
    return var * h;
}

}  // namespace

TridiagonalOperator build_hamiltonian_1d(const PotentialSpec& spec, const Grid1D& grid) {
    if (spec.dimension() != 1)
        throw TrapError(ErrorKind::MalformedSpec, "1D solver needs a 1D potential");
    const double h = grid.h();
    const double t = spec.hbar() * spec.hbar() / (2.0 * spec.mass() * h * h);
    const std::size_t n = grid.interior();
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) {
        v[k] = spec.value(grid.interior_x(k));
        if (!std::isfinite(v[k]))
            throw TrapError(ErrorKind::MalformedSpec, "potential is not finite inside the box");
    }
    const double vmin = *std::min_element(v.begin(), v.end());
    TridiagonalOperator op{grid, std::vector<double>(n), std::vector<double>(n - 1, -t), vmin,
                           spec.hbar(), spec.mass(), std::make_shared<const PotentialSpec>(spec)};
    for (std::size_t k = 0; k < n; ++k) op.diagonal[k] = 2.0 * t + (v[k] - vmin);
    return op;
}

Spectrum1D solve_lowest(const TridiagonalOperator& op, std::size_t K) {
    const std::vector<double>& d = op.diagonal;
    const std::vector<double>& e = op.off_diagonal;
    const std::size_t n = d.size();
    if (K == 0 || K >= op.grid.n_points() || K > n)
        throw TrapError(ErrorKind::MalformedSpec, "K must satisfy 1 <= K < n_points");

    std::vector<double> e2(e.size());
    double emax2 = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = (i > 0 ? std::abs(e[i - 1]) : 0.0) + (i + 1 < n ? std::abs(e[i]) : 0.0);
        lo = std::min(lo, d[i] - r);
        hi = std::max(hi, d[i] + r);
        if (i + 1 < n) {
            e2[i] = e[i] * e[i];
            emax2 = std::max(emax2, e2[i]);
        }
    }
    const double tnorm = std::max(std::abs(lo), std::abs(hi));
    const double pivmin = std::numeric_limits<double>::min() * std::max(1.0, emax2);

    // Lockstep bisection: one pass over the matrix evaluates the Sturm counts
    // of every unresolved target, so the division chains run interleaved.
    std::vector<double> lower(K, lo), upper(K, hi);
    auto resolved = [&](std::size_t k) {
        const double a = lower[k], b = upper[k];
        const double mid = 0.5 * (a + b);
        return b - a <= 2.0 * kEps * std::max(std::abs(a), std::abs(b)) + pivmin || mid <= a ||
               mid >= b;
    };
    std::vector<double> shifts, q;
    std::vector<std::size_t> counts;
    for (;;) {
        shifts.clear();
        for (std::size_t k = 0; k < K; ++k) {
            if (resolved(k)) continue;
            const double mid = 0.5 * (lower[k] + upper[k]);
            if (shifts.empty() || shifts.back() != mid) shifts.push_back(mid);
        }
        if (shifts.empty()) break;
        sturm_counts(d, e2, shifts, pivmin, q, counts);
        for (std::size_t j = 0; j < shifts.size(); ++j)
            for (std::size_t k = 0; k < K; ++k) {
                if (k < counts[j])
                    upper[k] = std::min(upper[k], shifts[j]);
                else
                    lower[k] = std::max(lower[k], shifts[j]);
            }
    }
    std::vector<double> evals(K);
    for (std::size_t k = 0; k < K; ++k) evals[k] = 0.5 * (lower[k] + upper[k]);

    // Inverse iteration. Components along earlier eigenvectors are damped by
    // the iteration itself, so re-orthogonalization runs once at the end;
    // a state that loses its residual there (close clusters) falls back to
    // re-orthogonalizing on every sweep.
    const double tiny = kEps * tnorm;
    const double restol = 64.0 * kEps * tnorm;
    std::vector<std::vector<double>> vecs;
    vecs.reserve(K);
    auto orthogonalize = [&](std::vector<double>& x) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& v : vecs) {
                const double c = dot(v, x);
                for (std::size_t i = 0; i < n; ++i) x[i] -= c * v[i];
            }
    };
    auto normalize = [&](std::vector<double>& x) {
        const double nx = norm(x);
        if (!(nx > 0.0) || !std::isfinite(nx)) return false;
        for (double& v : x) v /= nx;
        return true;
    };
    for (std::size_t k = 0; k < K; ++k) {
        const ShiftedLU lu(d, e, evals[k], tiny);
        bool done = false;
        std::vector<double> x(n);
        for (int attempt = 0; attempt < 4 && !done; ++attempt) {
            const bool every_sweep = attempt > 0;
            std::mt19937_64 rng(0x5eed0000ULL + 97ULL * k + static_cast<unsigned long long>(attempt));
            std::uniform_real_distribution<double> uni(-1.0, 1.0);
            for (double& v : x) v = uni(rng);
            for (int it = 0; it < 6; ++it) {
                lu.solve(x);
                if (every_sweep) orthogonalize(x);
                if (!normalize(x)) break;
                if (it < 1 || residual_norm(d, e, x, evals[k]) > restol) continue;
                if (!every_sweep) {
                    orthogonalize(x);
                    if (!normalize(x) || residual_norm(d, e, x, evals[k]) > restol) break;
                }
                done = true;
                break;
            }
        }
        if (!done)
            throw TrapError(ErrorKind::EigensolverFailure,
                            "inverse iteration did not converge for state " + std::to_string(k));
        vecs.push_back(std::move(x));
    }

    Spectrum1D s{op.grid, {}, {}, {}, {}, op.hbar, op.mass, op.potential, nullptr};
    const double scale = 1.0 / std::sqrt(op.grid.h());
    for (std::size_t k = 0; k < K; ++k) {
        auto& v = vecs[k];
        double sign = 1.0;
        if (k == 0) {
            double sum = 0.0;
            for (double x : v) sum += x;
            sign = sum < 0.0 ? -1.0 : 1.0;
        } else {
            double vmax = 0.0;
            for (double x : v) vmax = std::max(vmax, std::abs(x));
            for (double x : v)
                if (std::abs(x) > 1e-6 * vmax) {
                    sign = x < 0.0 ? -1.0 : 1.0;
                    break;
                }
        }
        for (double& x : v) x *= sign * scale;
        s.energies.push_back(evals[k] + op.energy_offset);
        s.wavefunctions.push_back(std::move(v));
    }
    if (K >= 2) {
        const double tol = 1e-9 * (s.energies.back() - s.energies.front());
        for (std::size_t k = 1; k < K; ++k)
            if (s.energies[k] - s.energies[k - 1] <= tol) s.degenerate_pairs.emplace_back(k - 1, k);
    }
    s.convergence.h_used = op.grid.h();
    s.convergence.n_points = op.grid.n_points();
    s.convergence.var_x = ground_variance(op.grid, s.wavefunctions[0]);
    s.convergence.var_x_richardson = s.convergence.var_x;
    s.convergence.richardson_energies = s.energies;
    s.convergence.energy_error_estimate.assign(K, 0.0);
    return s;
}

int count_nodes(const std::vector<double>& psi, double floor) {
    double vmax = 0.0;
    for (double x : psi) vmax = std::max(vmax, std::abs(x));
    int nodes = 0;
    int last = 0;
    for (double x : psi) {
        if (std::abs(x) <= floor * vmax) continue;
        const int s = x > 0.0 ? 1 : -1;
        if (last != 0 && s != last) ++nodes;
        last = s;
    }
    return nodes;
}

double edge_amplitude(const std::vector<double>& psi, double fraction) {
    const std::size_t n = psi.size();
    const std::size_t m = std::max<std::size_t>(2, static_cast<std::size_t>(fraction * n));
    double vmax = 0.0, edge = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        vmax = std::max(vmax, std::abs(psi[i]));
        if (i < m || i + m >= n) edge = std::max(edge, std::abs(psi[i]));
    }
    return vmax > 0.0 ? edge / vmax : 0.0;
}

namespace {

// Outermost points of the classically allowed region {V <= E}, on a sampled
// window [c - R, c + R] that is widened until V exceeds E at both ends.
std::pair<double, double> allowed_region(const PotentialSpec& spec, double center, double energy,
                                         double max_half_width) {
    double R = 1.0;
    while (spec.value(center - R) <= energy || spec.value(center + R) <= energy) {
        R *= 2.0;
        if (R > max_half_width)
            throw TrapError(ErrorKind::NoConvergence, "classically allowed region is unbounded");
    }
    constexpr int kSamples = 20001;
    double left = center, right = center;
    bool found = false;
    for (int i = 0; i < kSamples; ++i) {
        const double x = center - R + 2.0 * R * i / (kSamples - 1);
        if (spec.value(x) <= energy) {
            if (!found) left = x;
            right = x;
            found = true;
        }
    }
    const double step = 2.0 * R / (kSamples - 1);
    return {left - step, right + step};
}

// Distance beyond a turning point needed for the WKB decay integral to reach
// `target`.
double decay_length(const PotentialSpec& spec, double start, double direction, double energy,
                    double target, double step, double max_half_width) {
    const double m = spec.mass(), hbar = spec.hbar();
    double acc = 0.0, dist = 0.0;
    while (acc < target) {
        const double x = start + direction * (dist + 0.5 * step);
        const double excess = std::max(0.0, spec.value(x) - energy);
        acc += std::sqrt(2.0 * m * excess) / hbar * step;
        dist += step;
        if (dist > max_half_width)
            throw TrapError(ErrorKind::NoConvergence, "wavefunction tail does not decay");
    }
    return dist;
}

}  // namespace

Grid1D auto_domain(const PotentialSpec& spec, std::size_t K, double tail_tol,
                   const DomainOptions& options) {
    if (K < 1) throw TrapError(ErrorKind::MalformedSpec, "auto_domain needs K >= 1");
    if (!(tail_tol > 0.0 && tail_tol < 1.0))
        throw TrapError(ErrorKind::MalformedSpec, "tail_tol must lie in (0, 1)");
    if (auto fixed = spec.fixed_domain()) return {fixed->first, fixed->second, options.n_points};

    // Locate the global minimum on a window wide enough to bracket it.
    double R = 1.0, xmin = 0.0, vmin = 0.0;
    for (int attempt = 0;; ++attempt) {
        constexpr int kSamples = 4001;
        int best = 0;
        for (int i = 0; i < kSamples; ++i) {
            const double x = -R + 2.0 * R * i / (kSamples - 1);
            const double v = spec.value(x);
            if (i == 0 || v < vmin) {
                vmin = v;
                best = i;
            }
        }
        xmin = -R + 2.0 * R * best / (kSamples - 1);
        if (best > 0 && best < kSamples - 1) break;
        R *= 2.0;
        if (R > options.max_half_width || attempt > 60)
            throw TrapError(ErrorKind::NoConvergence, "potential minimum not found");
    }

    const double target = std::log(1.0 / tail_tol) + 3.0;
    const double curvature = std::max(spec.derivatives(xmin).second, 0.0);
    const double omega = curvature > 0.0 ? std::sqrt(curvature / spec.mass()) : 1.0;
    double energy = vmin + spec.hbar() * omega * (static_cast<double>(K) + 0.5);

    auto box_for = [&](double e) {
        const auto [l, r] = allowed_region(spec, xmin, e, options.max_half_width);
        const double step = std::max(r - l, 1e-3) / 4000.0;
        const double dl = decay_length(spec, l, -1.0, e, target, step, options.max_half_width);
        const double dr = decay_length(spec, r, +1.0, e, target, step, options.max_half_width);
        return std::make_pair(l - dl, r + dr);
    };

    std::pair<double, double> box = box_for(energy);
    for (int it = 0; it < 30; ++it) {
        const Grid1D g(box.first, box.second, options.n_points);
        const Spectrum1D s = solve_lowest(build_hamiltonian_1d(spec, g), K);
        const double e_new = s.energies.back();
        const auto next = box_for(e_new);
        const double width = box.second - box.first;
        const bool settled = std::abs(next.first - box.first) < 0.01 * width &&
                             std::abs(next.second - box.second) < 0.01 * width;
        box = next;
        energy = e_new;
        if (settled) break;
    }

    // Confirm with the boundary-amplitude criterion, widening if needed.
    for (int doubling = 0; doubling <= options.max_doublings; ++doubling) {
        const Grid1D g(box.first, box.second, 2 * options.n_points - 1);
        const Spectrum1D s = solve_lowest(build_hamiltonian_1d(spec, g), K);
        const double amp = std::max(edge_amplitude(s.wavefunctions.front()),
                                    edge_amplitude(s.wavefunctions.back()));
        if (amp < tail_tol) return {box.first, box.second, options.n_points};
        const double c = 0.5 * (box.first + box.second);
        const double half = box.second - box.first;
        box = {c - half, c + half};
        if (half > options.max_half_width) break;
    }
    throw TrapError(ErrorKind::NoConvergence, "box did not contain the requested states");
}

Spectrum1D converge(const PotentialSpec& spec, std::size_t K, double rtol,
                    const ConvergeOptions& options) {
    if (!(rtol > 0.0))
        throw TrapError(ErrorKind::MalformedSpec, "rtol must be a positive tolerance");
    const Grid1D base = options.box ? Grid1D(options.box->first, options.box->second,
                                             options.base_intervals + 1)
                                    : [&] {
                                          const Grid1D g = auto_domain(
                                              spec, K, options.tail_tol,
                                              DomainOptions{options.base_intervals + 1});
                                          return Grid1D(g.x_min(), g.x_max(),
                                                        options.base_intervals + 1);
                                      }();

    auto level = std::make_shared<Spectrum1D>(solve_lowest(build_hamiltonian_1d(spec, base), K));
    std::shared_ptr<Spectrum1D> previous;
    std::vector<double> prev_extrap;
    double last_change = std::numeric_limits<double>::infinity();

    for (int doubling = 1; doubling <= options.max_doublings; ++doubling) {
        previous = level;
        level = std::make_shared<Spectrum1D>(
            solve_lowest(build_hamiltonian_1d(spec, previous->grid.refined()), K));

        std::vector<double> extrap(K + 1);
        for (std::size_t k = 0; k < K; ++k)
            extrap[k] = richardson(level->energies[k], previous->energies[k]);
        extrap[K] = richardson(level->convergence.var_x, previous->convergence.var_x);

        auto& rec = level->convergence;
        rec.refinements = doubling;
        rec.rtol = rtol;
        rec.richardson_energies.assign(extrap.begin(), extrap.begin() + static_cast<long>(K));
        rec.var_x_richardson = extrap[K];
        for (std::size_t k = 0; k < K; ++k)
            rec.energy_error_estimate[k] = std::abs(extrap[k] - level->energies[k]);
        level->coarser = previous;

        if (!prev_extrap.empty()) {
            const double spread = K > 1 ? extrap[K - 1] - extrap[0] : 1.0;
            last_change = 0.0;
            for (std::size_t k = 0; k < K; ++k)
                last_change = std::max(last_change, std::abs(extrap[k] - prev_extrap[k]) /
                                                        std::max(std::abs(extrap[k]), spread));
            last_change = std::max(last_change, std::abs(extrap[K] - prev_extrap[K]) /
                                                    std::abs(extrap[K]));
            rec.last_relative_change = last_change;
            if (last_change < rtol) {
                rec.boundary_amplitude = std::max(edge_amplitude(level->wavefunctions.front()),
                                                  edge_amplitude(level->wavefunctions.back()));
                // Only one coarser level is kept.
                previous->coarser.reset();
                return *level;
            }
        }
        previous->coarser.reset();
        prev_extrap = std::move(extrap);
    }
    throw TrapError(ErrorKind::NoConvergence,
                    "grid refinement stalled at relative change " + std::to_string(last_change));
}

}  // namespace trapcert
