#include "trapcert/potential.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "trapcert/errors.hpp"

namespace trapcert {

using nlohmann::json;

struct PotentialSpec::Spline {
    boost::math::interpolators::cardinal_cubic_b_spline<double> impl;
};

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double horner(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
}

std::vector<double> differentiate(const std::vector<double>& c) {
    std::vector<double> d;
    for (std::size_t k = 1; k < c.size(); ++k) d.push_back(static_cast<double>(k) * c[k]);
    return d;
}

void check_units(const UnitSystem& u) {
    if (!(u.hbar > 0.0) || !(u.mass > 0.0) || !std::isfinite(u.hbar) || !std::isfinite(u.mass))
        throw TrapError(ErrorKind::MalformedSpec, "hbar and mass must be finite and positive");
    if (u.omega_ref && !(*u.omega_ref > 0.0))
        throw TrapError(ErrorKind::MalformedSpec, "omega_ref must be positive");
}

void check_finite(double v, const char* name) {
    if (!std::isfinite(v))
        throw TrapError(ErrorKind::MalformedSpec, std::string(name) + " must be finite");
}

// Leading coefficient of the radial polynomial r -> V(r cos t, r sin t).
std::pair<int, double> radial_leading(const std::vector<std::vector<double>>& c, double t) {
    std::vector<double> radial;
    const double ct = std::cos(t), st = std::sin(t);
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = 0; j < c[i].size(); ++j) {
            const std::size_t deg = i + j;
            if (radial.size() <= deg) radial.resize(deg + 1, 0.0);
            radial[deg] += c[i][j] * std::pow(ct, static_cast<double>(i)) *
                           std::pow(st, static_cast<double>(j));
        }
    double scale = 0.0;
    for (double v : radial) scale = std::max(scale, std::abs(v));
    for (int d = static_cast<int>(radial.size()) - 1; d >= 0; --d)
        if (std::abs(radial[d]) > 1e-12 * scale) return {d, radial[d]};
    return {-1, 0.0};
}

}  // namespace

std::string_view to_string(PotentialKind kind) {
    switch (kind) {
        case PotentialKind::Polynomial1D: return "polynomial-1d";
        case PotentialKind::QuarticFamily: return "quartic-family";
        case PotentialKind::DoubleWell: return "double-well";
        case PotentialKind::Tabulated1D: return "tabulated-1d";
        case PotentialKind::InfiniteWell: return "infinite-well";
        case PotentialKind::Polynomial2D: return "polynomial-2d";
        case PotentialKind::Quadratic2DAnisotropic: return "quadratic-2d-anisotropic";
        case PotentialKind::Box2D: return "box-2d";
    }
    return "unknown";
}

void PotentialSpec::finalize_1d() {
    while (!coeffs_.empty() && coeffs_.back() == 0.0) coeffs_.pop_back();
    for (double c : coeffs_) check_finite(c, "coefficient");
    const std::size_t n = coeffs_.size();
    if (n < 3 || (n - 1) % 2 != 0 || coeffs_.back() <= 0.0)
        throw TrapError(ErrorKind::NonConfining,
                        "polynomial needs an even leading degree >= 2 with positive coefficient");
    d1_coeffs_ = differentiate(coeffs_);
    d2_coeffs_ = differentiate(d1_coeffs_);
}

PotentialSpec PotentialSpec::polynomial_1d(std::vector<double> coeffs, UnitSystem units) {
    check_units(units);
    PotentialSpec s;
    s.kind_ = PotentialKind::Polynomial1D;
    s.units_ = units;
    s.coeffs_ = std::move(coeffs);
    s.finalize_1d();
    return s;
}

PotentialSpec PotentialSpec::quartic_family(double lambda, double omega, UnitSystem units) {
    check_units(units);
    check_finite(lambda, "lambda");
    check_finite(omega, "omega");
    if (lambda < 0.0)
        throw TrapError(ErrorKind::NonConfining, "quartic-family requires lambda >= 0");
    if (omega < 0.0) throw TrapError(ErrorKind::MalformedSpec, "omega must be non-negative");
    PotentialSpec s;
    s.kind_ = PotentialKind::QuarticFamily;
    s.units_ = units;
    s.lambda_ = lambda;
    s.omega_ = omega;
    s.coeffs_ = {0.0, 0.0, 0.5 * units.mass * omega * omega, 0.0, lambda};
    s.finalize_1d();
    return s;
}

PotentialSpec PotentialSpec::double_well(double a, UnitSystem units) {
    check_units(units);
    check_finite(a, "a");
    if (!(a > 0.0)) throw TrapError(ErrorKind::MalformedSpec, "double-well requires a > 0");
    PotentialSpec s;
    s.kind_ = PotentialKind::DoubleWell;
    s.units_ = units;
    s.a_ = a;
    s.coeffs_ = {a * a / 4.0, 0.0, -0.5, 0.0, 1.0 / (4.0 * a * a)};
    s.finalize_1d();
    return s;
}

PotentialSpec PotentialSpec::tabulated_1d(double x0, double dx, std::vector<double> values,
                                          UnitSystem units) {
    check_units(units);
    check_finite(x0, "x0");
    if (!(dx > 0.0) || !std::isfinite(dx))
        throw TrapError(ErrorKind::MalformedSpec, "tabulated-1d requires dx > 0");
    if (values.size() < 4)
        throw TrapError(ErrorKind::MalformedSpec, "tabulated-1d needs at least 4 samples");
    for (double v : values) check_finite(v, "tabulated value");
    PotentialSpec s;
    s.kind_ = PotentialKind::Tabulated1D;
    s.units_ = units;
    s.x0_ = x0;
    s.dx_ = dx;
    s.table_ = std::move(values);
    s.spline_ = std::make_shared<const Spline>(
        Spline{{s.table_.data(), s.table_.size(), x0, dx}});
    return s;
}

PotentialSpec PotentialSpec::infinite_well(double width, double center, UnitSystem units) {
    check_units(units);
    check_finite(center, "center");
    if (!(width > 0.0) || !std::isfinite(width))
        throw TrapError(ErrorKind::MalformedSpec, "infinite-well requires width > 0");
    PotentialSpec s;
    s.kind_ = PotentialKind::InfiniteWell;
    s.units_ = units;
    s.width_ = width;
    s.center_ = center;
    return s;
}

PotentialSpec PotentialSpec::polynomial_2d(std::vector<std::vector<double>> coeffs,
                                           UnitSystem units) {
    check_units(units);
    for (const auto& row : coeffs)
        for (double c : row) check_finite(c, "coefficient");
    // Directional sampling of the radial leading term; axes included.
    constexpr int kAngles = 720;
    for (int k = 0; k < kAngles; ++k) {
        const double t = 2.0 * std::numbers::pi * k / kAngles;
        const auto [deg, lead] = radial_leading(coeffs, t);
        if (deg < 2 || deg % 2 != 0 || lead <= 0.0)
            throw TrapError(ErrorKind::NonConfining,
                            "polynomial-2d does not grow to +infinity in every direction");
    }
    PotentialSpec s;
    s.kind_ = PotentialKind::Polynomial2D;
    s.units_ = units;
    s.coeffs2d_ = std::move(coeffs);
    return s;
}

PotentialSpec PotentialSpec::quadratic_2d(double omega_x, double omega_y, double angle,
                                          UnitSystem units) {
    check_units(units);
    check_finite(angle, "angle");
    if (!(omega_x > 0.0) || !(omega_y > 0.0) || !std::isfinite(omega_x) ||
        !std::isfinite(omega_y))
        throw TrapError(ErrorKind::NonConfining, "quadratic-2d needs positive frequencies");
    PotentialSpec s;
    s.kind_ = PotentialKind::Quadratic2DAnisotropic;
    s.units_ = units;
    s.omega_x_ = omega_x;
    s.omega_y_ = omega_y;
    s.angle_ = angle;
    return s;
}

PotentialSpec PotentialSpec::box_2d(UnitSystem units) {
    check_units(units);
    PotentialSpec s;
    s.kind_ = PotentialKind::Box2D;
    s.units_ = units;
    return s;
}

int PotentialSpec::dimension() const {
    switch (kind_) {
        case PotentialKind::Polynomial2D:
        case PotentialKind::Quadratic2DAnisotropic:
        case PotentialKind::Box2D: return 2;
        default: return 1;
    }
}

bool PotentialSpec::hard_walls() const {
    return kind_ == PotentialKind::InfiniteWell || kind_ == PotentialKind::Box2D;
}

std::optional<std::pair<double, double>> PotentialSpec::fixed_domain() const {
    if (kind_ == PotentialKind::InfiniteWell)
        return std::make_pair(center_ - 0.5 * width_, center_ + 0.5 * width_);
    if (kind_ == PotentialKind::Tabulated1D)
        return std::make_pair(x0_, x0_ + dx_ * static_cast<double>(table_.size() - 1));
    return std::nullopt;
}

double PotentialSpec::parameter(std::string_view name) const {
    if (name == "lambda" && kind_ == PotentialKind::QuarticFamily) return lambda_;
    if (name == "omega" && kind_ == PotentialKind::QuarticFamily) return omega_;
    if (name == "a" && kind_ == PotentialKind::DoubleWell) return a_;
    if (name == "width" && kind_ == PotentialKind::InfiniteWell) return width_;
    if (name == "center" && kind_ == PotentialKind::InfiniteWell) return center_;
    if (name == "x0" && kind_ == PotentialKind::Tabulated1D) return x0_;
    if (name == "dx" && kind_ == PotentialKind::Tabulated1D) return dx_;
    if (name == "angle" && kind_ == PotentialKind::Quadratic2DAnisotropic) return angle_;
    if (name == "omega_x" && kind_ == PotentialKind::Quadratic2DAnisotropic) return omega_x_;
    if (name == "omega_y" && kind_ == PotentialKind::Quadratic2DAnisotropic) return omega_y_;
    throw TrapError(ErrorKind::MalformedSpec,
                    "parameter '" + std::string(name) + "' not defined for " +
                        std::string(to_string(kind_)));
}

double PotentialSpec::value(double x) const {
    switch (kind_) {
        case PotentialKind::InfiniteWell:
            return std::abs(x - center_) <= 0.5 * width_ ? 0.0 : kInf;
        case PotentialKind::Tabulated1D: {
            const auto [lo, hi] = *fixed_domain();
            return (x < lo || x > hi) ? kInf : spline_->impl(x);
        }
        default:
            if (dimension() != 1)
                throw TrapError(ErrorKind::MalformedSpec, "1D evaluation of a 2D potential");
            return horner(coeffs_, x);
    }
}

Derivatives1D PotentialSpec::derivatives(double x) const {
    switch (kind_) {
        case PotentialKind::InfiniteWell: return {0.0, 0.0};
        case PotentialKind::Tabulated1D:
            return {spline_->impl.prime(x), spline_->impl.double_prime(x)};
        default:
            if (dimension() != 1)
                throw TrapError(ErrorKind::MalformedSpec, "1D evaluation of a 2D potential");
            return {horner(d1_coeffs_, x), horner(d2_coeffs_, x)};
    }
}

double PotentialSpec::value(double x, double y) const {
    switch (kind_) {
        case PotentialKind::Box2D: return 0.0;
        case PotentialKind::Quadratic2DAnisotropic: {
            const double c = std::cos(angle_), s = std::sin(angle_);
            const double xp = c * x + s * y, yp = -s * x + c * y;
            return 0.5 * units_.mass *
                   (omega_x_ * omega_x_ * xp * xp + omega_y_ * omega_y_ * yp * yp);
        }
        case PotentialKind::Polynomial2D: {
            double acc = 0.0;
            for (std::size_t i = 0; i < coeffs2d_.size(); ++i)
                acc += std::pow(x, static_cast<double>(i)) * horner(coeffs2d_[i], y);
            return acc;
        }
        default: throw TrapError(ErrorKind::MalformedSpec, "2D evaluation of a 1D potential");
    }
}

Derivatives2D PotentialSpec::derivatives(double x, double y) const {
    Derivatives2D d;
    switch (kind_) {
        case PotentialKind::Box2D: return d;
        case PotentialKind::Quadratic2DAnisotropic: {
            const double c = std::cos(angle_), s = std::sin(angle_);
            const double kx = units_.mass * omega_x_ * omega_x_;
            const double ky = units_.mass * omega_y_ * omega_y_;
            // Hessian R^T diag(kx, ky) R with R the rotation to principal axes.
            d.vxx = kx * c * c + ky * s * s;
            d.vyy = kx * s * s + ky * c * c;
            d.vxy = (kx - ky) * c * s;
            d.vx = d.vxx * x + d.vxy * y;
            d.vy = d.vxy * x + d.vyy * y;
            return d;
        }
        case PotentialKind::Polynomial2D: {
            for (std::size_t i = 0; i < coeffs2d_.size(); ++i)
                for (std::size_t j = 0; j < coeffs2d_[i].size(); ++j) {
                    const double c = coeffs2d_[i][j];
                    if (c == 0.0) continue;
                    const double fi = static_cast<double>(i), fj = static_cast<double>(j);
                    auto pw = [](double b, double e) { return e < 0.0 ? 0.0 : std::pow(b, e); };
                    d.vx += c * fi * pw(x, fi - 1) * pw(y, fj);
                    d.vy += c * fj * pw(x, fi) * pw(y, fj - 1);
                    d.vxx += c * fi * (fi - 1) * pw(x, fi - 2) * pw(y, fj);
                    d.vyy += c * fj * (fj - 1) * pw(x, fi) * pw(y, fj - 2);
                    d.vxy += c * fi * fj * pw(x, fi - 1) * pw(y, fj - 1);
                }
            return d;
        }
        default: throw TrapError(ErrorKind::MalformedSpec, "2D evaluation of a 1D potential");
    }
}

bool PotentialSpec::operator==(const PotentialSpec& o) const {
    return kind_ == o.kind_ && units_ == o.units_ && coeffs_ == o.coeffs_ &&
           coeffs2d_ == o.coeffs2d_ && lambda_ == o.lambda_ && omega_ == o.omega_ &&
           a_ == o.a_ && x0_ == o.x0_ && dx_ == o.dx_ && table_ == o.table_ &&
           width_ == o.width_ && center_ == o.center_ && omega_x_ == o.omega_x_ &&
           omega_y_ == o.omega_y_ && angle_ == o.angle_;
}

namespace {

double get_number(const json& j, const char* key) {
    if (!j.contains(key)) throw TrapError(ErrorKind::MalformedSpec, std::string("missing '") + key + "'");
    if (!j.at(key).is_number())
        throw TrapError(ErrorKind::MalformedSpec, std::string("'") + key + "' must be a number");
    return j.at(key).get<double>();
}

double get_number_or(const json& j, const char* key, double fallback) {
    return j.contains(key) ? get_number(j, key) : fallback;
}

std::vector<double> get_vector(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array())
        throw TrapError(ErrorKind::MalformedSpec, std::string("'") + key + "' must be an array");
    std::vector<double> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_number())
            throw TrapError(ErrorKind::MalformedSpec, std::string("'") + key + "' must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

PotentialSpec parse_potential_spec(const json& j) {
    if (!j.is_object()) throw TrapError(ErrorKind::MalformedSpec, "potential must be an object");
    if (!j.contains("kind") || !j.at("kind").is_string())
        throw TrapError(ErrorKind::MalformedSpec, "potential needs a string 'kind'");
    const std::string kind = j.at("kind").get<std::string>();

    UnitSystem units;
    units.hbar = get_number_or(j, "hbar", 1.0);
    units.mass = get_number_or(j, "mass", 1.0);
    if (j.contains("omega_ref")) units.omega_ref = get_number(j, "omega_ref");

    std::set<std::string> allowed{"kind", "hbar", "mass", "omega_ref"};
    auto allow = [&](std::initializer_list<const char*> keys) {
        for (const char* k : keys) allowed.insert(k);
    };

    std::optional<PotentialSpec> spec;
    if (kind == "polynomial-1d") {
        allow({"coeffs"});
        spec = PotentialSpec::polynomial_1d(get_vector(j, "coeffs"), units);
    } else if (kind == "quartic-family") {
        allow({"lambda", "omega"});
        spec = PotentialSpec::quartic_family(get_number(j, "lambda"),
                                             get_number_or(j, "omega", 1.0), units);
    } else if (kind == "double-well") {
        allow({"a"});
        spec = PotentialSpec::double_well(get_number(j, "a"), units);
    } else if (kind == "tabulated-1d") {
        allow({"x0", "dx", "values"});
        spec = PotentialSpec::tabulated_1d(get_number(j, "x0"), get_number(j, "dx"),
                                           get_vector(j, "values"), units);
    } else if (kind == "infinite-well") {
        allow({"width", "center"});
        spec = PotentialSpec::infinite_well(get_number(j, "width"),
                                            get_number_or(j, "center", 0.0), units);
    } else if (kind == "polynomial-2d") {
        allow({"coeffs"});
        if (!j.contains("coeffs") || !j.at("coeffs").is_array())
            throw TrapError(ErrorKind::MalformedSpec, "'coeffs' must be an array of arrays");
        std::vector<std::vector<double>> rows;
        for (const auto& row : j.at("coeffs")) {
            if (!row.is_array())
                throw TrapError(ErrorKind::MalformedSpec, "'coeffs' must be an array of arrays");
            std::vector<double> r;
            for (const auto& v : row) {
                if (!v.is_number())
                    throw TrapError(ErrorKind::MalformedSpec, "'coeffs' must hold numbers");
                r.push_back(v.get<double>());
            }
            rows.push_back(std::move(r));
        }
        spec = PotentialSpec::polynomial_2d(std::move(rows), units);
    } else if (kind == "quadratic-2d-anisotropic") {
        allow({"omega_x", "omega_y", "angle"});
        spec = PotentialSpec::quadratic_2d(get_number(j, "omega_x"), get_number(j, "omega_y"),
                                           get_number_or(j, "angle", 0.0), units);
    } else if (kind == "box-2d") {
        spec = PotentialSpec::box_2d(units);
    } else {
        throw TrapError(ErrorKind::MalformedSpec, "unknown potential kind '" + kind + "'");
    }
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw TrapError(ErrorKind::MalformedSpec,
                            "unexpected key '" + item.key() + "' for kind " + kind);
    return *spec;
}

PotentialSpec parse_potential_spec(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw TrapError(ErrorKind::MalformedSpec, e.what());
    }
    return parse_potential_spec(j);
}

json to_json(const PotentialSpec& spec) {
    json j;
    j["kind"] = std::string(to_string(spec.kind()));
    j["hbar"] = spec.hbar();
    j["mass"] = spec.mass();
    if (spec.units().omega_ref) j["omega_ref"] = *spec.units().omega_ref;
    switch (spec.kind()) {
        case PotentialKind::Polynomial1D: j["coeffs"] = spec.coefficients(); break;
        case PotentialKind::QuarticFamily:
            j["lambda"] = spec.parameter("lambda");
            j["omega"] = spec.parameter("omega");
            break;
        case PotentialKind::DoubleWell: j["a"] = spec.parameter("a"); break;
        case PotentialKind::Tabulated1D:
            j["x0"] = spec.parameter("x0");
            j["dx"] = spec.parameter("dx");
            j["values"] = spec.tabulated_values();
            break;
        case PotentialKind::InfiniteWell:
            j["width"] = spec.parameter("width");
            j["center"] = spec.parameter("center");
            break;
        case PotentialKind::Polynomial2D: j["coeffs"] = spec.coefficients_2d(); break;
        case PotentialKind::Quadratic2DAnisotropic:
            j["omega_x"] = spec.parameter("omega_x");
            j["omega_y"] = spec.parameter("omega_y");
            j["angle"] = spec.parameter("angle");
            break;
        case PotentialKind::Box2D: break;
    }
    return j;
}

}  // namespace trapcert
