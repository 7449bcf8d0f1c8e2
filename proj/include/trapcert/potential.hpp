#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace trapcert {

enum class PotentialKind {
    Polynomial1D,
    QuarticFamily,
    DoubleWell,
    Tabulated1D,
    InfiniteWell,
    Polynomial2D,
    Quadratic2DAnisotropic,
    Box2D,
};

std::string_view to_string(PotentialKind kind);

struct UnitSystem {
    double hbar = 1.0;
    double mass = 1.0;
    std::optional<double> omega_ref;

    bool operator==(const UnitSystem&) const = default;
};

struct Derivatives1D {
    double first = 0.0;   // V'
    double second = 0.0;  // V''
};

struct Derivatives2D {
    double vx = 0.0, vy = 0.0;
    double vxx = 0.0, vxy = 0.0, vyy = 0.0;
};

// Declarative confining potential. Constructed only through the validating
// factories below or parse_potential_spec, so every instance is confining.
class PotentialSpec {
public:
    static PotentialSpec polynomial_1d(std::vector<double> coeffs, UnitSystem units = {});
    static PotentialSpec quartic_family(double lambda, double omega = 1.0, UnitSystem units = {});
    static PotentialSpec double_well(double a, UnitSystem units = {});
    static PotentialSpec tabulated_1d(double x0, double dx, std::vector<double> values,
                                      UnitSystem units = {});
    // V = 0 on [center - width/2, center + width/2], infinite outside.
    static PotentialSpec infinite_well(double width, double center = 0.0, UnitSystem units = {});
    // coeffs[i][j] multiplies x^i y^j.
    static PotentialSpec polynomial_2d(std::vector<std::vector<double>> coeffs,
                                       UnitSystem units = {});
    // V = m/2 (wx^2 x'^2 + wy^2 y'^2) in axes rotated by `angle`.
    static PotentialSpec quadratic_2d(double omega_x, double omega_y, double angle = 0.0,
                                      UnitSystem units = {});
    // V = 0 inside the solve box; confinement comes from the Dirichlet walls.
    static PotentialSpec box_2d(UnitSystem units = {});

    PotentialKind kind() const { return kind_; }
    int dimension() const;
    const UnitSystem& units() const { return units_; }
    double hbar() const { return units_.hbar; }
    double mass() const { return units_.mass; }

    // Hard-walled kinds have singular force and curvature at the walls.
    bool hard_walls() const;
    // Tabulated curvature comes from a spline and is only approximate.
    bool curvature_exact() const { return kind_ != PotentialKind::Tabulated1D; }
    // Kinds whose support fixes the solve box (walls or table range).
    std::optional<std::pair<double, double>> fixed_domain() const;

    // Expanded 1D polynomial coefficients (empty for non-polynomial kinds).
    const std::vector<double>& coefficients() const { return coeffs_; }
    const std::vector<std::vector<double>>& coefficients_2d() const { return coeffs2d_; }
    double parameter(std::string_view name) const;
    const std::vector<double>& tabulated_values() const { return table_; }

    double value(double x) const;
    Derivatives1D derivatives(double x) const;
    double value(double x, double y) const;
    Derivatives2D derivatives(double x, double y) const;

    bool operator==(const PotentialSpec& other) const;

private:
    PotentialSpec() = default;
    void finalize_1d();

    PotentialKind kind_ = PotentialKind::Polynomial1D;
    UnitSystem units_;
    std::vector<double> coeffs_;
    std::vector<double> d1_coeffs_;
    std::vector<double> d2_coeffs_;
    std::vector<std::vector<double>> coeffs2d_;
    // Kind-specific declarative parameters kept for serialization.
    double lambda_ = 0.0, omega_ = 1.0, a_ = 0.0;
    double x0_ = 0.0, dx_ = 0.0;
    std::vector<double> table_;
    double width_ = 0.0, center_ = 0.0;
    double omega_x_ = 0.0, omega_y_ = 0.0, angle_ = 0.0;

    struct Spline;
    std::shared_ptr<const Spline> spline_;
};

PotentialSpec parse_potential_spec(const nlohmann::json& fragment);
PotentialSpec parse_potential_spec(std::string_view text);
inline PotentialSpec parse_potential_spec(const char* text) {
    return parse_potential_spec(std::string_view(text));
}
inline PotentialSpec parse_potential_spec(const std::string& text) {
    return parse_potential_spec(std::string_view(text));
}
nlohmann::json to_json(const PotentialSpec& spec);

inline double eval_potential(const PotentialSpec& spec, double x) { return spec.value(x); }
inline Derivatives1D eval_derivatives(const PotentialSpec& spec, double x) {
    return spec.derivatives(x);
}

}  // namespace trapcert
