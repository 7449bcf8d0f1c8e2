#include "doctest.h"

#include <cmath>
#include <random>

#include "trapcert/errors.hpp"
#include "trapcert/potential.hpp"

using namespace trapcert;

TEST_CASE("parse builds the declared potential") {
    const auto harmonic = parse_potential_spec(R"({"kind":"quartic-family","lambda":0})");
    CHECK(harmonic.coefficients() == std::vector<double>{0.0, 0.0, 0.5});
    CHECK(harmonic.value(2.0) == doctest::Approx(2.0));

    const auto poly = parse_potential_spec(R"({"kind":"polynomial-1d","coeffs":[0,0,0.5,0,0.1]})");
    CHECK(poly.value(1.0) == doctest::Approx(0.6));

    try {
        parse_potential_spec(R"({"kind":"polynomial-1d","coeffs":[0,0,-1]})");
        FAIL("inverted parabola accepted");
    } catch (const TrapError& e) {
        CHECK(e.kind() == ErrorKind::NonConfining);
    }
}

TEST_CASE("parse rejects schema violations") {
    auto kind_of = [](const char* text) {
        try {
            parse_potential_spec(text);
        } catch (const TrapError& e) {
            return e.kind();
        }
        return ErrorKind::ThresholdSensitive;  // sentinel: nothing thrown
    };
    CHECK(kind_of(R"({"kind":"quartic-family","lambda":-0.1})") == ErrorKind::NonConfining);
    CHECK(kind_of(R"({"kind":"polynomial-1d","coeffs":[0,0,0,1]})") == ErrorKind::NonConfining);
    CHECK(kind_of(R"({"kind":"quartic-family"})") == ErrorKind::MalformedSpec);
    CHECK(kind_of(R"({"kind":"quartic-family","lambda":0.1,"lamda":1})") ==
          ErrorKind::MalformedSpec);
    CHECK(kind_of(R"({"kind":"spiral"})") == ErrorKind::MalformedSpec);
    CHECK(kind_of(R"({"kind":"double-well","a":0})") == ErrorKind::MalformedSpec);
    CHECK(kind_of(R"({"kind":"quartic-family","lambda":0,"mass":0})") == ErrorKind::MalformedSpec);
    CHECK(kind_of("not json") == ErrorKind::MalformedSpec);
    CHECK(kind_of(R"({"kind":"polynomial-2d","coeffs":[[0,0,1],[0,0],[-1]]})") ==
          ErrorKind::NonConfining);
}

TEST_CASE("closed-form values and derivatives") {
    const auto q = PotentialSpec::quartic_family(0.1);
    CHECK(q.value(1.0) == doctest::Approx(0.6));
    CHECK(q.derivatives(1.0).first == doctest::Approx(1.4));
    CHECK(q.derivatives(1.0).second == doctest::Approx(2.2));

    const auto h = PotentialSpec::quartic_family(0.0);
    CHECK(h.derivatives(3.0).first == doctest::Approx(3.0));
    CHECK(h.derivatives(3.0).second == doctest::Approx(1.0));
    for (double x : {-4.0, 0.3, 7.0}) CHECK(h.derivatives(x).second == 1.0);

    const auto dw = PotentialSpec::double_well(2.0);
    CHECK(dw.value(0.0) == doctest::Approx(1.0));
    CHECK(dw.value(2.0) == doctest::Approx(0.0).epsilon(1e-14));

    const auto box = PotentialSpec::infinite_well(M_PI);
    CHECK(box.value(0.0) == 0.0);
    CHECK(std::isinf(box.value(2.0)));
    CHECK(box.hard_walls());
}

TEST_CASE("analytic derivatives agree with central differences") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0), xs(-2.0, 2.0);
    const double h = 1e-4;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> c(7);
        for (double& v : c) v = coeff(rng);
        c.back() = std::abs(c.back()) + 0.1;
        const auto spec = PotentialSpec::polynomial_1d(c);
        for (int k = 0; k < 10; ++k) {
            const double x = xs(rng);
            const double fd1 = (spec.value(x + h) - spec.value(x - h)) / (2 * h);
            const double fd2 = (spec.value(x + h) - 2 * spec.value(x) + spec.value(x - h)) / (h * h);
            const auto d = spec.derivatives(x);
            CHECK(std::abs(fd1 - d.first) <= 1e-6 * std::max(1.0, std::abs(d.first)));
            CHECK(std::abs(fd2 - d.second) <= 1e-4 * std::max(1.0, std::abs(d.second)));
        }
    }
}

TEST_CASE("2D derivatives agree with central differences") {
    const auto spec = PotentialSpec::polynomial_2d({{0, 0.3, 0.5, 0, 0.2}, {0.1, 0.05}, {0.5, 0, 0.1}, {}, {0.2}});
    const auto aniso = PotentialSpec::quadratic_2d(1.0, 2.0, 0.4);
    const double h = 1e-4;
    for (const auto* s : {&spec, &aniso}) {
        for (double x : {-0.7, 0.2, 1.3})
            for (double y : {-1.1, 0.4}) {
                const auto d = s->derivatives(x, y);
                CHECK(d.vx == doctest::Approx((s->value(x + h, y) - s->value(x - h, y)) / (2 * h)).epsilon(1e-6));
                CHECK(d.vy == doctest::Approx((s->value(x, y + h) - s->value(x, y - h)) / (2 * h)).epsilon(1e-6));
                const double fxy = (s->value(x + h, y + h) - s->value(x + h, y - h) -
                                    s->value(x - h, y + h) + s->value(x - h, y - h)) / (4 * h * h);
                CHECK(d.vxy == doctest::Approx(fxy).epsilon(1e-5));
                const double fxx = (s->value(x + h, y) - 2 * s->value(x, y) + s->value(x - h, y)) / (h * h);
                CHECK(d.vxx == doctest::Approx(fxx).epsilon(1e-4));
            }
    }
}

TEST_CASE("serialization round-trips") {
    const char* fragments[] = {
        R"({"kind":"quartic-family","lambda":0.37,"omega":1.5,"mass":2,"hbar":0.5})",
        R"({"kind":"polynomial-1d","coeffs":[1,0.1,0.5,0,0.1]})",
        R"({"kind":"double-well","a":2})",
        R"({"kind":"tabulated-1d","x0":-3,"dx":0.5,"values":[9,4,1,0,1,4,9,16,25,36,49,64,81]})",
        R"({"kind":"infinite-well","width":3.14159,"center":0.1})",
        R"({"kind":"polynomial-2d","coeffs":[[0,0,0.5],[0],[0.5]]})",
        R"({"kind":"quadratic-2d-anisotropic","omega_x":1,"omega_y":2,"angle":0.3,"omega_ref":1})",
        R"({"kind":"box-2d"})",
    };
    for (const char* f : fragments) {
        const auto a = parse_potential_spec(f);
        const auto b = parse_potential_spec(to_json(a).dump());
        CHECK(a == b);
        CHECK(to_json(a) == to_json(b));
    }
}

TEST_CASE("tabulated potential interpolates and flags curvature") {
    std::vector<double> values;
    for (int i = 0; i <= 80; ++i) {
        const double x = -4.0 + 0.1 * i;
        values.push_back(0.5 * x * x);
    }
    const auto spec = PotentialSpec::tabulated_1d(-4.0, 0.1, values);
    CHECK_FALSE(spec.curvature_exact());
    CHECK(spec.value(1.23) == doctest::Approx(0.5 * 1.23 * 1.23).epsilon(1e-4));
    CHECK(spec.derivatives(1.23).first == doctest::Approx(1.23).epsilon(1e-3));
    CHECK(spec.fixed_domain()->second == doctest::Approx(4.0));
}
