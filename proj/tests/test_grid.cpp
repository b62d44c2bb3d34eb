#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "waveinv/errors.hpp"
#include "waveinv/grid.hpp"

using namespace waveinv;

namespace {

std::string code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

Field fill(const SpacetimeGrid& g, auto&& fn) {
    Field f(g);
    for (int k = 0; k < g.n_time; ++k)
        for (int i = 0; i < g.n_space; ++i)
            for (int j = 0; j < g.n_space; ++j) f.slice(k)[f.local(i, j, 0)] = fn(g.t(k), g.x(i), g.x(j));
    return f;
}

}  // namespace

TEST_CASE("grid time axis ends exactly at T within the cfl step") {
    auto g = SpacetimeGrid::make(2, 10, 129, 7.3, 0.5);
    CHECK(g.dt() <= 0.5 * g.dx() * (1 + 1e-12));
    CHECK(g.t(g.n_time - 1) == doctest::Approx(7.3).epsilon(1e-14));
    CHECK(g.x(0) == -10);
    CHECK(g.x(128) == doctest::Approx(10));
}

TEST_CASE("grid validation") {
    DomainSpec dom{10, 5, 4, 3, 1, 2};
    CHECK_NOTHROW(SpacetimeGrid::make(2, 16, 65, 10, 0.5).validate(&dom));
    CHECK(code_of([&] { SpacetimeGrid::make(2, 14, 65, 10, 0.5).validate(&dom); }) == "Grid");
    CHECK(code_of([&] { SpacetimeGrid::make(2, 16, 65, 10, 0.8).validate(&dom); }) == "CflViolation");
    CHECK(code_of([] { SpacetimeGrid::make(4, 16, 65, 10, 0.5); }) == "Dimension");
}

TEST_CASE("Sobolev norm of the zero field vanishes") {
    auto g = SpacetimeGrid::make(2, 4, 33, 2, 0.5);
    for (int s = 0; s <= 3; ++s) CHECK(sobolev_norm(Field(g), s, Region::full()) == 0.0);
}

TEST_CASE("Sobolev norm of a constant over the cylinder") {
    DomainSpec dom{4, 3, 2.5, 2, 0.5, 1};
    auto g = SpacetimeGrid::make(2, 8, 129, 4, 0.5);
    Field f = fill(g, [](double, double, double) { return -2.5; });
    double exact = 2.5 * std::sqrt(std::numbers::pi * 9);
    CHECK(sobolev_norm(f, 0, Region::cylinder(dom, 0)) == doctest::Approx(exact).epsilon(0.02));
}

TEST_CASE("H1 norm of a sine mode against its closed form") {
    double L = 5;
    auto g = SpacetimeGrid::make(2, L, 129, 1, 0.5);
    Field f = fill(g, [&](double, double x, double) { return std::sin(std::numbers::pi * x / L); });
    double vol = 4 * L * L;
    double k = std::numbers::pi / L;
    double exact = std::sqrt(vol / 2) * std::sqrt(1 + k * k);
    CHECK(sobolev_norm(f, 1, Region::full()) == doctest::Approx(exact).epsilon(0.02));
    CHECK(sobolev_norm(f, 0, Region::full()) == doctest::Approx(std::sqrt(vol / 2)).epsilon(0.02));
}

TEST_CASE("time derivatives enter the Sobolev norm") {
    auto g = SpacetimeGrid::make(2, 4, 65, 2, 0.5);
    Field a = fill(g, [](double, double x, double y) { return std::exp(-x * x - y * y); });
    Field b = fill(g, [](double t, double x, double y) { return std::exp(-x * x - y * y) * (1 + 3 * t); });
    CHECK(sobolev_norm(b, 1, Region::full()) > sobolev_norm(a, 1, Region::full()));
    CHECK(sobolev_norm(a, 2, Region::full()) >= sobolev_norm(a, 1, Region::full()));
}

TEST_CASE("restriction") {
    DomainSpec dom{4, 3, 2.5, 2, 0.5, 1};
    auto g = SpacetimeGrid::make(2, 8, 65, 4, 0.5);
    Field f = fill(g, [](double t, double x, double y) { return std::cos(x) * std::sin(y + t); });
    Field full = restrict_field(f, Region::full());
    CHECK(full.data() == f.data());
    Field z = restrict_field(Field(g), Region::cylinder(dom, 0));
    CHECK(z.max_abs() == 0.0);
    Field r = restrict_field(f, Region::cylinder(dom, 0));
    CHECK(sobolev_norm(r, 0, Region::cylinder(dom, 0)) == sobolev_norm(f, 0, Region::cylinder(dom, 0)));
    CHECK(r.at(0, 0, 0) == 0.0);
}

TEST_CASE("field arithmetic") {
    auto g = SpacetimeGrid::make(2, 2, 17, 1, 0.5);
    Field a = fill(g, [](double t, double x, double) { return t + x; });
    Field b = fill(g, [](double, double, double y) { return y; });
    Field c = add(a, b, 2.0, -1.0);
    CHECK(c.at(3, 4, 5) == doctest::Approx(2 * (g.t(3) + g.x(4)) - g.x(5)));
    axpy(c, 1.0, b);
    CHECK(c.at(3, 4, 5) == doctest::Approx(2 * (g.t(3) + g.x(4))));
    auto other = SpacetimeGrid::make(2, 2, 33, 1, 0.5);
    CHECK(code_of([&] { add(a, Field(other)); }) == "GridMismatch");
}

TEST_CASE("windowed fields read zero outside the window") {
    auto g = SpacetimeGrid::make(2, 4, 33, 2, 0.5);
    Window w = Window::ball(g, {0, 1, 1}, 1.0);
    CHECK(w.cnt[0] < 33);
    Field f(g, w, 2, 3);
    for (double& v : f.data()) v = 1.0;
    CHECK(f.at(2, w.lo[0], w.lo[1]) == 1.0);
    CHECK(f.at(1, w.lo[0], w.lo[1]) == 0.0);
    CHECK(f.at(2, 0, 0) == 0.0);
}

TEST_CASE("WVF round trip is bitwise") {
    auto g = SpacetimeGrid::make(2, 3, 21, 1.5, 0.5);
    Field f = fill(g, [](double t, double x, double y) { return std::sin(1.3 * x - y) * std::exp(-t) / 3.0; });
    auto path = (std::filesystem::temp_directory_path() / "waveinv_roundtrip.wvf").string();
    write_wvf(f, path);
    Field r = read_wvf(path);
    std::filesystem::remove(path);
    CHECK(r.grid() == g);
    CHECK(r.data() == f.data());
}

TEST_CASE("non-finite values are a hard error") {
    auto g = SpacetimeGrid::make(2, 3, 21, 1.5, 0.5);
    Field f(g);
    f.data()[7] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(f.check_finite("test"), Error);
}
