#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "waveinv/errors.hpp"
#include "waveinv/sources.hpp"

using namespace waveinv;

namespace {

const DomainSpec dom{40, 30, 28, 26, 2, 4};

SourceSpec spec(double t, double x, double lambda_sigma = 5.0) {
    SourceSpec s;
    s.center = {t, x, 0};
    s.direction.c = {1, -1, 0};
    s.sigma = 2;
    s.lambda = lambda_sigma / s.sigma;
    s.s = 2;
    return s;
}

SpacetimeGrid grid() { return SpacetimeGrid::make(2, 72, 289, 40, 0.5); }

std::string code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

// naive DFT along one axis of a dense 3-axis array (time, x1, x2)
void dft_axis(std::vector<std::complex<double>>& a, const std::array<int, 3>& n, int axis) {
    std::array<int, 3> stride{n[1] * n[2], n[2], 1};
    std::vector<std::complex<double>> line(n[axis]), out(n[axis]);
    std::array<int, 3> idx{};
    int o1 = (axis + 1) % 3, o2 = (axis + 2) % 3;
    for (idx[o1] = 0; idx[o1] < n[o1]; ++idx[o1])
        for (idx[o2] = 0; idx[o2] < n[o2]; ++idx[o2]) {
            auto at = [&](int m) { return idx[o1] * stride[o1] + idx[o2] * stride[o2] + m * stride[axis]; };
            for (int m = 0; m < n[axis]; ++m) line[m] = a[at(m)];
            for (int q = 0; q < n[axis]; ++q) {
                std::complex<double> s = 0;
                for (int m = 0; m < n[axis]; ++m) s += line[m] * std::polar(1.0, -2 * std::numbers::pi * q * m / n[axis]);
                out[q] = s;
            }
            for (int m = 0; m < n[axis]; ++m) a[at(m)] = out[m];
        }
}

}  // namespace

TEST_CASE("source validation") {
    CHECK_NOTHROW(validate_source(spec(20, 0), dom));
    CHECK(code_of([] { validate_source(spec(20, 25), dom); }) == "SourceOutsideOmega");
    CHECK(code_of([] { validate_source(spec(5, 0), dom); }) == "SourceOutsideOmega");
    CHECK(code_of([] { validate_source(spec(20, 0, 3.0), dom); }) == "InvalidSource");
}

TEST_CASE("realized packets have unit norm") {
    auto g = grid();
    Packet pk;
    Field f = realize_packet(spec(20, 0), g, dom, &pk);
    CHECK(std::abs(sobolev_norm(f, 2, Region::cylinder(dom, 0)) - 1.0) <= 1e-10);
    // the analytic packet reproduces the stored field
    int k = int(std::lround(20 / g.dt()));
    std::vector<double> buf(Window::full(g).size(), 0.0);
    pk.accumulate(g, k, Window::full(g), 1.0, buf.data());
    int c = (g.n_space - 1) / 2;
    CHECK(buf[std::size_t(c) * g.n_space + c] == doctest::Approx(f.at(k, c, c)).epsilon(1e-14));
}

TEST_CASE("packet spectrum concentrates around the direction") {
    auto g = grid();
    Field f = realize_packet(spec(20, 0), g, dom);
    const Window& w = f.window();
    std::array<int, 3> n{f.nt(), w.cnt[0], w.cnt[1]};
    std::vector<std::complex<double>> a(f.data().begin(), f.data().end());
    for (int ax = 0; ax < 3; ++ax) dft_axis(a, n, ax);
    std::array<double, 3> h{g.dt(), g.dx(), g.dx()};
    Point dir{1, -1, 0};
    double dn = std::sqrt(2.0), total = 0, inside = 0;
    for (int q0 = 0; q0 < n[0]; ++q0)
        for (int q1 = 0; q1 < n[1]; ++q1)
            for (int q2 = 0; q2 < n[2]; ++q2) {
                std::array<int, 3> q{q0, q1, q2};
                std::array<double, 3> k;
                for (int ax = 0; ax < 3; ++ax) {
                    int m = q[ax] <= n[ax] / 2 ? q[ax] : q[ax] - n[ax];
                    k[ax] = 2 * std::numbers::pi * m / (n[ax] * h[ax]);
                }
                double mass = std::norm(a[(std::size_t(q0) * n[1] + q1) * n[2] + q2]);
                total += mass;
                double kn = std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
                if (kn == 0) continue;
                double cosang = std::abs(k[0] * dir[0] + k[1] * dir[1] + k[2] * dir[2]) / (kn * dn);
                if (cosang >= std::cos(0.3)) inside += mass;
            }
    CHECK(inside / total >= 0.8);
}

TEST_CASE("translated specs give translated packets") {
    auto g = grid();
    double dt = g.dt(), dx = g.dx();
    Field a = realize_packet(spec(20, 0), g, dom);
    Field b = realize_packet(spec(20 + 8 * dt, 4 * dx), g, dom);
    double worst = 0;
    for (int q = 0; q < a.nt(); ++q) {
        int k = a.k0() + q;
        const Window& w = a.window();
        for (int i = w.lo[0]; i < w.lo[0] + w.cnt[0]; ++i)
            for (int j = w.lo[1]; j < w.lo[1] + w.cnt[1]; ++j)
                worst = std::max(worst, std::abs(a.at(k, i, j) - b.at(k + 8, i + 4, j)));
    }
    CHECK(worst <= 1e-12 * a.max_abs());
}

TEST_CASE("composition") {
    auto g = grid();
    std::array<SourceSpec, 3> specs{spec(12, -8), spec(14, 0), spec(12, 8)};
    for (int k = 0; k < 3; ++k) specs[k].k = k + 1;
    auto zero = make_source_set(specs, {0, 0, 0}, g, dom);
    CHECK(compose(zero).max_abs() == 0.0);
    auto one = make_source_set(specs, {1, 0, 0}, g, dom);
    Field c = compose(one);
    double worst = 0;
    const Field& f1 = one.fields[0];
    for (int q = 0; q < f1.nt(); ++q) {
        int k = f1.k0() + q;
        for (int i = 0; i < g.n_space; i += 4)
            for (int j = 0; j < g.n_space; j += 4) worst = std::max(worst, std::abs(c.at(k, i, j) - f1.at(k, i, j)));
    }
    CHECK(worst == 0.0);
    auto mix = make_source_set(specs, {0.2, 0.3, 0.5}, g, dom);
    CHECK(sobolev_norm(compose(mix), 2, Region::cylinder(dom, 0)) <= 1.0 + 1e-10);
}
